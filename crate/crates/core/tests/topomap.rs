use graspdec_core::csp::csp_from_covariances;
use graspdec_core::model::{standard_montage, Phase};
use graspdec_core::topomap::{
    export_csp_maps, grid_csv, interpolate_electrodes, interpolate_scalp, nearest_cell_value, scale_pattern,
    ElectrodeValue, MapKind, ScalpGrid, TopomapError, MAX_ABS,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn in_disc_values(grid: &ScalpGrid) -> impl Iterator<Item = f64> + '_ {
    grid.values.iter().flatten().flatten().copied()
}

fn dipole() -> Vec<f64> {
    let m = standard_montage();
    let mut v = vec![0.0; 8];
    v[m.index_of("C3").unwrap()] = 0.5;
    v[m.index_of("C4").unwrap()] = -0.5;
    v
}

#[test]
fn c3_c4_dipole_is_antisymmetric() {
    for n in [8, 9, 32, 33, 64] {
        let grid = interpolate_scalp(&dipole(), &standard_montage(), n).unwrap();
        for row in 0..n {
            for col in 0..n {
                match (grid.values[row][col], grid.values[row][n - 1 - col]) {
                    (Some(a), Some(b)) => assert!((a + b).abs() <= 1e-9, "n={n} ({row},{col}): {a} vs {b}"),
                    (None, None) => {}
                    other => panic!("disc mask not mirror symmetric at ({row},{col}): {other:?}"),
                }
            }
        }
    }
}

#[test]
fn electrode_cells_are_exact() {
    let montage = standard_montage();
    let values = [0.5, -0.31, 0.07, 0.22, -0.5, 0.41, -0.13, 0.0];
    for n in [8, 16, 31, 64] {
        let grid = interpolate_scalp(&values, &montage, n).unwrap();
        for (pos, v) in montage.positions().iter().zip(values) {
            let got = nearest_cell_value(&grid, *pos).unwrap();
            assert!((got - v).abs() <= 1e-9, "n={n}: {got} vs {v}");
        }
    }
}

#[test]
fn exported_maps_are_bounded_and_stable() {
    let n = 8;
    let c1 = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 / (1 + i + j) as f64 });
    let c2 = DMatrix::from_fn(n, n, |i, j| if i == j { 8.0 - i as f64 } else { 0.05 });
    let model = csp_from_covariances(&c1, &c2, None, Phase::Observation).unwrap();
    for kind in [MapKind::Pattern, MapKind::Filter] {
        let maps = export_csp_maps(&model, &standard_montage(), 32, kind).unwrap();
        assert_eq!(maps.len(), 8);
        let flagged: Vec<usize> = maps.iter().filter(|m| m.selected).map(|m| m.rank).collect();
        assert_eq!(flagged, vec![1, 2, 7, 8]);
        let numbers: Vec<usize> = maps.iter().filter_map(|m| m.csp_number).collect();
        assert_eq!(numbers, vec![1, 2, 3, 4]);
        for m in &maps {
            assert!(in_disc_values(&m.grid).all(|v| (-MAX_ABS..=MAX_ABS).contains(&v)));
            assert!(in_disc_values(&m.grid).any(|v| v.abs() == MAX_ABS));
        }
        let again = export_csp_maps(&model, &standard_montage(), 32, kind).unwrap();
        let text = |ms: &[graspdec_core::topomap::ComponentMap]| ms.iter().map(grid_csv).collect::<String>();
        assert_eq!(text(&maps), text(&again));
    }
}

#[test]
fn resolution_floor() {
    assert_eq!(interpolate_scalp(&dipole(), &standard_montage(), 7), Err(TopomapError::ResolutionTooLow(7)));
}

proptest! {
    #[test]
    fn range_holds_for_any_pattern(raw in prop::collection::vec(-100.0f64..100.0, 8), n in 8usize..40) {
        prop_assume!(raw.iter().any(|v| v.abs() > 1e-6));
        let scaled = scale_pattern(&raw).unwrap();
        let grid = interpolate_scalp(&scaled, &standard_montage(), n).unwrap();
        prop_assert!(in_disc_values(&grid).all(|v| (-MAX_ABS..=MAX_ABS).contains(&v)));
    }

    #[test]
    fn electrode_order_does_not_matter(values in prop::collection::vec(-0.5f64..0.5, 8), shift in 0usize..8) {
        let montage = standard_montage();
        let electrodes: Vec<ElectrodeValue> = montage
            .labels()
            .iter()
            .zip(montage.positions())
            .zip(&values)
            .map(|((l, p), v)| ElectrodeValue { label: l.clone(), position: *p, value: *v })
            .collect();
        let mut rotated = electrodes.clone();
        rotated.rotate_left(shift);
        rotated.swap(0, 7);
        let a = interpolate_electrodes(&electrodes, 24).unwrap();
        let b = interpolate_electrodes(&rotated, 24).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}
