//! Scalp maps of CSP patterns over the 8-electrode montage.
//!
//! Maps are N×N grids over the square enclosing the unit head disc; cells
//! whose centre lies outside the disc are absent. Values come from
//! inverse-distance weighting (power 2) of the electrode values. Every cell
//! nearest to an electrode carries that electrode's value exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::csp::CspModel;
use crate::model::{Montage, Position};

pub const MAX_ABS: f64 = 0.5;
pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopomapError {
    #[error("pattern is all zeros and cannot be scaled")]
    ZeroPattern,
    #[error("pattern contains non-finite values")]
    NonFinite,
    #[error("resolution {0} is below the minimum of {MIN_RESOLUTION}")]
    ResolutionTooLow(usize),
    #[error("{values} values for {electrodes} electrodes")]
    LengthMismatch { values: usize, electrodes: usize },
    #[error("model has {components} components but the montage has {electrodes} electrodes")]
    ModelMismatch { components: usize, electrodes: usize },
}

/// Rescales so that max |value| is exactly 0.5.
pub fn scale_pattern(pattern: &[f64]) -> Result<Vec<f64>, TopomapError> {
    if pattern.iter().any(|v| !v.is_finite()) {
        return Err(TopomapError::NonFinite);
    }
    let max = pattern.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Err(TopomapError::ZeroPattern);
    }
    let factor = MAX_ABS / max;
    Ok(pattern
        .iter()
        .map(|v| if v.abs() == max { MAX_ABS.copysign(*v) } else { v * factor })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeValue {
    pub label: String,
    pub position: Position,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalpGrid {
    pub resolution: usize,
    /// `values[row][col]`; row 0 is the frontmost (nose) row, col 0 the
    /// leftmost. `None` outside the head disc.
    pub values: Vec<Vec<Option<f64>>>,
    pub electrode_overlay: Vec<ElectrodeValue>,
}

impl ScalpGrid {
    pub fn cell_position(&self, row: usize, col: usize) -> Position {
        cell_position(row, col, self.resolution)
    }
}

/// Centre coordinate of cell `index` along one axis, exactly antisymmetric in
/// `index ↔ n − 1 − index`.
pub fn cell_center(index: usize, n: usize) -> f64 {
    (2.0 * index as f64 + 1.0 - n as f64) / n as f64
}

pub fn cell_position(row: usize, col: usize, n: usize) -> Position {
    Position::new(cell_center(col, n), -cell_center(row, n))
}

pub fn interpolate_scalp(scaled: &[f64], montage: &Montage, resolution: usize) -> Result<ScalpGrid, TopomapError> {
    if scaled.len() != montage.len() {
        return Err(TopomapError::LengthMismatch { values: scaled.len(), electrodes: montage.len() });
    }
    let electrodes: Vec<ElectrodeValue> = montage
        .labels()
        .iter()
        .zip(montage.positions())
        .zip(scaled)
        .map(|((label, &position), &value)| ElectrodeValue { label: label.clone(), position, value })
        .collect();
    interpolate_electrodes(&electrodes, resolution)
}

const COINCIDENT: f64 = 1e-12;

/// IDW interpolation of arbitrary electrodes. The result does not depend on
/// the order `electrodes` are given in.
pub fn interpolate_electrodes(electrodes: &[ElectrodeValue], resolution: usize) -> Result<ScalpGrid, TopomapError> {
    if resolution < MIN_RESOLUTION {
        return Err(TopomapError::ResolutionTooLow(resolution));
    }
    if electrodes.iter().any(|e| !e.value.is_finite()) {
        return Err(TopomapError::NonFinite);
    }
    let mut nodes: Vec<&ElectrodeValue> = electrodes.iter().collect();
    nodes.sort_by(|a, b| a.label.cmp(&b.label));

    let idw = |p: Position| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for e in &nodes {
            let d = p.distance(&e.position);
            if d < COINCIDENT {
                return e.value;
            }
            let w = 1.0 / (d * d);
            num += w * e.value;
            den += w;
        }
        num / den
    };

    let mut values: Vec<Vec<Option<f64>>> = (0..resolution)
        .map(|row| {
            (0..resolution)
                .map(|col| {
                    let p = cell_position(row, col, resolution);
                    (p.radius() <= 1.0).then(|| idw(p).clamp(-MAX_ABS, MAX_ABS))
                })
                .collect()
        })
        .collect();

    // pin the nearest cell(s) of each electrode; ties are all pinned so the
    // grid keeps the montage's mirror symmetry
    for e in &nodes {
        let mut nearest = f64::INFINITY;
        let mut cells = Vec::new();
        for (row, line) in values.iter().enumerate() {
            for (col, v) in line.iter().enumerate() {
                if v.is_none() {
                    continue;
                }
                let d = cell_position(row, col, resolution).distance(&e.position);
                if d < nearest - COINCIDENT {
                    nearest = d;
                    cells.clear();
                }
                if d <= nearest + COINCIDENT {
                    cells.push((row, col));
                }
            }
        }
        for (row, col) in cells {
            values[row][col] = Some(e.value.clamp(-MAX_ABS, MAX_ABS));
        }
    }

    Ok(ScalpGrid { resolution, values, electrode_overlay: electrodes.to_vec() })
}

/// Value of the grid cell(s) nearest to `position` (first in row-major order
/// on ties).
pub fn nearest_cell_value(grid: &ScalpGrid, position: Position) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (row, line) in grid.values.iter().enumerate() {
        for (col, v) in line.iter().enumerate() {
            if let Some(v) = v {
                let d = grid.cell_position(row, col).distance(&position);
                if best.is_none_or(|(bd, _)| d < bd - COINCIDENT) {
                    best = Some((d, *v));
                }
            }
        }
    }
    best.map(|(_, v)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// Column of W⁻¹.
    Pattern,
    /// Row of W.
    Filter,
}

impl MapKind {
    pub fn name(&self) -> &'static str {
        match self {
            MapKind::Pattern => "pattern",
            MapKind::Filter => "filter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMap {
    pub component: usize,
    /// 1-based eigenvalue rank (1 = largest).
    pub rank: usize,
    pub eigenvalue: f64,
    pub selected: bool,
    /// CSP #1..#4 for the selected components, in eigenvalue-rank order.
    pub csp_number: Option<usize>,
    pub kind: MapKind,
    pub grid: ScalpGrid,
}

/// One map per component, ordered by eigenvalue rank.
pub fn export_csp_maps(
    model: &CspModel,
    montage: &Montage,
    resolution: usize,
    kind: MapKind,
) -> Result<Vec<ComponentMap>, TopomapError> {
    if model.n_components() != montage.len() || model.n_channels() != montage.len() {
        return Err(TopomapError::ModelMismatch { components: model.n_components(), electrodes: montage.len() });
    }
    let inverse;
    let source = match kind {
        MapKind::Pattern => {
            inverse = model.projection.clone().try_inverse().ok_or(TopomapError::NonFinite)?;
            &inverse
        }
        MapKind::Filter => &model.projection,
    };
    (0..model.n_components())
        .map(|component| {
            let raw: Vec<f64> = match kind {
                MapKind::Pattern => source.column(component).iter().copied().collect(),
                MapKind::Filter => source.row(component).iter().copied().collect(),
            };
            let grid = interpolate_scalp(&scale_pattern(&raw)?, montage, resolution)?;
            let csp_number = model.selected_indices.iter().position(|&s| s == component).map(|p| p + 1);
            Ok(ComponentMap {
                component,
                rank: component + 1,
                eigenvalue: model.eigenvalues[component],
                selected: csp_number.is_some(),
                csp_number,
                kind,
                grid,
            })
        })
        .collect()
}

/// CSV form: one metadata line, then `resolution` rows of values with empty
/// fields outside the head.
pub fn grid_csv(map: &ComponentMap) -> String {
    let mut out = String::new();
    let csp = map.csp_number.map(|n| n.to_string()).unwrap_or_default();
    writeln!(
        out,
        "resolution={},component={},rank={},eigenvalue={},selected={},csp={},kind={}",
        map.grid.resolution,
        map.component,
        map.rank,
        map.eigenvalue,
        map.selected,
        csp,
        map.kind.name()
    )
    .unwrap();
    for line in &map.grid.values {
        let cells: Vec<String> = line.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()).collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::standard_montage;

    #[test]
    fn scaling_examples() {
        let mut p = vec![0.0; 8];
        p[0] = 1.0;
        p[1] = -2.0;
        let s = scale_pattern(&p).unwrap();
        assert_eq!(&s[..3], &[0.25, -0.5, 0.0]);

        let again = scale_pattern(&s).unwrap();
        assert!(s.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-12));

        let mut q = vec![0.0; 8];
        q[0] = -3.0;
        assert_eq!(scale_pattern(&q).unwrap()[0], -0.5);
        assert_eq!(scale_pattern(&[0.0; 8]), Err(TopomapError::ZeroPattern));
    }

    #[test]
    fn constant_field() {
        let g = interpolate_scalp(&[0.3; 8], &standard_montage(), 32).unwrap();
        for v in g.values.iter().flatten().flatten() {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn low_resolution_rejected() {
        assert_eq!(
            interpolate_scalp(&[0.1; 8], &standard_montage(), 4),
            Err(TopomapError::ResolutionTooLow(4))
        );
    }

    #[test]
    fn exact_at_coincident_cell() {
        // odd resolution puts a cell centre on Cz
        let mut v = vec![0.0; 8];
        v[2] = 0.42;
        let g = interpolate_scalp(&v, &standard_montage(), 9).unwrap();
        assert_eq!(g.cell_position(4, 4), Position::new(0.0, 0.0));
        assert_eq!(g.values[4][4], Some(0.42));
    }

    #[test]
    fn outside_disc_is_absent() {
        let g = interpolate_scalp(&[0.1; 8], &standard_montage(), 16).unwrap();
        assert_eq!(g.values[0][0], None);
        assert!(g.values[8][8].is_some());
    }

    #[test]
    fn csv_marks_absent_cells_empty() {
        let g = interpolate_scalp(&[0.1; 8], &standard_montage(), 8).unwrap();
        let map = ComponentMap {
            component: 0,
            rank: 1,
            eigenvalue: 0.9,
            selected: true,
            csp_number: Some(1),
            kind: MapKind::Pattern,
            grid: g,
        };
        let csv = grid_csv(&map);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "resolution=8,component=0,rank=1,eigenvalue=0.9,selected=true,csp=1,kind=pattern");
        let first = lines.next().unwrap();
        assert!(first.starts_with(",,"));
        assert_eq!(first.split(',').count(), 8);
    }
}
