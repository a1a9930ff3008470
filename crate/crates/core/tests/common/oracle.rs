//! Reference numerics written from scratch on `Vec<Vec<f64>>`, sharing no
//! code with the library's linear algebra.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use rand_distr::StandardNormal;

pub type Mat = Vec<Vec<f64>>;

pub fn random_spd<R: Rng>(n: usize, rng: &mut R) -> Mat {
    let b: Mat = (0..n).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() / n as f64;
        }
        m[i][i] += 0.1;
    }
    m
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

/// Lower-triangular L with L·Lᵀ = a.
pub fn cholesky(a: &Mat) -> Mat {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                assert!(d > 0.0, "matrix is not positive definite");
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Solves L·x = b for lower-triangular L.
fn forward(l: &Mat, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// λ solving c1·v = λ·(c1 + c2)·v, descending, via L⁻¹·c1·L⁻ᵀ with
/// L = chol(c1 + c2).
pub fn generalized_eigenvalues(c1: &Mat, c2: &Mat) -> Vec<f64> {
    let n = c1.len();
    let l = cholesky(&add(c1, c2));
    // Y = L⁻¹·c1, column by column
    let mut y = vec![vec![0.0; n]; n];
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| c1[i][j]).collect();
        for (i, v) in forward(&l, &col).into_iter().enumerate() {
            y[i][j] = v;
        }
    }
    // M = L⁻¹·Yᵀ = L⁻¹·c1·L⁻ᵀ (c1 symmetric)
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..n {
        let row: Vec<f64> = y[j].clone();
        for (i, v) in forward(&l, &row).into_iter().enumerate() {
            m[i][j] = v;
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = avg;
            m[j][i] = avg;
        }
    }
    jacobi_eigenvalues(&m)
}

/// Best training accuracy of any line `w·x + b` on 2-D points, by sweeping
/// orientations and every threshold between projected points.
pub fn brute_force_linear_accuracy(points: &[[f64; 2]], labels: &[f64]) -> f64 {
    let n = points.len();
    let mut best = 0usize;
    for step in 0..3600 {
        let angle = step as f64 * std::f64::consts::PI / 1800.0;
        let w = [angle.cos(), angle.sin()];
        let mut proj: Vec<f64> = points.iter().map(|p| w[0] * p[0] + w[1] * p[1]).collect();
        proj.sort_by(f64::total_cmp);
        let mut cuts = vec![proj[0] - 1.0, proj[n - 1] + 1.0];
        cuts.extend(proj.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        for c in cuts {
            let correct = points
                .iter()
                .zip(labels)
                .filter(|(p, &y)| (w[0] * p[0] + w[1] * p[1] - c >= 0.0) == (y > 0.0))
                .count();
            best = best.max(correct);
        }
    }
    best as f64 / n as f64
}
