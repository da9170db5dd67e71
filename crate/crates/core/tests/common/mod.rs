//! Helpers shared by the integration tests: independent oracles and the
//! standard scenes.
#![allow(dead_code)]

use std::f64::consts::PI;

use sha2::{Digest, Sha256};
use shgcint_core::acquisition::{AcquisitionGeometry, SolverConfig};
use shgcint_core::gomodel::GoOptions;
use shgcint_core::medium::{MediumParams, Scatterer, ScattererSet, DEFAULT_MODE_COUNT};
use shgcint_core::solver::CsrMatrix;
use shgcint_core::stats::{Domain, Scene};
use shgcint_core::{Point2, C64};

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].norm().total_cmp(&a[j][c].norm())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        let piv = a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / piv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for k in c..n {
                let v = a[c][k];
                a[r][k] -= f * v;
            }
            let v = b[c];
            b[r] -= f * v;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    x
}

pub fn to_dense(m: &CsrMatrix) -> Vec<Vec<C64>> {
    let mut a = vec![vec![C64::new(0.0, 0.0); m.n]; m.n];
    for r in 0..m.n {
        for (c, v) in m.row(r) {
            a[r][c] = v;
        }
    }
    a
}

pub fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn f64_bytes<'a>(v: impl IntoIterator<Item = &'a f64>) -> Vec<u8> {
    v.into_iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn c64_bytes<'a>(v: impl IntoIterator<Item = &'a C64>) -> Vec<u8> {
    v.into_iter().flat_map(|z| [z.re.to_le_bytes(), z.im.to_le_bytes()]).flatten().collect()
}

/// Disk of radius `λ/10` with `η₁ = 1`, `η₂ = 0.01`.
pub fn disk(x: f64, y: f64) -> Scatterer {
    Scatterer { position: Point2::new(x, y), radius: 0.1, eta1: 1.0, eta2: 0.01 }
}

/// Correlation length and amplitude of the numerical random medium.
pub fn numerical_medium() -> MediumParams {
    MediumParams { correlation_length: 0.3, amplitude: 0.01 * 4.0 * PI, mode_count: DEFAULT_MODE_COUNT, seed: 0 }
}

/// Square `[−side/2, side/2] × [0, side]` at `h = λ/20`, array on the whole
/// bottom side with sensors `λ/4` apart.
pub fn square_scene(side: f64, scatterers: Vec<Scatterer>, n_angles: usize) -> Scene {
    let n_sensors = (side / 0.25).round() as usize + 1;
    Scene {
        medium: numerical_medium(),
        domain: Domain { lo: Point2::new(-side / 2.0, 0.0), hi: Point2::new(side / 2.0, side), spacing: 0.05 },
        scatterers: ScattererSet::new(scatterers).unwrap(),
        geometry: AcquisitionGeometry::bottom_array(side, n_sensors, n_angles).unwrap(),
        solver: SolverConfig::default(),
        go: GoOptions::default(),
    }
}
