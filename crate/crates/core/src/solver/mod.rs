//! Frequency-domain solver for the coupled fundamental / second-harmonic
//! Helmholtz system.
//!
//! With `u₁ = u_i + u` (incident plus scattered) and `u₂ = v`, the system
//!
//! ```text
//! Δu₁ + k²(1 + 4πη + 4πη₁)u₁   = −8πk²·η₂·u₂·u₁*
//! Δu₂ + 4k²(1 + 4πη + 4πη₁)u₂  = −16πk²·η₂·u₁²
//! ```
//!
//! is solved by the fixed-point iteration
//!
//! ```text
//! u ← −4πk²·H_k⁻¹[2η₂·v·(u + u_i)* + (η + η₁)·u_i]
//! v ← −16πk²·H_{2k}⁻¹[η₂·(u + u_i)²]
//! ```
//!
//! starting from `u = v = 0`. Both operators are factorized once and reused
//! for every iteration and every incident wave.

mod factor;
mod operator;

use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

pub use factor::{factorize, LinearSolveHandle, SOLVE_TOLERANCE};
pub use operator::{assemble, CsrMatrix, DiscreteOperator, PaddedGrid, PmlParams};

use crate::error::{Error, Result};
use crate::medium::MediumRealization;
use crate::waves::{g0_2d_radial, Harmonic};
use crate::C64;

/// Stopping rule of the fixed-point iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointParams {
    /// Relative sup-norm change of both fields below which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointParams {
    fn default() -> Self {
        FixedPointParams { tol: 1e-8, max_iter: 50 }
    }
}

/// Converged scattered fundamental `u` and total second harmonic `v` on the
/// interior grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSolution {
    pub u: Array2<C64>,
    pub v: Array2<C64>,
    pub iterations: usize,
    /// Largest relative residual of the two coupled equations.
    pub final_residual: f64,
    /// Relative change recorded at each iteration.
    pub changes: Vec<f64>,
}

/// Susceptibility fields entering the sources, all on the interior grid.
#[derive(Clone, Copy, Debug)]
pub struct ShgCoefficients<'a> {
    pub medium: &'a MediumRealization,
    pub eta1: &'a Array2<f64>,
    pub eta2: &'a Array2<f64>,
}

fn sup(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn relative_change(new: &Array2<C64>, old: &Array2<C64>) -> f64 {
    let mut diff = 0.0f64;
    Zip::from(new).and(old).for_each(|a, b| diff = diff.max((a - b).norm()));
    if diff == 0.0 {
        return 0.0;
    }
    diff / sup(new).max(sup(old))
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Sources of the two equations for given iterates.
struct Sources<'a> {
    k: f64,
    eta_sum: Array2<f64>,
    eta2: &'a Array2<f64>,
    incident: &'a Array2<C64>,
}

impl Sources<'_> {
    fn fundamental(&self, u: &Array2<C64>, v: &Array2<C64>) -> Array2<C64> {
        let c = -4.0 * PI * self.k * self.k;
        let mut out = Array2::zeros(u.dim());
        Zip::from(&mut out)
            .and(u)
            .and(v)
            .and(self.incident)
            .and(&self.eta_sum)
            .and(self.eta2)
            .for_each(|o, &u, &v, &ui, &es, &e2| {
                *o = c * (2.0 * e2 * v * (u + ui).conj() + es * ui);
            });
        out
    }

    fn harmonic(&self, u: &Array2<C64>) -> Array2<C64> {
        let c = -16.0 * PI * self.k * self.k;
        let mut out = Array2::zeros(u.dim());
        Zip::from(&mut out).and(u).and(self.incident).and(self.eta2).for_each(|o, &u, &ui, &e2| {
            let t = u + ui;
            *o = c * e2 * t * t;
        });
        out
    }
}

/// Relative residual `‖H x − f‖/‖f‖` over the interior rows.
fn interior_residual(h: &LinearSolveHandle, x: &[C64], f: &Array2<C64>) -> f64 {
    let grid = h.operator().grid;
    let hx = grid.extract(&h.operator().apply(x));
    let r: Vec<C64> = hx.iter().zip(f.iter()).map(|(a, b)| a - b).collect();
    let rn = l2(&r);
    if rn == 0.0 {
        return 0.0;
    }
    let fv: Vec<C64> = f.iter().copied().collect();
    rn / l2(&fv).max(f64::MIN_POSITIVE)
}

/// Solve the coupled system for one incident field `u_i` (given on the
/// interior grid).
pub fn fixed_point_shg(
    op_k: &LinearSolveHandle,
    op_2k: &LinearSolveHandle,
    coeffs: ShgCoefficients<'_>,
    incident: &Array2<C64>,
    params: &FixedPointParams,
) -> Result<FieldSolution> {
    let (ok, o2) = (op_k.operator(), op_2k.operator());
    if ok.grid != o2.grid {
        return Err(Error::Shape("the two operators live on different grids".into()));
    }
    if ok.wavenumber.harmonic != Harmonic::Fundamental
        || o2.wavenumber.harmonic != Harmonic::Second
        || ok.wavenumber.k != o2.wavenumber.k
    {
        return Err(Error::invalid("operators must be H_k and H_2k for the same k"));
    }
    if !(params.tol > 0.0) || params.max_iter == 0 {
        return Err(Error::invalid("fixed-point tolerance and iteration cap must be positive"));
    }
    let shape = ok.grid.interior.shape();
    for (name, dim) in [
        ("medium", coeffs.medium.eta.dim()),
        ("η₁", coeffs.eta1.dim()),
        ("η₂", coeffs.eta2.dim()),
        ("incident field", incident.dim()),
    ] {
        if dim != shape {
            return Err(Error::Shape(format!("{name} has shape {dim:?}, grid is {shape:?}")));
        }
    }

    let sources = Sources {
        k: ok.wavenumber.k,
        eta_sum: &coeffs.medium.eta + coeffs.eta1,
        eta2: coeffs.eta2,
        incident,
    };
    let grid = ok.grid;

    let mut u = Array2::<C64>::zeros(shape);
    let mut v = Array2::<C64>::zeros(shape);
    let mut changes = Vec::new();
    for it in 1..=params.max_iter {
        let u_next = op_k.solve(&grid.embed(&sources.fundamental(&u, &v)))?;
        let u_new = grid.extract(&u_next);
        let v_next = op_2k.solve(&grid.embed(&sources.harmonic(&u_new)))?;
        let v_new = grid.extract(&v_next);
        if !(u_next.iter().chain(v_next.iter()).all(|z| z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonConvergence {
                iterations: it,
                last_change: f64::INFINITY,
                diverging: true,
            });
        }
        let change = relative_change(&u_new, &u).max(relative_change(&v_new, &v));
        changes.push(change);
        (u, v) = (u_new, v_new);
        if change < params.tol {
            // Residuals use the padded iterates so nodes next to the layer
            // see their true neighbours.
            let ru = interior_residual(op_k, &u_next, &sources.fundamental(&u, &v));
            let rv = interior_residual(op_2k, &v_next, &sources.harmonic(&u));
            return Ok(FieldSolution {
                u,
                v,
                iterations: it,
                final_residual: ru.max(rv),
                changes,
            });
        }
    }
    let n = changes.len();
    let diverging = n >= 4 && (n - 3..n).all(|i| changes[i] > changes[i - 1]);
    Err(Error::NonConvergence {
        iterations: params.max_iter,
        last_change: *changes.last().unwrap_or(&f64::NAN),
        diverging,
    })
}

/// Quality of the absorbing layer of `op`.
///
/// Solves the homogeneous problem on the same grid, layer and wavenumber with
/// a point source `−4πδ` at the interior node nearest the centre, fits one
/// complex factor `c` against the exact Green's function `g` on the annulus
/// `2λ ≤ r ≤ 5λ` (base wavelength), and returns `sup|u − c·g| / sup|c·g|`.
pub fn pml_quality(op: &DiscreteOperator) -> Result<f64> {
    let interior = op.grid.interior;
    let homogeneous = assemble(
        &MediumRealization::homogeneous(interior),
        &Array2::zeros(interior.shape()),
        op.wavenumber,
        &op.pml,
    )?;
    let lambda = 2.0 * PI / op.wavenumber.k;
    let (cx, cy) = ((interior.nx - 1) / 2, (interior.ny - 1) / 2);
    let centre = interior.node(cx, cy);
    let lo = interior.origin;
    let hi = interior.max_corner();
    let reach = (centre.x - lo.x).min(hi.x - centre.x).min(centre.y - lo.y).min(hi.y - centre.y);
    if reach < 5.0 * lambda - 1e-9 * interior.spacing {
        return Err(Error::invalid(format!(
            "interior must extend 5 wavelengths from its centre, reach is {reach}"
        )));
    }
    let grid = homogeneous.grid;
    let h = interior.spacing;
    let mut b = vec![C64::new(0.0, 0.0); grid.len()];
    b[grid.index_of_interior(cx, cy)] = C64::new(-4.0 * PI / (h * h), 0.0);
    let handle = factorize(homogeneous)?;
    let x = handle.solve(&b)?;
    let u = grid.extract(&x);

    let jk = op.wavenumber.effective();
    let mut samples = Vec::new();
    for (ix, iy, p) in interior.nodes() {
        let r = p.distance(centre);
        if r >= 2.0 * lambda - 1e-12 && r <= 5.0 * lambda + 1e-12 {
            samples.push((u[[iy, ix]], g0_2d_radial(r, jk)));
        }
    }
    let num: C64 = samples.iter().map(|(u, g)| g.conj() * u).sum();
    let den: f64 = samples.iter().map(|(_, g)| g.norm_sqr()).sum();
    let c = num / den;
    let err = samples.iter().map(|(u, g)| (u - c * g).norm()).fold(0.0, f64::max);
    let scale = samples.iter().map(|(_, g)| (c * g).norm()).fold(0.0, f64::max);
    Ok(err / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid2, Point2};
    use crate::waves::{incident_plane_wave, Wavenumber};

    struct Setup {
        hk: LinearSolveHandle,
        h2k: LinearSolveHandle,
        medium: MediumRealization,
        eta1: Array2<f64>,
        eta2: Array2<f64>,
        incident: Array2<C64>,
    }

    fn setup(eta1_value: f64, eta2_value: f64) -> Setup {
        let g = Grid2::covering(Point2::new(-1.5, 0.0), 3.0, 3.0, 0.05).unwrap();
        let medium = MediumRealization::homogeneous(g);
        let mut eta1 = Array2::zeros(g.shape());
        let mut eta2 = Array2::zeros(g.shape());
        for (ix, iy, p) in g.nodes() {
            if p.distance(Point2::new(0.0, 1.5)) <= 0.1 {
                eta1[[iy, ix]] = eta1_value;
                eta2[[iy, ix]] = eta2_value;
            }
        }
        let pml = PmlParams { width: 1.0, strength: 1.79 };
        let k = 2.0 * PI;
        let wk = Wavenumber::new(k, Harmonic::Fundamental).unwrap();
        let w2 = Wavenumber::new(k, Harmonic::Second).unwrap();
        let hk = factorize(assemble(&medium, &eta1, wk, &pml).unwrap()).unwrap();
        let h2k = factorize(assemble(&medium, &eta1, w2, &pml).unwrap()).unwrap();
        let incident = incident_plane_wave(&g, Point2::new(0.0, 1.0), k);
        Setup { hk, h2k, medium, eta1, eta2, incident }
    }

    fn run(s: &Setup, incident: &Array2<C64>) -> Result<FieldSolution> {
        fixed_point_shg(
            &s.hk,
            &s.h2k,
            ShgCoefficients { medium: &s.medium, eta1: &s.eta1, eta2: &s.eta2 },
            incident,
            &FixedPointParams::default(),
        )
    }

    #[test]
    fn without_nonlinearity_second_harmonic_vanishes() {
        let s = setup(1.0, 0.0);
        let sol = run(&s, &s.incident).unwrap();
        assert!(sol.iterations <= 2);
        assert!(sol.v.iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert!(sup(&sol.u) > 0.0);
    }

    #[test]
    fn converges_with_small_residual() {
        let s = setup(1.0, 0.01);
        let sol = run(&s, &s.incident).unwrap();
        assert!(sol.iterations <= 50);
        assert!(sol.final_residual <= 10.0 * 1e-8, "residual {}", sol.final_residual);
        assert!(sup(&sol.v) > 0.0);
    }

    #[test]
    fn second_harmonic_is_quadratic_in_amplitude() {
        // The back-coupling of v into u₁ adds a cubic term whose relative
        // size grows like the squared amplitude; at amplitude 1/4 it is
        // far below the tolerance.
        let s = setup(1.0, 0.01);
        let a = run(&s, &s.incident.mapv(|z| 0.25 * z)).unwrap();
        let doubled = s.incident.mapv(|z| 0.5 * z);
        let b = run(&s, &doubled).unwrap();
        let ratio = sup(&b.v) / sup(&a.v);
        assert!((ratio - 4.0).abs() < 0.08, "ratio {ratio}");
    }

    #[test]
    fn homogeneous_medium_scatters_nothing() {
        let mut s = setup(1.0, 0.0);
        s.eta1.fill(0.0);
        let pml = PmlParams { width: 1.0, strength: 1.79 };
        let wk = Wavenumber::new(2.0 * PI, Harmonic::Fundamental).unwrap();
        s.hk = factorize(assemble(&s.medium, &s.eta1, wk, &pml).unwrap()).unwrap();
        let sol = run(&s, &s.incident).unwrap();
        assert_eq!(sup(&sol.u), 0.0);
    }

    #[test]
    fn mismatched_operators_are_rejected() {
        let s = setup(1.0, 0.01);
        let r = fixed_point_shg(
            &s.hk,
            &s.hk,
            ShgCoefficients { medium: &s.medium, eta1: &s.eta1, eta2: &s.eta2 },
            &s.incident,
            &FixedPointParams::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let s = setup(1.0, 0.01);
        let r = fixed_point_shg(
            &s.hk,
            &s.h2k,
            ShgCoefficients { medium: &s.medium, eta1: &s.eta1, eta2: &s.eta2 },
            &s.incident,
            &FixedPointParams { tol: 1e-30, max_iter: 3 },
        );
        match r {
            Err(e @ Error::NonConvergence { iterations: 3, .. }) => assert!(e.is_non_convergence()),
            other => panic!("unexpected {other:?}"),
        }
    }
}
