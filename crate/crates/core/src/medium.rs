//! Random susceptibility fields and small embedded scatterers.
//!
//! The fluctuation `η` enters the wave speed through `c = c₀/√(1 + 4πη)`, and
//! the potential `4πη = σ·μ(x/ℓ)` is built from a unit-variance, mean-zero
//! process `μ` with Gaussian autocorrelation `E[μ(x)μ(x')] = exp(−|x−x'|²/2)`.
//! `μ` is synthesized as a sum of `M` random Fourier modes whose wavevectors
//! are drawn from the standard 2D normal law (the spectral measure of that
//! autocorrelation), so the target covariance is exact in expectation.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid2, Point2};

pub const DEFAULT_MODE_COUNT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumParams {
    /// Correlation length `ℓ`.
    pub correlation_length: f64,
    /// Standard deviation `σ` of the potential `4πη`.
    pub amplitude: f64,
    /// Number of Fourier modes `M`.
    pub mode_count: usize,
    pub seed: u64,
}

impl MediumParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.correlation_length > 0.0 && self.correlation_length.is_finite()) {
            return Err(Error::invalid(format!(
                "correlation length must be positive, got {}",
                self.correlation_length
            )));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid(format!(
                "amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if self.mode_count == 0 {
            return Err(Error::invalid("mode count must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        MediumParams { seed, ..self }
    }
}

/// Anything that can report the potential `4πη` at a point and average it
/// along a straight segment.
pub trait PotentialField: Sync {
    /// `4πη(p)`, or `None` outside the region where the field is defined.
    fn potential(&self, p: Point2) -> Option<f64>;

    /// Closed rectangle `(lo, hi)` on which the field is defined, if bounded.
    fn support(&self) -> Option<(Point2, Point2)>;

    /// Correlation length, which sets the default quadrature step.
    fn correlation_length(&self) -> f64;

    /// Mean of `4πη` along the segment `a → b` by the composite midpoint
    /// rule with `n = ⌈|b−a|/step⌉` cells.
    fn segment_mean(&self, a: Point2, b: Point2, step: f64) -> Result<f64> {
        check_segment(self.support(), a, b)?;
        let n = cells(a.distance(b), step);
        let d = b - a;
        let mut sum = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            sum += self
                .potential(a + d * t)
                .ok_or_else(|| Error::OutsideSupport(format!("{}", a + d * t)))?;
        }
        Ok(sum / n as f64)
    }
}

fn cells(len: f64, step: f64) -> usize {
    ((len / step).ceil() as usize).max(1)
}

fn check_segment(support: Option<(Point2, Point2)>, a: Point2, b: Point2) -> Result<()> {
    if let Some((lo, hi)) = support {
        // The box is convex, so checking the endpoints suffices.
        let tol = 1e-9 * (hi - lo).norm().max(1.0);
        for p in [a, b] {
            if p.x < lo.x - tol || p.x > hi.x + tol || p.y < lo.y - tol || p.y > hi.y + tol {
                return Err(Error::OutsideSupport(format!("{p}")));
            }
        }
    }
    Ok(())
}

/// Continuous random Fourier series for `4πη`; cheap to evaluate anywhere.
#[derive(Clone, Debug)]
pub struct RandomFourierField {
    params: MediumParams,
    /// Wavevectors already divided by `ℓ`.
    kx: Vec<f64>,
    ky: Vec<f64>,
    phase: Vec<f64>,
    /// `σ·√(2/M)`.
    scale: f64,
    support: Option<(Point2, Point2)>,
}

impl RandomFourierField {
    pub fn new(params: MediumParams) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
        let m = params.mode_count;
        let inv_l = 1.0 / params.correlation_length;
        let mut kx = Vec::with_capacity(m);
        let mut ky = Vec::with_capacity(m);
        let mut phase = Vec::with_capacity(m);
        for _ in 0..m {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            kx.push(a * inv_l);
            ky.push(b * inv_l);
            phase.push(rng.random_range(0.0..2.0 * PI));
        }
        let scale = params.amplitude * (2.0 / m as f64).sqrt();
        Ok(RandomFourierField { params, kx, ky, phase, scale, support: None })
    }

    /// Restrict the field to the rectangle `[lo, hi]`; evaluations and
    /// segment averages outside it become errors.
    pub fn with_support(mut self, lo: Point2, hi: Point2) -> Self {
        self.support = Some((lo, hi));
        self
    }

    pub fn params(&self) -> &MediumParams {
        &self.params
    }

    fn eval(&self, p: Point2) -> f64 {
        let mut s = 0.0;
        for m in 0..self.kx.len() {
            s += (self.kx[m] * p.x + self.ky[m] * p.y + self.phase[m]).cos();
        }
        self.scale * s
    }

    /// Sample `4πη` at every node of `grid`, shape `(ny, nx)`.
    pub fn sample(&self, grid: &Grid2) -> Array2<f64> {
        let nx = grid.nx;
        let m = self.kx.len();
        // cos(kx·x + ky·y + φ) = Re[e^{i kx·x}·e^{i(ky·y + φ)}]; tabulate the
        // x factor once per mode and sweep rows in parallel.
        let mut xr = vec![0.0; m * nx];
        let mut xi = vec![0.0; m * nx];
        for mm in 0..m {
            for ix in 0..nx {
                let (s, c) = (self.kx[mm] * grid.node(ix, 0).x).sin_cos();
                xr[mm * nx + ix] = c;
                xi[mm * nx + ix] = s;
            }
        }
        let rows: Vec<Vec<f64>> = (0..grid.ny)
            .into_par_iter()
            .map(|iy| {
                let y = grid.node(0, iy).y;
                let mut row = vec![0.0; nx];
                for mm in 0..m {
                    let (s, c) = (self.ky[mm] * y + self.phase[mm]).sin_cos();
                    let cr = &xr[mm * nx..(mm + 1) * nx];
                    let ci = &xi[mm * nx..(mm + 1) * nx];
                    for ix in 0..nx {
                        row[ix] += cr[ix] * c - ci[ix] * s;
                    }
                }
                row.iter_mut().for_each(|v| *v *= self.scale);
                row
            })
            .collect();
        Array2::from_shape_fn(grid.shape(), |(iy, ix)| rows[iy][ix])
    }
}

impl PotentialField for RandomFourierField {
    fn potential(&self, p: Point2) -> Option<f64> {
        if let Some((lo, hi)) = self.support {
            if p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y {
                return None;
            }
        }
        Some(self.eval(p))
    }

    fn support(&self) -> Option<(Point2, Point2)> {
        self.support
    }

    fn correlation_length(&self) -> f64 {
        self.params.correlation_length
    }

    /// Same midpoint rule as the default, summed in closed form per mode:
    /// the nodes are equispaced so each mode contributes a geometric series
    /// of phases, `Σ_{i<n} cos(α + iβ) = sin(nβ/2)/sin(β/2)·cos(α + (n−1)β/2)`.
    fn segment_mean(&self, a: Point2, b: Point2, step: f64) -> Result<f64> {
        check_segment(self.support, a, b)?;
        let n = cells(a.distance(b), step);
        let nf = n as f64;
        let d = b - a;
        let mut sum = 0.0;
        for m in 0..self.kx.len() {
            let beta = (self.kx[m] * d.x + self.ky[m] * d.y) / nf;
            let alpha = self.kx[m] * a.x + self.ky[m] * a.y + self.phase[m] + 0.5 * beta;
            let half = 0.5 * beta;
            let sh = half.sin();
            if sh.abs() > 1e-6 {
                sum += (nf * half).sin() / sh * (alpha + (nf - 1.0) * half).cos();
            } else {
                for i in 0..n {
                    sum += (alpha + i as f64 * beta).cos();
                }
            }
        }
        Ok(self.scale * sum / nf)
    }
}

/// Sampled fluctuation field `η` on a grid together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MediumRealization {
    pub grid: Grid2,
    /// `η` at each node, shape `(ny, nx)`.
    pub eta: Array2<f64>,
    pub params: MediumParams,
}

impl MediumRealization {
    /// Homogeneous reference medium, `η ≡ 0`.
    pub fn homogeneous(grid: Grid2) -> Self {
        MediumRealization {
            grid,
            eta: Array2::zeros(grid.shape()),
            params: MediumParams {
                correlation_length: 1.0,
                amplitude: 0.0,
                mode_count: 1,
                seed: 0,
            },
        }
    }

    /// The potential `4πη` at each node.
    pub fn potential_field(&self) -> Array2<f64> {
        self.eta.mapv(|e| 4.0 * PI * e)
    }

    /// Bilinear interpolation of `4πη`; `None` outside the grid.
    pub fn interpolate(&self, p: Point2) -> Option<f64> {
        if !self.grid.contains(p) {
            return None;
        }
        let g = &self.grid;
        let fx = ((p.x - g.origin.x) / g.spacing).clamp(0.0, (g.nx - 1) as f64);
        let fy = ((p.y - g.origin.y) / g.spacing).clamp(0.0, (g.ny - 1) as f64);
        let ix = (fx.floor() as usize).min(g.nx.saturating_sub(2));
        let iy = (fy.floor() as usize).min(g.ny.saturating_sub(2));
        let ix1 = (ix + 1).min(g.nx - 1);
        let iy1 = (iy + 1).min(g.ny - 1);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let e = &self.eta;
        let v = (1.0 - ty) * ((1.0 - tx) * e[[iy, ix]] + tx * e[[iy, ix1]])
            + ty * ((1.0 - tx) * e[[iy1, ix]] + tx * e[[iy1, ix1]]);
        Some(4.0 * PI * v)
    }
}

impl PotentialField for MediumRealization {
    fn potential(&self, p: Point2) -> Option<f64> {
        self.interpolate(p)
    }

    fn support(&self) -> Option<(Point2, Point2)> {
        Some((self.grid.origin, self.grid.max_corner()))
    }

    fn correlation_length(&self) -> f64 {
        self.params.correlation_length
    }
}

/// Sample a realization of the random medium on `grid`.
///
/// Requires `h ≤ ℓ/4` and fails if `1 + 4πη ≤ 0` anywhere.
pub fn gen_random_medium(grid: &Grid2, params: &MediumParams) -> Result<MediumRealization> {
    params.validate()?;
    let limit = params.correlation_length / 4.0;
    if grid.spacing > limit * (1.0 + 1e-12) {
        return Err(Error::UnderResolved {
            spacing: grid.spacing,
            limit,
            what: "correlation length",
        });
    }
    let potential = if params.amplitude == 0.0 {
        Array2::zeros(grid.shape())
    } else {
        RandomFourierField::new(*params)?.sample(grid)
    };
    let min = potential.iter().copied().fold(f64::INFINITY, f64::min);
    if 1.0 + min <= 0.0 {
        return Err(Error::PositivityViolated { min_value: 1.0 + min, violation: -(1.0 + min) });
    }
    Ok(MediumRealization { grid: *grid, eta: potential / (4.0 * PI), params: *params })
}

/// A small disk with constant linear and quadratic susceptibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    pub position: Point2,
    pub radius: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl Scatterer {
    /// `⟨η₁⟩`, the integral of `η₁` over the disk.
    pub fn integrated_eta1(&self) -> f64 {
        PI * self.radius * self.radius * self.eta1
    }

    /// `⟨η₂⟩`, the integral of `η₂` over the disk.
    pub fn integrated_eta2(&self) -> f64 {
        PI * self.radius * self.radius * self.eta2
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScattererSet {
    pub scatterers: Vec<Scatterer>,
}

impl ScattererSet {
    pub fn new(scatterers: Vec<Scatterer>) -> Result<Self> {
        let set = ScattererSet { scatterers };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.scatterers.iter().enumerate() {
            if !(s.radius > 0.0 && s.radius.is_finite()) {
                return Err(Error::invalid(format!("scatterer {i} has non-positive radius")));
            }
            if !(s.position.is_finite() && s.eta1.is_finite() && s.eta2.is_finite()) {
                return Err(Error::invalid(format!("scatterer {i} has non-finite fields")));
            }
            for (j, t) in self.scatterers.iter().enumerate().skip(i + 1) {
                if s.position.distance(t.position) <= s.radius + t.radius {
                    return Err(Error::invalid(format!("scatterers {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.scatterers.iter().map(|s| s.position).collect()
    }
}

/// Nodal indicator fields `(η₁, η₂)`: a node takes the disk's amplitudes when
/// it lies inside the closed disk.
pub fn rasterize_scatterers(
    grid: &Grid2,
    set: &ScattererSet,
) -> Result<(Array2<f64>, Array2<f64>)> {
    set.validate()?;
    let mut e1 = Array2::zeros(grid.shape());
    let mut e2 = Array2::zeros(grid.shape());
    let h = grid.spacing;
    for (index, s) in set.scatterers.iter().enumerate() {
        if !grid.contains(s.position) {
            return Err(Error::OutsideSupport(format!("scatterer {index} at {}", s.position)));
        }
        let r2 = s.radius * s.radius;
        let lo_x = ((s.position.x - s.radius - grid.origin.x) / h).ceil().max(0.0) as usize;
        let lo_y = ((s.position.y - s.radius - grid.origin.y) / h).ceil().max(0.0) as usize;
        let hi_x = (((s.position.x + s.radius - grid.origin.x) / h).floor() as usize).min(grid.nx - 1);
        let hi_y = (((s.position.y + s.radius - grid.origin.y) / h).floor() as usize).min(grid.ny - 1);
        let mut covered = 0usize;
        for iy in lo_y..=hi_y {
            for ix in lo_x..=hi_x {
                let d = grid.node(ix, iy) - s.position;
                if d.dot(d) <= r2 * (1.0 + 1e-12) {
                    e1[[iy, ix]] = s.eta1;
                    e2[[iy, ix]] = s.eta2;
                    covered += 1;
                }
            }
        }
        if covered == 0 {
            return Err(Error::ScattererOffGrid { index });
        }
    }
    Ok((e1, e2))
}
