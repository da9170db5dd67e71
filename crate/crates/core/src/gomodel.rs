//! Geometrical-optics phase-screen model of the data and the closed-form
//! statistics it predicts.
//!
//! In the regime `λ ≪ √(λL) ≪ ℓ ≪ L` the random medium acts on the waves
//! through travel-time phases accumulated along straight rays:
//!
//! * `G(x, y; jω) = G₀(x, y; jω)·exp(i·jk·ν(x, y))` with
//!   `ν(x, y) = (|x−y|/2)·∫₀¹ 4πη((1−t)y + tx) dt`,
//! * the direct wave `exp(ikθ·x + ikγ(x, θ))` with `γ` the same integral
//!   from the point where the backward ray leaves the medium.
//!
//! The scattering lengths `ℓʲₛ = 8/(√(2π)σ²(jk)²ℓ)` give the decay of the
//! mean Green's function, and `X_d,j = ℓ·√(3ℓʲₛ/(2L))`,
//! `Θ_d = X_d,1/|y − y⁽ⁱ⁾|` the offsets over which fields decorrelate.
//!
//! The model is two-dimensional here: `G₀` is the 2D outgoing Green's
//! function used by the PDE solver and the imaging functionals, so GO and
//! PDE data are interchangeable. Projections orthogonal to the cone axis
//! reduce to scalar angle offsets.

use std::f64::consts::PI;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{linspace, AcquisitionGeometry, ArrayData};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::medium::{MediumParams, PotentialField, RandomFourierField, ScattererSet};
use crate::waves::g0_2d_radial;
use crate::C64;

/// Quadrature steps per correlation length for ray integrals.
pub const STEPS_PER_CORRELATION_LENGTH: f64 = 8.0;

/// Random travel-time phase `ν` accumulated on the segment `from → to`.
///
/// Composite midpoint rule with step `ℓ/8`. Fails if the segment leaves the
/// support of `field`.
pub fn phase_along_ray<F: PotentialField + ?Sized>(field: &F, from: Point2, to: Point2) -> Result<f64> {
    let step = field.correlation_length() / STEPS_PER_CORRELATION_LENGTH;
    Ok(0.5 * from.distance(to) * field.segment_mean(from, to, step)?)
}

/// Point where the ray through `p` travelling along `theta` enters the box
/// `[lo, hi]`, i.e. the exit point of the backward ray `p − sθ`.
pub fn entry_point(p: Point2, theta: Point2, (lo, hi): (Point2, Point2)) -> Result<Point2> {
    if p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y {
        return Err(Error::OutsideSupport(format!("{p}")));
    }
    let mut s = f64::INFINITY;
    if theta.x > 0.0 {
        s = s.min((p.x - lo.x) / theta.x);
    } else if theta.x < 0.0 {
        s = s.min((p.x - hi.x) / theta.x);
    }
    if theta.y > 0.0 {
        s = s.min((p.y - lo.y) / theta.y);
    } else if theta.y < 0.0 {
        s = s.min((p.y - hi.y) / theta.y);
    }
    if !s.is_finite() {
        return Err(Error::invalid("incident direction must be non-zero"));
    }
    Ok(p - theta * s)
}

/// Phase `γ(p, θ)` of the direct wave, integrated from its entry point.
fn direct_phase<F: PotentialField + ?Sized>(field: &F, p: Point2, theta: Point2) -> Result<f64> {
    let support = field
        .support()
        .ok_or_else(|| Error::invalid("direct-wave phases need a field with bounded support"))?;
    phase_along_ray(field, p, entry_point(p, theta, support)?)
}

/// Which terms [`synth_data_go`] assembles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GoOptions {
    /// Include the distorted direct wave `e^{ikθ·x}(e^{ikγ(x,θ)} − 1)` in
    /// `d₁`. It costs one ray per sensor and direction.
    pub direct_wave: bool,
}

impl Default for GoOptions {
    fn default() -> Self {
        GoOptions { direct_wave: true }
    }
}

/// Phase-screen array data:
///
/// * `d₁ = e^{ikx·θ}(e^{ikγ(x,θ)} − 1) + Σ k²⟨η₁⟩·G(x, y; ω)·e^{ikθ·y + ikγ(y,θ)}`
/// * `d₂ = Σ 4k²⟨η₂⟩·G(x, y; 2ω)·e^{2ikθ·y + 2ikγ(y,θ)}`
///
/// summed over the scatterers, with `⟨ηⱼ⟩` the integrated susceptibilities.
pub fn synth_data_go<F: PotentialField + ?Sized>(
    field: &F,
    scatterers: &ScattererSet,
    geometry: &AcquisitionGeometry,
    options: GoOptions,
) -> Result<ArrayData> {
    geometry.validate()?;
    scatterers.validate()?;
    let k = geometry.k();
    let dirs = geometry.directions();
    let (ns, nq) = (geometry.n_sensors(), geometry.n_angles());

    // Illumination of each scatterer: e^{ijkθ·y + ijkγ(y,θ)} without the j.
    let illumination: Vec<Vec<f64>> = scatterers
        .scatterers
        .iter()
        .map(|sc| {
            dirs.iter()
                .map(|&t| Ok(t.dot(sc.position) + direct_phase(field, sc.position, t)?))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let rows: Vec<Result<(Vec<C64>, Vec<C64>)>> = geometry
        .sensors
        .par_iter()
        .map(|&x| {
            let mut r1 = vec![C64::new(0.0, 0.0); nq];
            let mut r2 = vec![C64::new(0.0, 0.0); nq];
            if options.direct_wave {
                for (q, &t) in dirs.iter().enumerate() {
                    let gamma = direct_phase(field, x, t)?;
                    r1[q] += C64::from_polar(1.0, k * t.dot(x))
                        * (C64::from_polar(1.0, k * gamma) - 1.0);
                }
            }
            for (sc, illum) in scatterers.scatterers.iter().zip(&illumination) {
                let y = sc.position;
                let r = x.distance(y);
                if r == 0.0 {
                    return Err(Error::CoincidentPoints(format!("sensor and scatterer at {x}")));
                }
                let nu = phase_along_ray(field, x, y)?;
                let g1 = g0_2d_radial(r, k) * C64::from_polar(1.0, k * nu);
                let g2 = g0_2d_radial(r, 2.0 * k) * C64::from_polar(1.0, 2.0 * k * nu);
                let a1 = k * k * sc.integrated_eta1();
                let a2 = 4.0 * k * k * sc.integrated_eta2();
                for q in 0..nq {
                    r1[q] += g1 * a1 * C64::from_polar(1.0, k * illum[q]);
                    r2[q] += g2 * a2 * C64::from_polar(1.0, 2.0 * k * illum[q]);
                }
            }
            Ok((r1, r2))
        })
        .collect();

    let mut d1 = Array2::zeros((ns, nq));
    let mut d2 = Array2::zeros((ns, nq));
    for (s, row) in rows.into_iter().enumerate() {
        let (r1, r2) = row?;
        for q in 0..nq {
            d1[[s, q]] = r1[q];
            d2[[s, q]] = r2[q];
        }
    }
    ArrayData::new(d1, d2, geometry.clone(), None)
}

/// Scales of a phase-screen experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoRegimeParams {
    pub wavelength: f64,
    pub correlation_length: f64,
    /// Standard deviation `σ` of `4πη`.
    pub amplitude: f64,
    /// Distance `L` from the scatterer to the array.
    pub range: f64,
    pub aperture: f64,
    pub cone_half_angle: f64,
    /// Distance `|y − y⁽ⁱ⁾|` travelled by the illumination inside the
    /// medium before reaching the scatterer; `L` when absent.
    #[serde(default)]
    pub entry_distance: Option<f64>,
}

impl GoRegimeParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("wavelength", self.wavelength),
            ("correlation_length", self.correlation_length),
            ("amplitude", self.amplitude),
            ("range", self.range),
            ("aperture", self.aperture),
            ("cone_half_angle", self.cone_half_angle),
            ("entry_distance", self.entry_distance.unwrap_or(self.range)),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn entry_distance(&self) -> f64 {
        self.entry_distance.unwrap_or(self.range)
    }

    /// `ℓʲₛ = 8/(√(2π)σ²(jk)²ℓ)`.
    pub fn scattering_length(&self, j: f64) -> f64 {
        let jk = j * self.k();
        8.0 / ((2.0 * PI).sqrt() * self.amplitude.powi(2) * jk * jk * self.correlation_length)
    }

    /// `X_d,j = ℓ·√(3ℓʲₛ/(2L))`.
    pub fn decoherence_length(&self, j: f64) -> f64 {
        self.correlation_length * (1.5 * self.scattering_length(j) / self.range).sqrt()
    }

    /// `Var ν ≈ √(2π)σ²ℓ·r/4` for a ray of length `r ≫ ℓ`.
    pub fn phase_variance(&self, r: f64) -> f64 {
        (2.0 * PI).sqrt() * self.amplitude.powi(2) * self.correlation_length * r / 4.0
    }
}

/// One inequality `lhs ≪ rhs` of the scaling regime, as the ratio
/// `lhs/rhs`; flagged when the ratio is not small.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeCheck {
    pub relation: String,
    pub ratio: f64,
    pub flagged: bool,
}

/// Ratio at or above which a `≪` relation is flagged.
pub const REGIME_FLAG_RATIO: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    pub params: GoRegimeParams,
    /// `[ℓ¹ₛ, ℓ²ₛ]`.
    pub scattering_lengths: [f64; 2],
    /// `[X_d,1, X_d,2]`.
    pub decoherence_lengths: [f64; 2],
    /// `Θ_d`.
    pub decoherence_angle: f64,
    pub regime: Vec<RegimeCheck>,
}

/// Effective CINT scales for thresholds `X`, `Θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveScales {
    pub x: f64,
    pub theta: f64,
}

impl TheoryPrediction {
    /// `1/X_e² = 1/X² + 1/X_d,j²` and `1/Θ_e² = 1/Θ² + j²/Θ_d²`.
    pub fn effective_scales(&self, x: f64, theta: f64, j: usize) -> Result<EffectiveScales> {
        if !(1..=2).contains(&j) {
            return Err(Error::invalid(format!("harmonic must be 1 or 2, got {j}")));
        }
        if !(x > 0.0 && theta > 0.0) {
            return Err(Error::invalid("thresholds must be positive"));
        }
        let xd = self.decoherence_lengths[j - 1];
        let jf = j as f64;
        Ok(EffectiveScales {
            x: (1.0 / (x * x) + 1.0 / (xd * xd)).powf(-0.5),
            theta: (1.0 / (theta * theta) + jf * jf / self.decoherence_angle.powi(2)).powf(-0.5),
        })
    }

    pub fn flagged(&self) -> impl Iterator<Item = &RegimeCheck> {
        self.regime.iter().filter(|c| c.flagged)
    }
}

/// Closed-form scales and regime diagnostics.
pub fn theory_predict(params: &GoRegimeParams) -> Result<TheoryPrediction> {
    params.validate()?;
    let (lam, l, s, big_l, a) = (
        params.wavelength,
        params.correlation_length,
        params.amplitude,
        params.range,
        params.aperture,
    );
    let fresnel = (lam * big_l).sqrt();
    let upper_l = (lam * big_l * big_l).cbrt();
    let paraxial = (lam * big_l.powi(3)).powf(0.25);
    let relations = [
        ("λ ≪ √(λL)", lam / fresnel),
        ("√(λL) ≪ ℓ", fresnel / l),
        ("ℓ ≪ (λL²)^(1/3)", l / upper_l),
        ("(λL²)^(1/3) ≪ a", upper_l / a),
        ("a ≪ (λL³)^(1/4)", a / paraxial),
        ("(λL³)^(1/4) ≪ L", paraxial / big_l),
        ("λ/√(ℓL) ≪ σ", lam / (l * big_l).sqrt() / s),
        ("σ ≪ √(λℓ)/L", s / ((lam * l).sqrt() / big_l)),
    ];
    let regime = relations
        .iter()
        .map(|&(r, ratio)| RegimeCheck { relation: r.to_string(), ratio, flagged: ratio >= REGIME_FLAG_RATIO })
        .collect();
    let xd1 = params.decoherence_length(1.0);
    Ok(TheoryPrediction {
        params: *params,
        scattering_lengths: [params.scattering_length(1.0), params.scattering_length(2.0)],
        decoherence_lengths: [xd1, params.decoherence_length(2.0)],
        decoherence_angle: xd1 / params.entry_distance(),
        regime,
    })
}

/// Expected CINT image, normalized to its peak, at offsets
/// `(Δ along the array, Δ along the array normal)` from the scatterer:
/// `exp(−½(jk·X_e·Δ∥/L)² − ½(jk·Θ_e·Δ⊥)²)`.
///
/// With the cone axis parallel to the array, the projection orthogonal to
/// the axis is the component along the normal.
pub fn predicted_cint_profile(
    prediction: &TheoryPrediction,
    x: f64,
    theta: f64,
    j: usize,
    offsets: &[(f64, f64)],
) -> Result<Vec<f64>> {
    let e = prediction.effective_scales(x, theta, j)?;
    let jk = j as f64 * prediction.params.k();
    let big_l = prediction.params.range;
    Ok(offsets
        .iter()
        .map(|&(along, normal)| {
            let a = jk * e.x * along / big_l;
            let b = jk * e.theta * normal;
            (-0.5 * a * a - 0.5 * b * b).exp()
        })
        .collect())
}

/// Half-maximum offset along the array of [`predicted_cint_profile`]:
/// `L·√(2 ln 2)/(jk·X_e)`.
pub fn predicted_half_width(prediction: &TheoryPrediction, x: f64, theta: f64, j: usize) -> Result<f64> {
    let e = prediction.effective_scales(x, theta, j)?;
    let jk = j as f64 * prediction.params.k();
    Ok(prediction.params.range * (2.0 * std::f64::consts::LN_2).sqrt() / (jk * e.x))
}

/// Least-squares fit of `ln c = b − Δ²/(2s²)` over points with
/// `c ≥ floor`; returns `s`. `None` if fewer than two usable points or a
/// non-decaying fit.
pub fn fit_gaussian_scale(offsets: &[f64], values: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = offsets
        .iter()
        .zip(values)
        .filter(|(_, &c)| c >= floor && c > 0.0)
        .map(|(&d, &c)| (d * d, c.ln()))
        .collect();
    let slope = linear_fit(&pts)?.0;
    (slope < 0.0).then(|| (-0.5 / slope).sqrt())
}

/// Least-squares fit of `ln c = b − r/ℓ` over points with `c ≥ floor`;
/// returns `ℓ`.
pub fn fit_decay_length(distances: &[f64], values: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .zip(values)
        .filter(|(_, &c)| c >= floor && c > 0.0)
        .map(|(&r, &c)| (r, c.ln()))
        .collect();
    let slope = linear_fit(&pts)?.0;
    (slope < 0.0).then(|| -1.0 / slope)
}

/// Ordinary least squares `y = slope·x + intercept`.
fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Monte-Carlo check of the second-moment predictions.
///
/// The scene is replicated `copies` times along `x`, `copy_spacing` apart,
/// to gather nearly independent samples from each realization. In every
/// copy the scatterer sits at `(c·spacing, 0)`, the array lies on the line
/// `y = L`, and the illumination travels along `+y` from the medium edge at
/// `y = −D`, `D` the entry distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSetup {
    pub regime: GoRegimeParams,
    /// Sensor offsets from the array point facing the scatterer.
    pub sensor_offsets: Vec<f64>,
    /// Direction offsets (radians) from the axis, seen from the scatterer.
    pub direction_offsets: Vec<f64>,
    /// Ray lengths from the scatterer toward the array for the mean
    /// Green's function decay.
    pub decay_distances: Vec<f64>,
    pub copies: usize,
    pub copy_spacing: f64,
    pub realizations: usize,
    pub base_seed: u64,
    pub mode_count: usize,
}

impl MomentSetup {
    /// Offsets and distances scaled to the predicted decoherence and
    /// scattering scales of `regime`.
    pub fn scaled(regime: GoRegimeParams, realizations: usize, base_seed: u64) -> Result<Self> {
        let p = theory_predict(&regime)?;
        let xd1 = p.decoherence_lengths[0];
        let ls1 = p.scattering_lengths[0];
        let l = regime.correlation_length;
        Ok(MomentSetup {
            regime,
            sensor_offsets: linspace(0.0, 2.5 * xd1, 16),
            direction_offsets: linspace(0.0, 2.5 * p.decoherence_angle, 16),
            decay_distances: linspace((5.0 * l).max(0.5 * ls1), (5.0 * l).max(0.5 * ls1) + 1.5 * ls1, 10),
            copies: 20,
            copy_spacing: 5.0 * l + 2.5 * xd1,
            realizations,
            base_seed,
            mode_count: crate::medium::DEFAULT_MODE_COUNT,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.regime.validate()?;
        if self.realizations < 2 || self.copies == 0 || self.mode_count == 0 {
            return Err(Error::invalid("need at least two realizations, one copy and one mode"));
        }
        if !(self.copy_spacing > 0.0) {
            return Err(Error::invalid("copy spacing must be positive"));
        }
        if self.decay_distances.iter().any(|&r| !(r > 0.0 && r <= self.regime.range)) {
            return Err(Error::invalid("decay distances must lie in (0, L]"));
        }
        if self.direction_offsets.iter().any(|a| a.abs() >= PI / 2.0) {
            return Err(Error::invalid("direction offsets must be below π/2"));
        }
        Ok(())
    }
}

/// Monte-Carlo moments and the scales fitted to them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub samples: usize,
    pub prediction: TheoryPrediction,
    pub sensor_offsets: Vec<f64>,
    /// `|E[G(x)G*(x')]|/|G₀|²` versus sensor offset, per harmonic.
    pub green_correlation: [Vec<f64>; 2],
    /// Fitted Gaussian scale of `green_correlation`, per harmonic.
    pub fitted_decoherence_lengths: [Option<f64>; 2],
    /// `|E[u⁽ⁱ⁾(x)u⁽ⁱ⁾*(x')]|` at the array for the axial direction.
    pub direct_correlation: Vec<f64>,
    pub fitted_direct_scale: Option<f64>,
    /// Predicted scale for parallel rays of length `L + D`:
    /// `X_d,1·√(L/(3(L + D)))`.
    pub predicted_direct_scale: f64,
    pub direction_offsets: Vec<f64>,
    /// `|E[u⁽ⁱ⁾(y,θ)u⁽ⁱ⁾*(y,θ')]|` at the scatterer.
    pub scatterer_correlation: Vec<f64>,
    pub fitted_decoherence_angle: Option<f64>,
    /// Sample variance of `ν` from the scatterer to the facing sensor.
    pub phase_variance: f64,
    pub predicted_phase_variance: f64,
    pub decay_distances: Vec<f64>,
    /// `|E[exp(ikν)]|` versus ray length.
    pub mean_green_modulus: Vec<f64>,
    pub fitted_scattering_length: Option<f64>,
}

/// Correlation level below which fitted points are dropped (Monte-Carlo
/// noise dominates there).
const FIT_FLOOR: f64 = 0.15;

#[derive(Clone)]
struct MomentSums {
    green: [Vec<C64>; 2],
    direct: Vec<C64>,
    scatterer: Vec<C64>,
    nu: (f64, f64),
    mean: Vec<C64>,
}

impl MomentSums {
    fn zeros(s: &MomentSetup) -> Self {
        let n = s.sensor_offsets.len();
        MomentSums {
            green: [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]],
            direct: vec![C64::new(0.0, 0.0); n],
            scatterer: vec![C64::new(0.0, 0.0); s.direction_offsets.len()],
            nu: (0.0, 0.0),
            mean: vec![C64::new(0.0, 0.0); s.decay_distances.len()],
        }
    }

    fn add(&mut self, o: &MomentSums) {
        for j in 0..2 {
            add_into(&mut self.green[j], &o.green[j]);
        }
        add_into(&mut self.direct, &o.direct);
        add_into(&mut self.scatterer, &o.scatterer);
        add_into(&mut self.mean, &o.mean);
        self.nu.0 += o.nu.0;
        self.nu.1 += o.nu.1;
    }
}

fn add_into(a: &mut [C64], b: &[C64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

fn realization_sums(s: &MomentSetup, seed: u64) -> Result<MomentSums> {
    let r = &s.regime;
    let (big_l, d) = (r.range, r.entry_distance());
    let k = r.k();
    let span = s.copy_spacing * (s.copies - 1) as f64;
    let margin = s.sensor_offsets.iter().fold(0.0f64, |m, o| m.max(o.abs()))
        + d * s.direction_offsets.iter().fold(0.0f64, |m, a| m.max(a.tan().abs()))
        + r.correlation_length;
    let field = RandomFourierField::new(MediumParams {
        correlation_length: r.correlation_length,
        amplitude: r.amplitude,
        mode_count: s.mode_count,
        seed,
    })?
    .with_support(Point2::new(-margin, -d), Point2::new(span + margin, big_l));
    let up = Point2::new(0.0, 1.0);
    let mut sums = MomentSums::zeros(s);
    for c in 0..s.copies {
        let y = Point2::new(c as f64 * s.copy_spacing, 0.0);
        let facing = y + up * big_l;

        let nu0 = phase_along_ray(&field, facing, y)?;
        sums.nu.0 += nu0;
        sums.nu.1 += nu0 * nu0;
        let gamma0 = direct_phase(&field, facing, up)?;
        for (i, &o) in s.sensor_offsets.iter().enumerate() {
            let x = facing + Point2::new(o, 0.0);
            let dn = nu0 - phase_along_ray(&field, x, y)?;
            sums.green[0][i] += C64::from_polar(1.0, k * dn);
            sums.green[1][i] += C64::from_polar(1.0, 2.0 * k * dn);
            let dg = gamma0 - direct_phase(&field, x, up)?;
            sums.direct[i] += C64::from_polar(1.0, k * dg);
        }

        let gy = direct_phase(&field, y, up)?;
        for (i, &a) in s.direction_offsets.iter().enumerate() {
            let theta = Point2::new(-a.sin(), a.cos());
            sums.scatterer[i] += C64::from_polar(1.0, k * (gy - direct_phase(&field, y, theta)?));
        }

        for (i, &len) in s.decay_distances.iter().enumerate() {
            sums.mean[i] += C64::from_polar(1.0, k * phase_along_ray(&field, y, y + up * len)?);
        }
    }
    Ok(sums)
}

/// Run the Monte-Carlo moment check described by `setup`.
pub fn moment_check(setup: &MomentSetup) -> Result<MomentReport> {
    setup.validate()?;
    let prediction = theory_predict(&setup.regime)?;
    let per: Vec<Result<MomentSums>> = (0..setup.realizations)
        .into_par_iter()
        .map(|i| {
            let seed = setup.base_seed.wrapping_add(i as u64);
            realization_sums(setup, seed).map_err(|e| Error::Realization { seed, source: Box::new(e) })
        })
        .collect();
    let mut total = MomentSums::zeros(setup);
    for p in per {
        total.add(&p?);
    }
    let n = (setup.realizations * setup.copies) as f64;
    let modulus = |v: &[C64]| v.iter().map(|z| z.norm() / n).collect::<Vec<f64>>();
    let green = [modulus(&total.green[0]), modulus(&total.green[1])];
    let direct = modulus(&total.direct);
    let scatterer = modulus(&total.scatterer);
    let mean = modulus(&total.mean);
    let nu_mean = total.nu.0 / n;
    let phase_variance = (total.nu.1 - n * nu_mean * nu_mean) / (n - 1.0);
    let r = &setup.regime;
    Ok(MomentReport {
        samples: n as usize,
        fitted_decoherence_lengths: [
            fit_gaussian_scale(&setup.sensor_offsets, &green[0], FIT_FLOOR),
            fit_gaussian_scale(&setup.sensor_offsets, &green[1], FIT_FLOOR),
        ],
        green_correlation: green,
        fitted_direct_scale: fit_gaussian_scale(&setup.sensor_offsets, &direct, FIT_FLOOR),
        predicted_direct_scale: prediction.decoherence_lengths[0]
            * (r.range / (3.0 * (r.range + r.entry_distance()))).sqrt(),
        direct_correlation: direct,
        sensor_offsets: setup.sensor_offsets.clone(),
        fitted_decoherence_angle: fit_gaussian_scale(&setup.direction_offsets, &scatterer, FIT_FLOOR),
        scatterer_correlation: scatterer,
        direction_offsets: setup.direction_offsets.clone(),
        phase_variance,
        predicted_phase_variance: r.phase_variance(r.range),
        fitted_scattering_length: fit_decay_length(&setup.decay_distances, &mean, FIT_FLOOR / 3.0),
        mean_green_modulus: mean,
        decay_distances: setup.decay_distances.clone(),
        prediction,
    })
}
