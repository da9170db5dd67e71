//! Closed-form point spread functions of migration in a homogeneous medium.
//!
//! The aperture integral gives `sinc(jk·a·Δ⊥/(2L))` across the array
//! direction. The integral over the cone of directions gives, along the
//! normal, `2α·J₁(jkαΔ)/(jkαΔ)` for a 3D cone and `2α·sinc(jkαΔ)` for the
//! planar fan of a 2D experiment.

use serde::{Deserialize, Serialize};

use crate::special::bessel_j1;

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Aperture factor `sinc(jk·a·Δ/(2L))`.
pub fn aperture_factor(offset: f64, jk: f64, aperture: f64, range: f64) -> f64 {
    sinc(jk * aperture * offset / (2.0 * range))
}

/// Cone factor of a 3D cone of half-angle `α`, normalized to 1 at `Δ = 0`.
pub fn cone_factor_3d(offset: f64, jk: f64, half_angle: f64) -> f64 {
    let z = jk * half_angle * offset;
    if z.abs() < 1e-8 {
        1.0
    } else {
        2.0 * bessel_j1(z) / z
    }
}

/// Cone factor of a planar fan `φ ∈ [−α, α]`, normalized to 1 at `Δ = 0`.
pub fn cone_factor_2d(offset: f64, jk: f64, half_angle: f64) -> f64 {
    sinc(jk * half_angle * offset)
}

/// FWHM of `|sinc(jk·a·Δ/(2L))|`: `1.2067·λL/(ja)`.
pub fn fwhm_sinc_amplitude(wavelength: f64, range: f64, j: f64, aperture: f64) -> f64 {
    // sinc(x) = 1/2 at x = 1.895494267...
    2.0 * 1.895_494_267_033_981 / std::f64::consts::PI * wavelength * range / (j * aperture)
}

/// FWHM of `sinc²(jk·a·Δ/(2L))`: `0.8859·λL/(ja)`.
pub fn fwhm_sinc_squared(wavelength: f64, range: f64, j: f64, aperture: f64) -> f64 {
    // sinc(x)² = 1/2 at x = 1.391557377...
    2.0 * 1.391_557_377_006_804 / std::f64::consts::PI * wavelength * range / (j * aperture)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsfSample {
    pub offset: f64,
    pub aperture: f64,
    pub cone_2d: f64,
    pub cone_3d: f64,
}

/// Sample the three factors at the given offsets.
pub fn psf_curves(offsets: &[f64], jk: f64, aperture: f64, range: f64, half_angle: f64) -> Vec<PsfSample> {
    offsets
        .iter()
        .map(|&d| PsfSample {
            offset: d,
            aperture: aperture_factor(d, jk, aperture, range),
            cone_2d: cone_factor_2d(d, jk, half_angle),
            cone_3d: cone_factor_3d(d, jk, half_angle),
        })
        .collect()
}
