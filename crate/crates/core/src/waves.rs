//! Free-space Green's functions, plane waves and the paraxial approximation.
//!
//! Sign convention: time dependence `e^{-iωt}`, so outgoing waves carry
//! `e^{+ikr}` and the Green's functions solve `ΔG + k²G = −4πδ`.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid2, Point2};
use crate::special::hankel0;
use crate::C64;

/// Which harmonic of the incident frequency a wave oscillates at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Harmonic {
    Fundamental,
    Second,
}

impl Harmonic {
    pub fn order(self) -> u8 {
        match self {
            Harmonic::Fundamental => 1,
            Harmonic::Second => 2,
        }
    }

    pub fn factor(self) -> f64 {
        f64::from(self.order())
    }

    pub const BOTH: [Harmonic; 2] = [Harmonic::Fundamental, Harmonic::Second];
}

impl TryFrom<u8> for Harmonic {
    type Error = String;
    fn try_from(j: u8) -> std::result::Result<Self, String> {
        match j {
            1 => Ok(Harmonic::Fundamental),
            2 => Ok(Harmonic::Second),
            _ => Err(format!("harmonic must be 1 or 2, got {j}")),
        }
    }
}

impl From<Harmonic> for u8 {
    fn from(h: Harmonic) -> u8 {
        h.order()
    }
}

impl std::fmt::Display for Harmonic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.order())
    }
}

/// Base wavenumber `k` together with the harmonic `j`; the wave oscillates
/// with the effective wavenumber `jk`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wavenumber {
    pub k: f64,
    pub harmonic: Harmonic,
}

impl Wavenumber {
    pub fn new(k: f64, harmonic: Harmonic) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("wavenumber must be positive, got {k}")));
        }
        Ok(Wavenumber { k, harmonic })
    }

    pub fn from_wavelength(lambda: f64, harmonic: Harmonic) -> Result<Self> {
        Wavenumber::new(2.0 * PI / lambda, harmonic)
    }

    /// Effective wavenumber `jk`.
    pub fn effective(&self) -> f64 {
        self.harmonic.factor() * self.k
    }

    /// Wavelength of the harmonic, `2π/(jk)`.
    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.effective()
    }
}

fn separation(x: Point2, y: Point2) -> Result<f64> {
    let r = x.distance(y);
    if r == 0.0 {
        return Err(Error::CoincidentPoints(format!("{x}")));
    }
    Ok(r)
}

/// `iπ·H₀⁽¹⁾(jk·r)` for a known separation `r > 0`.
pub fn g0_2d_radial(r: f64, jk: f64) -> C64 {
    C64::new(0.0, PI) * hankel0(jk * r)
}

/// Outgoing 2D Green's function `iπ·H₀⁽¹⁾(jk|x−y|)`.
pub fn g0_2d(x: Point2, y: Point2, wn: Wavenumber) -> Result<C64> {
    Ok(g0_2d_radial(separation(x, y)?, wn.effective()))
}

/// Outgoing 3D Green's function `e^{ijk|x−y|}/|x−y|`.
pub fn g0_3d(x: Point2, y: Point2, wn: Wavenumber) -> Result<C64> {
    let r = separation(x, y)?;
    Ok(C64::from_polar(1.0 / r, wn.effective() * r))
}

/// Paraxial form of the 3D Green's function for an array on the line
/// `y = x.y` with normal `+y`:
/// `(1/L)·exp(ijk(y∥ + |x⊥ − y⊥|²/(2L)))`, where `y∥ = ys.y − x.y` and
/// `⊥` is the `x` coordinate.
///
/// When `aperture` is given, the geometry is checked against the paraxial
/// ordering `a < ½·(λL³)^{1/4}` with `λ` the wavelength of the harmonic.
pub fn g0_paraxial(
    x: Point2,
    ys: Point2,
    wn: Wavenumber,
    range: f64,
    aperture: Option<f64>,
) -> Result<C64> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::invalid(format!("paraxial range must be positive, got {range}")));
    }
    if let Some(a) = aperture {
        let limit = (wn.wavelength() * range.powi(3)).powf(0.25);
        if a >= 0.5 * limit {
            return Err(Error::invalid(format!(
                "aperture {a} violates the paraxial ordering (limit {limit})"
            )));
        }
    }
    let par = ys.y - x.y;
    let dt = x.x - ys.x;
    Ok(C64::from_polar(1.0 / range, wn.effective() * (par + dt * dt / (2.0 * range))))
}

/// Unit-amplitude plane wave `exp(ik θ·x)` sampled at every grid node,
/// returned with shape `(ny, nx)`.
pub fn incident_plane_wave(grid: &Grid2, theta: Point2, k: f64) -> Array2<C64> {
    // Separable: exp(ik(θx·x + θy·y)) = exp(ikθx·x)·exp(ikθy·y).
    let ex: Vec<C64> = (0..grid.nx)
        .map(|ix| C64::from_polar(1.0, k * theta.x * grid.node(ix, 0).x))
        .collect();
    let ey: Vec<C64> = (0..grid.ny)
        .map(|iy| C64::from_polar(1.0, k * theta.y * grid.node(0, iy).y))
        .collect();
    Array2::from_shape_fn(grid.shape(), |(iy, ix)| {
        let v = ex[ix] * ey[iy];
        v / v.norm()
    })
}

/// Plane wave value at a single point.
pub fn plane_wave_at(x: Point2, theta: Point2, k: f64) -> C64 {
    C64::from_polar(1.0, k * theta.dot(x))
}
