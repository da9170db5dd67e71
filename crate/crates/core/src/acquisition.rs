//! The array experiment: illuminate with plane waves from a cone of
//! directions and record the scattered field at the sensors at both
//! harmonics.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid2, Point2};
use crate::medium::{rasterize_scatterers, MediumRealization, ScattererSet};
use crate::solver::{
    assemble, factorize, fixed_point_shg, FixedPointParams, PmlParams, ShgCoefficients,
};
use crate::waves::{incident_plane_wave, Harmonic, Wavenumber};
use crate::C64;

/// Sensors, incident directions and wavelength of one experiment.
///
/// Incident direction `q` is the cone axis rotated counter-clockwise by
/// `angles[q]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionGeometry {
    pub wavelength: f64,
    pub sensors: Vec<Point2>,
    pub angles: Vec<f64>,
    pub cone_axis: Point2,
    pub cone_half_angle: f64,
}

/// `n` equispaced values on `[a, b]` (the midpoint when `n = 1`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl AcquisitionGeometry {
    /// Linear array of `n_sensors` on the segment `y = y0`, `x ∈ [x0, x1]`,
    /// with `n_angles` directions equispaced in `[−α, α]` around `axis`.
    pub fn linear(
        wavelength: f64,
        (x0, x1, y0): (f64, f64, f64),
        n_sensors: usize,
        axis: Point2,
        half_angle: f64,
        n_angles: usize,
    ) -> Result<Self> {
        let g = AcquisitionGeometry {
            wavelength,
            sensors: linspace(x0, x1, n_sensors).into_iter().map(|x| Point2::new(x, y0)).collect(),
            angles: linspace(-half_angle, half_angle, n_angles),
            cone_axis: axis,
            cone_half_angle: half_angle,
        };
        g.validate()?;
        Ok(g)
    }

    /// Full bottom side of the square `[−side/2, side/2] × [0, side]`,
    /// horizontal cone axis, half-angle π/4.
    pub fn bottom_array(side: f64, n_sensors: usize, n_angles: usize) -> Result<Self> {
        Self::linear(
            1.0,
            (-side / 2.0, side / 2.0, 0.0),
            n_sensors,
            Point2::new(1.0, 0.0),
            PI / 4.0,
            n_angles,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        if self.sensors.is_empty() || self.angles.is_empty() {
            return Err(Error::invalid("need at least one sensor and one incident angle"));
        }
        if self.sensors.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("sensor positions must be finite"));
        }
        if (self.cone_axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("cone axis must be a unit vector"));
        }
        if !(self.cone_half_angle >= 0.0 && self.cone_half_angle <= PI) {
            return Err(Error::invalid("cone half-angle must lie in [0, π]"));
        }
        if let Some(phi) = self.angles.iter().find(|a| !(a.abs() <= self.cone_half_angle + 1e-12)) {
            return Err(Error::invalid(format!(
                "incident angle {phi} exceeds the cone half-angle {}",
                self.cone_half_angle
            )));
        }
        // Sensors must be collinear.
        if self.sensors.len() > 2 {
            let a = self.sensors[0];
            let far = self.sensors.iter().copied().max_by(|p, q| {
                p.distance(a).partial_cmp(&q.distance(a)).unwrap_or(std::cmp::Ordering::Equal)
            });
            if let Some(dir) = far.and_then(|b| (b - a).normalized()) {
                let n = dir.perp();
                let scale = self.aperture().max(self.wavelength);
                if self.sensors.iter().any(|p| (*p - a).dot(n).abs() > 1e-9 * scale) {
                    return Err(Error::invalid("sensors must lie on one line"));
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn n_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    /// Unit incident direction `θ_q`.
    pub fn direction(&self, q: usize) -> Point2 {
        let base = self.cone_axis.y.atan2(self.cone_axis.x);
        Point2::from_angle(base + self.angles[q])
    }

    pub fn directions(&self) -> Vec<Point2> {
        (0..self.n_angles()).map(|q| self.direction(q)).collect()
    }

    /// Largest distance between two sensors.
    pub fn aperture(&self) -> f64 {
        let mut a: f64 = 0.0;
        for (i, p) in self.sensors.iter().enumerate() {
            for q in &self.sensors[i + 1..] {
                a = a.max(p.distance(*q));
            }
        }
        a
    }

    /// Unit vector along the array (first to farthest sensor); `x̂` for a
    /// single sensor.
    pub fn array_direction(&self) -> Point2 {
        let a = self.sensors[0];
        self.sensors
            .iter()
            .map(|p| *p - a)
            .max_by(|p, q| p.norm().partial_cmp(&q.norm()).unwrap_or(std::cmp::Ordering::Equal))
            .and_then(Point2::normalized)
            .unwrap_or(Point2::new(1.0, 0.0))
    }

    /// Signed coordinate of each sensor along the array.
    pub fn sensor_coordinates(&self) -> Vec<f64> {
        let d = self.array_direction();
        let a = self.sensors[0];
        self.sensors.iter().map(|p| (*p - a).dot(d)).collect()
    }

    pub fn centre(&self) -> Point2 {
        let n = self.sensors.len() as f64;
        let s = self.sensors.iter().fold(Point2::ORIGIN, |acc, p| acc + *p);
        s * (1.0 / n)
    }
}

/// Array data `d₁`, `d₂` (sensors × directions) of one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayData {
    pub d1: Array2<C64>,
    pub d2: Array2<C64>,
    pub geometry: AcquisitionGeometry,
    pub seed: Option<u64>,
}

impl ArrayData {
    pub fn new(
        d1: Array2<C64>,
        d2: Array2<C64>,
        geometry: AcquisitionGeometry,
        seed: Option<u64>,
    ) -> Result<Self> {
        let data = ArrayData { d1, d2, geometry, seed };
        data.validate()?;
        Ok(data)
    }

    pub fn zeros(geometry: AcquisitionGeometry) -> Self {
        let shape = (geometry.n_sensors(), geometry.n_angles());
        ArrayData { d1: Array2::zeros(shape), d2: Array2::zeros(shape), geometry, seed: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let shape = (self.geometry.n_sensors(), self.geometry.n_angles());
        for (name, d) in [("d1", &self.d1), ("d2", &self.d2)] {
            if d.dim() != shape {
                return Err(Error::Shape(format!("{name} is {:?}, geometry needs {shape:?}", d.dim())));
            }
            if d.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::invalid(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }

    pub fn harmonic(&self, j: Harmonic) -> &Array2<C64> {
        match j {
            Harmonic::Fundamental => &self.d1,
            Harmonic::Second => &self.d2,
        }
    }

    pub fn harmonic_mut(&mut self, j: Harmonic) -> &mut Array2<C64> {
        match j {
            Harmonic::Fundamental => &mut self.d1,
            Harmonic::Second => &mut self.d2,
        }
    }
}

/// Forward-solver settings used by [`simulate_experiment`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub pml: PmlParams,
    pub fixed_point: FixedPointParams,
    /// Amplitude of the incident plane waves.
    pub incident_amplitude: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            pml: PmlParams::default(),
            fixed_point: FixedPointParams::default(),
            incident_amplitude: 1.0,
        }
    }
}

/// Per-direction convergence record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleDiagnostics {
    pub index: usize,
    pub angle: f64,
    pub iterations: usize,
    pub final_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub data: ArrayData,
    pub diagnostics: Vec<AngleDiagnostics>,
}

/// Grid nodes nearest to each sensor.
pub fn snap_sensors(grid: &Grid2, sensors: &[Point2]) -> Result<Vec<(usize, usize)>> {
    sensors
        .iter()
        .map(|&p| grid.nearest_node(p).ok_or_else(|| Error::OutsideSupport(format!("sensor {p}"))))
        .collect()
}

/// Solve the forward problem for every incident direction and sample the
/// scattered fundamental and the second harmonic at the sensors.
///
/// Sensors are snapped to the nearest grid node and the returned geometry
/// carries the snapped positions. The random medium is deliberately kept in
/// `d₁`: only the homogeneous incident wave is subtracted.
pub fn simulate_experiment(
    medium: &MediumRealization,
    scatterers: &ScattererSet,
    geometry: &AcquisitionGeometry,
    config: &SolverConfig,
) -> Result<Experiment> {
    geometry.validate()?;
    if !(config.incident_amplitude.is_finite()) {
        return Err(Error::invalid("incident amplitude must be finite"));
    }
    let grid = medium.grid;
    let nodes = snap_sensors(&grid, &geometry.sensors)?;
    let (eta1, eta2) = rasterize_scatterers(&grid, scatterers)?;
    let k = geometry.k();
    let hk = factorize(assemble(
        medium,
        &eta1,
        Wavenumber::new(k, Harmonic::Fundamental)?,
        &config.pml,
    )?)?;
    let h2k = factorize(assemble(medium, &eta1, Wavenumber::new(k, Harmonic::Second)?, &config.pml)?)?;
    let coeffs = ShgCoefficients { medium, eta1: &eta1, eta2: &eta2 };

    let results: Vec<Result<(Vec<C64>, Vec<C64>, AngleDiagnostics)>> = (0..geometry.n_angles())
        .into_par_iter()
        .map(|q| {
            let theta = geometry.direction(q);
            let incident = incident_plane_wave(&grid, theta, k).mapv(|z| z * config.incident_amplitude);
            let sol = fixed_point_shg(&hk, &h2k, coeffs, &incident, &config.fixed_point).map_err(
                |e| Error::Angle { index: q, angle: geometry.angles[q], source: Box::new(e) },
            )?;
            let u: Vec<C64> = nodes.iter().map(|&(ix, iy)| sol.u[[iy, ix]]).collect();
            let v: Vec<C64> = nodes.iter().map(|&(ix, iy)| sol.v[[iy, ix]]).collect();
            Ok((
                u,
                v,
                AngleDiagnostics {
                    index: q,
                    angle: geometry.angles[q],
                    iterations: sol.iterations,
                    final_residual: sol.final_residual,
                },
            ))
        })
        .collect();

    let shape = (geometry.n_sensors(), geometry.n_angles());
    let mut d1 = Array2::zeros(shape);
    let mut d2 = Array2::zeros(shape);
    let mut diagnostics = Vec::with_capacity(shape.1);
    for (q, r) in results.into_iter().enumerate() {
        let (u, v, diag) = r?;
        for s in 0..shape.0 {
            d1[[s, q]] = u[s];
            d2[[s, q]] = v[s];
        }
        diagnostics.push(diag);
    }
    let mut snapped = geometry.clone();
    snapped.sensors = nodes.iter().map(|&(ix, iy)| grid.node(ix, iy)).collect();
    let data = ArrayData::new(d1, d2, snapped, Some(medium.params.seed))?;
    Ok(Experiment { data, diagnostics })
}

/// Add circular complex Gaussian noise to each data matrix so that its
/// signal-to-noise power ratio equals `snr_db`. An infinite SNR, or a matrix
/// with zero power, leaves the data unchanged.
pub fn add_noise(data: &ArrayData, snr_db: f64, seed: u64) -> Result<ArrayData> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("SNR must be a number above −∞ dB, got {snr_db}")));
    }
    let mut out = data.clone();
    if snr_db == f64::INFINITY {
        return Ok(out);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for j in Harmonic::BOTH {
        let d = out.harmonic_mut(j);
        let power = d.iter().map(|z| z.norm_sqr()).sum::<f64>() / d.len() as f64;
        if power == 0.0 {
            continue;
        }
        let std = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
        for z in d.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += C64::new(re, im) * std;
        }
    }
    Ok(out)
}
