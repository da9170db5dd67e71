//! Experiment configuration. Every length is in units of the wavelength.
//!
//! All sections have defaults, so an empty JSON object `{}` is a complete
//! configuration describing the reference two-scatterer experiment on a
//! `20λ` square. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shgcint_core::acquisition::{AcquisitionGeometry, SolverConfig};
use shgcint_core::gomodel::{GoOptions, GoRegimeParams};
use shgcint_core::imaging::{CintParams, Method, SearchGrid, Window};
use shgcint_core::medium::{MediumParams, Scatterer, ScattererSet, DEFAULT_MODE_COUNT};
use shgcint_core::stats::{DataSource, Domain, EnsembleSpec, Scene, DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_CORRELATION_WINDOW};
use shgcint_core::waves::Harmonic;
use shgcint_core::{Grid2, Point2};

use crate::error::CliError;

/// Square domain `[−side/2, side/2] × [0, side]` with the array on its
/// bottom side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub side: f64,
    /// Finite-difference grid spacing.
    pub spacing: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { side: 20.0, spacing: 0.05 }
    }
}

/// Sensors spread evenly over the bottom side and incident directions
/// spread evenly over a cone around the upward normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    pub sensors: usize,
    pub angles: usize,
    pub cone_half_angle: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig { sensors: 81, angles: 20, cone_half_angle: PI / 4.0 }
    }
}

/// Rectangle of image points `[lo, hi]` sampled with `spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub lo: Point2,
    pub hi: Point2,
    pub spacing: f64,
}

impl SearchConfig {
    pub fn grid(&self, harmonic: Harmonic) -> Result<SearchGrid, CliError> {
        let d = self.hi - self.lo;
        Ok(SearchGrid::new(Grid2::covering(self.lo, d.x, d.y, self.spacing)?, harmonic))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImagingConfig {
    pub method: Method,
    /// CINT sensor-offset threshold `X` for `[j = 1, j = 2]`.
    pub cint_x: [f64; 2],
    /// CINT direction-offset threshold `Θ`.
    pub cint_theta: f64,
    pub window: Window,
    /// Pairs farther apart than `cutoff` thresholds are skipped.
    pub cutoff: f64,
    pub search: SearchConfig,
}

impl Default for ImagingConfig {
    fn default() -> Self {
        ImagingConfig {
            method: Method::Cint,
            cint_x: [7.0, 3.5],
            cint_theta: PI / 5.0,
            window: Window::Gaussian,
            cutoff: 3.0,
            search: SearchConfig { lo: Point2::new(-10.0, 0.5), hi: Point2::new(10.0, 20.0), spacing: 0.1 },
        }
    }
}

impl ImagingConfig {
    pub fn cint_params(&self, harmonic: Harmonic) -> CintParams {
        CintParams {
            x: self.cint_x[usize::from(harmonic.order()) - 1],
            theta: self.cint_theta,
            window: self.window,
            cutoff: self.cutoff,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// Realizations use seeds `first_seed, first_seed + 1, …`.
    pub realizations: usize,
    pub first_seed: u64,
    pub source: DataSource,
    pub harmonic: Harmonic,
    pub correlation_window: f64,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    pub search: SearchConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            realizations: 8,
            first_seed: 1,
            source: DataSource::Pde,
            harmonic: Harmonic::Second,
            correlation_window: DEFAULT_CORRELATION_WINDOW,
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            bootstrap_seed: 0,
            search: SearchConfig { lo: Point2::new(-5.0, 7.0), hi: Point2::new(6.0, 16.0), spacing: 0.1 },
        }
    }
}

/// Offsets at which point spread functions are tabulated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsfConfig {
    pub max_offset: f64,
    pub samples: usize,
}

impl Default for PsfConfig {
    fn default() -> Self {
        PsfConfig { max_offset: 5.0, samples: 201 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub medium: MediumParams,
    pub domain: DomainConfig,
    pub scatterers: Vec<Scatterer>,
    pub array: ArrayConfig,
    pub solver: SolverConfig,
    pub go: GoOptions,
    pub imaging: ImagingConfig,
    pub ensemble: EnsembleConfig,
    pub psf: PsfConfig,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let disk = |x, y| Scatterer { position: Point2::new(x, y), radius: 0.1, eta1: 1.0, eta2: 0.01 };
        ExperimentConfig {
            medium: MediumParams {
                correlation_length: 0.3,
                amplitude: 0.01 * 4.0 * PI,
                mode_count: DEFAULT_MODE_COUNT,
                seed: 0,
            },
            domain: DomainConfig::default(),
            scatterers: vec![disk(-2.0, 10.0), disk(3.0, 13.0)],
            array: ArrayConfig::default(),
            solver: SolverConfig::default(),
            go: GoOptions::default(),
            imaging: ImagingConfig::default(),
            ensemble: EnsembleConfig::default(),
            psf: PsfConfig::default(),
            output: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Read and validate a configuration file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.medium.validate()?;
        self.solver.pml.validate()?;
        let d = self.domain;
        if !(d.side > 0.0 && d.side.is_finite() && d.spacing > 0.0 && d.spacing.is_finite()) {
            return Err(CliError::Config("domain side and spacing must be positive".into()));
        }
        self.domain()?.grid()?;
        ScattererSet::new(self.scatterers.clone())?;
        self.geometry()?;
        for j in Harmonic::BOTH {
            self.imaging.cint_params(j).validate()?;
        }
        self.imaging.search.grid(Harmonic::Fundamental)?;
        self.ensemble.search.grid(self.ensemble.harmonic)?;
        if self.ensemble.realizations < 2 {
            return Err(CliError::Config("an ensemble needs at least 2 realizations".into()));
        }
        if !(self.psf.max_offset > 0.0) || self.psf.samples < 2 {
            return Err(CliError::Config("psf needs a positive max_offset and at least 2 samples".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        let s = self.domain.side;
        Ok(Domain { lo: Point2::new(-s / 2.0, 0.0), hi: Point2::new(s / 2.0, s), spacing: self.domain.spacing })
    }

    pub fn geometry(&self) -> Result<AcquisitionGeometry, CliError> {
        let s = self.domain.side;
        Ok(AcquisitionGeometry::linear(
            1.0,
            (-s / 2.0, s / 2.0, 0.0),
            self.array.sensors,
            Point2::new(1.0, 0.0),
            self.array.cone_half_angle,
            self.array.angles,
        )?)
    }

    pub fn scene(&self) -> Result<Scene, CliError> {
        Ok(Scene {
            medium: self.medium,
            domain: self.domain()?,
            scatterers: ScattererSet::new(self.scatterers.clone())?,
            geometry: self.geometry()?,
            solver: self.solver,
            go: self.go,
        })
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec, CliError> {
        let e = &self.ensemble;
        let seeds = (0..e.realizations as u64).map(|i| e.first_seed + i).collect();
        let mut spec = EnsembleSpec::new(self.scene()?, seeds, e.source);
        spec.correlation_window = e.correlation_window;
        spec.bootstrap_resamples = e.bootstrap_resamples;
        spec.bootstrap_seed = e.bootstrap_seed;
        Ok(spec)
    }

    /// Scales of the phase-screen theory for this experiment: the range is
    /// the mean distance of the scatterers from the array.
    pub fn regime(&self) -> Result<GoRegimeParams, CliError> {
        if self.scatterers.is_empty() {
            return Err(CliError::Config("theory needs at least one scatterer to set the range".into()));
        }
        let range = self.scatterers.iter().map(|s| s.position.y).sum::<f64>() / self.scatterers.len() as f64;
        let params = GoRegimeParams {
            wavelength: 1.0,
            correlation_length: self.medium.correlation_length,
            amplitude: self.medium.amplitude,
            range,
            aperture: self.domain.side,
            cone_half_angle: self.array.cone_half_angle,
            entry_distance: None,
        };
        params.validate()?;
        Ok(params)
    }
}
