//! Monte-Carlo ensembles over medium realizations and the stability metrics
//! that compare migration with CINT.
//!
//! Stability is measured three ways for each imaging method:
//!
//! * SNR at each true scatterer, `mean/std` of the raw image value at the
//!   nearest search node across realizations, with bootstrap error bars;
//! * the mean pairwise Pearson correlation between realization images over
//!   windows around the scatterers;
//! * the spread of localization errors.
//!
//! For migration the SNR of the complex functional `Σ b` is reported as
//! well: `|E z|/√(E|z − E z|²)`. That is the quantity that is small in the
//! randomized regime; the modulus image always has a positive mean.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{simulate_experiment, AcquisitionGeometry, ArrayData, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::{Grid2, Point2};
use crate::gomodel::{synth_data_go, GoOptions};
use crate::imaging::{cint, migrate, migrate_field, peak_metrics, CintParams, ImageGrid, Method, SearchGrid};
use crate::medium::{gen_random_medium, MediumParams, RandomFourierField, ScattererSet};
use crate::C64;

/// Where realization data comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// Finite-difference solution of the coupled Helmholtz system.
    Pde,
    /// Geometrical-optics phase screens.
    Go,
}

impl std::str::FromStr for DataSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pde" => Ok(DataSource::Pde),
            "go" => Ok(DataSource::Go),
            _ => Err(Error::invalid(format!("unknown data source `{s}` (expected pde or go)"))),
        }
    }
}

/// Rectangle `[lo, hi]` holding the medium. The PDE solver samples it with
/// spacing `spacing`; the GO model uses it as the support of its rays.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub lo: Point2,
    pub hi: Point2,
    pub spacing: f64,
}

impl Domain {
    pub fn grid(&self) -> Result<Grid2> {
        let d = self.hi - self.lo;
        Grid2::covering(self.lo, d.x, d.y, self.spacing)
    }
}

/// Everything a realization needs except its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    /// Medium parameters; the seed field is replaced per realization.
    pub medium: MediumParams,
    pub domain: Domain,
    pub scatterers: ScattererSet,
    pub geometry: AcquisitionGeometry,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub go: GoOptions,
}

/// Array data of the realization with medium seed `seed`.
pub fn generate_data(scene: &Scene, source: DataSource, seed: u64) -> Result<ArrayData> {
    let params = scene.medium.with_seed(seed);
    let mut data = match source {
        DataSource::Pde => {
            let medium = gen_random_medium(&scene.domain.grid()?, &params)?;
            simulate_experiment(&medium, &scene.scatterers, &scene.geometry, &scene.solver)?.data
        }
        DataSource::Go => {
            let field = RandomFourierField::new(params)?.with_support(scene.domain.lo, scene.domain.hi);
            synth_data_go(&field, &scene.scatterers, &scene.geometry, scene.go)?
        }
    };
    data.seed = Some(seed);
    Ok(data)
}

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;

/// Side of the square windows around the scatterers over which image
/// correlations are measured, in wavelengths.
pub const DEFAULT_CORRELATION_WINDOW: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub scene: Scene,
    pub seeds: Vec<u64>,
    pub source: DataSource,
    #[serde(default = "default_window")]
    pub correlation_window: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
}

fn default_window() -> f64 {
    DEFAULT_CORRELATION_WINDOW
}

fn default_resamples() -> usize {
    DEFAULT_BOOTSTRAP_RESAMPLES
}

impl EnsembleSpec {
    pub fn new(scene: Scene, seeds: Vec<u64>, source: DataSource) -> Self {
        EnsembleSpec {
            scene,
            seeds,
            source,
            correlation_window: DEFAULT_CORRELATION_WINDOW,
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            bootstrap_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.len() < 2 {
            return Err(Error::invalid("an ensemble needs at least two seeds"));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("ensemble seeds must be distinct"));
        }
        if !(self.correlation_window > 0.0) {
            return Err(Error::invalid("correlation window must be positive"));
        }
        self.scene.scatterers.validate()?;
        self.scene.geometry.validate()
    }
}

/// Ensemble statistics of one imaging method.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodStats {
    pub method: Method,
    #[serde(skip)]
    pub mean: Array2<f64>,
    #[serde(skip)]
    pub std: Array2<f64>,
    /// Per scatterer, `mean/std` of the raw image value at its nearest node.
    pub snr_at_truth: Vec<f64>,
    /// Bootstrap standard error of `snr_at_truth`.
    pub snr_std_error: Vec<f64>,
    /// Migration only: SNR of the complex functional at each scatterer.
    pub complex_snr_at_truth: Option<Vec<f64>>,
    pub complex_snr_std_error: Option<Vec<f64>>,
    /// Pearson correlation between realization images over the windows.
    pub correlation_matrix: Vec<Vec<f64>>,
    pub mean_correlation: f64,
    /// `localization_errors[r][i]`: realization `r`, scatterer `i`; `NaN`
    /// when no significant peak was found.
    pub localization_errors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub seeds: Vec<u64>,
    pub source: DataSource,
    pub search: SearchGrid,
    pub cint: CintParams,
    pub truth: Vec<Point2>,
    pub methods: Vec<MethodStats>,
}

impl StabilityReport {
    pub fn method(&self, m: Method) -> Option<&MethodStats> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn mean_image(&self, m: Method) -> Option<ImageGrid> {
        self.method(m).map(|s| self.wrap(m, s.mean.clone()))
    }

    pub fn std_image(&self, m: Method) -> Option<ImageGrid> {
        self.method(m).map(|s| self.wrap(m, s.std.clone()))
    }

    fn wrap(&self, m: Method, values: Array2<f64>) -> ImageGrid {
        ImageGrid {
            search: self.search,
            values,
            provenance: crate::imaging::Provenance {
                method: m,
                harmonic: self.search.harmonic,
                cint: (m == Method::Cint).then_some(self.cint),
                seed: None,
            },
        }
    }
}

/// `mean/std` of real samples (sample std with `n − 1`); `+∞` for a
/// non-zero mean with zero spread, `NaN` for all zeros.
pub fn snr(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    mean / var.sqrt()
}

/// `|E z|/√(E|z − E z|²)` of complex samples.
pub fn complex_snr(samples: &[C64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<C64>() / n;
    let var = samples.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    mean.norm() / var.sqrt()
}

/// Pearson correlation; exactly 1 for bitwise identical inputs and 0 when
/// either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 1.0;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Bootstrap standard error of `stat` over `resamples` resamplings with
/// replacement.
pub fn bootstrap_std_error<T: Clone>(
    samples: &[T],
    resamples: usize,
    seed: u64,
    stat: impl Fn(&[T]) -> f64,
) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut buf = Vec::with_capacity(n);
    let values: Vec<f64> = (0..resamples)
        .map(|_| {
            buf.clear();
            buf.extend((0..n).map(|_| samples[rng.random_range(0..n)].clone()));
            stat(&buf)
        })
        .filter(|v| v.is_finite())
        .collect();
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Result of imaging one realization with every method.
struct RealizationImages {
    images: Vec<ImageGrid>,
    /// Complex migration functional at each truth node.
    migration_at_truth: Vec<C64>,
}

/// Search-grid nodes nearest to each scatterer.
fn truth_nodes(search: &SearchGrid, truth: &[Point2]) -> Result<Vec<(usize, usize)>> {
    truth
        .iter()
        .map(|&p| {
            search
                .grid
                .nearest_node(p)
                .ok_or_else(|| Error::OutsideSupport(format!("scatterer {p} is outside the search grid")))
        })
        .collect()
}

/// Generate, image and aggregate every realization of `spec`.
pub fn run_ensemble(
    spec: &EnsembleSpec,
    methods: &[Method],
    cint_params: &CintParams,
    search: &SearchGrid,
) -> Result<StabilityReport> {
    spec.validate()?;
    if methods.is_empty() {
        return Err(Error::invalid("no imaging method requested"));
    }
    cint_params.validate()?;
    let truth = spec.scene.scatterers.positions();
    let nodes = truth_nodes(search, &truth)?;
    let single_nodes = SearchGrid::new(Grid2::new(Point2::ORIGIN, 1.0, 1, 1)?, search.harmonic);

    let per: Vec<Result<RealizationImages>> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let run = || -> Result<RealizationImages> {
                let data = generate_data(&spec.scene, spec.source, seed)?;
                let images = methods
                    .iter()
                    .map(|m| match m {
                        Method::Migration => migrate(&data, search),
                        Method::Cint => cint(&data, search, cint_params),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let migration_at_truth = truth
                    .iter()
                    .map(|&p| {
                        let mut s = single_nodes;
                        s.grid.origin = p;
                        Ok(migrate_field(&data, &s)?[[0, 0]])
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(RealizationImages { images, migration_at_truth })
            };
            run().map_err(|e| Error::Realization { seed, source: Box::new(e) })
        })
        .collect();
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;

    let window = window_mask(&search.grid, &truth, spec.correlation_window);
    let n = per.len() as f64;
    let stats = methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let images: Vec<&ImageGrid> = per.iter().map(|r| &r.images[mi]).collect();
            let shape = images[0].values.dim();
            let mut mean = Array2::<f64>::zeros(shape);
            for img in &images {
                mean += &img.values;
            }
            mean /= n;
            let mut var = Array2::<f64>::zeros(shape);
            for img in &images {
                var.zip_mut_with(&img.values, |v, x| *v += x * x);
            }
            let std = ndarray::Zip::from(&var)
                .and(&mean)
                .map_collect(|&s, &m| ((s - n * m * m) / (n - 1.0)).max(0.0).sqrt());

            let truth_samples: Vec<Vec<f64>> = nodes
                .iter()
                .map(|&(ix, iy)| images.iter().map(|img| img.values[[iy, ix]]).collect())
                .collect();
            let snr_at_truth = truth_samples.iter().map(|s| snr(s)).collect();
            let snr_std_error = truth_samples
                .iter()
                .enumerate()
                .map(|(i, s)| bootstrap_std_error(s, spec.bootstrap_resamples, spec.bootstrap_seed ^ i as u64, snr))
                .collect();
            let (complex_snr_at_truth, complex_snr_std_error) = if method == Method::Migration {
                let samples: Vec<Vec<C64>> = (0..truth.len())
                    .map(|i| per.iter().map(|r| r.migration_at_truth[i]).collect())
                    .collect();
                (
                    Some(samples.iter().map(|s| complex_snr(s)).collect()),
                    Some(
                        samples
                            .iter()
                            .enumerate()
                            .map(|(i, s)| {
                                bootstrap_std_error(s, spec.bootstrap_resamples, spec.bootstrap_seed ^ i as u64, complex_snr)
                            })
                            .collect(),
                    ),
                )
            } else {
                (None, None)
            };

            let windows: Vec<Vec<f64>> = images
                .iter()
                .map(|img| img.values.iter().zip(&window).filter(|(_, &w)| w).map(|(&v, _)| v).collect())
                .collect();
            let r = windows.len();
            let mut corr = vec![vec![1.0; r]; r];
            let mut total = 0.0;
            for a in 0..r {
                for b in a + 1..r {
                    let c = pearson(&windows[a], &windows[b]);
                    corr[a][b] = c;
                    corr[b][a] = c;
                    total += c;
                }
            }
            let mean_correlation = total / (r * (r - 1) / 2) as f64;

            let localization_errors = images
                .iter()
                .map(|img| {
                    let m = peak_metrics(img, &spec.scene.scatterers);
                    (0..truth.len())
                        .map(|i| m.iter().find(|p| p.scatterer == i).map_or(f64::NAN, |p| p.localization_error))
                        .collect()
                })
                .collect();

            MethodStats {
                method,
                mean,
                std,
                snr_at_truth,
                snr_std_error,
                complex_snr_at_truth,
                complex_snr_std_error,
                correlation_matrix: corr,
                mean_correlation,
                localization_errors,
            }
        })
        .collect();

    Ok(StabilityReport {
        seeds: spec.seeds.clone(),
        source: spec.source,
        search: *search,
        cint: *cint_params,
        truth,
        methods: stats,
    })
}

/// Row-major mask of search nodes inside a square of side `side` centred on
/// any scatterer.
fn window_mask(grid: &Grid2, truth: &[Point2], side: f64) -> Vec<bool> {
    let half = 0.5 * side + 1e-9 * grid.spacing;
    let mut mask = vec![false; grid.len()];
    for (ix, iy, p) in grid.nodes() {
        mask[iy * grid.nx + ix] = truth.iter().any(|t| (p.x - t.x).abs() <= half && (p.y - t.y).abs() <= half);
    }
    mask
}

/// Near-array artifact strength of an image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArtifactMetric {
    Ratio {
        /// Largest image value within `3λ` of the array.
        near_array: f64,
        /// Largest image value within `λ` of a scatterer.
        near_scatterers: f64,
        ratio: f64,
    },
    /// Nothing to compare: the image has no positive value near the
    /// scatterers.
    NoPeak,
}

impl ArtifactMetric {
    pub fn ratio(&self) -> Option<f64> {
        match self {
            ArtifactMetric::Ratio { ratio, .. } => Some(*ratio),
            ArtifactMetric::NoPeak => None,
        }
    }
}

/// Width of the strip along the array, in wavelengths.
pub const ARRAY_STRIP: f64 = 3.0;
/// Radius around each scatterer, in wavelengths.
pub const SCATTERER_NEIGHBOURHOOD: f64 = 1.0;

/// Ratio of the largest image value within `3λ` of the array segment to the
/// largest value within `λ` of a true scatterer.
pub fn artifact_scan(image: &ImageGrid, geometry: &AcquisitionGeometry, truth: &ScattererSet) -> Result<ArtifactMetric> {
    geometry.validate()?;
    let lam = geometry.wavelength;
    let coords = geometry.sensor_coordinates();
    let dir = geometry.array_direction();
    let a = geometry.sensors[0];
    let (lo, hi) = coords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &c| (l.min(c), h.max(c)));
    let dist_to_array = |p: Point2| {
        let t = (p - a).dot(dir).clamp(lo, hi);
        p.distance(a + dir * t)
    };
    let positions = truth.positions();
    let (mut near_array, mut near_scatterers) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (ix, iy, p) in image.search.grid.nodes() {
        let v = image.values[[iy, ix]];
        if dist_to_array(p) <= ARRAY_STRIP * lam {
            near_array = near_array.max(v);
        }
        if positions.iter().any(|s| s.distance(p) <= SCATTERER_NEIGHBOURHOOD * lam) {
            near_scatterers = near_scatterers.max(v);
        }
    }
    if !(near_scatterers > 0.0) || !near_array.is_finite() {
        return Ok(ArtifactMetric::NoPeak);
    }
    Ok(ArtifactMetric::Ratio { near_array, near_scatterers, ratio: near_array / near_scatterers })
}
