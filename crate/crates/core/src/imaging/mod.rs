//! Kirchhoff migration and coherent interferometric (CINT) imaging.
//!
//! Both functionals backpropagate the data with the exact 2D Green's function
//! at the harmonic's wavenumber `jk`. With
//! `b(s, q; y) = d(s, q)·G₀*(y, x_s)·e^{−ijkθ_q·y}`:
//!
//! * migration is `|Σ_{s,q} b(s, q; y)|`;
//! * CINT is `Σ Φ((x_s−x_s')/X)·Φ((φ_q−φ_q')/Θ)·b(s, q; y)·b*(s', q'; y)`
//!   over pairs of nearby sensors and nearby directions.
//!
//! The CINT double sum factors over the two window matrices: with
//! `c = W_x·b·W_θ` the image is `Re Σ b·c*`, which costs
//! `O(N_x·N_θ·(W_x + W_θ))` per point instead of `O(N_x·W_x·N_θ·W_θ)`.

mod metrics;
mod psf;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{peak_metrics, significant_peaks, PeakMetrics};
pub use psf::{
    aperture_factor, cone_factor_2d, cone_factor_3d, fwhm_sinc_amplitude, fwhm_sinc_squared,
    psf_curves, sinc, PsfSample,
};

use crate::acquisition::ArrayData;
use crate::error::{Error, Result};
use crate::geometry::{Grid2, Point2};
use crate::waves::{g0_2d_radial, Harmonic};
use crate::C64;

/// Rectangle of search points and the harmonic to image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub grid: Grid2,
    pub harmonic: Harmonic,
}

impl SearchGrid {
    pub fn new(grid: Grid2, harmonic: Harmonic) -> Self {
        SearchGrid { grid, harmonic }
    }

    /// Square of side `side` centred at `centre` with spacing `h`.
    pub fn square(centre: Point2, side: f64, h: f64, harmonic: Harmonic) -> Result<Self> {
        let origin = Point2::new(centre.x - side / 2.0, centre.y - side / 2.0);
        Ok(SearchGrid { grid: Grid2::covering(origin, side, side, h)?, harmonic })
    }
}

/// Shape of the CINT window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// `exp(−z²/2)`.
    Gaussian,
    /// Indicator of `|z| ≤ 1`.
    Hard,
}

impl Window {
    fn weight(self, z: f64) -> f64 {
        match self {
            Window::Gaussian => (-0.5 * z * z).exp(),
            Window::Hard => {
                if z.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Thresholds of the CINT cross-correlations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CintParams {
    /// Sensor-offset scale `X`; `f64::INFINITY` disables it.
    pub x: f64,
    /// Direction-offset scale `Θ` in radians; `f64::INFINITY` disables it.
    pub theta: f64,
    #[serde(default = "default_window")]
    pub window: Window,
    /// Pairs farther apart than `cutoff` scales are skipped.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

fn default_window() -> Window {
    Window::Gaussian
}

fn default_cutoff() -> f64 {
    3.0
}

impl CintParams {
    pub fn gaussian(x: f64, theta: f64) -> Self {
        CintParams { x, theta, window: Window::Gaussian, cutoff: 3.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x > 0.0) || !(self.theta > 0.0) {
            return Err(Error::invalid("CINT thresholds X and Θ must be positive"));
        }
        if !(self.cutoff >= 1.0 && self.cutoff.is_finite()) {
            return Err(Error::invalid("CINT cutoff multiple must be finite and at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Migration,
    Cint,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "migration" => Ok(Method::Migration),
            "cint" => Ok(Method::Cint),
            _ => Err(Error::invalid(format!("unknown imaging method '{s}' (use migration or cint)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Migration => "migration",
            Method::Cint => "cint",
        })
    }
}

/// How an image was made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: Method,
    pub harmonic: Harmonic,
    pub cint: Option<CintParams>,
    pub seed: Option<u64>,
}

/// Real image over a search grid. `values` are raw (not normalized).
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    pub search: SearchGrid,
    /// Shape `(ny, nx)`.
    pub values: Array2<f64>,
    pub provenance: Provenance,
}

impl ImageGrid {
    /// Largest absolute raw value.
    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values divided by [`max_value`](Self::max_value) (all zero for a zero
    /// image).
    pub fn normalized(&self) -> Array2<f64> {
        let m = self.max_value();
        if m == 0.0 {
            self.values.clone()
        } else {
            self.values.mapv(|v| v / m)
        }
    }

    /// Value at the search node nearest to `p`, if `p` is inside the grid.
    pub fn value_at(&self, p: Point2) -> Option<f64> {
        self.search.grid.nearest_node(p).map(|(ix, iy)| self.values[[iy, ix]])
    }

    /// Position and value of the global maximum (first in row-major order).
    pub fn argmax(&self) -> (Point2, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for ((iy, ix), &v) in self.values.indexed_iter() {
            if v > best.2 {
                best = (ix, iy, v);
            }
        }
        (self.search.grid.node(best.0, best.1), best.2)
    }
}

/// Backpropagation factors shared by both functionals.
struct Backprop<'a> {
    data: &'a Array2<C64>,
    sensors: &'a [Point2],
    directions: Vec<Point2>,
    jk: f64,
}

impl<'a> Backprop<'a> {
    fn new(data: &'a ArrayData, harmonic: Harmonic) -> Result<Self> {
        data.validate()?;
        let jk = harmonic.factor() * data.geometry.k();
        Ok(Backprop {
            data: data.harmonic(harmonic),
            sensors: &data.geometry.sensors,
            directions: data.geometry.directions(),
            jk,
        })
    }

    fn check_points(&self, grid: &Grid2) -> Result<()> {
        let tol = 1e-9 * grid.spacing;
        for &x in self.sensors {
            if let Some((ix, iy)) = grid.nearest_node(x) {
                if grid.node(ix, iy).distance(x) <= tol {
                    return Err(Error::CoincidentPoints(format!("search point and sensor at {x}")));
                }
            }
        }
        Ok(())
    }

    /// `b(s, q; y)` as a row-major `N_x × N_θ` buffer.
    fn fill(&self, y: Point2, b: &mut [C64], phase: &mut [C64]) {
        let nq = self.directions.len();
        for (q, t) in self.directions.iter().enumerate() {
            phase[q] = C64::from_polar(1.0, -self.jk * t.dot(y));
        }
        for (s, &x) in self.sensors.iter().enumerate() {
            let g = g0_2d_radial(x.distance(y), self.jk).conj();
            for q in 0..nq {
                b[s * nq + q] = self.data[[s, q]] * g * phase[q];
            }
        }
    }

    fn map_grid<F>(&self, grid: &Grid2, f: F) -> Array2<C64>
    where
        F: Fn(&[C64]) -> C64 + Sync,
    {
        let n = self.sensors.len() * self.directions.len();
        let rows: Vec<Vec<C64>> = (0..grid.ny)
            .into_par_iter()
            .map(|iy| {
                let mut b = vec![C64::new(0.0, 0.0); n];
                let mut phase = vec![C64::new(0.0, 0.0); self.directions.len()];
                (0..grid.nx)
                    .map(|ix| {
                        self.fill(grid.node(ix, iy), &mut b, &mut phase);
                        f(&b)
                    })
                    .collect()
            })
            .collect();
        Array2::from_shape_fn(grid.shape(), |(iy, ix)| rows[iy][ix])
    }
}

/// Complex migration functional `Σ_{s,q} b(s, q; y)` before the modulus.
pub fn migrate_field(data: &ArrayData, search: &SearchGrid) -> Result<Array2<C64>> {
    let bp = Backprop::new(data, search.harmonic)?;
    bp.check_points(&search.grid)?;
    Ok(bp.map_grid(&search.grid, |b| b.iter().sum()))
}

/// Migration image `|Σ_{s,q} b(s, q; y)|`.
pub fn migrate(data: &ArrayData, search: &SearchGrid) -> Result<ImageGrid> {
    let field = migrate_field(data, search)?;
    Ok(ImageGrid {
        search: *search,
        values: field.mapv(|z| z.norm()),
        provenance: Provenance {
            method: Method::Migration,
            harmonic: search.harmonic,
            cint: None,
            seed: data.seed,
        },
    })
}

/// Banded symmetric window matrix over sorted-or-not scalar coordinates:
/// for each index, the neighbours within `cutoff·scale` and their weights.
pub(crate) fn window_neighbours(
    coords: &[f64],
    scale: f64,
    window: Window,
    cutoff: f64,
) -> Vec<Vec<(usize, f64)>> {
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| coords[a].total_cmp(&coords[b]));
    let reach = cutoff * scale;
    let mut out = vec![Vec::new(); coords.len()];
    let mut lo = 0;
    for (pos, &i) in order.iter().enumerate() {
        while coords[i] - coords[order[lo]] > reach {
            lo += 1;
        }
        let mut hi = pos;
        while hi + 1 < order.len() && coords[order[hi + 1]] - coords[i] <= reach {
            hi += 1;
        }
        for &j in &order[lo..=hi] {
            let z = if scale.is_infinite() { 0.0 } else { (coords[i] - coords[j]) / scale };
            let w = window.weight(z);
            if w != 0.0 {
                out[i].push((j, w));
            }
        }
        out[i].sort_by_key(|&(j, _)| j);
    }
    out
}

/// Complex CINT sum before taking the real part.
pub fn cint_field(data: &ArrayData, search: &SearchGrid, params: &CintParams) -> Result<Array2<C64>> {
    params.validate()?;
    let bp = Backprop::new(data, search.harmonic)?;
    bp.check_points(&search.grid)?;
    let g = &data.geometry;
    let wx = window_neighbours(&g.sensor_coordinates(), params.x, params.window, params.cutoff);
    let wt = window_neighbours(&g.angles, params.theta, params.window, params.cutoff);
    let (ns, nq) = (g.n_sensors(), g.n_angles());
    Ok(bp.map_grid(&search.grid, |b| {
        // t = b·W_θ, then c = W_x·t, image = Σ b·c*.
        let mut t = vec![C64::new(0.0, 0.0); ns * nq];
        for s in 0..ns {
            for q in 0..nq {
                let mut acc = C64::new(0.0, 0.0);
                for &(q2, w) in &wt[q] {
                    acc += b[s * nq + q2] * w;
                }
                t[s * nq + q] = acc;
            }
        }
        let mut total = C64::new(0.0, 0.0);
        for s in 0..ns {
            for q in 0..nq {
                let mut c = C64::new(0.0, 0.0);
                for &(s2, w) in &wx[s] {
                    c += t[s2 * nq + q] * w;
                }
                total += b[s * nq + q] * c.conj();
            }
        }
        total
    }))
}

/// CINT image, the real part of [`cint_field`].
pub fn cint(data: &ArrayData, search: &SearchGrid, params: &CintParams) -> Result<ImageGrid> {
    let field = cint_field(data, search, params)?;
    Ok(ImageGrid {
        search: *search,
        values: field.mapv(|z| z.re),
        provenance: Provenance {
            method: Method::Cint,
            harmonic: search.harmonic,
            cint: Some(*params),
            seed: data.seed,
        },
    })
}

/// Image with either method.
pub fn form_image(
    data: &ArrayData,
    search: &SearchGrid,
    method: Method,
    params: &CintParams,
) -> Result<ImageGrid> {
    match method {
        Method::Migration => migrate(data, search),
        Method::Cint => cint(data, search, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::AcquisitionGeometry;
    use crate::waves::plane_wave_at;

    fn point_data(y: Point2) -> ArrayData {
        let g = AcquisitionGeometry::bottom_array(10.0, 41, 10).unwrap();
        let k = g.k();
        let dirs = g.directions();
        let d = |j: f64| {
            Array2::from_shape_fn((41, 10), |(s, q)| {
                g0_2d_radial(g.sensors[s].distance(y), j * k) * plane_wave_at(y, dirs[q], j * k)
            })
        };
        ArrayData::new(d(1.0), d(2.0), g, None).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_images() {
        let g = AcquisitionGeometry::bottom_array(4.0, 5, 3).unwrap();
        let data = ArrayData::zeros(g);
        let s = SearchGrid::square(Point2::new(0.0, 3.0), 1.0, 0.25, Harmonic::Fundamental).unwrap();
        assert!(migrate(&data, &s).unwrap().values.iter().all(|&v| v == 0.0));
        let c = cint(&data, &s, &CintParams::gaussian(1.0, 0.3)).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn migration_peaks_at_point_source() {
        let y = Point2::new(0.5, 5.0);
        let data = point_data(y);
        for j in Harmonic::BOTH {
            let s = SearchGrid::square(y, 2.0, 0.05, j).unwrap();
            let img = migrate(&data, &s).unwrap();
            let (p, _) = img.argmax();
            assert!(p.distance(y) < 1e-9, "{j}: peak at {p}");
        }
    }

    #[test]
    fn search_point_on_sensor_is_rejected() {
        let data = point_data(Point2::new(0.0, 5.0));
        let s = SearchGrid::square(Point2::new(0.0, 0.0), 1.0, 0.25, Harmonic::Second).unwrap();
        assert!(matches!(migrate(&data, &s), Err(Error::CoincidentPoints(_))));
    }

    #[test]
    fn window_neighbours_respect_cutoff() {
        let coords = [0.0, 1.0, 2.0, 3.5, 10.0];
        let w = window_neighbours(&coords, 1.0, Window::Gaussian, 1.5);
        let idx: Vec<usize> = w[1].iter().map(|&(j, _)| j).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        assert_eq!(w[4], vec![(4, 1.0)]);
        let all = window_neighbours(&coords, f64::INFINITY, Window::Gaussian, 3.0);
        assert!(all.iter().all(|r| r.len() == 5 && r.iter().all(|&(_, w)| w == 1.0)));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("cint".parse::<Method>().unwrap(), Method::Cint);
        assert!("kirchhoff".parse::<Method>().is_err());
    }
}
