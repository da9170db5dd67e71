//! Localization and resolution metrics of an image against known scatterers.

use serde::{Deserialize, Serialize};

use super::ImageGrid;
use crate::geometry::Point2;
use crate::medium::ScattererSet;

/// Points farther than this from every scatterer form the background
/// (lengths are in wavelengths).
const BACKGROUND_DISTANCE: f64 = 3.0;

/// Local maxima below this fraction of the global maximum are ignored when
/// looking for the peak nearest to a scatterer.
const PEAK_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakMetrics {
    pub scatterer: usize,
    /// Distance from the scatterer to the nearest significant peak.
    pub localization_error: f64,
    pub peak: Point2,
    pub peak_value: f64,
    /// Full width at half maximum through the peak along `x`, if both half
    /// crossings fall inside the image.
    pub fwhm_x: Option<f64>,
    pub fwhm_y: Option<f64>,
    /// Peak value over the median background value, when the background
    /// is non-empty and positive.
    pub peak_to_background: Option<f64>,
}

/// Local maxima (not smaller than any of their 8 neighbours) whose value is
/// at least `fraction` of the global maximum; returns `(ix, iy, value)`.
pub fn significant_peaks(image: &ImageGrid, fraction: f64) -> Vec<(usize, usize, f64)> {
    let v = &image.values;
    let (ny, nx) = v.dim();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let c = v[[iy, ix]];
            if c < fraction * max {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (x, y) = (ix as i64 + dx, iy as i64 + dy);
                    if (dx, dy) == (0, 0) || x < 0 || y < 0 || x >= nx as i64 || y >= ny as i64 {
                        continue;
                    }
                    if v[[y as usize, x as usize]] > c {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                out.push((ix, iy, c));
            }
        }
    }
    out
}

/// Linear-interpolated half-maximum width of a 1D profile around `i0`.
fn fwhm_1d(profile: &[f64], i0: usize, h: f64) -> Option<f64> {
    let half = 0.5 * profile[i0];
    let mut l = i0;
    while profile[l] >= half {
        if l == 0 {
            return None;
        }
        l -= 1;
    }
    let left = l as f64 + (half - profile[l]) / (profile[l + 1] - profile[l]);
    let mut r = i0;
    while profile[r] >= half {
        if r + 1 == profile.len() {
            return None;
        }
        r += 1;
    }
    let right = r as f64 - (half - profile[r]) / (profile[r - 1] - profile[r]);
    Some((right - left) * h)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Per-scatterer localization error, FWHM through the nearest significant
/// peak, and peak-to-background ratio.
pub fn peak_metrics(image: &ImageGrid, truth: &ScattererSet) -> Vec<PeakMetrics> {
    let grid = image.search.grid;
    let peaks = significant_peaks(image, PEAK_FRACTION);
    let positions = truth.positions();
    let background: Vec<f64> = grid
        .nodes()
        .filter(|(_, _, p)| positions.iter().all(|s| s.distance(*p) > BACKGROUND_DISTANCE))
        .map(|(ix, iy, _)| image.values[[iy, ix]])
        .collect();
    let bg = median(background).filter(|m| *m > 0.0);

    positions
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| {
            let &(ix, iy, value) = peaks.iter().min_by(|a, b| {
                let da = grid.node(a.0, a.1).distance(s);
                let db = grid.node(b.0, b.1).distance(s);
                da.total_cmp(&db)
            })?;
            let peak = grid.node(ix, iy);
            let row: Vec<f64> = (0..grid.nx).map(|x| image.values[[iy, x]]).collect();
            let col: Vec<f64> = (0..grid.ny).map(|y| image.values[[y, ix]]).collect();
            Some(PeakMetrics {
                scatterer: i,
                localization_error: peak.distance(s),
                peak,
                peak_value: value,
                fwhm_x: fwhm_1d(&row, ix, grid.spacing),
                fwhm_y: fwhm_1d(&col, iy, grid.spacing),
                peak_to_background: bg.map(|b| value / b),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid2;
    use crate::imaging::{Method, Provenance, SearchGrid};
    use crate::medium::Scatterer;
    use crate::waves::Harmonic;
    use ndarray::Array2;

    fn image(values: Array2<f64>, h: f64) -> ImageGrid {
        let (ny, nx) = values.dim();
        ImageGrid {
            search: SearchGrid::new(Grid2::new(Point2::ORIGIN, h, nx, ny).unwrap(), Harmonic::Fundamental),
            values,
            provenance: Provenance { method: Method::Migration, harmonic: Harmonic::Fundamental, cint: None, seed: None },
        }
    }

    fn truth(p: Point2) -> ScattererSet {
        ScattererSet::new(vec![Scatterer { position: p, radius: 0.1, eta1: 1.0, eta2: 0.01 }]).unwrap()
    }

    #[test]
    fn delta_image_localizes_exactly() {
        let mut v = Array2::zeros((41, 41));
        v[[20, 10]] = 1.0;
        let img = image(v, 0.25);
        let m = peak_metrics(&img, &truth(Point2::new(2.5, 5.0)));
        assert_eq!(m[0].localization_error, 0.0);
    }

    #[test]
    fn flat_image_has_unit_contrast() {
        let img = image(Array2::from_elem((41, 41), 2.0), 0.25);
        let m = peak_metrics(&img, &truth(Point2::new(5.0, 5.0)));
        assert!((m[0].peak_to_background.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_profile_width() {
        // Tent of half-width 1: FWHM exactly 1.
        let h = 0.01;
        let v = Array2::from_shape_fn((3, 401), |(_, ix)| (1.0 - (ix as f64 * h - 2.0).abs()).max(0.0));
        let img = image(v, h);
        let m = peak_metrics(&img, &truth(Point2::new(2.0, 0.01)));
        assert!((m[0].fwhm_x.unwrap() - 1.0).abs() < 1e-9);
        assert!(m[0].fwhm_y.is_none());
    }
}
