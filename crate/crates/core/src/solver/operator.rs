//! Finite-difference Helmholtz operator with a perfectly matched layer.
//!
//! The operator acts on the padded grid (interior plus `n_pml` nodes of
//! absorbing layer on each side) and discretizes
//! `∂x((e_y/e_x)∂x·) + ∂y((e_x/e_y)∂y·) + (jk)²·e_x·e_y·(1 + V)` with a
//! 5-point flux-form stencil. Face coefficients are harmonic means of the
//! neighbouring nodal values and the field vanishes on a ghost layer just
//! outside the padded grid.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Grid2;
use crate::medium::MediumRealization;
use crate::waves::Wavenumber;
use crate::C64;

/// Absorbing layer parameters.
///
/// The stretching factor is `e(d) = 1 + i·a₀·(d/L)²` at depth `d` into a
/// layer of width `L`. With outgoing waves `e^{+ikr}` this sign makes the
/// stretched coordinate gain a positive imaginary part, i.e. decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmlParams {
    /// Layer width `L` in units of the base wavelength.
    pub width: f64,
    /// Strength `a₀`; zero turns the layer into plain padding.
    pub strength: f64,
}

impl Default for PmlParams {
    fn default() -> Self {
        PmlParams { width: 1.5, strength: 1.79 }
    }
}

impl PmlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::invalid(format!("PML width must be positive, got {}", self.width)));
        }
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::invalid(format!(
                "PML strength must be non-negative, got {}",
                self.strength
            )));
        }
        Ok(())
    }

    /// Number of layer nodes per side for grid spacing `h`.
    pub fn node_count(&self, h: f64) -> usize {
        ((self.width / h).round() as usize).max(1)
    }
}

/// Interior grid embedded in the larger grid that includes the layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PaddedGrid {
    pub interior: Grid2,
    pub full: Grid2,
    pub pad: usize,
}

impl PaddedGrid {
    pub fn new(interior: Grid2, pad: usize) -> Self {
        PaddedGrid { interior, full: interior.padded(pad), pad }
    }

    pub fn len(&self) -> usize {
        self.full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.full.is_empty()
    }

    /// Linear index in the padded grid of interior node `(ix, iy)`.
    pub fn index_of_interior(&self, ix: usize, iy: usize) -> usize {
        self.full.index(ix + self.pad, iy + self.pad)
    }

    /// Copy an interior field into a padded vector that is zero in the layer.
    pub fn embed(&self, field: &Array2<C64>) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        for ((iy, ix), &v) in field.indexed_iter() {
            out[self.index_of_interior(ix, iy)] = v;
        }
        out
    }

    /// Restrict a padded vector to the interior nodes.
    pub fn extract(&self, full: &[C64]) -> Array2<C64> {
        Array2::from_shape_fn(self.interior.shape(), |(iy, ix)| full[self.index_of_interior(ix, iy)])
    }

    fn is_interior(&self, ix: usize, iy: usize) -> bool {
        ix >= self.pad
            && iy >= self.pad
            && ix < self.pad + self.interior.nx
            && iy < self.pad + self.interior.ny
    }
}

/// Sparse row-compressed matrix with complex entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<C64>,
}

impl CsrMatrix {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|r| {
                let mut s = C64::new(0.0, 0.0);
                for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                    s += self.val[p] * x[self.col[p]];
                }
                s
            })
            .collect()
    }

    pub fn get(&self, r: usize, c: usize) -> Option<C64> {
        (self.row_ptr[r]..self.row_ptr[r + 1]).find(|&p| self.col[p] == c).map(|p| self.val[p])
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (self.col[p], self.val[p]))
    }
}

/// The assembled Helmholtz operator `H_{jk}` on a padded grid.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub grid: PaddedGrid,
    pub wavenumber: Wavenumber,
    pub pml: PmlParams,
    pub matrix: CsrMatrix,
}

impl DiscreteOperator {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.apply(x)
    }

    pub fn len(&self) -> usize {
        self.matrix.n
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.n == 0
    }
}

/// Complex stretching factor at signed depth `d ≥ 0` into the layer.
fn stretch(depth: f64, width: f64, strength: f64) -> C64 {
    let s = depth / width;
    C64::new(1.0, strength * s * s)
}

/// Assemble `H_{jk}` for the medium `4πη` plus the linear scatterer
/// susceptibility `η₁` (both on the interior grid; the layer is
/// homogeneous).
pub fn assemble(
    medium: &MediumRealization,
    eta1: &Array2<f64>,
    wavenumber: Wavenumber,
    pml: &PmlParams,
) -> Result<DiscreteOperator> {
    pml.validate()?;
    let grid = medium.grid;
    if eta1.dim() != grid.shape() {
        return Err(Error::Shape(format!(
            "η₁ field has shape {:?}, grid is {:?}",
            eta1.dim(),
            grid.shape()
        )));
    }
    let h = grid.spacing;
    let limit = 2.0 * std::f64::consts::PI / wavenumber.k / (10.0 * wavenumber.harmonic.factor());
    if h > limit * (1.0 + 1e-12) {
        return Err(Error::UnderResolved { spacing: h, limit, what: "harmonic wavelength" });
    }

    let pad = pml.node_count(h);
    let padded = PaddedGrid::new(grid, pad);
    let (nx, ny) = (padded.full.nx, padded.full.ny);
    let width = pad as f64 * h;

    // Stretching factors depend on one coordinate only.
    let depth = |i: usize, n_inner: usize| -> f64 {
        if i < pad {
            (pad - i) as f64 * h
        } else if i >= pad + n_inner {
            (i + 1 - pad - n_inner) as f64 * h
        } else {
            0.0
        }
    };
    let ex: Vec<C64> = (0..nx).map(|i| stretch(depth(i, grid.nx), width, pml.strength)).collect();
    let ey: Vec<C64> = (0..ny).map(|i| stretch(depth(i, grid.ny), width, pml.strength)).collect();

    let potential = medium.potential_field();
    let four_pi = 4.0 * std::f64::consts::PI;
    let jk = wavenumber.effective();
    let inv_h2 = 1.0 / (h * h);
    let harmonic = |a: C64, b: C64| 2.0 * a * b / (a + b);

    let n = padded.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col = Vec::with_capacity(5 * n);
    let mut val = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for iy in 0..ny {
        for ix in 0..nx {
            let row = padded.full.index(ix, iy);
            let ax = ey[iy] / ex[ix];
            let by = ex[ix] / ey[iy];
            let v = if padded.is_interior(ix, iy) {
                let (gx, gy) = (ix - pad, iy - pad);
                potential[[gy, gx]] + four_pi * eta1[[gy, gx]]
            } else {
                0.0
            };
            let mut diag = jk * jk * ex[ix] * ey[iy] * (1.0 + v);
            let mut entries: [(usize, C64); 4] = [(usize::MAX, C64::new(0.0, 0.0)); 4];
            let mut count = 0;
            // Neighbours in the order south, west, east, north keep each row
            // sorted by column index.
            let neighbours = [
                (iy > 0).then(|| (padded.full.index(ix, iy - 1), ex[ix] / ey[iy - 1], by)),
                (ix > 0).then(|| (padded.full.index(ix - 1, iy), ey[iy] / ex[ix - 1], ax)),
                (ix + 1 < nx).then(|| (padded.full.index(ix + 1, iy), ey[iy] / ex[ix + 1], ax)),
                (iy + 1 < ny).then(|| (padded.full.index(ix, iy + 1), ex[ix] / ey[iy + 1], by)),
            ];
            // Ghost faces at the outer boundary use the nodal coefficient.
            let ghosts = [iy == 0, ix == 0, ix + 1 == nx, iy + 1 == ny];
            for (slot, nb) in neighbours.iter().enumerate() {
                match nb {
                    Some((c, other, own)) => {
                        let face = harmonic(*own, *other) * inv_h2;
                        diag -= face;
                        entries[count] = (*c, face);
                        count += 1;
                    }
                    None => {
                        debug_assert!(ghosts[slot]);
                        let own = if slot == 0 || slot == 3 { by } else { ax };
                        diag -= own * inv_h2;
                    }
                }
            }
            let mut pushed_diag = false;
            for &(c, w) in &entries[..count] {
                if !pushed_diag && c > row {
                    col.push(row);
                    val.push(diag);
                    pushed_diag = true;
                }
                col.push(c);
                val.push(w);
            }
            if !pushed_diag {
                col.push(row);
                val.push(diag);
            }
            let start = row_ptr[row];
            if val[start..].iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite { row });
            }
            row_ptr.push(col.len());
        }
    }

    Ok(DiscreteOperator {
        grid: padded,
        wavenumber,
        pml: *pml,
        matrix: CsrMatrix { n, row_ptr, col, val },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::waves::Harmonic;
    use std::f64::consts::PI;

    fn square(side: f64, h: f64) -> Grid2 {
        Grid2::covering(Point2::new(-side / 2.0, 0.0), side, side, h).unwrap()
    }

    fn homogeneous_op(side: f64, h: f64, pml: PmlParams, j: Harmonic) -> DiscreteOperator {
        let g = square(side, h);
        let m = MediumRealization::homogeneous(g);
        let wn = Wavenumber::new(2.0 * PI, j).unwrap();
        assemble(&m, &Array2::zeros(g.shape()), wn, &pml).unwrap()
    }

    #[test]
    fn constant_coefficient_stencil() {
        let h = 0.05;
        let op = homogeneous_op(1.0, h, PmlParams { width: 0.5, strength: 0.0 }, Harmonic::Fundamental);
        let k = 2.0 * PI;
        let r = op.grid.full.index(12, 9);
        let entries: Vec<_> = op.matrix.row(r).collect();
        assert_eq!(entries.len(), 5);
        for (c, v) in entries {
            let expect = if c == r { (-4.0 + (k * h).powi(2)) / (h * h) } else { 1.0 / (h * h) };
            assert!((v - C64::new(expect, 0.0)).norm() < 1e-9 * expect.abs(), "{c}: {v}");
        }
    }

    #[test]
    fn default_layer_has_thirty_nodes() {
        assert_eq!(PmlParams::default().node_count(1.0 / 20.0), 30);
        let op = homogeneous_op(1.0, 0.05, PmlParams::default(), Harmonic::Fundamental);
        assert_eq!(op.grid.pad, 30);
        assert_eq!(op.grid.full.nx, 21 + 60);
    }

    #[test]
    fn pattern_is_symmetric_five_point() {
        let op = homogeneous_op(1.0, 0.05, PmlParams { width: 0.3, strength: 1.79 }, Harmonic::Second);
        let m = &op.matrix;
        for r in 0..m.n {
            assert!(m.row_ptr[r + 1] - m.row_ptr[r] <= 5);
            let cols: Vec<usize> = m.row(r).map(|(c, _)| c).collect();
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
            for (c, v) in m.row(r) {
                let t = m.get(c, r).expect("symmetric pattern");
                assert!((t - v).norm() <= 1e-12 * v.norm());
            }
        }
    }

    #[test]
    fn rejects_under_resolved_second_harmonic() {
        let g = square(1.0, 0.1);
        let m = MediumRealization::homogeneous(g);
        let wn = Wavenumber::new(2.0 * PI, Harmonic::Second).unwrap();
        let r = assemble(&m, &Array2::zeros(g.shape()), wn, &PmlParams::default());
        assert!(matches!(r, Err(Error::UnderResolved { .. })));
        let wn = Wavenumber::new(2.0 * PI, Harmonic::Fundamental).unwrap();
        assert!(assemble(&m, &Array2::zeros(g.shape()), wn, &PmlParams::default()).is_ok());
    }

    #[test]
    fn plane_wave_residual_is_second_order() {
        // Apply the operator to exp(ikx) and look at rows well inside.
        let residual = |h: f64| {
            let op = homogeneous_op(2.0, h, PmlParams { width: 0.5, strength: 1.79 }, Harmonic::Fundamental);
            let k = 2.0 * PI;
            let full = op.grid.full;
            let x: Vec<C64> = (0..full.ny)
                .flat_map(|iy| (0..full.nx).map(move |ix| (ix, iy)))
                .map(|(ix, iy)| C64::from_polar(1.0, k * full.node(ix, iy).x))
                .collect();
            let y = op.apply(&x);
            let c = op.grid.index_of_interior(op.grid.interior.nx / 2, op.grid.interior.ny / 2);
            y[c].norm()
        };
        let r1 = residual(0.05);
        let r2 = residual(0.025);
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }
}
