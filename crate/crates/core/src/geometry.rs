//! Points and rectangular lattices in the plane.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Unit vector at angle `phi` from the positive x-axis.
    pub fn from_angle(phi: f64) -> Self {
        Point2::new(phi.cos(), phi.sin())
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Point2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

/// Uniform rectangular lattice with equal spacing in both directions.
///
/// Node `(ix, iy)` sits at `origin + (ix·h, iy·h)`. Fields over the grid are
/// stored row-major with `y` as the slow index, i.e. as `ndarray` arrays of
/// shape `(ny, nx)` indexed `[[iy, ix]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub origin: Point2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(origin: Point2, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid must have at least one node per axis"));
        }
        if !origin.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Grid2 { origin, spacing, nx, ny })
    }

    /// Grid whose boundary nodes lie exactly on the rectangle
    /// `[x0, x0 + width] × [y0, y0 + height]`; the side lengths must be
    /// multiples of `spacing` (to 1e-9 relative).
    pub fn covering(origin: Point2, width: f64, height: f64, spacing: f64) -> Result<Self> {
        let cells = |len: f64| -> Result<usize> {
            let n = len / spacing;
            let r = n.round();
            if !(r >= 0.0) || (n - r).abs() > 1e-9 * n.max(1.0) {
                return Err(Error::invalid(format!(
                    "length {len} is not a multiple of spacing {spacing}"
                )));
            }
            Ok(r as usize)
        };
        Grid2::new(origin, spacing, cells(width)? + 1, cells(height)? + 1)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn node(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + ix as f64 * self.spacing,
            self.origin.y + iy as f64 * self.spacing,
        )
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn max_corner(&self) -> Point2 {
        self.node(self.nx - 1, self.ny - 1)
    }

    pub fn width(&self) -> f64 {
        (self.nx - 1) as f64 * self.spacing
    }

    pub fn height(&self) -> f64 {
        (self.ny - 1) as f64 * self.spacing
    }

    /// Closed bounding rectangle contains `p` (with a small tolerance).
    pub fn contains(&self, p: Point2) -> bool {
        let tol = 1e-9 * self.spacing;
        let hi = self.max_corner();
        p.x >= self.origin.x - tol && p.x <= hi.x + tol && p.y >= self.origin.y - tol && p.y <= hi.y + tol
    }

    /// Nearest node, or `None` when `p` is outside the grid rectangle.
    pub fn nearest_node(&self, p: Point2) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let fx = ((p.x - self.origin.x) / self.spacing).round().max(0.0) as usize;
        let fy = ((p.y - self.origin.y) / self.spacing).round().max(0.0) as usize;
        Some((fx.min(self.nx - 1), fy.min(self.ny - 1)))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, Point2)> + '_ {
        (0..self.ny).flat_map(move |iy| (0..self.nx).map(move |ix| (ix, iy, self.node(ix, iy))))
    }

    /// Grid extended by `pad` nodes on every side.
    pub fn padded(&self, pad: usize) -> Grid2 {
        let shift = pad as f64 * self.spacing;
        Grid2 {
            origin: Point2::new(self.origin.x - shift, self.origin.y - shift),
            spacing: self.spacing,
            nx: self.nx + 2 * pad,
            ny: self.ny + 2 * pad,
        }
    }
}
