//! Sparse LU factorization of an assembled operator, reused across many
//! right-hand sides.

use std::sync::Once;

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::{ColMut, Conj, Par};

use super::operator::DiscreteOperator;
use crate::error::{Error, Result};
use crate::C64;

/// Relative residual `‖Ax − b‖/‖b‖` every solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A factorized operator. Immutable, so it may serve concurrent solves.
pub struct LinearSolveHandle {
    op: DiscreteOperator,
    lu: faer::sparse::linalg::solvers::Lu<usize, C64>,
}

impl std::fmt::Debug for LinearSolveHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolveHandle").field("n", &self.op.len()).finish()
    }
}

static SEQUENTIAL: Once = Once::new();

/// Factorize `op` with a fill-reducing sparse LU.
///
/// The factorization runs single-threaded so results do not depend on the
/// thread count; parallelism is applied across incident angles instead.
pub fn factorize(op: DiscreteOperator) -> Result<LinearSolveHandle> {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
    let m = &op.matrix;
    let mut triplets = Vec::with_capacity(m.val.len());
    for r in 0..m.n {
        for (c, v) in m.row(r) {
            triplets.push(Triplet::new(r, c, v));
        }
    }
    let a = SparseColMat::<usize, C64>::try_new_from_triplets(m.n, m.n, &triplets)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
    Ok(LinearSolveHandle { op, lu })
}

impl LinearSolveHandle {
    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    fn raw_solve(&self, x: &mut [C64]) {
        let col = ColMut::from_slice_mut(x);
        self.lu.solve_in_place_with_conj(Conj::No, col.as_mat_mut());
    }

    fn residual(&self, x: &[C64], b: &[C64]) -> Vec<C64> {
        let ax = self.op.apply(x);
        b.iter().zip(ax).map(|(&bi, ai)| bi - ai).collect()
    }

    /// Solve `A x = b`, checking the residual and applying one step of
    /// iterative refinement if it is above [`SOLVE_TOLERANCE`].
    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.len() {
            return Err(Error::Shape(format!(
                "right-hand side has length {}, operator has {} rows",
                b.len(),
                self.len()
            )));
        }
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![C64::new(0.0, 0.0); b.len()]);
        }
        if !bn.is_finite() {
            return Err(Error::invalid("right-hand side is not finite"));
        }
        let mut x = b.to_vec();
        self.raw_solve(&mut x);
        let mut r = self.residual(&x, b);
        let mut rel = norm(&r) / bn;
        if rel > SOLVE_TOLERANCE {
            self.raw_solve(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
            rel = norm(&self.residual(&x, b)) / bn;
        }
        if !(rel <= SOLVE_TOLERANCE) {
            return Err(Error::InaccurateSolve { residual: rel, tolerance: SOLVE_TOLERANCE });
        }
        Ok(x)
    }
}
