//! Dense Hermitian diagonalization of fiber operators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fiber::FiberOperator;

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 1_000_000;

/// Eigenpairs sorted by ascending energy; eigenvectors are columns.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<Complex64>>,
}

pub fn solve_fiber(op: &FiberOperator, want_vectors: bool) -> Result<EigenSolution> {
    if op.diagonal.iter().any(|x| !x.is_finite()) || op.couplings.iter().any(|c| !c.value.re.is_finite() || !c.value.im.is_finite()) {
        return Err(Error::InvalidArgument("fiber operator has non-finite entries".into()));
    }
    if op.is_real() {
        solve_real_symmetric(op.to_dense_real(), want_vectors)
    } else {
        solve_hermitian(op.to_dense(), want_vectors)
    }
}

pub fn solve_real_symmetric(h: DMatrix<f64>, want_vectors: bool) -> Result<EigenSolution> {
    let n = h.nrows();
    if !want_vectors {
        let vals = h.symmetric_eigenvalues();
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::ConvergenceFailure);
        }
        let mut v: Vec<f64> = vals.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        return Ok(EigenSolution { values: v, vectors: None });
    }
    let eig = h.try_symmetric_eigen(EPS, MAX_ITER).ok_or(Error::ConvergenceFailure)?;
    let order = sorted_order(&eig.eigenvalues);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |row, col| Complex64::new(eig.eigenvectors[(row, order[col])], 0.0));
    Ok(EigenSolution { values, vectors: Some(vectors) })
}

pub fn solve_hermitian(h: DMatrix<Complex64>, want_vectors: bool) -> Result<EigenSolution> {
    let n = h.nrows();
    if !want_vectors {
        let vals = h.symmetric_eigenvalues();
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::ConvergenceFailure);
        }
        let mut v: Vec<f64> = vals.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        return Ok(EigenSolution { values: v, vectors: None });
    }
    let eig = h.try_symmetric_eigen(EPS, MAX_ITER).ok_or(Error::ConvergenceFailure)?;
    let order = sorted_order(&eig.eigenvalues);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = want_vectors.then(|| DMatrix::from_fn(n, n, |row, col| eig.eigenvectors[(row, order[col])]));
    Ok(EigenSolution { values, vectors })
}

fn sorted_order(vals: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    order
}
