//! Finite-horizon controllability of `x ← A x + B u`: Gramian, Kalman rank
//! and the trace / log-determinant metrics.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::sparse::StateOperator;

/// Relative log-det regularization.
pub const LOGDET_EPS_REL: f64 = 1e-12;
/// Lower bound on the scale the regularization is taken relative to, so
/// ε never drops below 1e-300.
pub const LOGDET_EPS_FLOOR: f64 = 1e-288;

/// Propagated columns buffered before one rank-k update of W.
const BLOCK_COLUMNS: usize = 256;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ControllabilityError {
    #[error("dimension mismatch: A is {a}x{a}, B has {b} rows")]
    DimensionMismatch { a: usize, b: usize },
    #[error("horizon must be at least one step")]
    ZeroHorizon,
    #[error("regularized Gramian is not positive definite")]
    NotPositiveDefinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Trace,
    LogDet,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Trace => "trace",
            MetricKind::LogDet => "logdet",
        }
    }
}

impl core::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for MetricKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "trace" => Ok(MetricKind::Trace),
            "logdet" | "log-det" | "log_det" => Ok(MetricKind::LogDet),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub value: f64,
    /// Regularization added to the diagonal (log-det only).
    pub epsilon: Option<f64>,
}

/// W = Σ_{τ<N_p} A^τ B Bᵀ (Aᵀ)^τ.
#[derive(Clone, Debug, PartialEq)]
pub struct Gramian {
    pub w: DMatrix<f64>,
    pub horizon: usize,
}

impl Gramian {
    pub fn trace(&self) -> f64 {
        self.w.trace()
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }
}

fn check<A: StateOperator + ?Sized>(a: &A, b: &DMatrix<f64>, horizon: usize) -> Result<usize, ControllabilityError> {
    let n = a.dim();
    if b.nrows() != n {
        return Err(ControllabilityError::DimensionMismatch { a: n, b: b.nrows() });
    }
    if horizon == 0 {
        return Err(ControllabilityError::ZeroHorizon);
    }
    Ok(n)
}

/// Calls `visit(τ, j, A^τ b_j)` for every τ < horizon and input j, stopping
/// early once every propagated column is exactly zero.
fn propagate<A: StateOperator + ?Sized>(
    a: &A,
    b: &DMatrix<f64>,
    horizon: usize,
    mut visit: impl FnMut(usize, usize, &[f64]),
) {
    let n = b.nrows();
    let mut cols: Vec<Vec<f64>> = b.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut scratch = vec![0.0; n];
    for tau in 0..horizon {
        let mut any = false;
        for (j, col) in cols.iter_mut().enumerate() {
            if col.iter().all(|v| *v == 0.0) {
                continue;
            }
            any = true;
            visit(tau, j, col);
            if tau + 1 < horizon {
                a.apply(col, &mut scratch);
                core::mem::swap(col, &mut scratch);
            }
        }
        if !any {
            break;
        }
    }
}

/// Gramian by the recursion X₀ = B, W += X Xᵀ, X ← A X.
pub fn gramian<A: StateOperator + ?Sized>(
    a: &A,
    b: &DMatrix<f64>,
    horizon: usize,
) -> Result<Gramian, ControllabilityError> {
    let n = check(a, b, horizon)?;
    let mut w = DMatrix::zeros(n, n);
    let mut block = DMatrix::zeros(n, BLOCK_COLUMNS);
    let mut filled = 0;
    let flush = |w: &mut DMatrix<f64>, block: &DMatrix<f64>, filled: usize| {
        if filled > 0 {
            let y = block.columns(0, filled);
            w.gemm(1.0, &y, &y.transpose(), 1.0);
        }
    };
    propagate(a, b, horizon, |_, _, x| {
        block.column_mut(filled).copy_from_slice(x);
        filled += 1;
        if filled == BLOCK_COLUMNS {
            flush(&mut w, &block, filled);
            filled = 0;
        }
    });
    flush(&mut w, &block, filled);
    symmetrize(&mut w);
    Ok(Gramian { w, horizon })
}

fn symmetrize(w: &mut DMatrix<f64>) {
    let n = w.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (w[(i, j)] + w[(j, i)]);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
}

/// trace(W) = Σ_τ ‖A^τ B‖_F², without forming W.
pub fn gramian_trace<A: StateOperator + ?Sized>(
    a: &A,
    b: &DMatrix<f64>,
    horizon: usize,
) -> Result<f64, ControllabilityError> {
    check(a, b, horizon)?;
    let mut total = 0.0;
    propagate(a, b, horizon, |_, _, x| total += x.iter().map(|v| v * v).sum::<f64>());
    Ok(total)
}

/// C = [B, A B, …, A^{N_p−1} B].
pub fn controllability_matrix<A: StateOperator + ?Sized>(
    a: &A,
    b: &DMatrix<f64>,
    horizon: usize,
) -> Result<DMatrix<f64>, ControllabilityError> {
    let n = check(a, b, horizon)?;
    let m = b.ncols();
    let mut c = DMatrix::zeros(n, horizon * m);
    propagate(a, b, horizon, |tau, j, x| c.column_mut(tau * m + j).copy_from_slice(x));
    Ok(c)
}

/// Numerical-rank threshold `max(rows, cols) · ε_machine · scale`.
pub fn rank_tolerance(rows: usize, cols: usize, scale: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * scale
}

/// Numerical rank of C by singular values.
pub fn kalman_rank<A: StateOperator + ?Sized>(
    a: &A,
    b: &DMatrix<f64>,
    horizon: usize,
) -> Result<usize, ControllabilityError> {
    let c = controllability_matrix(a, b, horizon)?;
    if c.ncols() == 0 || c.nrows() == 0 {
        return Ok(0);
    }
    let sv = c.clone().singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0);
    }
    let tol = rank_tolerance(c.nrows(), c.ncols(), top);
    Ok(sv.iter().filter(|s| **s > tol).count())
}

/// Full-rank test on the Gramian side: λ_min(W) above the rank tolerance
/// taken relative to λ_max(W).
pub fn gramian_is_nonsingular(g: &Gramian, inputs: usize) -> bool {
    let n = g.dim();
    if n == 0 {
        return true;
    }
    let eig = SymmetricEigen::new(g.w.clone()).eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > rank_tolerance(n, g.horizon * inputs, max)
}

/// Default log-det regularization `ε_rel · max(trace / n, floor)`.
pub fn logdet_epsilon(trace: f64, n: usize) -> f64 {
    let mean = if n == 0 { 0.0 } else { trace / n as f64 };
    LOGDET_EPS_REL * mean.max(LOGDET_EPS_FLOOR)
}

/// log det(W + εI) by Cholesky.
pub fn regularized_logdet(w: &DMatrix<f64>, epsilon: f64) -> Result<f64, ControllabilityError> {
    let mut m = w.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += epsilon;
    }
    let chol = Cholesky::new(m).ok_or(ControllabilityError::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let mut sum = 0.0;
    for i in 0..l.nrows() {
        sum += libm::log(l[(i, i)]);
    }
    Ok(2.0 * sum)
}

/// log det(W + εI) − n log ε: zero for W = 0, nondecreasing as W grows.
pub fn normalized_logdet(w: &DMatrix<f64>, epsilon: f64) -> Result<f64, ControllabilityError> {
    Ok(regularized_logdet(w, epsilon)? - w.nrows() as f64 * libm::log(epsilon))
}

pub fn metric(g: &Gramian, kind: MetricKind) -> Result<MetricValue, ControllabilityError> {
    let eps = logdet_epsilon(g.trace(), g.dim());
    metric_with_epsilon(g, kind, eps)
}

/// As [`metric`] with a caller-chosen log-det regularization.
pub fn metric_with_epsilon(g: &Gramian, kind: MetricKind, epsilon: f64) -> Result<MetricValue, ControllabilityError> {
    match kind {
        MetricKind::Trace => Ok(MetricValue { kind, value: g.trace(), epsilon: None }),
        MetricKind::LogDet => {
            Ok(MetricValue { kind, value: regularized_logdet(&g.w, epsilon)?, epsilon: Some(epsilon) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dm(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn nilpotent_scalar() {
        let g = gramian(&dm(1, 1, &[0.0]), &dm(1, 1, &[1.0]), 3).unwrap();
        assert_eq!(g.w[(0, 0)], 1.0);
        assert_eq!(metric(&g, MetricKind::Trace).unwrap().value, 1.0);
    }

    #[test]
    fn identity_dynamics() {
        let a = DMatrix::<f64>::identity(2, 2);
        let b = dm(2, 1, &[1.0, 0.0]);
        let g = gramian(&a, &b, 2).unwrap();
        assert_eq!(g.w, dm(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        assert_eq!(kalman_rank(&a, &b, 2).unwrap(), 1);
        assert_eq!(kalman_rank(&a, &b, 7).unwrap(), 1);
        assert!(!gramian_is_nonsingular(&g, 1));
    }

    #[test]
    fn shift_is_controllable() {
        let a = dm(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let b = dm(2, 1, &[1.0, 0.0]);
        assert_eq!(kalman_rank(&a, &b, 2).unwrap(), 2);
        assert_eq!(kalman_rank(&a, &DMatrix::zeros(2, 1), 2).unwrap(), 0);
        assert!(gramian_is_nonsingular(&gramian(&a, &b, 2).unwrap(), 1));
    }

    #[test]
    fn logdet_examples() {
        let g = Gramian { w: DMatrix::identity(3, 3), horizon: 1 };
        let m = metric(&g, MetricKind::LogDet).unwrap();
        assert!(m.value.abs() < 1e-10);
        assert_eq!(m.epsilon, Some(1e-12));

        let g = Gramian { w: dm(2, 2, &[2.0, 0.0, 0.0, 0.0]), horizon: 1 };
        let v = metric_with_epsilon(&g, MetricKind::LogDet, 1e-12).unwrap().value;
        assert_relative_eq!(v, libm::log(2.0 + 1e-12) + libm::log(1e-12), max_relative = 1e-12);
        assert_eq!(metric(&g, MetricKind::Trace).unwrap().value, 2.0);
    }

    #[test]
    fn zero_gramian_has_floor_epsilon() {
        let eps = logdet_epsilon(0.0, 4);
        assert!(eps >= 1e-300);
        let w = DMatrix::zeros(4, 4);
        assert_eq!(normalized_logdet(&w, eps).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        let a = DMatrix::<f64>::identity(2, 2);
        assert!(gramian(&a, &DMatrix::zeros(3, 1), 2).is_err());
        assert!(gramian(&a, &DMatrix::zeros(2, 1), 0).is_err());
    }

    fn system(n: usize, m: usize, seed: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut it = seed.iter().cycle().copied();
        let a = DMatrix::from_fn(n, n, |_, _| 0.4 * it.next().unwrap());
        let b = DMatrix::from_fn(n, m, |_, _| it.next().unwrap());
        (a, b)
    }

    proptest! {
        #[test]
        fn trace_fast_path_matches(seed in proptest::collection::vec(-1.0f64..1.0, 64), n in 1usize..8, m in 1usize..3, h in 1usize..12) {
            let (a, b) = system(n, m, &seed);
            let g = gramian(&a, &b, h).unwrap();
            let t = gramian_trace(&a, &b, h).unwrap();
            prop_assert!((g.trace() - t).abs() <= 1e-10 * t.max(1e-300));
        }

        #[test]
        fn sparse_and_dense_operators_agree(seed in proptest::collection::vec(-1.0f64..1.0, 64), n in 1usize..8, h in 1usize..10) {
            let (a, b) = system(n, 2, &seed);
            let s = CsrMatrix::from_dense(&a);
            let gd = gramian(&a, &b, h).unwrap();
            let gs = gramian(&s, &b, h).unwrap();
            prop_assert!((&gd.w - &gs.w).norm() <= 1e-12 * gd.w.norm().max(1.0));
        }

        #[test]
        fn gramian_is_psd(seed in proptest::collection::vec(-1.0f64..1.0, 64), n in 1usize..8, h in 1usize..10) {
            let (a, b) = system(n, 2, &seed);
            let g = gramian(&a, &b, h).unwrap();
            let eig = SymmetricEigen::new(g.w.clone()).eigenvalues;
            let scale = g.w.norm();
            prop_assert!(eig.iter().all(|e| *e >= -1e-10 * scale));
        }
    }
}
