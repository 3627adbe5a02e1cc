//! Perron–Frobenius toolkit for a single nonnegative matrix.
//!
//! For an irreducible `Q` the principal eigenvalue `λ` has a positive
//! eigenvector, and for every positive test vector `x`
//!
//! ```text
//! min_i (Qx)_i / x_i  <=  λ  <=  max_i (Qx)_i / x_i
//! ```
//!
//! with both sides collapsing to `λ` at the eigenvector. Reducible matrices
//! are handled class by class through the SCC decomposition.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{power_iterate, LogOperator, PowerOutcome};
use crate::model::{classify, Classification, NonnegMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Tolerance used when a spectral radius is needed as an intermediate value.
pub(crate) const SPRAD_TOL: f64 = 1e-13;

/// Above this ratio between largest and smallest positive entry the power
/// iteration runs in the log domain.
const LOG_DOMAIN_SPAN: f64 = 1e150;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix is not irreducible")]
    NotIrreducible,
    #[error("power iteration did not converge in {iterations} iterations (bounds [{lower}, {upper}])")]
    MaxIterExceeded { lower: f64, upper: f64, iterations: usize },
    #[error("test vector must be strictly positive (entry {index} = {value})")]
    NonpositiveTestVector { index: usize, value: f64 },
    #[error("row {0} has zero sum")]
    ZeroRow(usize),
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Principal eigenvalue with its positive eigenvector (max entry 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub h: Vec<f64>,
    /// `‖Qh − λh‖_∞`.
    pub residual: f64,
    pub iterations: usize,
}

/// Collatz–Wielandt bracket produced by one test vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CwBounds {
    pub test_vector: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl CwBounds {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64, slack: f64) -> bool {
        self.lower - slack <= value && value <= self.upper + slack
    }
}

/// `Q = Γ P` with `Γ = diag(κ)` and `P` row-stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDecomposition {
    pub kappa: Vec<f64>,
    pub p: NonnegMatrix,
}

/// Power iteration with an additive shift, for irreducible `Q`.
///
/// Terminates when the Collatz–Wielandt ratios at the iterate agree to
/// `tol·λ`; `λ` is reported as the largest ratio.
pub fn power_iteration(
    q: &NonnegMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair, SpectralError> {
    let n = q.n();
    if n == 0 || !classify(q).irreducible {
        return Err(SpectralError::NotIrreducible);
    }
    if n == 1 {
        let lambda = q.get(0, 0);
        if lambda <= 0.0 {
            return Err(SpectralError::NotIrreducible);
        }
        return Ok(EigenPair {
            lambda,
            h: vec![1.0],
            residual: 0.0,
            iterations: 0,
        });
    }
    let span = q.max_entry() / q.min_positive_entry().unwrap_or(1.0);
    if span > LOG_DOMAIN_SPAN {
        return log_domain_power(q, tol, max_iter);
    }

    let scale = q.row_sums().into_iter().fold(0.0, f64::max);
    let mut h = vec![1.0; n];
    let mut iterations = 0;
    loop {
        let qh = q.mul_vec(&h);
        let (lower, upper) = ratio_bounds(&qh, &h);
        if upper - lower <= tol * upper {
            let residual = sup_residual(&qh, &h, upper);
            return Ok(EigenPair {
                lambda: upper,
                h,
                residual,
                iterations,
            });
        }
        if iterations >= max_iter {
            return Err(SpectralError::MaxIterExceeded {
                lower,
                upper,
                iterations,
            });
        }
        let mut next: Vec<f64> = qh.iter().zip(&h).map(|(a, b)| a / scale + b).collect();
        let top = next.iter().copied().fold(0.0, f64::max);
        next.iter_mut().for_each(|v| *v /= top);
        h = next;
        iterations += 1;
    }
}

fn log_domain_power(
    q: &NonnegMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair, SpectralError> {
    let op = LogOperator::from_matrix(q);
    match power_iterate(&op, tol, max_iter, |_| true) {
        PowerOutcome::Converged { state, iterations } => {
            let h: Vec<f64> = state.log_f.iter().map(|v| v.exp()).collect();
            let residual = sup_residual(&q.mul_vec(&h), &h, state.upper);
            Ok(EigenPair {
                lambda: state.upper,
                h,
                residual,
                iterations,
            })
        }
        PowerOutcome::MaxIter { state, iterations } | PowerOutcome::Aborted { state, iterations } => {
            Err(SpectralError::MaxIterExceeded {
                lower: state.lower,
                upper: state.upper,
                iterations,
            })
        }
        PowerOutcome::ZeroRow => Err(SpectralError::NotIrreducible),
    }
}

fn ratio_bounds(qx: &[f64], x: &[f64]) -> (f64, f64) {
    qx.iter()
        .zip(x)
        .map(|(a, b)| a / b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        })
}

fn sup_residual(qh: &[f64], h: &[f64], lambda: f64) -> f64 {
    qh.iter()
        .zip(h)
        .map(|(a, b)| (a - lambda * b).abs())
        .fold(0.0, f64::max)
}

/// Collatz–Wielandt bounds `min_i (Qx)_i/x_i` and `max_i (Qx)_i/x_i`.
pub fn cw_bounds(q: &NonnegMatrix, x: &[f64]) -> Result<CwBounds, SpectralError> {
    if x.len() != q.n() {
        return Err(SpectralError::DimensionMismatch {
            expected: q.n(),
            found: x.len(),
        });
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(SpectralError::NonpositiveTestVector { index, value });
    }
    let (lower, upper) = ratio_bounds(&q.mul_vec(x), x);
    Ok(CwBounds {
        test_vector: x.to_vec(),
        lower,
        upper,
    })
}

/// Spectral radius of each SCC of `cls` (0 for trivial classes).
pub(crate) fn scc_radii(q: &NonnegMatrix, cls: &Classification) -> Vec<f64> {
    (0..cls.scc_list.len())
        .map(|c| {
            let members = &cls.scc_list[c];
            if cls.is_trivial(c) {
                0.0
            } else if members.len() == 1 {
                q.get(members[0], members[0])
            } else {
                let sub = q.submatrix(members);
                match power_iteration(&sub, SPRAD_TOL, DEFAULT_MAX_ITER) {
                    Ok(pair) => pair.lambda,
                    Err(SpectralError::MaxIterExceeded { lower, upper, .. }) => 0.5 * (lower + upper),
                    Err(e) => unreachable!("SCC submatrix is irreducible: {e}"),
                }
            }
        })
        .collect()
}

/// Spectral radius of an arbitrary nonnegative matrix: the largest Perron
/// root over its strongly connected classes.
pub fn spectral_radius(q: &NonnegMatrix) -> f64 {
    let cls = classify(q);
    scc_radii(q, &cls).into_iter().fold(0.0, f64::max)
}

/// Pulls the row sums out of `Q`.
pub fn row_decompose(q: &NonnegMatrix) -> Result<RowDecomposition, SpectralError> {
    let n = q.n();
    let kappa = q.row_sums();
    if let Some(i) = kappa.iter().position(|&k| k <= 0.0) {
        return Err(SpectralError::ZeroRow(i));
    }
    let mut rows = Vec::with_capacity(n);
    for (i, &k) in kappa.iter().enumerate() {
        rows.push(q.row(i).iter().map(|&v| v / k).collect::<Vec<_>>());
    }
    let p = NonnegMatrix::from_rows(&rows).expect("quotient of a nonnegative row");
    Ok(RowDecomposition { kappa, p })
}

pub(crate) fn check_stochastic(p: &NonnegMatrix, tol: f64) -> Result<(), SpectralError> {
    for (row, sum) in p.row_sums().into_iter().enumerate() {
        if (sum - 1.0).abs() > tol {
            return Err(SpectralError::NotStochastic { row, sum });
        }
    }
    Ok(())
}

/// Stationary distribution of an irreducible stochastic matrix.
///
/// Uses Grassmann–Taksar–Heyman state reduction, which avoids subtractions.
pub fn stationary_distribution(p: &NonnegMatrix) -> Result<Vec<f64>, SpectralError> {
    check_stochastic(p, 1e-9)?;
    if !classify(p).irreducible {
        return Err(SpectralError::NotIrreducible);
    }
    Ok(gth(p))
}

/// GTH on an irreducible substochastic-consistent matrix; rows need not be
/// exactly normalized since each reduction step uses the off-diagonal mass.
pub(crate) fn gth(p: &NonnegMatrix) -> Vec<f64> {
    let n = p.n();
    let mut a = p.to_rows();
    for k in (1..n).rev() {
        let s: f64 = a[k][..k].iter().sum();
        for row in a.iter_mut().take(k) {
            row[k] /= s;
        }
        for i in 0..k {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                a[i][j] += aik * a[k][j];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[i][k]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> NonnegMatrix {
        NonnegMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn power_iteration_examples() {
        let swap = power_iteration(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(swap.lambda, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(swap.h[1], 1.0, epsilon = 1e-12);

        // trace 1.5, det 0: eigenvalues {1.5, 0}; (1, 0.5) solves the first row.
        let q = m(&[&[1.0, 1.0], &[0.5, 0.5]]);
        let pair = power_iteration(&q, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(pair.lambda, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.h[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.h[1], 0.5, epsilon = 1e-12);

        let ones = NonnegMatrix::new(4, vec![1.0; 16]).unwrap();
        let pair = power_iteration(&ones, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(pair.lambda, 4.0, epsilon = 1e-12);
        assert!(pair.h.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn power_iteration_rejects_reducible() {
        let q = m(&[&[1.0, 0.0], &[0.5, 2.0]]);
        assert_eq!(power_iteration(&q, 1e-10, 100), Err(SpectralError::NotIrreducible));
        assert_eq!(
            power_iteration(&m(&[&[0.0]]), 1e-10, 100),
            Err(SpectralError::NotIrreducible)
        );
    }

    #[test]
    fn power_iteration_reports_bounds_on_max_iter() {
        let q = m(&[&[1.0, 1.0], &[0.5, 0.5]]);
        match power_iteration(&q, 1e-14, 0) {
            Err(SpectralError::MaxIterExceeded { lower, upper, .. }) => {
                assert_eq!((lower, upper), (1.0, 2.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_domain_path_handles_wide_spans() {
        // [[0, a], [b, 0]] has λ = sqrt(ab).
        let q = m(&[&[0.0, 1e200], &[1e-200, 0.0]]);
        let pair = power_iteration(&q, 1e-12, 10_000).unwrap();
        assert_abs_diff_eq!(pair.lambda, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(pair.h[1], 1e-200 / pair.lambda, epsilon = 1e-205);
    }

    #[test]
    fn cw_bounds_examples() {
        let q = m(&[&[1.0, 1.0], &[0.5, 0.5]]);
        let b = cw_bounds(&q, &[1.0, 1.0]).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 2.0));
        let b = cw_bounds(&q, &[1.0, 0.5]).unwrap();
        assert_eq!((b.lower, b.upper), (1.5, 1.5));
        let b = cw_bounds(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &[2.0, 1.0]).unwrap();
        assert_eq!((b.lower, b.upper), (0.5, 2.0));
        assert!(matches!(
            cw_bounds(&q, &[1.0, 0.0]),
            Err(SpectralError::NonpositiveTestVector { index: 1, .. })
        ));
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius(&m(&[&[1.0, 0.0], &[0.5, 2.0]])), 2.0);
        assert_eq!(spectral_radius(&NonnegMatrix::zeros(3)), 0.0);
        let q = m(&[&[0.2, 0.7, 0.0], &[0.0, 0.1, 0.9], &[0.4, 0.0, 0.3]]);
        let pair = power_iteration(&q, 1e-12, 10_000).unwrap();
        assert_abs_diff_eq!(spectral_radius(&q), pair.lambda, epsilon = 1e-10);
    }

    #[test]
    fn row_decompose_examples() {
        let d = row_decompose(&m(&[&[1.0, 1.0], &[0.5, 0.5]])).unwrap();
        assert_eq!(d.kappa, vec![2.0, 1.0]);
        assert_eq!(d.p.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let stoch = m(&[&[0.25, 0.75], &[1.0, 0.0]]);
        let d = row_decompose(&stoch).unwrap();
        assert_eq!(d.kappa, vec![1.0, 1.0]);
        assert_eq!(d.p, stoch);
        let d = row_decompose(&NonnegMatrix::new(3, vec![1.0; 9]).unwrap()).unwrap();
        assert_eq!(d.kappa, vec![3.0; 3]);
        assert!(d.p.to_rows().iter().flatten().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(
            row_decompose(&m(&[&[1.0, 0.0], &[0.0, 0.0]])),
            Err(SpectralError::ZeroRow(1))
        );
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_distribution(&m(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-15);
        let pi = stationary_distribution(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_abs_diff_eq!(pi[1], 0.5, epsilon = 1e-15);
        // 0.1 π0 = 0.5 π1 → π = (5/6, 1/6).
        let pi = stationary_distribution(&m(&[&[0.9, 0.1], &[0.5, 0.5]])).unwrap();
        assert_abs_diff_eq!(pi[0], 5.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pi[1], 1.0 / 6.0, epsilon = 1e-15);
        assert!(matches!(
            stationary_distribution(&m(&[&[0.9, 0.2], &[0.5, 0.5]])),
            Err(SpectralError::NotStochastic { row: 0, .. })
        ));
        assert_eq!(
            stationary_distribution(&m(&[&[1.0, 0.0], &[0.5, 0.5]])),
            Err(SpectralError::NotIrreducible)
        );
    }
}
