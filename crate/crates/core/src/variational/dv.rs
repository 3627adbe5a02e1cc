use crate::model::NonnegMatrix;
use crate::spectral::{
    check_stochastic, gth, power_iteration, RowDecomposition, DEFAULT_MAX_ITER, SPRAD_TOL,
};

use super::{check_distribution, kl_unchecked, VariationalError, DISTRIBUTION_TOL};

/// A stochastic matrix `P̃` together with a stationary law `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct DvCandidate {
    pub pi: Vec<f64>,
    pub p_tilde: NonnegMatrix,
}

impl DvCandidate {
    pub fn new(pi: Vec<f64>, p_tilde: NonnegMatrix) -> Result<Self, VariationalError> {
        let cand = DvCandidate { pi, p_tilde };
        cand.validate()?;
        Ok(cand)
    }

    /// `‖πP̃ − π‖₁`.
    pub fn stationarity_residual(&self) -> f64 {
        let n = self.p_tilde.n();
        (0..n)
            .map(|j| {
                let flow: f64 = (0..n).map(|i| self.pi[i] * self.p_tilde.get(i, j)).sum();
                (flow - self.pi[j]).abs()
            })
            .sum()
    }

    fn validate(&self) -> Result<(), VariationalError> {
        if self.pi.len() != self.p_tilde.n() {
            return Err(VariationalError::DimensionMismatch {
                expected: self.p_tilde.n(),
                found: self.pi.len(),
            });
        }
        check_distribution(&self.pi, "π")?;
        check_stochastic(&self.p_tilde, DISTRIBUTION_TOL)?;
        let residual = self.stationarity_residual();
        if residual > DISTRIBUTION_TOL {
            return Err(VariationalError::NonStationaryPair { residual });
        }
        Ok(())
    }
}

/// `Σ_i π(i) [log κ_i − D(p̃(·|i) ‖ p(·|i))]`, bounded above by `log λ`.
pub fn dv_objective_matrix(
    decomp: &RowDecomposition,
    cand: &DvCandidate,
) -> Result<f64, VariationalError> {
    cand.validate()?;
    let n = decomp.p.n();
    if cand.p_tilde.n() != n {
        return Err(VariationalError::DimensionMismatch {
            expected: n,
            found: cand.p_tilde.n(),
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        let w = cand.pi[i];
        if w == 0.0 {
            continue;
        }
        let d = kl_unchecked(cand.p_tilde.row(i), decomp.p.row(i));
        if d == f64::INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += w * (decomp.kappa[i].ln() - d);
    }
    Ok(total)
}

/// The maximizing pair: `P̃*(i,j) = Q(i,j) h(j) / (λ h(i))` from the
/// principal eigenpair and its stationary law.
pub fn dv_optimum(q: &NonnegMatrix) -> Result<DvCandidate, VariationalError> {
    let pair = power_iteration(q, SPRAD_TOL, DEFAULT_MAX_ITER)?;
    let n = q.n();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let raw: Vec<f64> = (0..n).map(|j| q.get(i, j) * pair.h[j]).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let p_tilde = NonnegMatrix::from_rows(&rows).expect("normalized nonnegative rows");
    let pi = gth(&p_tilde);
    DvCandidate::new(pi, p_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{row_decompose, stationary_distribution};
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> NonnegMatrix {
        NonnegMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn optimum_examples() {
        let ones = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let c = dv_optimum(&ones).unwrap();
        assert!(c.p_tilde.to_rows().iter().flatten().all(|&v| (v - 0.5).abs() < 1e-12));
        let obj = dv_objective_matrix(&row_decompose(&ones).unwrap(), &c).unwrap();
        assert_abs_diff_eq!(obj, 2f64.ln(), epsilon = 1e-12);

        let q = m(&[&[1.0, 1.0], &[0.5, 0.5]]);
        let c = dv_optimum(&q).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(c.p_tilde.get(i, 0), 2.0 / 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(c.p_tilde.get(i, 1), 1.0 / 3.0, epsilon = 1e-12);
        }
        let obj = dv_objective_matrix(&row_decompose(&q).unwrap(), &c).unwrap();
        assert_abs_diff_eq!(obj, 1.5f64.ln(), epsilon = 1e-12);

        let swap = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let c = dv_optimum(&swap).unwrap();
        assert_eq!(c.p_tilde, swap);
        let obj = dv_objective_matrix(&row_decompose(&swap).unwrap(), &c).unwrap();
        assert_abs_diff_eq!(obj, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_entropy_candidate_gives_mean_log_row_mass() {
        let q = m(&[&[1.0, 1.0], &[0.5, 0.5]]);
        let d = row_decompose(&q).unwrap();
        let pi = stationary_distribution(&d.p).unwrap();
        let c = DvCandidate::new(pi.clone(), d.p.clone()).unwrap();
        let expected = pi[0] * 2f64.ln() + pi[1] * 1f64.ln();
        assert_abs_diff_eq!(dv_objective_matrix(&d, &c).unwrap(), expected, epsilon = 1e-15);
        assert!(expected < 1.5f64.ln());
    }

    #[test]
    fn non_stationary_pair_is_rejected() {
        let p = m(&[&[0.9, 0.1], &[0.5, 0.5]]);
        assert!(matches!(
            DvCandidate::new(vec![0.5, 0.5], p),
            Err(VariationalError::NonStationaryPair { .. })
        ));
    }

    #[test]
    fn singular_candidate_is_neg_inf() {
        let q = m(&[&[1.0, 0.0001], &[0.5, 0.5]]);
        let d = row_decompose(&q).unwrap();
        let swap = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let c = DvCandidate::new(vec![0.5, 0.5], swap).unwrap();
        assert!(dv_objective_matrix(&d, &c).unwrap().is_finite());
        let q0 = m(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let swap = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let c = DvCandidate::new(vec![0.5, 0.5], swap).unwrap();
        assert_eq!(
            dv_objective_matrix(&row_decompose(&q0).unwrap(), &c).unwrap(),
            f64::NEG_INFINITY
        );
    }
}
