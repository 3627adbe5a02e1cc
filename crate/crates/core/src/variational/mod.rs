//! Relative entropy and the variational side of the eigenvalue problem:
//! the Gibbs principle, the finite Donsker–Varadhan formula for `log λ`,
//! its controlled version over ergodic occupation measures, and checks for
//! the dual linear program.

mod dual;
mod dv;
mod occupation;

pub use dual::{dual_feasibility, DualCertificate, DualReport, MiddleSlack};
pub use dv::{dv_objective_matrix, dv_optimum, DvCandidate};
pub use occupation::{
    alternating_ascent, build_optimal_occupation, occupation_objective, AscentResult,
    OccupationMeasure,
};

use thiserror::Error;

use crate::model::ActionRow;
use crate::numeric::log_sum_exp;
use crate::spectral::SpectralError;

/// Tolerance for "is a probability distribution" and invariance checks.
pub const DISTRIBUTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error("not a probability distribution: {0}")]
    NotDistribution(String),
    #[error("degenerate support: Σ p e^c = 0")]
    DegenerateSupport,
    #[error("π is not stationary for P̃ (‖πP̃ − π‖₁ = {residual})")]
    NonStationaryPair { residual: f64 },
    #[error("not an ergodic occupation measure: {0}")]
    NotOccupationMeasure(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("policy support is reducible at round {round}")]
    ReducibleUnderGreedy { round: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub(crate) fn check_distribution(v: &[f64], what: &str) -> Result<(), VariationalError> {
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(VariationalError::NotDistribution(format!(
            "{what} has entry {x}"
        )));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(VariationalError::NotDistribution(format!(
            "{what} sums to {sum}"
        )));
    }
    Ok(())
}

/// `D(q‖p) = Σ_j q_j log(q_j/p_j)` with `0 log 0 = 0`; `+inf` unless `q ≪ p`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<f64, VariationalError> {
    if q.len() != p.len() {
        return Err(VariationalError::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    check_distribution(q, "q")?;
    check_distribution(p, "p")?;
    Ok(kl_unchecked(q, p))
}

pub(crate) fn kl_unchecked(q: &[f64], p: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&qj, &pj) in q.iter().zip(p) {
        if qj > 0.0 {
            if pj == 0.0 {
                return f64::INFINITY;
            }
            d += qj * (qj / pj).ln();
        }
    }
    d.max(0.0)
}

/// Maximizer of `Σ_j q_j c_j − D(q‖p)` over distributions `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSolution {
    /// `log Σ_j p_j e^{c_j}`.
    pub value: f64,
    /// `q*_j = p_j e^{c_j} / Σ_k p_k e^{c_k}`.
    pub q: Vec<f64>,
}

/// Gibbs variational principle, evaluated with log-sum-exp.
/// `c` may contain `-inf`.
pub fn gibbs_maximize(p: &[f64], c: &[f64]) -> Result<GibbsSolution, VariationalError> {
    if c.len() != p.len() {
        return Err(VariationalError::DimensionMismatch {
            expected: p.len(),
            found: c.len(),
        });
    }
    check_distribution(p, "p")?;
    if let Some(x) = c.iter().find(|x| x.is_nan() || **x == f64::INFINITY) {
        return Err(VariationalError::NotDistribution(format!(
            "payoff entry {x} is not in [-inf, inf)"
        )));
    }
    let logs: Vec<f64> = p
        .iter()
        .zip(c)
        .map(|(&pj, &cj)| if pj > 0.0 { pj.ln() + cj } else { f64::NEG_INFINITY })
        .collect();
    gibbs_from_logs(&logs)
}

fn gibbs_from_logs(logs: &[f64]) -> Result<GibbsSolution, VariationalError> {
    let value = log_sum_exp(logs.iter().copied());
    if value == f64::NEG_INFINITY {
        return Err(VariationalError::DegenerateSupport);
    }
    let q = logs.iter().map(|&l| (l - value).exp()).collect();
    Ok(GibbsSolution { value, q })
}

/// Twisted kernel `q*(j) ∝ p(j|i,u) e^{r(i,u,j) + V(j)}` for one action row.
pub fn tilted_row(row: &ActionRow, v: &[f64]) -> Result<GibbsSolution, VariationalError> {
    let logs: Vec<f64> = (0..row.prob.len())
        .map(|j| row.log_weight(j) + v[j])
        .collect();
    gibbs_from_logs(&logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kl_examples() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(
            kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(matches!(
            kl_divergence(&[0.5, 0.4], &[0.5, 0.5]),
            Err(VariationalError::NotDistribution(_))
        ));
    }

    #[test]
    fn gibbs_examples() {
        let p = [0.2, 0.3, 0.5];
        let g = gibbs_maximize(&p, &[0.7; 3]).unwrap();
        assert_abs_diff_eq!(g.value, 0.7, epsilon = 1e-15);
        for (a, b) in g.q.iter().zip(&p) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }

        let g = gibbs_maximize(&[0.5, 0.5], &[0.0, 3f64.ln()]).unwrap();
        assert_abs_diff_eq!(g.value, 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.q[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(g.q[1], 0.75, epsilon = 1e-15);

        let g = gibbs_maximize(&p, &[0.0, f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(g.q[1], 0.0);
        assert_abs_diff_eq!(g.q[0], 0.2 / 0.7, epsilon = 1e-15);

        assert_eq!(
            gibbs_maximize(&[1.0, 0.0], &[f64::NEG_INFINITY, 5.0]),
            Err(VariationalError::DegenerateSupport)
        );
    }

    #[test]
    fn gibbs_one_simplex_grid_oracle() {
        // Brute force over q = (t, 1 − t) at step 1e-4.
        let (p, c) = ([0.5, 0.5], [0.0, 3f64.ln()]);
        let best = (0..=10_000)
            .map(|k| {
                let t = k as f64 * 1e-4;
                let q = [t, 1.0 - t];
                q[0] * c[0] + q[1] * c[1] - kl_unchecked(&q, &p)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let g = gibbs_maximize(&p, &c).unwrap();
        assert!((g.value - best).abs() < 1e-6);
    }
}
