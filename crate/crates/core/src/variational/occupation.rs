use crate::control::ControlledEigenSolution;
use crate::engine::greedy_choice;
use crate::model::{classify, policy_matrix, MdpInstance, NonnegMatrix, Policy};
use crate::numeric::log_sum_exp;
use crate::spectral::{gth, power_iteration, DEFAULT_MAX_ITER, SPRAD_TOL};

use super::{check_distribution, kl_unchecked, tilted_row, VariationalError, DISTRIBUTION_TOL};

/// Smallest log-scale gain that makes alternating ascent switch actions.
const IMPROVEMENT_TOL: f64 = 1e-11;

/// `η(i,u,j) = η₀(i) η₁(u|i) η₂(j|i,u)` with `η₀` invariant under the
/// composed kernel `Σ_u η₁(u|i) η₂(·|i,u)`.
///
/// `eta1[i]` and `eta2[i]` are indexed by the available-action slots of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    pub eta0: Vec<f64>,
    pub eta1: Vec<Vec<f64>>,
    pub eta2: Vec<Vec<Vec<f64>>>,
}

impl OccupationMeasure {
    pub fn new(
        inst: &MdpInstance,
        eta0: Vec<f64>,
        eta1: Vec<Vec<f64>>,
        eta2: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, VariationalError> {
        let eta = OccupationMeasure { eta0, eta1, eta2 };
        eta.validate(inst)?;
        Ok(eta)
    }

    /// Builds `η` from a policy and per-slot next-state laws, taking `η₀` as
    /// the stationary law of the composed kernel.
    pub fn from_kernels(
        inst: &MdpInstance,
        eta1: Vec<Vec<f64>>,
        eta2: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, VariationalError> {
        let n = inst.n_states();
        let partial = OccupationMeasure {
            eta0: vec![1.0 / n as f64; n],
            eta1,
            eta2,
        };
        partial.validate_shapes(inst)?;
        let k = partial.composed_kernel();
        if !classify(&k).irreducible {
            return Err(VariationalError::NotOccupationMeasure(
                "composed kernel is not irreducible".into(),
            ));
        }
        let eta0 = gth(&k);
        OccupationMeasure::new(inst, eta0, partial.eta1, partial.eta2)
    }

    /// `K(i,j) = Σ_u η₁(u|i) η₂(j|i,u)`.
    pub fn composed_kernel(&self) -> NonnegMatrix {
        let n = self.eta0.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        self.eta1[i]
                            .iter()
                            .zip(&self.eta2[i])
                            .map(|(a, q)| a * q[j])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        NonnegMatrix::from_rows(&rows).expect("mixture of distributions")
    }

    fn validate_shapes(&self, inst: &MdpInstance) -> Result<(), VariationalError> {
        let n = inst.n_states();
        for len in [self.eta0.len(), self.eta1.len(), self.eta2.len()] {
            if len != n {
                return Err(VariationalError::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        for i in 0..n {
            let k = inst.rows(i).len();
            if self.eta1[i].len() != k || self.eta2[i].len() != k {
                return Err(VariationalError::NotOccupationMeasure(format!(
                    "state {i} has {k} actions but η₁/η₂ have {}/{}",
                    self.eta1[i].len(),
                    self.eta2[i].len()
                )));
            }
            check_distribution(&self.eta1[i], &format!("η₁(·|{i})"))?;
            for (s, q) in self.eta2[i].iter().enumerate() {
                if q.len() != n {
                    return Err(VariationalError::DimensionMismatch {
                        expected: n,
                        found: q.len(),
                    });
                }
                check_distribution(q, &format!("η₂(·|{i},slot {s})"))?;
            }
        }
        Ok(())
    }

    fn validate(&self, inst: &MdpInstance) -> Result<(), VariationalError> {
        self.validate_shapes(inst)?;
        check_distribution(&self.eta0, "η₀")?;
        let k = self.composed_kernel();
        let n = self.eta0.len();
        let residual: f64 = (0..n)
            .map(|j| {
                let flow: f64 = (0..n).map(|i| self.eta0[i] * k.get(i, j)).sum();
                (flow - self.eta0[j]).abs()
            })
            .sum();
        if residual > DISTRIBUTION_TOL {
            return Err(VariationalError::NotOccupationMeasure(format!(
                "η₀ is not invariant (‖η₀K − η₀‖₁ = {residual})"
            )));
        }
        Ok(())
    }
}

/// `Σ_i η₀(i) Σ_u η₁(u|i) [Σ_j r(i,u,j) η₂(j|i,u) − D(η₂(·|i,u) ‖ p(·|i,u))]`.
///
/// Charging a `-inf` reward or a zero-probability transition gives `-inf`.
pub fn occupation_objective(
    inst: &MdpInstance,
    eta: &OccupationMeasure,
) -> Result<f64, VariationalError> {
    eta.validate(inst)?;
    let mut total = 0.0;
    for i in 0..inst.n_states() {
        for (s, row) in inst.rows(i).iter().enumerate() {
            let w = eta.eta0[i] * eta.eta1[i][s];
            if w == 0.0 {
                continue;
            }
            let q = &eta.eta2[i][s];
            let d = kl_unchecked(q, &row.prob);
            if d == f64::INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            let mut mean_reward = 0.0;
            for (j, &qj) in q.iter().enumerate() {
                if qj > 0.0 {
                    if row.reward[j] == f64::NEG_INFINITY {
                        return Ok(f64::NEG_INFINITY);
                    }
                    mean_reward += qj * row.reward[j];
                }
            }
            total += w * (mean_reward - d);
        }
    }
    Ok(total)
}

/// Twisted next-state laws with `V = log ψ` for every slot of every state;
/// slots with no positive weight keep `p`.
fn twisted_kernels(inst: &MdpInstance, v: &[f64]) -> Vec<Vec<Vec<f64>>> {
    (0..inst.n_states())
        .map(|i| {
            inst.rows(i)
                .iter()
                .map(|row| match tilted_row(row, v) {
                    Ok(g) => g.q,
                    Err(_) => row.prob.clone(),
                })
                .collect()
        })
        .collect()
}

/// The maximizing occupation measure: greedy actions from `sol`, twisted
/// next-state laws with `V = log ψ`, and their stationary law.
pub fn build_optimal_occupation(
    inst: &MdpInstance,
    sol: &ControlledEigenSolution,
) -> Result<OccupationMeasure, VariationalError> {
    let v: Vec<f64> = sol.psi.iter().map(|x| x.ln()).collect();
    OccupationMeasure::from_kernels(inst, sol.policy.rows().to_vec(), twisted_kernels(inst, &v))
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    pub occupation: OccupationMeasure,
    pub policy: Policy,
    /// Objective after each round.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Alternates between the Gibbs step (twisted `η₂` at the current policy's
/// eigenvector) and greedy re-selection of actions. Actions only change on a
/// strict improvement, so the trace is nondecreasing.
pub fn alternating_ascent(
    inst: &MdpInstance,
    init: &Policy,
    max_rounds: usize,
    tol: f64,
) -> Result<AscentResult, VariationalError> {
    let mut policy = init.clone();
    let mut trace: Vec<f64> = Vec::new();
    let mut last = None;
    for round in 0..max_rounds.max(1) {
        let q = policy_matrix(inst, &policy);
        if !classify(&q).irreducible {
            return Err(VariationalError::ReducibleUnderGreedy { round });
        }
        let pair = power_iteration(&q, SPRAD_TOL, DEFAULT_MAX_ITER)?;
        let v: Vec<f64> = pair.h.iter().map(|x| x.ln()).collect();
        let eta = OccupationMeasure::from_kernels(
            inst,
            policy.rows().to_vec(),
            twisted_kernels(inst, &v),
        )
        .map_err(|_| VariationalError::ReducibleUnderGreedy { round })?;
        let value = occupation_objective(inst, &eta)?;
        let stalled = trace.last().is_some_and(|&prev: &f64| (value - prev).abs() <= tol);
        trace.push(value);

        let current = policy.slots();
        let slots: Vec<usize> = (0..inst.n_states())
            .map(|i| {
                let values: Vec<f64> = inst
                    .rows(i)
                    .iter()
                    .map(|row| log_sum_exp((0..row.prob.len()).map(|j| row.log_weight(j) + v[j])))
                    .collect();
                let best = greedy_choice(&values);
                match &current {
                    Some(cur) if values[best] <= values[cur[i]] + IMPROVEMENT_TOL => cur[i],
                    _ => best,
                }
            })
            .collect();
        let next = Policy::deterministic(inst, &slots).expect("greedy slots are in range");
        let unchanged = next == policy;
        last = Some(eta);
        if unchanged || stalled {
            return Ok(AscentResult {
                occupation: last.unwrap(),
                policy,
                trace,
                converged: true,
            });
        }
        policy = next;
    }
    Ok(AscentResult {
        occupation: last.expect("at least one round"),
        policy,
        trace,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{solve_irreducible, SolveOptions};
    use crate::fixtures;
    use crate::variational::dv_optimum;
    use approx::assert_abs_diff_eq;

    #[test]
    fn optimal_occupation_attains_log_rho() {
        let inst = fixtures::dominating();
        let sol = solve_irreducible(&inst, SolveOptions::default()).unwrap();
        let eta = build_optimal_occupation(&inst, &sol).unwrap();
        assert_eq!(eta.eta1[0], vec![1.0, 0.0]);
        let value = occupation_objective(&inst, &eta).unwrap();
        assert_abs_diff_eq!(value, ((2f64.exp() + 1.0) / 2.0).ln(), epsilon = 1e-9);
    }

    #[test]
    fn zero_reward_occupation_keeps_kernel() {
        let inst = fixtures::zero_reward();
        let sol = solve_irreducible(&inst, SolveOptions::default()).unwrap();
        let eta = build_optimal_occupation(&inst, &sol).unwrap();
        for i in 0..inst.n_states() {
            for (s, row) in inst.rows(i).iter().enumerate() {
                for j in 0..inst.n_states() {
                    assert_abs_diff_eq!(eta.eta2[i][s][j], row.prob[j], epsilon = 1e-12);
                }
            }
        }
        assert_abs_diff_eq!(occupation_objective(&inst, &eta).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn uncontrolled_occupation_matches_dv_optimum() {
        let q = NonnegMatrix::from_rows(&[vec![1.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let inst = MdpInstance::uncontrolled(&q);
        let sol = solve_irreducible(&inst, SolveOptions::default()).unwrap();
        let eta = build_optimal_occupation(&inst, &sol).unwrap();
        let dv = dv_optimum(&q).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(eta.eta2[i][0][j], dv.p_tilde.get(i, j), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn untwisted_measure_is_average_reward() {
        let inst = fixtures::two_state();
        let eta = OccupationMeasure::from_kernels(
            &inst,
            vec![vec![1.0], vec![1.0]],
            vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]],
        )
        .unwrap();
        let value = occupation_objective(&inst, &eta).unwrap();
        assert_abs_diff_eq!(value, 0.5 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn charging_forbidden_transition_is_neg_inf() {
        let inst = fixtures::two_cycle();
        let eta = OccupationMeasure::from_kernels(
            &inst,
            vec![vec![1.0], vec![1.0]],
            vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]],
        )
        .unwrap();
        assert_eq!(occupation_objective(&inst, &eta).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn non_invariant_eta0_is_rejected() {
        let inst = fixtures::two_state();
        let r = OccupationMeasure::new(
            &inst,
            vec![0.9, 0.1],
            vec![vec![1.0], vec![1.0]],
            vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]],
        );
        assert!(matches!(r, Err(VariationalError::NotOccupationMeasure(_))));
    }

    #[test]
    fn ascent_examples() {
        let inst = fixtures::dominating();
        let target = ((2f64.exp() + 1.0) / 2.0).ln();
        let best = Policy::deterministic(&inst, &[0, 0]).unwrap();
        let res = alternating_ascent(&inst, &best, 50, 0.0).unwrap();
        assert_eq!(res.trace.len(), 1);
        assert_abs_diff_eq!(res.trace[0], target, epsilon = 1e-10);

        let worst = Policy::deterministic(&inst, &[1, 0]).unwrap();
        let res = alternating_ascent(&inst, &worst, 50, 0.0).unwrap();
        assert!(res.converged);
        assert_abs_diff_eq!(*res.trace.last().unwrap(), target, epsilon = 1e-10);
        assert!(res.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));

        let two = fixtures::two_state();
        let res = alternating_ascent(&two, &Policy::uniform(&two), 10, 0.0).unwrap();
        assert_eq!(res.trace.len(), 1);
        assert_abs_diff_eq!(res.trace[0], 1.5f64.ln(), epsilon = 1e-12);
    }
}
