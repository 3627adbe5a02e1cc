use serde::Serialize;

use crate::control::ControlledEigenSolution;
use crate::engine::argmax_set;
use crate::model::MdpInstance;
use crate::numeric::log_sum_exp;

use super::{tilted_row, VariationalError};

/// Candidate dual variables: gains `λ(i)`, potentials `V(i)` (may be `-inf`)
/// and the objective `λ̆`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub lambda: Vec<f64>,
    pub v: Vec<f64>,
    pub breve_lambda: f64,
}

impl DualCertificate {
    pub fn new(
        inst: &MdpInstance,
        lambda: Vec<f64>,
        v: Vec<f64>,
        breve_lambda: f64,
    ) -> Result<Self, VariationalError> {
        let n = inst.n_states();
        for len in [lambda.len(), v.len()] {
            if len != n {
                return Err(VariationalError::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(DualCertificate {
            lambda,
            v,
            breve_lambda,
        })
    }

    /// `λ ≡ log ρ`, `V = log ψ`, `λ̆ = log ρ`.
    pub fn from_solution(sol: &ControlledEigenSolution) -> Self {
        DualCertificate {
            lambda: vec![sol.log_rho; sol.psi.len()],
            v: sol.psi.iter().map(|x| x.ln()).collect(),
            breve_lambda: sol.log_rho,
        }
    }
}

/// Slack of `λ(i) + V(i) ≥ log Σ_j p(j|i,u) e^{r(i,u,j) + V(j)}` for one action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiddleSlack {
    pub state: usize,
    pub action: usize,
    pub slack: f64,
    /// `|slack| ≤ tol`.
    pub tight: bool,
}

/// Per-constraint slacks; a negative slack is a violation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualReport {
    /// `λ̆ − λ(i)`.
    pub first: Vec<f64>,
    /// One entry per available `(i,u)` with `V(i)` finite.
    pub middle: Vec<MiddleSlack>,
    /// `λ(i) − max_{u ∈ D_i} Σ_j q*(j|i,u) λ(j)`; `None` where `V(i) = -inf`.
    pub third: Vec<Option<f64>>,
    /// Argmax sets `D_i` (action indices) of the middle family.
    pub argmax: Vec<Vec<usize>>,
    pub min_slack: f64,
    pub feasible: bool,
}

/// Checks a dual certificate. The middle family, quantified over all
/// `(u, q)`, is reduced by the Gibbs principle to one constraint per action;
/// the third family is checked over the argmax sets with twisted kernels.
pub fn dual_feasibility(inst: &MdpInstance, cert: &DualCertificate, tol: f64) -> DualReport {
    let n = inst.n_states();
    let first: Vec<f64> = cert.lambda.iter().map(|l| cert.breve_lambda - l).collect();
    let mut middle = Vec::new();
    let mut third = Vec::with_capacity(n);
    let mut argmax = Vec::with_capacity(n);
    for i in 0..n {
        let rows = inst.rows(i);
        let values: Vec<f64> = rows
            .iter()
            .map(|row| log_sum_exp((0..n).map(|j| row.log_weight(j) + cert.v[j])))
            .collect();
        if cert.v[i] == f64::NEG_INFINITY {
            third.push(None);
            argmax.push(Vec::new());
            continue;
        }
        for (row, &value) in rows.iter().zip(&values) {
            let slack = cert.lambda[i] + cert.v[i] - value;
            middle.push(MiddleSlack {
                state: i,
                action: row.action,
                slack,
                tight: slack.abs() <= tol,
            });
        }
        let d_i = argmax_set(&values);
        let best = d_i
            .iter()
            .filter_map(|&s| tilted_row(&rows[s], &cert.v).ok())
            .map(|g| {
                g.q.iter()
                    .zip(&cert.lambda)
                    .filter(|(q, _)| **q > 0.0)
                    .map(|(q, l)| q * l)
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        third.push((best > f64::NEG_INFINITY).then(|| cert.lambda[i] - best));
        argmax.push(d_i.iter().map(|&s| rows[s].action).collect());
    }
    let min_slack = first
        .iter()
        .copied()
        .chain(middle.iter().map(|m| m.slack))
        .chain(third.iter().flatten().copied())
        .fold(f64::INFINITY, f64::min);
    DualReport {
        first,
        middle,
        third,
        argmax,
        min_slack,
        feasible: min_slack >= -tol,
    }
}
