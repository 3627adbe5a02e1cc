//! The controlled irreducible case: the operator
//! `Tf(i) = max_u Σ_j p(j|i,u) e^{r(i,u,j)} f(j)`, its principal eigenpair
//! `Tψ = ρψ`, and Collatz–Wielandt certificates for `ρ`.
//!
//! `T` is linear in a randomized action choice, so the supremum over relaxed
//! controls is always attained at a pure action and the implementation only
//! maximizes over actions.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{power_iterate, LogOperator, PowerOutcome};
use crate::model::{
    classify, instance_support_union, policy_matrix, MdpInstance, Policy,
};
use crate::numeric::ln_or_neg_inf;
use crate::spectral::{scc_radii, CwBounds, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("input vector must be strictly positive (entry {index} = {value})")]
    NonpositiveInput { index: usize, value: f64 },
    #[error("expected a vector of length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("instance support graph is not irreducible")]
    NotIrreducible,
    #[error("greedy policy support became reducible at iteration {iteration}; use the reducible solver")]
    ReducibleUnderGreedy { iteration: usize, actions: Vec<usize> },
    #[error("nonlinear power iteration did not converge in {iterations} iterations (bounds [{lower}, {upper}])")]
    MaxIterExceeded { lower: f64, upper: f64, iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// `Tψ = ρψ` with `ψ > 0` (max entry 1) and a greedy optimal policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlledEigenSolution {
    pub rho: f64,
    /// `log ρ`, the optimal risk-sensitive growth rate.
    pub log_rho: f64,
    pub psi: Vec<f64>,
    #[serde(skip)]
    pub policy: Policy,
    /// `‖Tψ − ρψ‖_∞`.
    pub residual: f64,
    /// Collatz–Wielandt bracket at `ψ`.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

fn log_positive(f: &[f64], n: usize) -> Result<Vec<f64>, ControlError> {
    if f.len() != n {
        return Err(ControlError::DimensionMismatch {
            expected: n,
            found: f.len(),
        });
    }
    f.iter()
        .enumerate()
        .map(|(index, &value)| {
            if value > 0.0 && value.is_finite() {
                Ok(value.ln())
            } else {
                Err(ControlError::NonpositiveInput { index, value })
            }
        })
        .collect()
}

fn greedy_policy(inst: &MdpInstance, slots: &[usize]) -> Policy {
    Policy::deterministic(inst, slots).expect("greedy slots are in range")
}

/// Applies `T` to a positive vector; also returns the greedy deterministic
/// policy (ties to the lowest action index at relative tolerance 1e-9).
pub fn bellman_t(inst: &MdpInstance, f: &[f64]) -> Result<(Vec<f64>, Policy), ControlError> {
    let log_f = log_positive(f, inst.n_states())?;
    let (log_tf, slots) = LogOperator::from_instance(inst).apply(&log_f);
    Ok((
        log_tf.into_iter().map(f64::exp).collect(),
        greedy_policy(inst, &slots),
    ))
}

/// Collatz–Wielandt bracket `[min_i (Tf)_i/f_i, max_i (Tf)_i/f_i]` for `ρ`.
///
/// In finite dimension the sup/inf over probability measures in the abstract
/// formula is attained at point masses, which reduces it to these ratios.
pub fn cw_certificate(inst: &MdpInstance, f: &[f64]) -> Result<CwBounds, ControlError> {
    let log_f = log_positive(f, inst.n_states())?;
    let (log_tf, _) = LogOperator::from_instance(inst).apply(&log_f);
    let (lo, hi) = log_tf
        .iter()
        .zip(&log_f)
        .map(|(a, b)| a - b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
    Ok(CwBounds {
        test_vector: f.to_vec(),
        lower: lo.exp(),
        upper: hi.exp(),
    })
}

/// Solves `Tψ = ρψ` by normalized nonlinear power iteration.
pub fn solve_irreducible(
    inst: &MdpInstance,
    opts: SolveOptions,
) -> Result<ControlledEigenSolution, ControlError> {
    solve_irreducible_observed(inst, opts, |_, _, _| {})
}

/// As [`solve_irreducible`], calling `observer(f, lower, upper)` with every
/// iterate and its Collatz–Wielandt bracket.
pub fn solve_irreducible_observed(
    inst: &MdpInstance,
    opts: SolveOptions,
    mut observer: impl FnMut(&[f64], f64, f64),
) -> Result<ControlledEigenSolution, ControlError> {
    if !instance_support_union(inst).irreducible {
        return Err(ControlError::NotIrreducible);
    }
    let op = LogOperator::from_instance(inst);
    let mut last_greedy: Option<Vec<usize>> = None;
    let mut greedy_ok = true;
    let mut iteration = 0;
    let outcome = power_iterate(&op, opts.tol, opts.max_iter, |state| {
        if last_greedy.as_deref() != Some(state.greedy.as_slice()) {
            greedy_ok = op.choice_classification(&state.greedy).irreducible;
            last_greedy = Some(state.greedy.clone());
        }
        if greedy_ok {
            let f: Vec<f64> = state.log_f.iter().map(|v| v.exp()).collect();
            observer(&f, state.lower, state.upper);
            iteration += 1;
        }
        greedy_ok
    });
    match outcome {
        PowerOutcome::Converged { state, iterations } => {
            let psi: Vec<f64> = state.log_f.iter().map(|v| v.exp()).collect();
            let (tpsi, policy) = bellman_t(inst, &psi)?;
            let rho = state.upper;
            let residual = tpsi
                .iter()
                .zip(&psi)
                .map(|(t, p)| (t - rho * p).abs())
                .fold(0.0, f64::max);
            Ok(ControlledEigenSolution {
                rho,
                log_rho: rho.ln(),
                psi,
                policy,
                residual,
                lower: state.lower,
                upper: state.upper,
                iterations,
            })
        }
        PowerOutcome::MaxIter { state, iterations } => Err(ControlError::MaxIterExceeded {
            lower: state.lower,
            upper: state.upper,
            iterations,
        }),
        PowerOutcome::Aborted { state, iterations } => Err(ControlError::ReducibleUnderGreedy {
            iteration: iterations,
            actions: state
                .greedy
                .iter()
                .enumerate()
                .map(|(i, &k)| inst.rows(i)[k].action)
                .collect(),
        }),
        PowerOutcome::ZeroRow => Err(ControlError::NotIrreducible),
    }
}

/// Per-state growth rate `log sprad(Q_φ restricted to the states reachable
/// from i)`; `-inf` where no cycle of positive weight is reachable.
pub fn policy_growth(inst: &MdpInstance, policy: &Policy) -> Vec<f64> {
    let q = policy_matrix(inst, policy);
    let cls = classify(&q);
    let radii = scc_radii(&q, &cls);
    (0..inst.n_states())
        .map(|i| {
            let best = cls.reachable[i]
                .iter()
                .map(|&j| radii[cls.component_of[j]])
                .fold(0.0, f64::max);
            ln_or_neg_inf(best)
        })
        .collect()
}
