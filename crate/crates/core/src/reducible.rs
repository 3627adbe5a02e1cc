//! The general (reducible) case. Growth rates become state dependent, and the
//! value vector of the multiplicative dynamic programming equations
//!
//! ```text
//! Λ(i)Φ(i) = max_u Σ_j p(j|i,u) e^{r(i,u,j)} Φ(j)
//! Λ(i)     = max_{u ∈ D_i} Σ_j q*(j|i,u) Λ(j)
//! ```
//!
//! may vanish on states of smaller growth. Brute-force policy enumeration is
//! the reference semantics; ratio iteration is the scalable estimate; the
//! equations above are checked, not solved directly.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::control::policy_growth;
use crate::engine::{argmax_set, greedy_choice, power_iterate, LogOperator, PowerOutcome};
use crate::model::{instance_support_union, Classification, MdpInstance, Policy};
use crate::numeric::{ln_or_neg_inf, log_move, log_sum_exp};
use crate::spectral::{DEFAULT_MAX_ITER, DEFAULT_TOL, SPRAD_TOL};
use crate::variational::tilted_row;

pub const DEFAULT_CAP: u64 = 1_000_000;
pub const DEFAULT_HORIZON: usize = 10_000;

/// Relative tolerance under which a class counts as having maximal growth.
const MAX_CLASS_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReducibleError {
    #[error("deterministic policy count {} exceeds the enumeration cap {cap}", count.map_or("> 2^64".to_string(), |c| c.to_string()))]
    EnumerationCapExceeded { count: Option<u64>, cap: u64 },
    #[error("no reachable cycle has positive weight; every growth rate is -inf")]
    NoPositiveGrowth,
    #[error("twisted kernel at state {state}, action {action} has zero denominator")]
    DegenerateDenominator { state: usize, action: usize },
    #[error("expected a vector of length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("class value system is singular")]
    SingularClassSystem,
    #[error("class policy iteration did not settle in {0} rounds")]
    PolicyIterationStalled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMethod {
    Oracle,
    RatioIteration,
}

/// Per-state optimal growth rates `λ*(i)` (natural log) and their maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub lambda_star: Vec<f64>,
    pub global: f64,
    /// `best_policy[i]` attains `λ*(i)` from state `i`.
    pub best_policy: Vec<Policy>,
    pub method: GrowthMethod,
    /// Enumeration finished, or ratio estimates settled below `tol`.
    pub converged: bool,
    /// Policies enumerated, or ratio steps taken.
    pub steps: u64,
}

/// Solution candidate for the multiplicative DP equations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpSolution {
    /// `λ(i)`.
    pub lambda: Vec<f64>,
    /// `Λ(i) = e^{λ(i)}`.
    pub big_lambda: Vec<f64>,
    /// `Φ(i) = e^{V(i)}`; zero encodes `V(i) = -inf`.
    pub phi: Vec<f64>,
    pub v: Vec<f64>,
    /// Argmax action indices `D_i` of the first equation at `Φ`.
    pub argmax_sets: Vec<Vec<usize>>,
}

impl DpSolution {
    /// Fills in `Λ`, `V` and the argmax sets from `λ` and `Φ`.
    pub fn from_parts(
        inst: &MdpInstance,
        lambda: Vec<f64>,
        phi: Vec<f64>,
    ) -> Result<Self, ReducibleError> {
        let n = inst.n_states();
        for len in [lambda.len(), phi.len()] {
            if len != n {
                return Err(ReducibleError::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        let v: Vec<f64> = phi.iter().map(|&x| ln_or_neg_inf(x)).collect();
        let argmax_sets = (0..n)
            .map(|i| {
                let values = action_values(inst, i, &v);
                argmax_set(&values)
                    .into_iter()
                    .map(|s| inst.rows(i)[s].action)
                    .collect()
            })
            .collect();
        Ok(DpSolution {
            big_lambda: lambda.iter().map(|l| l.exp()).collect(),
            lambda,
            phi,
            v,
            argmax_sets,
        })
    }
}

/// `log Σ_j p(j|i,u) e^{r(i,u,j) + V(j)}` for every slot at `i`.
fn action_values(inst: &MdpInstance, i: usize, v: &[f64]) -> Vec<f64> {
    inst.rows(i)
        .iter()
        .map(|row| log_sum_exp((0..v.len()).map(|j| row.log_weight(j) + v[j])))
        .collect()
}

fn decode_policy(inst: &MdpInstance, mut index: u64) -> Vec<usize> {
    (0..inst.n_states())
        .map(|i| {
            let k = inst.rows(i).len() as u64;
            let s = index % k;
            index /= k;
            s as usize
        })
        .collect()
}

/// Best `(value, policy index)` per state; exact ties go to the lower index
/// so the merge is independent of scheduling.
fn merge_best(a: Vec<(f64, u64)>, b: Vec<(f64, u64)>) -> Vec<(f64, u64)> {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| {
            if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                y
            } else {
                x
            }
        })
        .collect()
}

/// Enumerates every deterministic stationary policy and takes the per-state
/// maximum of [`policy_growth`].
pub fn oracle_growth(inst: &MdpInstance, cap: u64) -> Result<GrowthReport, ReducibleError> {
    let count = inst.policy_count();
    let total = match count {
        Some(c) if c <= cap => c,
        _ => return Err(ReducibleError::EnumerationCapExceeded { count, cap }),
    };
    let n = inst.n_states();
    let best = (0..total)
        .into_par_iter()
        .map(|k| {
            let slots = decode_policy(inst, k);
            let policy = Policy::deterministic(inst, &slots).expect("decoded slots are in range");
            policy_growth(inst, &policy)
                .into_iter()
                .map(|g| (g, k))
                .collect::<Vec<_>>()
        })
        .reduce(|| vec![(f64::NEG_INFINITY, u64::MAX); n], merge_best);
    let lambda_star: Vec<f64> = best.iter().map(|b| b.0).collect();
    let best_policy = best
        .iter()
        .map(|&(_, k)| {
            let k = if k == u64::MAX { 0 } else { k };
            Policy::deterministic(inst, &decode_policy(inst, k)).expect("decoded slots are in range")
        })
        .collect();
    Ok(GrowthReport {
        global: lambda_star.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        lambda_star,
        best_policy,
        method: GrowthMethod::Oracle,
        converged: true,
        steps: total,
    })
}

/// Iterates `f ← Tf` from `f = 1` in the log domain and reports the one-step
/// ratios `λ_N(i) = log(f_{N+1}(i) / f_N(i))`.
///
/// Stops when no estimate moves by more than `tol` or after `horizon` steps.
/// Convergence can be as slow as `O(1/N)` when equal-growth classes are
/// chained, and estimates may oscillate on periodic structures.
pub fn ratio_iteration(inst: &MdpInstance, horizon: usize, tol: f64) -> GrowthReport {
    let n = inst.n_states();
    let op = LogOperator::from_instance(inst);
    let mut log_f = vec![0.0; n];
    let mut prev: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut steps = 0;
    let (lambda, greedy) = loop {
        let (log_tf, greedy) = op.apply(&log_f);
        let lambda: Vec<f64> = log_tf
            .iter()
            .zip(&log_f)
            .map(|(&t, &f)| if f == f64::NEG_INFINITY { f64::NEG_INFINITY } else { t - f })
            .collect();
        if let Some(p) = &prev {
            let moved = p
                .iter()
                .zip(&lambda)
                .map(|(&a, &b)| log_move(a, b))
                .fold(0.0, f64::max);
            if moved < tol {
                converged = true;
            }
        }
        steps += 1;
        if converged || steps >= horizon.max(1) {
            break (lambda, greedy);
        }
        let top = log_tf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        log_f = if top == f64::NEG_INFINITY {
            log_tf
        } else {
            log_tf.iter().map(|v| v - top).collect()
        };
        prev = Some(lambda);
    };
    let policy = Policy::deterministic(inst, &greedy).expect("greedy slots are in range");
    GrowthReport {
        global: lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        lambda_star: lambda,
        best_policy: vec![policy; n],
        method: GrowthMethod::RatioIteration,
        converged,
        steps: steps as u64,
    }
}

/// Optimal growth of one strongly connected class of the union support graph,
/// with its eigenvector (max 1, local indices).
#[derive(Debug, Clone)]
struct ClassEigen {
    rho: f64,
    phi: Vec<f64>,
}

fn class_eigen(inst: &MdpInstance, members: &[usize]) -> ClassEigen {
    let op = LogOperator::restricted(inst, members);
    let state = match power_iterate(&op, SPRAD_TOL, DEFAULT_MAX_ITER, |_| true) {
        PowerOutcome::Converged { state, .. }
        | PowerOutcome::MaxIter { state, .. }
        | PowerOutcome::Aborted { state, .. } => state,
        PowerOutcome::ZeroRow => {
            return ClassEigen {
                rho: 0.0,
                phi: vec![0.0; members.len()],
            }
        }
    };
    ClassEigen {
        rho: state.upper,
        phi: state.log_f.iter().map(|v| v.exp()).collect(),
    }
}

/// Per-state optimal growth through the class decomposition of the union
/// support graph: `λ*(i)` is the largest `log ρ_K` over classes `K` reachable
/// from `i`, where `ρ_K` is the optimal eigenvalue of the model restricted to
/// `K`.
pub fn class_growth(inst: &MdpInstance) -> Vec<f64> {
    let cls = instance_support_union(inst);
    let radii: Vec<f64> = cls
        .scc_list
        .iter()
        .map(|members| class_eigen(inst, members).rho)
        .collect();
    per_state_growth(&cls, &radii)
}

fn per_state_growth(cls: &Classification, radii: &[f64]) -> Vec<f64> {
    (0..cls.n_states())
        .map(|i| {
            let best = cls
                .reachable_sccs(cls.component_of[i])
                .into_iter()
                .map(|c| radii[c])
                .fold(0.0, f64::max);
            ln_or_neg_inf(best)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducibleOptions {
    pub tol: f64,
    pub horizon: usize,
    pub cap: u64,
}

impl Default for ReducibleOptions {
    fn default() -> Self {
        ReducibleOptions {
            tol: DEFAULT_TOL,
            horizon: DEFAULT_HORIZON,
            cap: DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducibleSolution {
    pub growth: GrowthReport,
    pub dp: DpSolution,
    /// Growth rates come from ratio iteration only.
    pub approximate: bool,
    pub warnings: Vec<String>,
}

/// Growth rates plus a DP solution.
///
/// `Φ` is the class eigenvector on maximal-growth classes with no other
/// maximal-growth class upstream; it is extended to every state that reaches
/// such a class by solving the first DP equation class by class, and is zero
/// elsewhere.
pub fn solve_reducible(
    inst: &MdpInstance,
    opts: ReducibleOptions,
) -> Result<ReducibleSolution, ReducibleError> {
    let ratio = ratio_iteration(inst, opts.horizon, opts.tol);
    let mut warnings = Vec::new();
    let (growth, approximate) = match oracle_growth(inst, opts.cap) {
        Ok(report) => (report, false),
        Err(e @ ReducibleError::EnumerationCapExceeded { .. }) => {
            warnings.push(format!("{e}; growth rates are ratio-iteration estimates"));
            (ratio, true)
        }
        Err(e) => return Err(e),
    };
    let phi = dp_potential(inst)?;
    let dp = DpSolution::from_parts(inst, growth.lambda_star.clone(), phi)?;
    Ok(ReducibleSolution {
        growth,
        dp,
        approximate,
        warnings,
    })
}

fn dp_potential(inst: &MdpInstance) -> Result<Vec<f64>, ReducibleError> {
    let n = inst.n_states();
    let cls = instance_support_union(inst);
    let eig: Vec<ClassEigen> = cls
        .scc_list
        .iter()
        .map(|members| class_eigen(inst, members))
        .collect();
    let rho_max = eig.iter().map(|e| e.rho).fold(0.0, f64::max);
    if rho_max == 0.0 {
        return Err(ReducibleError::NoPositiveGrowth);
    }
    let n_cls = cls.scc_list.len();
    let is_max: Vec<bool> = eig
        .iter()
        .map(|e| e.rho >= rho_max * (1.0 - MAX_CLASS_REL_TOL))
        .collect();
    let is_top: Vec<bool> = (0..n_cls)
        .map(|c| {
            is_max[c]
                && !(0..n_cls).any(|d| d != c && is_max[d] && cls.reachable_sccs(d).contains(&c))
        })
        .collect();
    let mut phi = vec![0.0; n];
    // Sinks first, so every downstream value is final when a class is visited.
    for (c, members) in cls.scc_list.iter().enumerate() {
        if is_top[c] {
            for (k, &i) in members.iter().enumerate() {
                phi[i] = eig[c].phi[k];
            }
        } else if cls.reachable_sccs(c).iter().any(|&d| is_top[d]) {
            let local = solve_class(inst, members, &phi, rho_max)?;
            for (k, &i) in members.iter().enumerate() {
                phi[i] = local[k];
            }
        }
    }
    Ok(phi)
}

/// Solves `ρ Φ(i) = max_u [Σ_{j∈C} w Φ(j) + b_u(i)]` on a class `C` whose own
/// growth is below `ρ`, by policy iteration with exact linear solves.
fn solve_class(
    inst: &MdpInstance,
    members: &[usize],
    phi: &[f64],
    rho: f64,
) -> Result<Vec<f64>, ReducibleError> {
    let m = members.len();
    let mut in_class = vec![None; inst.n_states()];
    for (k, &i) in members.iter().enumerate() {
        in_class[i] = Some(k);
    }
    // Per local state and slot: in-class weights and outside contribution.
    let pieces: Vec<Vec<(Vec<(usize, f64)>, f64)>> = members
        .iter()
        .map(|&i| {
            inst.rows(i)
                .iter()
                .map(|row| {
                    let mut inside = Vec::new();
                    let mut b = 0.0;
                    for j in 0..inst.n_states() {
                        let w = row.weight(j);
                        if w == 0.0 {
                            continue;
                        }
                        match in_class[j] {
                            Some(k) => inside.push((k, w)),
                            None => b += w * phi[j],
                        }
                    }
                    (inside, b)
                })
                .collect()
        })
        .collect();
    let value = |k: usize, s: usize, x: &[f64]| {
        let (inside, b) = &pieces[k][s];
        b + inside.iter().map(|&(l, w)| w * x[l]).sum::<f64>()
    };
    let mut slots: Vec<usize> = (0..m)
        .map(|k| {
            let outside: Vec<f64> = pieces[k].iter().map(|p| p.1.ln()).collect();
            greedy_choice(&outside)
        })
        .collect();
    let max_rounds = 1000;
    for _ in 0..max_rounds {
        let mut a = DMatrix::<f64>::identity(m, m) * rho;
        let mut rhs = DVector::<f64>::zeros(m);
        for k in 0..m {
            let (inside, b) = &pieces[k][slots[k]];
            for &(l, w) in inside {
                a[(k, l)] -= w;
            }
            rhs[k] = *b;
        }
        let x = a
            .lu()
            .solve(&rhs)
            .ok_or(ReducibleError::SingularClassSystem)?;
        let x: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let mut changed = false;
        for k in 0..m {
            let current = value(k, slots[k], &x);
            let values: Vec<f64> = (0..pieces[k].len()).map(|s| value(k, s, &x)).collect();
            let logs: Vec<f64> = values.iter().map(|&v| ln_or_neg_inf(v)).collect();
            let best = greedy_choice(&logs);
            if values[best] > current * (1.0 + 1e-12) {
                slots[k] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(x);
        }
    }
    Err(ReducibleError::PolicyIterationStalled(max_rounds))
}

/// Twisted kernel `q*(j|i,u) ∝ p(j|i,u) e^{r(i,u,j)} Φ(j)` for action index
/// `action` at state `i`.
pub fn twisted_kernel(
    inst: &MdpInstance,
    phi: &[f64],
    i: usize,
    action: usize,
) -> Result<Vec<f64>, ReducibleError> {
    if phi.len() != inst.n_states() {
        return Err(ReducibleError::DimensionMismatch {
            expected: inst.n_states(),
            found: phi.len(),
        });
    }
    let slot = inst
        .slot_of(i, action)
        .ok_or(ReducibleError::DegenerateDenominator { state: i, action })?;
    let v: Vec<f64> = phi.iter().map(|&x| ln_or_neg_inf(x)).collect();
    tilted_row(&inst.rows(i)[slot], &v)
        .map(|g| g.q)
        .map_err(|_| ReducibleError::DegenerateDenominator { state: i, action })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DpStatus {
    Verified,
    Violated,
    /// `Φ(i) = 0`: the equations carry no information at `i`.
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateResidual {
    pub status: DpStatus,
    /// `|Λ(i)Φ(i) − max_u Σ_j p e^r Φ(j)|`.
    pub residual1: f64,
    /// `|Λ(i) − max_{u∈D_i} Σ_j q*(j|i,u) Λ(j)|`, when some twisted kernel
    /// over `D_i` is defined.
    pub residual2: Option<f64>,
    /// `D_i` as action indices.
    pub argmax: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpResidualReport {
    pub states: Vec<StateResidual>,
    /// No state is violated.
    pub clean: bool,
}

/// Checks both DP equations at every state with `Φ(i) > 0`; tolerances are
/// relative to `max(1, Λ(i)Φ(i))` and `max(1, Λ(i))`.
pub fn dp_residuals(inst: &MdpInstance, sol: &DpSolution, tol: f64) -> DpResidualReport {
    let n = inst.n_states();
    let v: Vec<f64> = sol.phi.iter().map(|&x| ln_or_neg_inf(x)).collect();
    let states: Vec<StateResidual> = (0..n)
        .map(|i| {
            let rows = inst.rows(i);
            let values = action_values(inst, i, &v);
            let d_i = argmax_set(&values);
            let best = values[greedy_choice(&values)].exp();
            let lhs = sol.big_lambda[i] * sol.phi[i];
            let residual1 = (lhs - best).abs();
            let residual2 = d_i
                .iter()
                .filter_map(|&s| tilted_row(&rows[s], &v).ok())
                .map(|g| {
                    g.q.iter()
                        .zip(&sol.big_lambda)
                        .map(|(q, l)| q * l)
                        .sum::<f64>()
                })
                .reduce(f64::max)
                .map(|m| (sol.big_lambda[i] - m).abs());
            let status = if sol.phi[i] <= 0.0 {
                DpStatus::Unverifiable
            } else if residual1 <= tol * lhs.max(1.0)
                && residual2.is_none_or(|r| r <= tol * sol.big_lambda[i].max(1.0))
            {
                DpStatus::Verified
            } else {
                DpStatus::Violated
            };
            StateResidual {
                status,
                residual1,
                residual2,
                argmax: d_i.into_iter().map(|s| rows[s].action).collect(),
            }
        })
        .collect();
    DpResidualReport {
        clean: states.iter().all(|s| s.status != DpStatus::Violated),
        states,
    }
}
