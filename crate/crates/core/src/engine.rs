//! Log-domain max-plus-sum operators and the shifted nonlinear power iteration
//! shared by the linear, controlled and per-class eigen solvers.

use crate::model::{Classification, MdpInstance, NonnegMatrix};
use crate::numeric::{log_add_exp, log_sum_exp};

/// Relative tolerance under which two action values count as tied.
pub const TIE_REL_TOL: f64 = 1e-9;

/// `(Tf)(i) = max_k Σ_j w_k(i,j) f(j)` stored as sparse log weights.
#[derive(Debug, Clone)]
pub(crate) struct LogOperator {
    rows: Vec<Vec<Vec<(usize, f64)>>>,
}

impl LogOperator {
    pub fn from_instance(inst: &MdpInstance) -> Self {
        let all: Vec<usize> = (0..inst.n_states()).collect();
        Self::restricted(inst, &all)
    }

    /// Operator of the sub-model on `members`, with weights leaving the set
    /// dropped. Local index `k` stands for state `members[k]`; every available
    /// action keeps its slot.
    pub fn restricted(inst: &MdpInstance, members: &[usize]) -> Self {
        let rows = members
            .iter()
            .map(|&i| {
                inst.rows(i)
                    .iter()
                    .map(|row| {
                        members
                            .iter()
                            .enumerate()
                            .filter_map(|(k, &j)| {
                                let lw = row.log_weight(j);
                                (lw > f64::NEG_INFINITY).then_some((k, lw))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        LogOperator { rows }
    }

    pub fn from_matrix(q: &NonnegMatrix) -> Self {
        let rows = (0..q.n())
            .map(|i| {
                vec![q
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(j, &v)| (j, v.ln()))
                    .collect()]
            })
            .collect();
        LogOperator { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// `log Σ_j w_k(i,j) f(j)` for every choice `k` at state `i`.
    pub fn choice_values(&self, i: usize, log_f: &[f64]) -> Vec<f64> {
        self.rows[i]
            .iter()
            .map(|edges| log_sum_exp(edges.iter().map(|&(j, lw)| lw + log_f[j])))
            .collect()
    }

    /// `log Tf` and the greedy (lowest tied index) choice per state.
    pub fn apply(&self, log_f: &[f64]) -> (Vec<f64>, Vec<usize>) {
        (0..self.n())
            .map(|i| {
                let values = self.choice_values(i, log_f);
                let k = greedy_choice(&values);
                (values[k], k)
            })
            .unzip()
    }

    /// Support graph of the linear map selected by `choices`.
    pub fn choice_classification(&self, choices: &[usize]) -> Classification {
        let n = self.n();
        let mut adj = vec![vec![false; n]; n];
        for (i, &k) in choices.iter().enumerate() {
            for &(j, _) in &self.rows[i][k] {
                adj[i][j] = true;
            }
        }
        Classification::from_adjacency(&adj)
    }
}

/// Lowest index whose value is within `TIE_REL_TOL` (relative) of the max.
pub(crate) fn greedy_choice(log_values: &[f64]) -> usize {
    let best = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return 0;
    }
    let cutoff = best + (-TIE_REL_TOL).ln_1p();
    log_values
        .iter()
        .position(|&v| v >= cutoff)
        .expect("max is attained")
}

/// All indices within `TIE_REL_TOL` (relative) of the max.
pub(crate) fn argmax_set(log_values: &[f64]) -> Vec<usize> {
    let best = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return (0..log_values.len()).collect();
    }
    let cutoff = best + (-TIE_REL_TOL).ln_1p();
    (0..log_values.len())
        .filter(|&k| log_values[k] >= cutoff)
        .collect()
}

/// Snapshot of one power-iteration step at the current iterate `f`.
#[derive(Debug, Clone)]
pub(crate) struct PowerState {
    /// Iterate, normalized to max 0.
    pub log_f: Vec<f64>,
    pub greedy: Vec<usize>,
    /// `min_i (Tf)_i / f_i`.
    pub lower: f64,
    /// `max_i (Tf)_i / f_i`.
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum PowerOutcome {
    Converged { state: PowerState, iterations: usize },
    MaxIter { state: PowerState, iterations: usize },
    Aborted { state: PowerState, iterations: usize },
    /// Some state has no positive weight towards a positive iterate.
    ZeroRow,
}

/// Normalized nonlinear power iteration `f ← Tf/s + f`, where `s` is the
/// current upper Collatz–Wielandt bound; the shift defeats periodicity without
/// moving the eigenvector, and the upper bound never increases.
///
/// Stops once `upper - lower <= tol * upper`. `observe` sees every iterate and
/// may abort by returning `false`.
pub(crate) fn power_iterate(
    op: &LogOperator,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&PowerState) -> bool,
) -> PowerOutcome {
    let n = op.n();
    let mut log_f = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let (log_tf, greedy) = op.apply(&log_f);
        if log_tf.contains(&f64::NEG_INFINITY) {
            return PowerOutcome::ZeroRow;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let d = log_tf[i] - log_f[i];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let state = PowerState {
            log_f: log_f.clone(),
            greedy,
            lower: lo.exp(),
            upper: hi.exp(),
        };
        if !observe(&state) {
            return PowerOutcome::Aborted { state, iterations };
        }
        if state.upper - state.lower <= tol * state.upper {
            return PowerOutcome::Converged { state, iterations };
        }
        if iterations >= max_iter {
            return PowerOutcome::MaxIter { state, iterations };
        }
        let mut next: Vec<f64> = (0..n)
            .map(|i| log_add_exp(log_tf[i] - hi, log_f[i]))
            .collect();
        let top = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        next.iter_mut().for_each(|v| *v -= top);
        log_f = next;
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_prefers_lowest_index_on_ties() {
        assert_eq!(greedy_choice(&[1.0, 1.0 + 1e-12, 0.5]), 0);
        assert_eq!(greedy_choice(&[1.0, 1.1]), 1);
        assert_eq!(greedy_choice(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), 0);
        assert_eq!(argmax_set(&[2.0, 1.0, 2.0]), vec![0, 2]);
    }

    #[test]
    fn periodic_matrix_converges_with_shift() {
        let q = NonnegMatrix::from_rows(&[vec![0.0, 4.0], vec![1.0, 0.0]]).unwrap();
        let op = LogOperator::from_matrix(&q);
        match power_iterate(&op, 1e-12, 10_000, |_| true) {
            PowerOutcome::Converged { state, .. } => {
                assert!((state.upper - 2.0).abs() < 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
