//! Finite-horizon evaluation of `E[exp(Σ_{m<N} r) | X₀ = i]` under a fixed
//! policy: exactly through `(Q_φᴺ 1)(i)`, or by seeded Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{policy_matrix, MdpInstance, Policy};
use crate::numeric::log_sum_exp;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("horizons must be positive and strictly increasing")]
    BadHorizons,
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("policy has {found} rows but the instance has {expected} states")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("start state {0} is out of range")]
    StartOutOfRange(usize),
}

/// `(1/N) log (Q_φᴺ 1)(i)` at each requested horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCurve {
    pub horizons: Vec<usize>,
    /// `per_state_values[k][i]` at horizon `horizons[k]`.
    pub per_state_values: Vec<Vec<f64>>,
    /// Values at the last horizon.
    pub limit_estimate: Vec<f64>,
}

fn check_policy(inst: &MdpInstance, policy: &Policy) -> Result<(), EvalError> {
    if policy.n_states() != inst.n_states() {
        return Err(EvalError::DimensionMismatch {
            expected: inst.n_states(),
            found: policy.n_states(),
        });
    }
    Ok(())
}

/// Matrix powers in the log domain with per-step normalization.
pub fn exact_growth(
    inst: &MdpInstance,
    policy: &Policy,
    horizons: &[usize],
) -> Result<GrowthCurve, EvalError> {
    check_policy(inst, policy)?;
    if horizons.is_empty()
        || horizons[0] == 0
        || horizons.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(EvalError::BadHorizons);
    }
    let q = policy_matrix(inst, policy);
    let n = q.n();
    let log_q: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            q.row(i)
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(j, &w)| (j, w.ln()))
                .collect()
        })
        .collect();
    let mut log_f = vec![0.0; n];
    let mut offset = 0.0;
    let mut per_state_values = Vec::with_capacity(horizons.len());
    let mut next_h = horizons.iter().peekable();
    let last = *horizons.last().expect("nonempty");
    for step in 1..=last {
        let raw: Vec<f64> = log_q
            .iter()
            .map(|edges| log_sum_exp(edges.iter().map(|&(j, lw)| lw + log_f[j])))
            .collect();
        let top = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            log_f = raw;
        } else {
            offset += top;
            log_f = raw.iter().map(|v| v - top).collect();
        }
        if next_h.peek() == Some(&&step) {
            next_h.next();
            per_state_values.push(
                log_f
                    .iter()
                    .map(|v| (v + offset) / step as f64)
                    .collect::<Vec<_>>(),
            );
        }
    }
    Ok(GrowthCurve {
        horizons: horizons.to_vec(),
        limit_estimate: per_state_values.last().cloned().expect("nonempty"),
        per_state_values,
    })
}

/// Monte Carlo estimate of `(1/N) log E[exp(Σ r)]` from each start state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub point_estimate: Vec<f64>,
    /// Delta-method standard error of the point estimate.
    pub naive_std_error: Vec<f64>,
    /// The largest sample is more than half of the sample mean's mass.
    pub heavy_tail: Vec<bool>,
    pub sample_count: usize,
    pub steps: usize,
    pub seed: u64,
}

/// Inverse CDF over `weights` in index order.
fn sample_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("distribution has positive mass")
}

/// One step from `x`: (slot, next state, reward).
fn step<R: Rng>(inst: &MdpInstance, policy: &Policy, rng: &mut R, x: usize) -> (usize, usize, f64) {
    let slot = sample_index(rng, policy.row(x));
    let row = &inst.rows(x)[slot];
    let y = sample_index(rng, &row.prob);
    (slot, y, row.reward[y])
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates `samples` trajectories of length `steps` from every state.
///
/// Sample `s` from state `i` uses the ChaCha stream `i · samples + s` of
/// `seed`, and the reduction runs in index order, so the result is
/// bit-reproducible regardless of thread scheduling.
pub fn monte_carlo_growth(
    inst: &MdpInstance,
    policy: &Policy,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate, EvalError> {
    check_policy(inst, policy)?;
    if steps == 0 {
        return Err(EvalError::ZeroCount("steps"));
    }
    if samples == 0 {
        return Err(EvalError::ZeroCount("samples"));
    }
    let n = inst.n_states();
    let mut point_estimate = Vec::with_capacity(n);
    let mut naive_std_error = Vec::with_capacity(n);
    let mut heavy_tail = Vec::with_capacity(n);
    for start in 0..n {
        let log_w: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|s| {
                let mut rng = stream_rng(seed, (start * samples + s) as u64);
                let mut x = start;
                let mut total = 0.0;
                for _ in 0..steps {
                    let (_, y, r) = step(inst, policy, &mut rng, x);
                    total += r;
                    x = y;
                }
                total
            })
            .collect();
        let log_sum = log_sum_exp(log_w.iter().copied());
        if log_sum == f64::NEG_INFINITY {
            point_estimate.push(f64::NEG_INFINITY);
            naive_std_error.push(f64::INFINITY);
            heavy_tail.push(false);
            continue;
        }
        let log_mean = log_sum - (samples as f64).ln();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Relative spread of the weights around their mean.
        let second: f64 = log_w
            .iter()
            .map(|&l| (2.0 * (l - log_mean)).exp())
            .sum::<f64>()
            / samples as f64;
        let var = if samples > 1 {
            (second - 1.0).max(0.0) * samples as f64 / (samples - 1) as f64
        } else {
            0.0
        };
        point_estimate.push(log_mean / steps as f64);
        naive_std_error.push((var / samples as f64).sqrt() / steps as f64);
        heavy_tail.push((max - log_sum).exp() > 0.5);
    }
    Ok(McEstimate {
        point_estimate,
        naive_std_error,
        heavy_tail,
        sample_count: samples,
        steps,
        seed,
    })
}

/// A sampled path: `states` has one more entry than `actions` and `rewards`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    /// Action indices.
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub total_reward: f64,
}

pub fn simulate_trajectory(
    inst: &MdpInstance,
    policy: &Policy,
    steps: usize,
    seed: u64,
    start: usize,
) -> Result<Trajectory, EvalError> {
    check_policy(inst, policy)?;
    if start >= inst.n_states() {
        return Err(EvalError::StartOutOfRange(start));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(steps + 1);
    let mut actions = Vec::with_capacity(steps);
    let mut rewards = Vec::with_capacity(steps);
    let mut x = start;
    states.push(x);
    for _ in 0..steps {
        let (slot, y, r) = step(inst, policy, &mut rng, x);
        actions.push(inst.rows(x)[slot].action);
        rewards.push(r);
        states.push(y);
        x = y;
    }
    Ok(Trajectory {
        total_reward: rewards.iter().sum(),
        states,
        actions,
        rewards,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_reward_curve_is_flat() {
        let inst = fixtures::zero_reward();
        let curve = exact_growth(&inst, &Policy::uniform(&inst), &[1, 10, 100]).unwrap();
        for row in &curve.per_state_values {
            assert!(row.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn triangular_curve_approaches_log_two() {
        let inst = fixtures::triangular();
        let curve = exact_growth(&inst, &Policy::uniform(&inst), &[10, 100, 1000]).unwrap();
        let errs: Vec<f64> = curve
            .per_state_values
            .iter()
            .map(|v| (v[1] - 2f64.ln()).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
        assert!(errs[2] < 1e-3);
        assert_eq!(curve.limit_estimate, curve.per_state_values[2]);
    }

    #[test]
    fn two_state_small_horizons_are_exact() {
        // (Q 1) = (2, 1), (Q² 1) = (3, 1.5).
        let inst = fixtures::two_state();
        let curve = exact_growth(&inst, &Policy::uniform(&inst), &[1, 2]).unwrap();
        assert_abs_diff_eq!(curve.per_state_values[0][0], 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(curve.per_state_values[1][1], 1.5f64.ln() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn bad_horizons_are_rejected() {
        let inst = fixtures::two_state();
        let p = Policy::uniform(&inst);
        assert_eq!(exact_growth(&inst, &p, &[]), Err(EvalError::BadHorizons));
        assert_eq!(exact_growth(&inst, &p, &[0, 1]), Err(EvalError::BadHorizons));
        assert_eq!(exact_growth(&inst, &p, &[5, 5]), Err(EvalError::BadHorizons));
    }

    #[test]
    fn monte_carlo_zero_reward_is_exact() {
        let inst = fixtures::zero_reward();
        let est = monte_carlo_growth(&inst, &Policy::uniform(&inst), 20, 500, 7).unwrap();
        assert!(est.point_estimate.iter().all(|&v| v == 0.0));
        assert!(est.naive_std_error.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let inst = fixtures::two_state();
        let p = Policy::uniform(&inst);
        let a = monte_carlo_growth(&inst, &p, 50, 2000, 3).unwrap();
        let b = monte_carlo_growth(&inst, &p, 50, 2000, 3).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_growth(&inst, &p, 50, 2000, 4).unwrap();
        assert_ne!(a.point_estimate, c.point_estimate);
    }

    #[test]
    fn deterministic_kernel_has_one_path() {
        let inst = fixtures::triangular();
        let p = Policy::uniform(&inst);
        let a = simulate_trajectory(&inst, &p, 8, 1, 0).unwrap();
        let b = simulate_trajectory(&inst, &p, 8, 99, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.states, vec![0; 9]);
    }

    #[test]
    fn empirical_frequencies_are_uniform() {
        let inst = fixtures::two_state();
        let p = Policy::uniform(&inst);
        let path = simulate_trajectory(&inst, &p, 100_000, 0, 0).unwrap();
        let mut counts = [[0usize; 2]; 2];
        for w in path.states.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        for row in counts {
            let f = row[0] as f64 / (row[0] + row[1]) as f64;
            assert!((f - 0.5).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn repeated_seed_repeats_path() {
        let inst = fixtures::dominating();
        let p = Policy::uniform(&inst);
        let a = simulate_trajectory(&inst, &p, 100, 5, 1).unwrap();
        assert_eq!(a, simulate_trajectory(&inst, &p, 100, 5, 1).unwrap());
        assert_eq!(a.states.len(), 101);
    }
}
