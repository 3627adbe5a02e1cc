//! Seeded random corpora: matrices, instances, policies and distributions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{default_labels, ActionRow, MdpInstance, NonnegMatrix, Policy};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random probability vector; entries outside `support` are zero.
pub fn distribution<R: Rng>(rng: &mut R, support: &[bool]) -> Vec<f64> {
    // Exponential spacings give a flat Dirichlet.
    let mut v: Vec<f64> = support
        .iter()
        .map(|&s| if s { -(1.0 - rng.random::<f64>()).ln() + 1e-3 } else { 0.0 })
        .collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

pub fn full_distribution<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    distribution(rng, &vec![true; n])
}

/// Random nonempty support of size at most `n`.
pub fn random_support<R: Rng>(rng: &mut R, n: usize) -> Vec<bool> {
    let k = rng.random_range(1..=n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut s = vec![false; n];
    idx[..k].iter().for_each(|&i| s[i] = true);
    s
}

pub fn positive_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| 0.05 + rng.random::<f64>() * 2.0).collect()
}

/// Irreducible nonnegative matrix with roughly `density` positive entries,
/// made strongly connected by a random Hamiltonian cycle.
pub fn irreducible_matrix<R: Rng>(rng: &mut R, n: usize, density: f64) -> NonnegMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for row in rows.iter_mut() {
        for v in row.iter_mut() {
            if rng.random::<f64>() < density {
                *v = 0.1 + rng.random::<f64>() * 2.0;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for k in 0..n {
        let (i, j) = (order[k], order[(k + 1) % n]);
        if rows[i][j] == 0.0 {
            rows[i][j] = 0.1 + rng.random::<f64>() * 2.0;
        }
    }
    NonnegMatrix::from_rows(&rows).unwrap()
}

/// Shape of a random instance corpus.
#[derive(Debug, Clone, Copy)]
pub struct InstanceSpec {
    pub min_states: usize,
    pub max_states: usize,
    pub max_actions: usize,
    /// Full-support kernels (irreducible under every policy) or random
    /// sparse supports.
    pub full_support: bool,
    /// Rewards are uniform on `[-reward_scale, reward_scale]`.
    pub reward_scale: f64,
    /// Probability that a supported transition gets a `-inf` reward.
    pub neg_inf_rate: f64,
}

impl InstanceSpec {
    pub fn irreducible() -> Self {
        InstanceSpec {
            min_states: 2,
            max_states: 5,
            max_actions: 3,
            full_support: true,
            reward_scale: 1.0,
            neg_inf_rate: 0.0,
        }
    }

    pub fn sparse() -> Self {
        InstanceSpec {
            full_support: false,
            neg_inf_rate: 0.1,
            ..Self::irreducible()
        }
    }
}

/// Random instance with state-dependent action sets drawn from
/// `0..spec.max_actions`.
pub fn instance<R: Rng>(rng: &mut R, spec: &InstanceSpec) -> MdpInstance {
    let n = rng.random_range(spec.min_states..=spec.max_states);
    let rows = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=spec.max_actions);
            let mut actions: Vec<usize> = (0..spec.max_actions).collect();
            actions.shuffle(rng);
            actions[..k]
                .iter()
                .map(|&action| {
                    let support = if spec.full_support {
                        vec![true; n]
                    } else {
                        random_support(rng, n)
                    };
                    let prob = distribution(rng, &support);
                    let reward = (0..n)
                        .map(|j| {
                            if prob[j] > 0.0 && rng.random::<f64>() < spec.neg_inf_rate {
                                f64::NEG_INFINITY
                            } else {
                                (2.0 * rng.random::<f64>() - 1.0) * spec.reward_scale
                            }
                        })
                        .collect();
                    ActionRow {
                        action,
                        prob,
                        reward,
                    }
                })
                .collect()
        })
        .collect();
    MdpInstance::new(
        default_labels("s", n),
        default_labels("u", spec.max_actions),
        rows,
    )
    .unwrap()
}

pub fn deterministic_policy<R: Rng>(rng: &mut R, inst: &MdpInstance) -> Policy {
    let slots: Vec<usize> = (0..inst.n_states())
        .map(|i| rng.random_range(0..inst.rows(i).len()))
        .collect();
    Policy::deterministic(inst, &slots).unwrap()
}

pub fn randomized_policy<R: Rng>(rng: &mut R, inst: &MdpInstance) -> Policy {
    let rows = (0..inst.n_states())
        .map(|i| full_distribution(rng, inst.rows(i).len()))
        .collect();
    Policy::new(inst, rows).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{classify, instance_support_union};

    #[test]
    fn generators_respect_contracts() {
        let mut r = rng(7);
        for _ in 0..50 {
            let n = r.random_range(1..=8);
            assert!(classify(&irreducible_matrix(&mut r, n, 0.3)).irreducible);
            let inst = instance(&mut r, &InstanceSpec::irreducible());
            assert!(instance_support_union(&inst).irreducible);
            let p = randomized_policy(&mut r, &inst);
            assert!(!p.is_deterministic() || inst.is_uncontrolled());
            let _ = instance(&mut r, &InstanceSpec::sparse());
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = instance(&mut rng(3), &InstanceSpec::sparse());
        let b = instance(&mut rng(3), &InstanceSpec::sparse());
        assert_eq!(a, b);
    }
}
