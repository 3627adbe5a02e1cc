use super::{MdpInstance, ModelError, NonnegMatrix};

/// Probabilities over the available-action slots of one state.
pub type PolicyRow = Vec<f64>;

/// A randomized stationary Markov policy `φ(u|i)`.
///
/// Row `i` is indexed by the slots of `inst.rows(i)`, so support always lies
/// inside the available action set.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    rows: Vec<PolicyRow>,
}

const POLICY_TOL: f64 = 1e-9;

impl Policy {
    pub fn new(inst: &MdpInstance, rows: Vec<PolicyRow>) -> Result<Self, ModelError> {
        if rows.len() != inst.n_states() {
            return Err(ModelError::DimensionMismatch {
                expected: inst.n_states(),
                found: rows.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != inst.rows(i).len() {
                return Err(ModelError::InvalidPolicy {
                    state: i,
                    reason: format!(
                        "{} entries for {} available actions",
                        row.len(),
                        inst.rows(i).len()
                    ),
                });
            }
            if row.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(ModelError::InvalidPolicy {
                    state: i,
                    reason: "negative or non-finite probability".into(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > POLICY_TOL {
                return Err(ModelError::InvalidPolicy {
                    state: i,
                    reason: format!("probabilities sum to {sum}"),
                });
            }
        }
        Ok(Policy { rows })
    }

    /// Point-mass policy choosing slot `slots[i]` at state `i`.
    pub fn deterministic(inst: &MdpInstance, slots: &[usize]) -> Result<Self, ModelError> {
        let rows = slots
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let k = inst.rows(i).len();
                if s >= k {
                    return Err(ModelError::InvalidPolicy {
                        state: i,
                        reason: format!("slot {s} out of range ({k} actions)"),
                    });
                }
                let mut row = vec![0.0; k];
                row[s] = 1.0;
                Ok(row)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Policy::new(inst, rows)
    }

    /// Uniform randomization over each state's available actions.
    pub fn uniform(inst: &MdpInstance) -> Self {
        let rows = (0..inst.n_states())
            .map(|i| {
                let k = inst.rows(i).len();
                vec![1.0 / k as f64; k]
            })
            .collect();
        Policy { rows }
    }

    pub fn rows(&self) -> &[PolicyRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn is_deterministic(&self) -> bool {
        self.slots().is_some()
    }

    /// Chosen slot per state when every row is a point mass.
    pub fn slots(&self) -> Option<Vec<usize>> {
        self.rows
            .iter()
            .map(|row| {
                let mut chosen = None;
                for (k, &p) in row.iter().enumerate() {
                    if p == 1.0 && chosen.is_none() {
                        chosen = Some(k);
                    } else if p != 0.0 {
                        return None;
                    }
                }
                chosen
            })
            .collect()
    }

    /// Action indices chosen per state (deterministic policies only).
    pub fn actions(&self, inst: &MdpInstance) -> Option<Vec<usize>> {
        self.slots().map(|s| {
            s.iter()
                .enumerate()
                .map(|(i, &k)| inst.rows(i)[k].action)
                .collect()
        })
    }

    /// `t·self + (1−t)·other`.
    pub fn mix(&self, other: &Policy, t: f64) -> Policy {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| t * x + (1.0 - t) * y).collect())
            .collect();
        Policy { rows }
    }
}

/// `Q_φ(i,j) = Σ_u φ(u|i) p(j|i,u) e^{r(i,u,j)}`, with `e^{-inf} = 0`.
pub fn policy_matrix(inst: &MdpInstance, policy: &Policy) -> NonnegMatrix {
    let n = inst.n_states();
    let mut q = NonnegMatrix::zeros(n);
    for i in 0..n {
        for (row, &phi) in inst.rows(i).iter().zip(policy.row(i)) {
            if phi == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = row.weight(j);
                if w > 0.0 {
                    q.set(i, j, q.get(i, j) + phi * w);
                }
            }
        }
    }
    q
}
