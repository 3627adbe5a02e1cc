use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Tolerance on probability row sums before exact renormalization.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Per-transition reward as it appears in instance files: a finite number or
/// the `"-inf"` marker for a forbidden transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawReward(pub f64);

impl Serialize for RawReward {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::NEG_INFINITY {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for RawReward {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RewardVisitor;

        impl<'de> Visitor<'de> for RewardVisitor {
            type Value = RawReward;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<RawReward, E> {
                Ok(RawReward(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<RawReward, E> {
                Ok(RawReward(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<RawReward, E> {
                Ok(RawReward(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<RawReward, E> {
                match v.trim().to_ascii_lowercase().as_str() {
                    "-inf" | "-infinity" => Ok(RawReward(f64::NEG_INFINITY)),
                    "inf" | "+inf" | "infinity" | "+infinity" => Ok(RawReward(f64::INFINITY)),
                    "nan" => Ok(RawReward(f64::NAN)),
                    other => Err(E::custom(format!("unrecognized reward marker {other:?}"))),
                }
            }
        }

        deserializer.deserialize_any(RewardVisitor)
    }
}

/// One `(from, action, to)` entry of an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTransition {
    pub from: usize,
    pub action: String,
    pub to: usize,
    pub prob: f64,
    pub reward: RawReward,
}

/// Instance file contents before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub transitions: Vec<RawTransition>,
}

/// Non-fatal findings produced while validating an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationWarning {
    /// A reward was attached to a transition with probability 0; it was dropped.
    RewardOnZeroProbability { from: usize, action: String, to: usize },
    /// A row was within tolerance of 1 but not exactly; it was renormalized.
    Renormalized { state: usize, action: String, sum: f64 },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::RewardOnZeroProbability { from, action, to } => write!(
                f,
                "reward given on zero-probability transition ({from},{action},{to}); dropped"
            ),
            ValidationWarning::Renormalized { state, action, sum } => {
                write!(f, "row ({state},{action}) summed to {sum}; renormalized")
            }
        }
    }
}

/// A validated instance plus whatever warnings validation raised.
#[derive(Debug, Clone)]
pub struct Validated {
    pub instance: MdpInstance,
    pub warnings: Vec<ValidationWarning>,
}

/// Transition data for one available action at one state.
///
/// `reward[j]` is only meaningful where `prob[j] > 0`; elsewhere it is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRow {
    pub action: usize,
    pub prob: Vec<f64>,
    pub reward: Vec<f64>,
}

impl ActionRow {
    /// Multiplicative weight `p(j|i,u) e^{r(i,u,j)}` with `e^{-inf} = 0`.
    pub fn weight(&self, j: usize) -> f64 {
        let p = self.prob[j];
        if p > 0.0 {
            p * self.reward[j].exp()
        } else {
            0.0
        }
    }

    /// `log p(j|i,u) + r(i,u,j)`, `-inf` where the weight vanishes.
    pub fn log_weight(&self, j: usize) -> f64 {
        let p = self.prob[j];
        if p > 0.0 {
            p.ln() + self.reward[j]
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// A finite controlled Markov chain with per-transition rewards.
///
/// Actions available at a state are stored as "slots" in increasing action
/// index order; policies and solvers address actions through those slots.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpInstance {
    state_labels: Vec<String>,
    action_labels: Vec<String>,
    rows: Vec<Vec<ActionRow>>,
}

impl MdpInstance {
    /// Builds an instance from per-state action rows, checking every invariant.
    ///
    /// Rows within `ROW_SUM_TOL` of summing to one are renormalized exactly.
    pub fn new(
        state_labels: Vec<String>,
        action_labels: Vec<String>,
        mut rows: Vec<Vec<ActionRow>>,
    ) -> Result<Self, ModelError> {
        let n = state_labels.len();
        if n == 0 {
            return Err(ModelError::NoStates);
        }
        if rows.len() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: rows.len(),
            });
        }
        for (i, state_rows) in rows.iter_mut().enumerate() {
            if state_rows.is_empty() {
                return Err(ModelError::EmptyActionSet {
                    state: state_labels[i].clone(),
                });
            }
            state_rows.sort_by_key(|r| r.action);
            for w in state_rows.windows(2) {
                if w[0].action == w[1].action {
                    return Err(ModelError::DuplicateAction {
                        state: i,
                        action: label(&action_labels, w[0].action),
                    });
                }
            }
            for row in state_rows.iter_mut() {
                if row.action >= action_labels.len() {
                    return Err(ModelError::UnknownAction(row.action.to_string()));
                }
                let action = label(&action_labels, row.action);
                if row.prob.len() != n || row.reward.len() != n {
                    return Err(ModelError::DimensionMismatch {
                        expected: n,
                        found: row.prob.len().min(row.reward.len()),
                    });
                }
                for j in 0..n {
                    let p = row.prob[j];
                    if !p.is_finite() || p < 0.0 {
                        return Err(ModelError::InvalidProbability {
                            from: i,
                            action: action.clone(),
                            to: j,
                            prob: p,
                        });
                    }
                    let r = row.reward[j];
                    if r.is_nan() || r == f64::INFINITY {
                        return Err(ModelError::InvalidReward {
                            from: i,
                            action: action.clone(),
                            to: j,
                            reward: r,
                        });
                    }
                    if p == 0.0 {
                        row.reward[j] = 0.0;
                    }
                }
                let sum: f64 = row.prob.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(ModelError::RowSum {
                        state: i,
                        action,
                        sum,
                    });
                }
                if sum != 1.0 {
                    row.prob.iter_mut().for_each(|p| *p /= sum);
                }
            }
        }
        Ok(MdpInstance {
            state_labels,
            action_labels,
            rows,
        })
    }

    /// Wraps a nonnegative weight matrix as a single-action instance whose
    /// policy matrix reproduces it: `p = Q/κ`, `r(i,·,·) = log κ_i`.
    /// Zero rows become uniform rows with `-inf` reward.
    pub fn uncontrolled(q: &super::NonnegMatrix) -> Self {
        let n = q.n();
        let rows = (0..n)
            .map(|i| {
                let kappa: f64 = q.row(i).iter().sum();
                let (prob, reward) = if kappa > 0.0 {
                    let prob: Vec<f64> = q.row(i).iter().map(|&x| x / kappa).collect();
                    let reward = prob
                        .iter()
                        .map(|&p| if p > 0.0 { kappa.ln() } else { 0.0 })
                        .collect();
                    (prob, reward)
                } else {
                    (vec![1.0 / n as f64; n], vec![f64::NEG_INFINITY; n])
                };
                vec![ActionRow {
                    action: 0,
                    prob,
                    reward,
                }]
            })
            .collect();
        MdpInstance::new(default_labels("s", n), vec!["a".to_string()], rows)
            .expect("rows built from a nonnegative matrix are valid")
    }

    pub fn n_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_labels.len()
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    pub fn action_labels(&self) -> &[String] {
        &self.action_labels
    }

    /// Available action rows at state `i`, ordered by action index.
    pub fn rows(&self, i: usize) -> &[ActionRow] {
        &self.rows[i]
    }

    /// Action indices available at state `i`.
    pub fn available_actions(&self, i: usize) -> Vec<usize> {
        self.rows[i].iter().map(|r| r.action).collect()
    }

    /// Slot of action index `action` at state `i`, if available.
    pub fn slot_of(&self, i: usize, action: usize) -> Option<usize> {
        self.rows[i].iter().position(|r| r.action == action)
    }

    pub fn action_index(&self, label: &str) -> Option<usize> {
        self.action_labels.iter().position(|a| a == label)
    }

    /// Number of deterministic stationary policies, `None` on overflow.
    pub fn policy_count(&self) -> Option<u64> {
        self.rows
            .iter()
            .try_fold(1u64, |acc, r| acc.checked_mul(r.len() as u64))
    }

    /// True when every state has exactly one available action.
    pub fn is_uncontrolled(&self) -> bool {
        self.rows.iter().all(|r| r.len() == 1)
    }

    /// Converts back to the external file representation.
    pub fn to_raw(&self) -> RawInstance {
        let mut transitions = Vec::new();
        for (i, state_rows) in self.rows.iter().enumerate() {
            for row in state_rows {
                for j in 0..self.n_states() {
                    if row.prob[j] > 0.0 {
                        transitions.push(RawTransition {
                            from: i,
                            action: self.action_labels[row.action].clone(),
                            to: j,
                            prob: row.prob[j],
                            reward: RawReward(row.reward[j]),
                        });
                    }
                }
            }
        }
        RawInstance {
            states: self.state_labels.clone(),
            actions: self.action_labels.clone(),
            transitions,
        }
    }
}

fn label(labels: &[String], idx: usize) -> String {
    labels.get(idx).cloned().unwrap_or_else(|| idx.to_string())
}

pub(crate) fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Validates a parsed instance file.
///
/// Omitted `(from, action, to)` triples have probability 0, and an action is
/// available at a state iff at least one transition lists it from that state.
pub fn validate_instance(raw: &RawInstance) -> Result<Validated, ModelError> {
    let n = raw.states.len();
    if n == 0 {
        return Err(ModelError::NoStates);
    }
    let mut action_ids = HashMap::new();
    for (k, a) in raw.actions.iter().enumerate() {
        if action_ids.insert(a.as_str(), k).is_some() {
            return Err(ModelError::DuplicateActionLabel(a.clone()));
        }
    }

    let mut warnings = Vec::new();
    // (state, action) -> row under construction; BTreeMap keeps slot order.
    let mut rows: Vec<BTreeMap<usize, ActionRow>> = vec![BTreeMap::new(); n];
    let mut seen = HashMap::new();
    for t in &raw.transitions {
        let &action = action_ids
            .get(t.action.as_str())
            .ok_or_else(|| ModelError::UnknownAction(t.action.clone()))?;
        if t.from >= n || t.to >= n {
            return Err(ModelError::StateOutOfRange {
                index: t.from.max(t.to),
                n,
            });
        }
        if seen.insert((t.from, action, t.to), ()).is_some() {
            return Err(ModelError::DuplicateTransition {
                from: t.from,
                action: t.action.clone(),
                to: t.to,
            });
        }
        if !t.prob.is_finite() || t.prob < 0.0 {
            return Err(ModelError::InvalidProbability {
                from: t.from,
                action: t.action.clone(),
                to: t.to,
                prob: t.prob,
            });
        }
        let r = t.reward.0;
        if r.is_nan() || r == f64::INFINITY {
            return Err(ModelError::InvalidReward {
                from: t.from,
                action: t.action.clone(),
                to: t.to,
                reward: r,
            });
        }
        let row = rows[t.from].entry(action).or_insert_with(|| ActionRow {
            action,
            prob: vec![0.0; n],
            reward: vec![0.0; n],
        });
        if t.prob == 0.0 {
            warnings.push(ValidationWarning::RewardOnZeroProbability {
                from: t.from,
                action: t.action.clone(),
                to: t.to,
            });
            continue;
        }
        row.prob[t.to] = t.prob;
        row.reward[t.to] = r;
    }

    for (i, state_rows) in rows.iter().enumerate() {
        for row in state_rows.values() {
            let sum: f64 = row.prob.iter().sum();
            if sum != 1.0 && (sum - 1.0).abs() <= ROW_SUM_TOL {
                warnings.push(ValidationWarning::Renormalized {
                    state: i,
                    action: raw.actions[row.action].clone(),
                    sum,
                });
            }
        }
    }

    let rows = rows
        .into_iter()
        .map(|m| m.into_values().collect())
        .collect();
    let instance = MdpInstance::new(raw.states.clone(), raw.actions.clone(), rows)?;
    Ok(Validated { instance, warnings })
}

/// Parses and validates an instance from JSON text.
pub fn parse_instance(json: &str) -> Result<Validated, ModelError> {
    let raw: RawInstance = serde_json::from_str(json).map_err(|e| ModelError::Parse(e.to_string()))?;
    validate_instance(&raw)
}
