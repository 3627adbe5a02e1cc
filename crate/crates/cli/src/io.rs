use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use riskeig_core::model::{parse_instance, Validated};
use riskeig_core::{MdpInstance, Policy};
use serde::Deserialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::report::num;

/// Loaded instance plus the SHA-256 of the file bytes.
pub struct LoadedInstance {
    pub validated: Validated,
    pub digest: String,
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

pub fn load_instance(path: &Path) -> Result<LoadedInstance, String> {
    let bytes = read(path)?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    let validated = parse_instance(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(LoadedInstance { validated, digest })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    rows: Vec<BTreeMap<String, f64>>,
}

/// Policy file: `{"rows": [{"a": 1.0}, {"a": 0.5, "b": 0.5}, ...]}`, one
/// object per state keyed by action label. Omitted actions get probability 0.
pub fn load_policy(inst: &MdpInstance, path: &Path) -> Result<Policy, String> {
    let bytes = read(path)?;
    let file: PolicyFile =
        serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    if file.rows.len() != inst.n_states() {
        return Err(format!(
            "{}: {} rows for {} states",
            path.display(),
            file.rows.len(),
            inst.n_states()
        ));
    }
    let mut rows = Vec::with_capacity(inst.n_states());
    for (i, entries) in file.rows.iter().enumerate() {
        let mut row = vec![0.0; inst.rows(i).len()];
        for (label, &p) in entries {
            let slot = inst
                .action_index(label)
                .and_then(|a| inst.slot_of(i, a))
                .ok_or_else(|| format!("policy row {i}: action {label:?} is not available"))?;
            row[slot] = p;
        }
        rows.push(row);
    }
    Policy::new(inst, rows).map_err(|e| e.to_string())
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>, String> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

/// Inverse of [`load_policy`]: every available action is listed.
pub fn policy_json(inst: &MdpInstance, policy: &Policy) -> Value {
    let rows = (0..inst.n_states())
        .map(|i| {
            let row: Map<String, Value> = inst
                .rows(i)
                .iter()
                .zip(policy.row(i))
                .map(|(r, &p)| (inst.action_labels()[r.action].clone(), num(p)))
                .collect();
            Value::Object(row)
        })
        .collect();
    serde_json::json!({ "rows": Value::Array(rows) })
}

pub fn action_labels(inst: &MdpInstance, actions: &[usize]) -> Value {
    actions
        .iter()
        .map(|&a| Value::from(inst.action_labels()[a].as_str()))
        .collect()
}
