use serde_json::{json, Map, Value};

pub const SCHEMA: u32 = 1;

/// A float rounded to 12 significant digits. Non-finite values become the
/// strings `"-inf"`, `"inf"` and `"nan"`.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::from("nan")
    } else if x == f64::NEG_INFINITY {
        Value::from("-inf")
    } else if x == f64::INFINITY {
        Value::from("inf")
    } else {
        let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
        Value::from(rounded)
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn rows(m: &[Vec<f64>]) -> Value {
    Value::Array(m.iter().map(|r| nums(r)).collect())
}

/// Result of one subcommand before it is wrapped in the report envelope.
pub struct Outcome {
    pub result: Value,
    pub parameters: Map<String, Value>,
    pub warnings: Vec<String>,
    pub converged: bool,
}

impl Outcome {
    pub fn new(result: Value) -> Self {
        Outcome {
            result,
            parameters: Map::new(),
            warnings: Vec::new(),
            converged: true,
        }
    }

    pub fn param(mut self, key: &str, value: Value) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }
}

pub fn envelope(
    command: &str,
    digest: &str,
    parameters: Map<String, Value>,
    outcome: Outcome,
    wall_time_ms: u64,
) -> Value {
    json!({
        "schema": SCHEMA,
        "command": command,
        "instance_digest": digest,
        "log_base": "natural",
        "parameters": parameters,
        "converged": outcome.converged,
        "result": outcome.result,
        "warnings": outcome.warnings,
        "wall_time_ms": wall_time_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.5f64.ln()), json!(0.405465108108));
        assert_eq!(num(1.0 / 3.0), json!(0.333333333333));
        assert_eq!(num(123456789.0123456), json!(123456789.012));
        assert_eq!(num(0.0), json!(0.0));
    }

    #[test]
    fn non_finite_markers() {
        assert_eq!(num(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(num(f64::NAN), json!("nan"));
    }
}
