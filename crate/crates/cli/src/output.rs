use std::collections::BTreeMap;

use inbox_core::ConvexSet;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Everything a command prints on stdout.
#[derive(Debug, Serialize)]
pub struct RunResult {
    pub input_digest: String,
    pub command: Vec<String>,
    pub result: Value,
    pub report: Value,
    pub timings: BTreeMap<String, f64>,
}

impl RunResult {
    /// JSON with sorted keys and every float cut to 12 significant digits.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("run result serializes");
        round_floats(&mut v);
        serde_json::to_string_pretty(&v).expect("value serializes")
    }
}

/// SHA-256 of the set's canonical JSON form.
pub fn digest(set: &ConvexSet) -> String {
    let canonical = serde_json::to_vec(&set.to_spec()).expect("set spec serializes");
    hex::encode(Sha256::digest(&canonical))
}

pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round12).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::approx_constant)]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round12(std::f64::consts::PI), 3.14159265359);
        assert_eq!(round12(2.0 / 3.0 * 1e-9), 6.66666666667e-10);
        assert_eq!(round12(0.0), 0.0);
        let mut v = serde_json::json!({"b": [1.0000000000001, 2], "a": 0.1234567890123456});
        round_floats(&mut v);
        assert_eq!(v.to_string(), r#"{"a":0.123456789012,"b":[1.0,2]}"#);
    }
}
