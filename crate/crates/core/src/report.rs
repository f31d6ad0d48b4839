use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::C64;

/// Outcome of checking one named identity at one parameter point.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerificationReport {
    pub identity: String,
    pub params: Map<String, Value>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(identity: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            identity: identity.into(),
            params: Map::new(),
            residual,
            tolerance,
            // NaN residuals never pass.
            pass: residual < tolerance,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn with_complex(self, key: &str, z: C64) -> Self {
        self.with(key, complex_json(z))
    }

    pub fn with_complex_list(self, key: &str, zs: &[C64]) -> Self {
        let list: Vec<Value> = zs.iter().map(|&z| complex_json(z)).collect();
        self.with(key, list)
    }
}

/// `[re, im]` pair.
pub fn complex_json(z: C64) -> Value {
    Value::from(vec![z.re, z.im])
}

/// True when every report passed.
pub fn all_pass(reports: &[VerificationReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

/// Largest residual in a batch (0 for an empty batch, NaN if any residual is NaN).
pub fn worst(reports: &[VerificationReport]) -> f64 {
    if reports.iter().any(|r| r.residual.is_nan()) {
        return f64::NAN;
    }
    reports.iter().map(|r| r.residual).fold(0.0, f64::max)
}
