use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{DivError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Energy,
    Fourier,
    Wasserstein,
    KL,
    Fisher,
    Cramer,
    GiniFamily,
}

/// A tagged divergence value with its numerical error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub family: Family,
    /// α, s or p depending on the family.
    pub order: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub diagnostics: BTreeMap<String, Value>,
}

impl DivergenceReport {
    pub fn new(family: Family, order: f64, value: f64, error_estimate: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(DivError::Numerical(format!(
                "{family:?} value {value} is negative or non-finite"
            )));
        }
        if !(error_estimate >= 0.0) {
            return Err(DivError::Numerical(format!(
                "{family:?} error estimate {error_estimate} is negative or NaN"
            )));
        }
        // adding +0.0 turns −0.0 into +0.0
        Ok(Self {
            family,
            order,
            value: value + 0.0,
            error_estimate: error_estimate + 0.0,
            diagnostics: BTreeMap::new(),
        })
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.diagnostics.insert(key.to_string(), value.into());
        self
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.diagnostics.insert(key.to_string(), value.into());
    }

    pub fn diagnostic_f64(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).and_then(Value::as_f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
