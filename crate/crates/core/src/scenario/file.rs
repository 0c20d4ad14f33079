use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{RandomVariable, ScenarioSpace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// On-disk scenario file:
///
/// ```json
/// {"weights": [0.01, 0.99], "variables": {"X": [1e-5, 100], "Z": [2, 1e-5]}}
/// ```
///
/// `declared_inf` optionally records the essential infimum of variables
/// sampled from laws that are bounded below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub weights: Vec<f64>,
    pub variables: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub declared_inf: BTreeMap<String, f64>,
}

/// Validated scenario file: one space and its named variables.
#[derive(Debug, Clone)]
pub struct ScenarioSet<T> {
    pub space: Arc<ScenarioSpace<T>>,
    pub variables: BTreeMap<String, RandomVariable<T>>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("scenario file: {e}")))
    }

    /// Enforces the space invariants. Zero-weight scenarios are dropped from
    /// the weights and from every variable; negative weights are rejected.
    pub fn into_set<T: Scalar>(self) -> Result<ScenarioSet<T>> {
        for (name, values) in &self.variables {
            if values.len() != self.weights.len() {
                return Err(Error::InvalidInput(format!(
                    "variable `{name}` has {} values for {} weights",
                    values.len(),
                    self.weights.len()
                )));
            }
        }
        if let Some(w) = self.weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let kept: Vec<usize> = (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect();
        let space = ScenarioSpace::new(kept.iter().map(|&i| T::lit(self.weights[i])).collect())?;
        let mut variables = BTreeMap::new();
        for (name, values) in self.variables {
            let rv = RandomVariable::new(&space, kept.iter().map(|&i| T::lit(values[i])).collect())
                .map_err(|e| Error::InvalidInput(format!("variable `{name}`: {e}")))?;
            let rv = match self.declared_inf.get(&name) {
                Some(&l) => rv.with_declared_inf(T::lit(l))?,
                None => rv,
            };
            variables.insert(name, rv);
        }
        if let Some(name) = self
            .declared_inf
            .keys()
            .find(|k| !variables.contains_key(*k))
        {
            return Err(Error::InvalidInput(format!(
                "declared_inf names unknown variable `{name}`"
            )));
        }
        Ok(ScenarioSet { space, variables })
    }
}

impl<T: Scalar> ScenarioSet<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        ScenarioFile::from_json(text)?.into_set()
    }

    pub fn variable(&self, name: &str) -> Result<&RandomVariable<T>> {
        self.variables
            .get(name)
            .ok_or_else(|| Error::InvalidInput(format!("scenario file has no variable `{name}`")))
    }
}
