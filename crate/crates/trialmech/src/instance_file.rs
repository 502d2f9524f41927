//! Instance file format: a JSON document describing the belief model.
//!
//! Top-level keys (unknown keys are rejected):
//!
//! ```json
//! {
//!   "arms": 2,
//!   "outcomes": ["lo", "hi"],
//!   "scores": {"lo": 0.0, "hi": 1.0},
//!   "public_types": ["x1"],
//!   "private_types": ["s+", "s-"],
//!   "utilities": {"s+": {"lo": 0.0, "hi": 1.0}, "s-": {"lo": 1.0, "hi": 0.0}},
//!   "states": {"psi1": {"x1": [{"lo": 0.2, "hi": 0.8}, {"lo": 0.8, "hi": 0.2}]}},
//!   "prior": {"psi1": 0.5, "psi2": 0.5},
//!   "outside_arms": [1, 2]
//! }
//! ```
//!
//! `states` maps each state name to a table keyed by public type, holding one
//! outcome distribution per arm (in arm order, 1-based in `outside_arms`).
//! Document order of the `states` object fixes the support ordering used for
//! tie-breaking everywhere else.

use std::path::Path;

use serde::Deserialize;
use serde_json::Map;

use crate::error::Error;
use crate::model::{
    Instance, OutcomeSpace, Prior, ScoringFunction, State, UtilityStructure,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    arms: usize,
    outcomes: Vec<String>,
    scores: Map<String, serde_json::Value>,
    public_types: Vec<String>,
    private_types: Vec<String>,
    utilities: Map<String, serde_json::Value>,
    states: Map<String, serde_json::Value>,
    prior: Map<String, serde_json::Value>,
    #[serde(default)]
    outside_arms: Option<Vec<usize>>,
}

fn as_f64(v: &serde_json::Value, what: &str) -> Result<f64, Error> {
    v.as_f64().ok_or_else(|| Error::Parse(format!("{what} is not a number")))
}

fn outcome_map(
    map: &Map<String, serde_json::Value>,
    outcomes: &OutcomeSpace,
    what: &str,
) -> Result<Vec<f64>, Error> {
    let mut values = vec![f64::NAN; outcomes.len()];
    for (label, v) in map {
        let idx = outcomes
            .index_of(label)
            .ok_or_else(|| Error::Parse(format!("{what}: unknown outcome {label:?}")))?;
        values[idx] = as_f64(v, &format!("{what}[{label}]"))?;
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::Parse(format!(
            "{what}: missing outcome {:?}",
            outcomes.labels()[i]
        )));
    }
    Ok(values)
}

/// Parses and validates an instance from JSON text.
pub fn parse_instance(text: &str) -> Result<Instance, Error> {
    let raw: RawInstance =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;

    let outcome_space = OutcomeSpace::new(raw.outcomes)?;
    let scores =
        ScoringFunction::new("instance", outcome_map(&raw.scores, &outcome_space, "scores")?)?;

    let mut utility_rows = Vec::with_capacity(raw.private_types.len());
    for s in &raw.private_types {
        let entry = raw
            .utilities
            .get(s)
            .ok_or_else(|| Error::Parse(format!("utilities: missing private type {s:?}")))?;
        let map = entry
            .as_object()
            .ok_or_else(|| Error::Parse(format!("utilities[{s}] is not an object")))?;
        utility_rows.push(outcome_map(map, &outcome_space, &format!("utilities[{s}]"))?);
    }
    for s in raw.utilities.keys() {
        if !raw.private_types.contains(s) {
            return Err(Error::Parse(format!("utilities: unknown private type {s:?}")));
        }
    }
    let utilities = UtilityStructure::new(utility_rows)?;

    let mut names = Vec::new();
    let mut states = Vec::new();
    for (name, table) in &raw.states {
        let table = table
            .as_object()
            .ok_or_else(|| Error::Parse(format!("states[{name}] is not an object")))?;
        let mut probs = vec![f64::NAN; raw.arms * raw.public_types.len() * outcome_space.len()];
        for (x, per_arm) in table {
            let x_idx = raw
                .public_types
                .iter()
                .position(|l| l == x)
                .ok_or_else(|| Error::Parse(format!("states[{name}]: unknown public type {x:?}")))?;
            let arms = per_arm
                .as_array()
                .ok_or_else(|| Error::Parse(format!("states[{name}][{x}] is not an array")))?;
            if arms.len() != raw.arms {
                return Err(Error::Parse(format!(
                    "states[{name}][{x}] lists {} arms, expected {}",
                    arms.len(),
                    raw.arms
                )));
            }
            for (arm, dist) in arms.iter().enumerate() {
                let map = dist.as_object().ok_or_else(|| {
                    Error::Parse(format!("states[{name}][{x}][{arm}] is not an object"))
                })?;
                let d = outcome_map(map, &outcome_space, &format!("states[{name}][{x}][{arm}]"))?;
                let base = (arm * raw.public_types.len() + x_idx) * outcome_space.len();
                probs[base..base + d.len()].copy_from_slice(&d);
            }
        }
        if probs.iter().any(|p| p.is_nan()) {
            return Err(Error::Parse(format!(
                "states[{name}]: missing table entry for some (arm, public type) pair"
            )));
        }
        names.push(name.clone());
        states.push(State::new(raw.arms, raw.public_types.len(), outcome_space.len(), probs)?);
    }

    let mut weights = Vec::with_capacity(names.len());
    for name in &names {
        let w = raw
            .prior
            .get(name)
            .ok_or_else(|| Error::Parse(format!("prior: missing weight for state {name:?}")))?;
        weights.push(as_f64(w, &format!("prior[{name}]"))?);
    }
    for name in raw.prior.keys() {
        if !names.contains(name) {
            return Err(Error::Parse(format!("prior: unknown state {name:?}")));
        }
    }
    let prior = Prior::new(names, states, weights)?;

    // outside_arms are 1-based in the file
    let outside = match raw.outside_arms {
        Some(arms) => {
            if arms.iter().any(|a| *a == 0) {
                return Err(Error::Parse("outside_arms are 1-based; got 0".into()));
            }
            Some(arms.into_iter().map(|a| a - 1).collect())
        }
        None => None,
    };

    Instance::new(
        raw.arms,
        outcome_space,
        scores,
        raw.public_types,
        raw.private_types,
        prior,
        utilities,
        outside,
    )
}

/// Reads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}
