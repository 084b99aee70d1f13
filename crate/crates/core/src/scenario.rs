//! Scenario documents: strict JSON loading, `key=value` overrides and the
//! dispatch from a scenario to a simulated or optimized trajectory.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::control::{solve_fbs, FbsConfig, FbsResult, FbsSettings};
use crate::error::{Error, Result};
use crate::integrator::TimeGrid;
use crate::model::{ControlVector, Params, State};
use crate::trajectory::{simulate, Dynamics, Trajectory};

fn default_time_unit() -> String {
    "years".to_string()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    TreatmentFree,
    Full,
    /// Controlled system held at constant intensities.
    FixedControls {
        controls: ControlVector,
    },
    /// Optimal control problem solved by forward-backward sweep.
    Controlled {
        #[serde(default)]
        fbs: FbsSettings,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub label: String,
    /// Informational only; rates are interpreted per this unit.
    #[serde(default = "default_time_unit")]
    pub time_unit: String,
    pub params: Params,
    pub x0: State,
    pub grid: TimeGrid,
    pub mode: Mode,
    /// Warn when `x0` starts outside `N <= pi/mu`.
    #[serde(default = "default_true")]
    pub check_invariant_region: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params
            .validate()
            .map_err(|e| prefix_param(e, "params"))?;
        self.x0.validate()?;
        self.grid.validate()?;
        match &self.mode {
            Mode::FixedControls { controls } => {
                for (name, v) in ["u1", "u2", "u3"].iter().zip(controls.to_array()) {
                    if !(v.is_finite() && (0.0..1.0).contains(&v)) {
                        return Err(Error::invalid(
                            format!("mode.controls.{name}"),
                            "control intensities must lie in [0, 1)",
                        ));
                    }
                }
            }
            Mode::Controlled { fbs } => fbs.into_config(self.grid).validate()?,
            Mode::TreatmentFree | Mode::Full => {}
        }
        Ok(())
    }

    /// Soft invariant violations that do not prevent a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let cap = self.params.carrying_capacity();
        if self.check_invariant_region && self.x0.total() > cap {
            out.push(format!(
                "initial population {} exceeds pi/mu = {cap}; the invariant-region bound does not apply",
                self.x0.total()
            ));
        }
        out
    }

    pub fn fbs_config(&self) -> Option<FbsConfig> {
        match &self.mode {
            Mode::Controlled { fbs } => Some(fbs.into_config(self.grid)),
            _ => None,
        }
    }

    /// Integrates the scenario's dynamics. Controlled scenarios are simulated
    /// with zero controls here; use [`Scenario::optimize`] for the solver.
    pub fn simulate(&self) -> Result<Trajectory> {
        let dynamics = match &self.mode {
            Mode::TreatmentFree => Dynamics::TreatmentFree,
            Mode::Full => Dynamics::Full,
            Mode::FixedControls { controls } => Dynamics::FixedControls(*controls),
            Mode::Controlled { .. } => Dynamics::FixedControls(ControlVector::ZERO),
        };
        simulate(&self.params, &self.x0, &self.grid, dynamics)
    }

    /// Solves the optimal control problem; `None` unless the mode is controlled.
    pub fn optimize(&self) -> Option<Result<FbsResult>> {
        self.fbs_config()
            .map(|cfg| solve_fbs(&self.params, &self.x0, &cfg))
    }

    /// The trajectory a sweep cell reports: the optimum for controlled
    /// scenarios, a plain simulation otherwise.
    pub fn run(&self) -> Result<Trajectory> {
        match self.optimize() {
            Some(result) => Ok(result?.trajectory),
            None => self.simulate(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn prefix_param(err: Error, prefix: &str) -> Error {
    match err {
        Error::InvalidParameter { name, reason } => Error::InvalidParameter {
            name: format!("{prefix}.{name}"),
            reason,
        },
        other => other,
    }
}

fn schema_error(err: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = err.path().to_string();
    Error::Schema {
        path: if path == "." { "<root>".into() } else { path },
        message: err.into_inner().to_string(),
    }
}

/// Deserializes a JSON value with path-aware diagnostics.
pub(crate) fn from_value<T: serde::de::DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(schema_error)
}

fn parse_value(text: &str) -> Result<Value> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(schema_error)
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    load_scenario_with_overrides(text, &[])
}

/// Parses a scenario, applies `key=value` overrides to the raw document and
/// only then deserializes and validates, so bad overrides fail exactly like
/// bad files.
pub fn load_scenario_with_overrides(text: &str, overrides: &[String]) -> Result<Scenario> {
    let mut doc = parse_value(text)?;
    for item in overrides {
        apply_override(&mut doc, item)?;
    }
    let scenario: Scenario = from_value(doc)?;
    scenario.validate()?;
    Ok(scenario)
}

const FBS_KEYS: [&str; 3] = ["relaxation", "tol", "max_iters"];
const WEIGHT_KEYS: [&str; 5] = ["b1", "b2", "w1", "w2", "w3"];
const BOUND_KEYS: [&str; 2] = ["lower", "upper"];

/// Maps a short override key to its path in the document.
fn override_path(key: &str) -> Result<Vec<String>> {
    let path: Vec<&str> = if key.contains('.') {
        key.split('.').collect()
    } else if Params::FIELDS.contains(&key) || key == "mixing" {
        vec!["params", key]
    } else if FBS_KEYS.contains(&key) {
        vec!["mode", "fbs", key]
    } else if WEIGHT_KEYS.contains(&key) {
        vec!["mode", "fbs", "weights", key]
    } else if BOUND_KEYS.contains(&key) {
        vec!["mode", "fbs", "bounds", key]
    } else {
        return Err(Error::invalid(key, "unknown override key"));
    };
    if path.iter().any(|s| s.is_empty()) {
        return Err(Error::invalid(key, "malformed override path"));
    }
    Ok(path.into_iter().map(String::from).collect())
}

/// Applies one `key=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::invalid(item, "override must have the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let path = override_path(key)?;
    let mut node = doc;
    for segment in &path[..path.len() - 1] {
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::invalid(key, format!("`{segment}` is not inside an object")))?;
        node = map
            .entry(segment.clone())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| Error::invalid(key, "override target is not inside an object"))?;
    map.insert(path[path.len() - 1].clone(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "label": "t",
        "params": {"pi": 6102, "beta": 0.75, "sigma": 0.6, "gamma": 0.97, "delta": 0.76,
                   "nu": 0.89, "alpha": 0.09, "eps1": 0.0054, "eps2": 0.0061, "theta": 0.51,
                   "mu": 0.000038642, "n_total": 164700000},
        "x0": {"s": 1.5e8, "e": 10, "i": 5, "t": 0, "r": 0},
        "grid": {"t0": 0, "tf": 1, "n_steps": 10},
        "mode": {"kind": "controlled"}
    }"#;

    #[test]
    fn loads_with_defaults() {
        let s = load_scenario(DOC).unwrap();
        assert_eq!(s.params, Params::baseline());
        assert_eq!(s.time_unit, "years");
        assert_eq!(s.fbs_config().unwrap().tol, 1e-3);
        assert!(s.warnings().is_empty());
    }

    #[test]
    fn missing_key_is_named() {
        let doc = DOC.replace("\"mu\": 0.000038642, ", "");
        let err = load_scenario(&doc).unwrap_err();
        assert!(err.to_string().contains("mu"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let doc = DOC.replace("\"beta\"", "\"betta\": 1, \"beta\"");
        let err = load_scenario(&doc).unwrap_err();
        assert!(err.to_string().contains("betta"), "{err}");
    }

    #[test]
    fn wrong_type_names_path() {
        let doc = DOC.replace("\"sigma\": 0.6", "\"sigma\": \"fast\"");
        let err = load_scenario(&doc).unwrap_err();
        assert!(err.to_string().contains("params.sigma"), "{err}");
    }

    #[test]
    fn negative_rate_fails_validation() {
        let doc = DOC.replace("\"beta\": 0.75", "\"beta\": -1");
        let err = load_scenario(&doc).unwrap_err();
        assert!(err.to_string().contains("params.beta"), "{err}");
    }

    #[test]
    fn overrides_reach_their_targets() {
        let s = load_scenario_with_overrides(
            DOC,
            &[
                "beta=2.0".into(),
                "w1=5".into(),
                "tol=1e-6".into(),
                "x0.i=42".into(),
                "mixing=dynamic_n".into(),
                "upper=[0.5,0.5,0.5]".into(),
            ],
        )
        .unwrap();
        assert_eq!(s.params.beta, 2.0);
        assert_eq!(s.x0.i, 42.0);
        assert_eq!(s.params.mixing, crate::model::Mixing::DynamicN);
        let cfg = s.fbs_config().unwrap();
        assert_eq!(
            (cfg.weights.w1, cfg.tol, cfg.bounds.upper[1]),
            (5.0, 1e-6, 0.5)
        );
    }

    #[test]
    fn invalid_override_fails_like_file() {
        let err = load_scenario_with_overrides(DOC, &["beta=-3".into()]).unwrap_err();
        assert!(err.to_string().contains("params.beta"));
        assert!(load_scenario_with_overrides(DOC, &["kappa=1".into()]).is_err());
        assert!(load_scenario_with_overrides(DOC, &["beta".into()]).is_err());
    }

    #[test]
    fn start_outside_region_warns() {
        let doc = DOC.replace("\"s\": 1.5e8", "\"s\": 2e8");
        let s = load_scenario(&doc).unwrap();
        assert_eq!(s.warnings().len(), 1);
    }

    #[test]
    fn fixed_controls_validated() {
        let doc = DOC.replace(
            "{\"kind\": \"controlled\"}",
            "{\"kind\": \"fixed_controls\", \"controls\": {\"u1\": 1.0, \"u2\": 0, \"u3\": 0}}",
        );
        assert!(load_scenario(&doc).is_err());
    }
}
