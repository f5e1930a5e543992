//! JSON experiment and calibration-search documents.
//!
//! Parsing is two-staged: serde reads the raw document, then every field is
//! validated into the domain types. Validation errors name the offending
//! field, e.g. `weights` when the weight vector and feature space disagree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, ActionContext, FeatureSpace, ModelParams, ValueSet, World};
use crate::softmax::Beta;
use crate::speakers::{TargetRule, UtteranceFilter, UtteranceSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionDoc {
    pub name: String,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpaceDoc {
    pub dimensions: Vec<DimensionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct BetasDoc {
    #[serde(default = "default_listener")]
    pub listener: f64,
    #[serde(default = "default_three")]
    pub belief: Beta,
    #[serde(default = "default_three")]
    pub action: Beta,
    #[serde(default = "default_two")]
    pub combined: Beta,
    #[serde(default = "default_one")]
    pub reward_softmax: Beta,
}

fn default_listener() -> f64 {
    3.0
}
fn default_three() -> Beta {
    Beta::Finite(3.0)
}
fn default_two() -> Beta {
    Beta::Finite(2.0)
}
fn default_one() -> Beta {
    Beta::Finite(1.0)
}
fn default_context_size() -> usize {
    3
}

impl Default for BetasDoc {
    fn default() -> Self {
        BetasDoc {
            listener: default_listener(),
            belief: default_three(),
            action: default_three(),
            combined: default_two(),
            reward_softmax: default_one(),
        }
    }
}

/// The on-disk experiment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ConfigDoc {
    pub feature_space: FeatureSpaceDoc,
    pub weights: Vec<f64>,
    pub value_set: Vec<f64>,
    #[serde(default)]
    pub betas: BetasDoc,
    #[serde(default = "default_context_size")]
    pub context_size: usize,
    #[serde(default)]
    pub utterance_filter: UtteranceFilter,
    #[serde(default)]
    pub target_rule: TargetRule,
    /// Action space override, one feature name per dimension for each action.
    /// Defaults to every combination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<Vec<String>>>,
    /// Single fixed context, used by the reference game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

/// A validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub feature_space: FeatureSpace,
    pub world: World,
    pub params: ModelParams,
    pub filter: UtteranceFilter,
    pub utterances: UtteranceSpace,
    pub action_space: Vec<Action>,
    pub context_size: usize,
    pub context: Option<ActionContext>,
    pub out_dir: Option<String>,
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
}

fn build_feature_space(doc: &FeatureSpaceDoc) -> Result<FeatureSpace> {
    FeatureSpace::new(
        doc.dimensions
            .iter()
            .map(|d| (d.name.clone(), d.features.clone())),
    )
}

fn build_params(betas: &BetasDoc, target_rule: TargetRule) -> Result<ModelParams> {
    let params = ModelParams {
        beta_listener: betas.listener,
        beta_belief: betas.belief,
        beta_action: betas.action,
        beta_combined: betas.combined,
        beta_reward_softmax: betas.reward_softmax,
        target_rule,
    };
    params.validate()?;
    Ok(params)
}

fn build_actions(fs: &FeatureSpace, field: &str, names: &[Vec<String>]) -> Result<Vec<Action>> {
    names
        .iter()
        .map(|a| {
            let refs: Vec<&str> = a.iter().map(String::as_str).collect();
            fs.action(&refs).map_err(|e| match e {
                Error::Config { reason, .. } => Error::config(field, reason),
                other => other,
            })
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(parse_json(text)?)
    }

    pub fn from_doc(doc: ConfigDoc) -> Result<Self> {
        let feature_space = build_feature_space(&doc.feature_space)?;
        if doc.weights.len() != feature_space.len() {
            return Err(Error::config(
                "weights",
                format!(
                    "expected {} weights (one per feature), got {}",
                    feature_space.len(),
                    doc.weights.len()
                ),
            ));
        }
        let values = ValueSet::new(doc.value_set.clone())?;
        let world = World::new(doc.weights.clone(), values.clone())?;
        let params = build_params(&doc.betas, doc.target_rule)?;
        let utterances = UtteranceSpace::grid(feature_space.len(), &values, doc.utterance_filter)?;
        let action_space = match &doc.actions {
            Some(a) => build_actions(&feature_space, "actions", a)?,
            None => feature_space.action_space(),
        };
        // reject duplicates in the action space
        ActionContext::new(action_space.clone()).map_err(|e| match e {
            Error::Config { reason, .. } => Error::config("actions", reason),
            other => other,
        })?;
        if doc.context_size < 2 || doc.context_size > action_space.len() {
            return Err(Error::config(
                "contextSize",
                format!(
                    "must be between 2 and the number of actions ({}), got {}",
                    action_space.len(),
                    doc.context_size
                ),
            ));
        }
        let context = match &doc.context {
            Some(c) => {
                let actions = build_actions(&feature_space, "context", c)?;
                if actions.len() < 2 {
                    return Err(Error::config("context", "a context needs at least two actions"));
                }
                Some(ActionContext::new(actions).map_err(|e| match e {
                    Error::Config { reason, .. } => Error::config("context", reason),
                    other => other,
                })?)
            }
            None => None,
        };
        Ok(ExperimentConfig {
            feature_space,
            world,
            params,
            filter: doc.utterance_filter,
            utterances,
            action_space,
            context_size: doc.context_size,
            context,
            out_dir: doc.out_dir,
        })
    }

    /// A configuration over the full action space with no fixed context.
    pub fn new(
        feature_space: FeatureSpace,
        world: World,
        params: ModelParams,
        filter: UtteranceFilter,
        context_size: usize,
    ) -> Result<Self> {
        if world.len() != feature_space.len() {
            return Err(Error::config("weights", "world and feature space disagree on K"));
        }
        params.validate()?;
        let utterances = UtteranceSpace::grid(world.len(), world.values(), filter)?;
        let action_space = feature_space.action_space();
        if context_size < 2 || context_size > action_space.len() {
            return Err(Error::config("contextSize", format!("must be between 2 and {}", action_space.len())));
        }
        Ok(ExperimentConfig {
            feature_space,
            world,
            params,
            filter,
            utterances,
            action_space,
            context_size,
            context: None,
            out_dir: None,
        })
    }

    /// Same configuration with every speaker at the hard-max limit.
    pub fn with_infinite_speakers(mut self) -> Self {
        self.params = self.params.with_infinite_speakers();
        self
    }

    /// Same configuration under a different world, keeping everything else.
    pub fn with_world(&self, world: World) -> Result<Self> {
        if world.len() != self.feature_space.len() {
            return Err(Error::config("weights", "world and feature space disagree on K"));
        }
        let utterances = UtteranceSpace::grid(world.len(), world.values(), self.filter)?;
        Ok(ExperimentConfig {
            world,
            utterances,
            ..self.clone()
        })
    }

    /// The reference game: green and blue crossed with circle and square,
    /// one target worth 200 and two distractors worth 0, positive messages only.
    pub fn lewis() -> Self {
        Self::from_json(LEWIS_JSON).expect("built-in reference game is valid")
    }

    /// The 3 colors x 3 shapes signaling bandit with the calibrated world.
    pub fn signaling_bandit() -> Self {
        Self::from_json(SIGNALING_JSON).expect("built-in signaling bandit is valid")
    }
}

pub const LEWIS_JSON: &str = r#"{
  "featureSpace": {
    "dimensions": [
      { "name": "color", "features": ["green", "blue"] },
      { "name": "shape", "features": ["circle", "square"] }
    ]
  },
  "weights": [100, -100, 100, -100],
  "valueSet": [-100, 0, 100],
  "betas": { "listener": 3, "belief": 3, "action": 3, "combined": 2 },
  "utteranceFilter": "positive",
  "context": [["green", "circle"], ["green", "square"], ["blue", "circle"]]
}
"#;

pub const SIGNALING_JSON: &str = r#"{
  "featureSpace": {
    "dimensions": [
      { "name": "color", "features": ["red", "green", "blue"] },
      { "name": "shape", "features": ["circle", "square", "triangle"] }
    ]
  },
  "weights": [0, 2, -2, 1, -1, 0],
  "valueSet": [-2, -1, 0, 1, 2],
  "betas": { "listener": 3, "belief": 3, "action": 3, "combined": 2 },
  "contextSize": 3,
  "utteranceFilter": "all"
}
"#;

/// Requirement on a candidate world beyond value-set membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub enum Constraint {
    /// The named feature is strictly the worst in its dimension.
    LowestInDimension(String),
    /// The named feature is strictly the best in its dimension.
    HighestInDimension(String),
}

/// Target numbers for one speaker: truthfulness, optimal-action rate,
/// local reward, generalization reward.
pub type MetricTargets = [f64; 4];

/// Single-context check applied to matched worlds only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct HeldOutDoc {
    /// Action speaker `[piOptimal, rLocal]`.
    pub action: [f64; 2],
    /// Combined speaker `[piOptimal, rLocal]`.
    pub combined: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SearchDoc {
    pub feature_space: FeatureSpaceDoc,
    pub fixed_weights: BTreeMap<String, f64>,
    /// Values tried for every feature not in `fixedWeights`.
    pub free_values: Vec<f64>,
    pub value_sets: Vec<Vec<f64>>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    #[serde(default)]
    pub betas: BetasDoc,
    #[serde(default = "default_context_size")]
    pub context_size: usize,
    #[serde(default)]
    pub target_rule: TargetRule,
    #[serde(default = "default_targets")]
    pub targets: BTreeMap<String, MetricTargets>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_held_out")]
    pub held_out: Option<HeldOutDoc>,
}

fn default_tolerance() -> f64 {
    0.005
}

/// Default calibration targets for belief, action and combined.
pub fn default_targets() -> BTreeMap<String, MetricTargets> {
    BTreeMap::from([
        ("belief".to_string(), [1.00, 0.499, 0.539, 0.539]),
        ("action".to_string(), [0.330, 0.772, 1.18, 0.486]),
        ("combined".to_string(), [0.360, 0.742, 1.28, 0.522]),
    ])
}

fn default_held_out() -> Option<HeldOutDoc> {
    Some(HeldOutDoc {
        action: [0.737, 0.456],
        combined: [0.627, 0.482],
    })
}

/// A validated calibration search.
#[derive(Debug, Clone)]
pub struct SearchSpec {
    pub feature_space: FeatureSpace,
    /// `Some(w)` for fixed features, `None` for free ones.
    pub fixed: Vec<Option<f64>>,
    pub free_values: Vec<f64>,
    pub value_sets: Vec<Vec<f64>>,
    pub constraints: Vec<Constraint>,
    pub params: ModelParams,
    pub context_size: usize,
    pub targets: BTreeMap<String, MetricTargets>,
    pub tolerance: f64,
    pub held_out: Option<HeldOutDoc>,
}

impl SearchSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(parse_json(text)?)
    }

    pub fn from_doc(doc: SearchDoc) -> Result<Self> {
        let feature_space = build_feature_space(&doc.feature_space)?;
        let mut fixed = vec![None; feature_space.len()];
        for (name, &w) in &doc.fixed_weights {
            let k = feature_space
                .index_of(name)
                .ok_or_else(|| Error::config("fixedWeights", format!("unknown feature `{name}`")))?;
            if !w.is_finite() {
                return Err(Error::config("fixedWeights", "weights must be finite"));
            }
            fixed[k] = Some(w);
        }
        if doc.free_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("freeValues", "values must be finite"));
        }
        for vs in &doc.value_sets {
            ValueSet::new(vs.clone()).map_err(|e| match e {
                Error::Config { reason, .. } => Error::config("valueSets", reason),
                other => other,
            })?;
        }
        for c in &doc.constraints {
            let (Constraint::LowestInDimension(n) | Constraint::HighestInDimension(n)) = c;
            if feature_space.index_of(n).is_none() {
                return Err(Error::config("constraints", format!("unknown feature `{n}`")));
            }
        }
        for key in doc.targets.keys() {
            if !["belief", "action", "combined"].contains(&key.as_str()) {
                return Err(Error::config("targets", format!("unknown speaker `{key}`")));
            }
        }
        if !(doc.tolerance.is_finite() && doc.tolerance >= 0.0) {
            return Err(Error::config("tolerance", "must be finite and >= 0"));
        }
        let n_actions = feature_space.action_space().len();
        if doc.context_size < 2 || doc.context_size > n_actions {
            return Err(Error::config(
                "contextSize",
                format!("must be between 2 and {n_actions}, got {}", doc.context_size),
            ));
        }
        Ok(SearchSpec {
            params: build_params(&doc.betas, doc.target_rule)?,
            feature_space,
            fixed,
            free_values: doc.free_values,
            value_sets: doc.value_sets,
            constraints: doc.constraints,
            context_size: doc.context_size,
            targets: doc.targets,
            tolerance: doc.tolerance,
            held_out: doc.held_out,
        })
    }

    /// The default search around the pinned blue, green and circle values.
    pub fn default_search() -> Self {
        Self::from_json(SEARCH_JSON).expect("built-in search is valid")
    }
}

pub const SEARCH_JSON: &str = r#"{
  "featureSpace": {
    "dimensions": [
      { "name": "color", "features": ["red", "green", "blue"] },
      { "name": "shape", "features": ["circle", "square", "triangle"] }
    ]
  },
  "fixedWeights": { "blue": -2, "green": 2, "circle": 1 },
  "freeValues": [-2, -1, 0, 1, 2],
  "valueSets": [[-2, -1, 0, 1, 2], [-2, -1, 1, 2]],
  "constraints": [{ "lowestInDimension": "blue" }],
  "betas": { "listener": 3, "belief": 3, "action": 3, "combined": 2 },
  "contextSize": 3,
  "tolerance": 0.005
}
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        let l = ExperimentConfig::lewis();
        assert_eq!(l.utterances.len(), 4);
        assert_eq!(l.context.as_ref().unwrap().len(), 3);
        let s = ExperimentConfig::signaling_bandit();
        assert_eq!(s.action_space.len(), 9);
        assert_eq!(s.utterances.len(), 30);
        let search = SearchSpec::default_search();
        assert_eq!(search.fixed.iter().filter(|f| f.is_some()).count(), 3);
        assert_eq!(search.targets.len(), 3);
    }

    #[test]
    fn weight_length_mismatch_names_weights() {
        let text = SIGNALING_JSON.replace("[0, 2, -2, 1, -1, 0]", "[0, 2, -2]");
        let e = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "weights"), "{e}");
    }

    #[test]
    fn malformed_documents_are_errors() {
        assert!(ExperimentConfig::from_json("").is_err());
        assert!(ExperimentConfig::from_json("{}").is_err());
        assert!(ExperimentConfig::from_json("[1,2,3]").is_err());
        let unknown = SIGNALING_JSON.replace("\"contextSize\"", "\"contextSise\"");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
        let skewed = SIGNALING_JSON.replace("[-2, -1, 0, 1, 2]", "[-1, 0, 1, 2]");
        let e = ExperimentConfig::from_json(&skewed).unwrap_err();
        assert!(e.to_string().contains("weights") || e.to_string().contains("valueSet"));
        let big = SIGNALING_JSON.replace("\"contextSize\": 3", "\"contextSize\": 10");
        assert!(ExperimentConfig::from_json(&big).unwrap_err().to_string().contains("contextSize"));
        let bad_beta = SIGNALING_JSON.replace("\"combined\": 2", "\"combined\": -2");
        assert!(ExperimentConfig::from_json(&bad_beta).unwrap_err().to_string().contains("betas.combined"));
    }

    #[test]
    fn infinite_betas_parse() {
        let text = SIGNALING_JSON.replace("\"combined\": 2", "\"combined\": \"inf\"");
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c.params.beta_combined, Beta::Infinite);
    }

    #[test]
    fn context_must_be_valid_actions() {
        let text = LEWIS_JSON.replace("[\"blue\", \"circle\"]", "[\"blue\", \"green\"]");
        let e = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(e.to_string().contains("context"), "{e}");
        let text = LEWIS_JSON.replace("[\"blue\", \"circle\"]", "[\"green\", \"circle\"]");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn search_validation() {
        let bad = SEARCH_JSON.replace("\"blue\": -2", "\"purple\": -2");
        assert!(SearchSpec::from_json(&bad).unwrap_err().to_string().contains("fixedWeights"));
        let bad = SEARCH_JSON.replace("\"lowestInDimension\": \"blue\"", "\"lowestInDimension\": \"teal\"");
        assert!(SearchSpec::from_json(&bad).is_err());
        let empty = SEARCH_JSON.replace("\"freeValues\": [-2, -1, 0, 1, 2]", "\"freeValues\": []");
        assert!(SearchSpec::from_json(&empty).unwrap().free_values.is_empty());
    }

    #[test]
    fn doc_round_trip() {
        let doc: ConfigDoc = serde_json::from_str(SIGNALING_JSON).unwrap();
        let again: ConfigDoc = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(doc, again);
    }
}
