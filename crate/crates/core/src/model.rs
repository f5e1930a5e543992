//! Domain types, the linear reward model, and the literal listener.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::softmax::{softmax, Beta};
use crate::speakers::TargetRule;

/// A named binary feature and the index of the dimension it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    pub dimension: usize,
}

/// Binary features grouped into dimensions, e.g. colors and shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    dimensions: Vec<String>,
    features: Vec<Feature>,
}

impl FeatureSpace {
    /// Builds a space from `(dimension, [feature, ...])` groups, in order.
    pub fn new<D, F>(groups: impl IntoIterator<Item = (D, Vec<F>)>) -> Result<Self>
    where
        D: Into<String>,
        F: Into<String>,
    {
        let mut dimensions = Vec::new();
        let mut features = Vec::new();
        let mut seen_dims = HashSet::new();
        let mut seen = HashSet::new();
        for (d, names) in groups {
            let d = d.into();
            if !seen_dims.insert(d.clone()) {
                return Err(Error::config("featureSpace", format!("duplicate dimension `{d}`")));
            }
            if names.is_empty() {
                return Err(Error::config("featureSpace", format!("dimension `{d}` has no features")));
            }
            for n in names {
                let n = n.into();
                if !seen.insert(n.clone()) {
                    return Err(Error::config("featureSpace", format!("duplicate feature `{n}`")));
                }
                features.push(Feature {
                    name: n,
                    dimension: dimensions.len(),
                });
            }
            dimensions.push(d);
        }
        if features.is_empty() {
            return Err(Error::config("featureSpace", "no features declared"));
        }
        Ok(FeatureSpace {
            dimensions,
            features,
        })
    }

    /// Number of features, K.
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dimensions(&self) -> &[String] {
        &self.dimensions
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature_name(&self, k: usize) -> &str {
        &self.features[k].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Builds the action carrying exactly the named features, one per dimension.
    pub fn action(&self, names: &[&str]) -> Result<Action> {
        let mut indicator = vec![false; self.len()];
        for n in names {
            let k = self
                .index_of(n)
                .ok_or_else(|| Error::config("actions", format!("unknown feature `{n}`")))?;
            indicator[k] = true;
        }
        let action = Action::new(indicator, names.join("-"))?;
        self.check_action(&action)?;
        Ok(action)
    }

    /// Checks that `action` sets exactly one feature in every dimension.
    pub fn check_action(&self, action: &Action) -> Result<()> {
        if action.len() != self.len() {
            return Err(Error::config(
                "actions",
                format!("action has {} entries, feature space has {}", action.len(), self.len()),
            ));
        }
        let mut per_dim = vec![0usize; self.dimensions.len()];
        for k in action.features() {
            per_dim[self.features[k].dimension] += 1;
        }
        if let Some(d) = per_dim.iter().position(|&c| c != 1) {
            return Err(Error::config(
                "actions",
                format!(
                    "action `{}` sets {} features in dimension `{}`",
                    action.label(),
                    per_dim[d],
                    self.dimensions[d]
                ),
            ));
        }
        Ok(())
    }

    /// Every combination of one feature per dimension, first dimension outermost.
    pub fn action_space(&self) -> Vec<Action> {
        let groups: Vec<Vec<usize>> = (0..self.dimensions.len())
            .map(|d| {
                (0..self.len())
                    .filter(|&k| self.features[k].dimension == d)
                    .collect()
            })
            .collect();
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for g in &groups {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    g.iter().map(move |&k| {
                        let mut c = prefix.clone();
                        c.push(k);
                        c
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .map(|ks| {
                let mut indicator = vec![false; self.len()];
                for &k in &ks {
                    indicator[k] = true;
                }
                let label = ks
                    .iter()
                    .map(|&k| self.features[k].name.as_str())
                    .collect::<Vec<_>>()
                    .join("-");
                Action::new(indicator, label).expect("every combination sets a feature")
            })
            .collect()
    }
}

/// Ordered, distinct scalars admissible as feature values and utterance values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSet(Arc<[f64]>);

impl ValueSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("valueSet", "value set is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("valueSet", "values must be finite"));
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(Error::config("valueSet", format!("duplicate value {v}")));
            }
        }
        Ok(ValueSet(values.into()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.0.contains(&v)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// The true reward of every feature together with the admissible values.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    weights: Vec<f64>,
    values: ValueSet,
}

impl World {
    /// Unheard features are expected to be worth nothing, so the value set
    /// must have mean zero.
    pub fn new(weights: Vec<f64>, values: ValueSet) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::config("weights", "no weights"));
        }
        if let Some(w) = weights.iter().find(|w| !values.contains(**w)) {
            return Err(Error::config("weights", format!("weight {w} is not in the value set")));
        }
        let scale = values.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if values.mean().abs() > 1e-12 * scale {
            return Err(Error::config(
                "valueSet",
                format!("value set must have mean 0, got {}", values.mean()),
            ));
        }
        Ok(World { weights, values })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &ValueSet {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Linear reward `w . phi(a)`.
    pub fn reward(&self, action: &Action) -> Result<f64> {
        if action.len() != self.len() {
            return Err(Error::config(
                "weights",
                format!("action has {} features, world has {}", action.len(), self.len()),
            ));
        }
        Ok(action.features().map(|k| self.weights[k]).sum())
    }

    /// Literal truth of an utterance: the named feature has exactly that value.
    pub fn is_true(&self, u: &Utterance) -> bool {
        self.weights.get(u.feature) == Some(&u.value)
    }
}

/// An indicator vector over features.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    indicator: Vec<bool>,
    label: String,
}

impl Action {
    pub fn new(indicator: Vec<bool>, label: impl Into<String>) -> Result<Self> {
        if !indicator.iter().any(|&b| b) {
            return Err(Error::config("actions", "action sets no feature"));
        }
        Ok(Action {
            indicator,
            label: label.into(),
        })
    }

    pub fn indicator(&self) -> &[bool] {
        &self.indicator
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.indicator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicator.is_empty()
    }

    pub fn has(&self, k: usize) -> bool {
        self.indicator.get(k).copied().unwrap_or(false)
    }

    /// Indices of the set features, ascending.
    pub fn features(&self) -> impl Iterator<Item = usize> + '_ {
        self.indicator
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| k)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// The actions available to the listener in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionContext {
    actions: Vec<Action>,
}

impl ActionContext {
    pub fn new(actions: Vec<Action>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::config("context", "context has no actions"));
        }
        for (i, a) in actions.iter().enumerate() {
            if actions[..i].iter().any(|b| b.indicator == a.indicator) {
                return Err(Error::config("context", format!("duplicate action `{a}`")));
            }
            if a.len() != actions[0].len() {
                return Err(Error::config("context", "actions disagree on the feature count"));
            }
        }
        Ok(ActionContext { actions })
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// True rewards of the actions, in context order.
    pub fn rewards(&self, world: &World) -> Result<Vec<f64>> {
        self.actions.iter().map(|a| world.reward(a)).collect()
    }
}

impl fmt::Display for ActionContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.actions.iter().map(|a| a.label()).collect();
        write!(f, "{{{}}}", labels.join(", "))
    }
}

/// A message `<feature, value>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utterance {
    pub feature: usize,
    pub value: f64,
}

impl Utterance {
    pub fn new(feature: usize, value: f64) -> Self {
        Utterance { feature, value }
    }
}

/// What the listener knows about one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    /// Uniform over the value set.
    Prior,
    Known(f64),
}

/// The literal listener's independent per-feature beliefs.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    slots: Vec<Slot>,
    values: ValueSet,
}

impl Belief {
    /// A listener who has heard nothing.
    pub fn prior(k: usize, values: ValueSet) -> Self {
        Belief {
            slots: vec![Slot::Prior; k],
            values,
        }
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn values(&self) -> &ValueSet {
        &self.values
    }

    /// Literal interpretation: pins the named feature to the transmitted value.
    /// A later message about the same feature overwrites an earlier one.
    pub fn update(&self, u: &Utterance) -> Result<Belief> {
        if !self.values.contains(u.value) {
            return Err(Error::InvalidUtterance { value: u.value });
        }
        if u.feature >= self.slots.len() {
            return Err(Error::config(
                "utterance",
                format!("feature index {} out of range", u.feature),
            ));
        }
        let mut next = self.clone();
        next.slots[u.feature] = Slot::Known(u.value);
        Ok(next)
    }

    pub fn expected_value(&self, k: usize) -> f64 {
        match self.slots[k] {
            Slot::Known(v) => v,
            Slot::Prior => self.values.mean(),
        }
    }

    /// Posterior expected reward of `action`. Exact because priors are
    /// independent across features and rewards are linear.
    pub fn expected_reward(&self, action: &Action) -> f64 {
        action.features().map(|k| self.expected_value(k)).sum()
    }
}

/// Softmax optimality parameters for the listener and each speaker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta_listener: f64,
    pub beta_belief: Beta,
    pub beta_action: Beta,
    pub beta_combined: Beta,
    /// Reward softmax of the generalized speaker.
    pub beta_reward_softmax: Beta,
    pub target_rule: TargetRule,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta_listener: 3.0,
            beta_belief: Beta::Finite(3.0),
            beta_action: Beta::Finite(3.0),
            beta_combined: Beta::Finite(2.0),
            beta_reward_softmax: Beta::Finite(1.0),
            target_rule: TargetRule::ArgmaxSet,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_listener.is_finite() && self.beta_listener >= 0.0) {
            return Err(Error::config("betas.listener", "must be finite and >= 0"));
        }
        for (name, b) in [
            ("betas.belief", self.beta_belief),
            ("betas.action", self.beta_action),
            ("betas.combined", self.beta_combined),
        ] {
            if !b.is_valid() {
                return Err(Error::config(name, "must be >= 0 or \"inf\""));
            }
        }
        if !self.beta_reward_softmax.is_valid() || self.beta_reward_softmax == Beta::Finite(0.0) {
            return Err(Error::config("betas.rewardSoftmax", "must be > 0 or \"inf\""));
        }
        Ok(())
    }

    /// All speaker optimalities switched to the hard-max limit.
    pub fn with_infinite_speakers(mut self) -> Self {
        self.beta_belief = Beta::Infinite;
        self.beta_action = Beta::Infinite;
        self.beta_combined = Beta::Infinite;
        self
    }
}

/// The listener's action distribution: softmax of expected rewards.
pub fn listener_policy(belief: &Belief, context: &ActionContext, beta_listener: f64) -> Vec<f64> {
    let expected: Vec<f64> = context
        .actions()
        .iter()
        .map(|a| belief.expected_reward(a))
        .collect();
    softmax(&expected, Beta::Finite(beta_listener))
        .expect("finite expected rewards always have support")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn colors_shapes() -> FeatureSpace {
        FeatureSpace::new([
            ("color", vec!["red", "green", "blue"]),
            ("shape", vec!["circle", "square", "triangle"]),
        ])
        .unwrap()
    }

    fn five() -> ValueSet {
        ValueSet::new(vec![-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap()
    }

    fn fig1_world() -> World {
        World::new(vec![0.0, 2.0, -2.0, 1.0, -1.0, 0.0], five()).unwrap()
    }

    #[test]
    fn feature_space_rejects_duplicates_and_empty_dimensions() {
        assert!(FeatureSpace::new([("c", vec!["a", "a"])]).is_err());
        assert!(FeatureSpace::new([("c", vec!["a"]), ("s", vec!["a"])]).is_err());
        assert!(FeatureSpace::new([("c", Vec::<&str>::new())]).is_err());
        assert!(FeatureSpace::new([("c", vec!["a"]), ("c", vec!["b"])]).is_err());
        assert_eq!(colors_shapes().len(), 6);
    }

    #[test]
    fn action_space_is_the_cartesian_product() {
        let fs = colors_shapes();
        let space = fs.action_space();
        assert_eq!(space.len(), 9);
        assert_eq!(space[0].label(), "red-circle");
        assert_eq!(space[5].label(), "green-triangle");
        for a in &space {
            fs.check_action(a).unwrap();
        }
    }

    #[test]
    fn action_needs_one_feature_per_dimension() {
        let fs = colors_shapes();
        assert!(fs.action(&["red", "green"]).is_err());
        assert!(fs.action(&["red"]).is_err());
        assert!(fs.action(&["mauve", "circle"]).is_err());
        assert!(Action::new(vec![false; 6], "none").is_err());
    }

    #[test]
    fn world_invariants() {
        assert!(World::new(vec![3.0], five()).is_err());
        let skewed = ValueSet::new(vec![0.0, 1.0]).unwrap();
        let e = World::new(vec![1.0], skewed).unwrap_err();
        assert!(e.to_string().contains("valueSet"));
        assert!(ValueSet::new(vec![1.0, 1.0]).is_err());
        assert!(ValueSet::new(vec![]).is_err());
    }

    #[test]
    fn reward_is_linear() {
        let fs = colors_shapes();
        let w = fig1_world();
        let gc = fs.action(&["green", "circle"]).unwrap();
        assert_eq!(w.reward(&gc).unwrap(), 3.0);
        let zero = World::new(vec![0.0; 6], five()).unwrap();
        assert_eq!(zero.reward(&gc).unwrap(), 0.0);
        let blue_only = Action::new(vec![false, false, true, false, false, false], "blue").unwrap();
        assert_eq!(w.reward(&blue_only).unwrap(), -2.0);
        let short = Action::new(vec![true], "x").unwrap();
        assert!(w.reward(&short).is_err());
    }

    #[test]
    fn truth_is_exact_equality() {
        let w = fig1_world();
        assert!(w.is_true(&Utterance::new(2, -2.0)));
        assert!(!w.is_true(&Utterance::new(3, 2.0)));
        for (k, &v) in w.weights().iter().enumerate() {
            assert!(w.is_true(&Utterance::new(k, v)));
        }
        assert!(!w.is_true(&Utterance::new(17, 0.0)));
    }

    #[test]
    fn update_pins_and_overwrites() {
        let b = Belief::prior(6, five());
        let b1 = b.update(&Utterance::new(2, -2.0)).unwrap();
        assert_eq!(b1.slots()[2], Slot::Known(-2.0));
        assert!(b1.slots().iter().enumerate().all(|(k, s)| k == 2 || *s == Slot::Prior));
        let b2 = b1.update(&Utterance::new(2, 1.0)).unwrap();
        assert_eq!(b2.slots()[2], Slot::Known(1.0));
        let b3 = b.update(&Utterance::new(1, 2.0)).unwrap().update(&Utterance::new(3, 1.0)).unwrap();
        assert_eq!(b3.slots()[1], Slot::Known(2.0));
        assert_eq!(b3.slots()[3], Slot::Known(1.0));
        assert_eq!(b3.slots().iter().filter(|s| **s == Slot::Prior).count(), 4);
        assert_eq!(
            b.update(&Utterance::new(0, 7.0)).unwrap_err(),
            Error::InvalidUtterance { value: 7.0 }
        );
    }

    #[test]
    fn expected_values() {
        let b = Belief::prior(6, five());
        assert_eq!(b.expected_value(0), 0.0);
        let b = b.update(&Utterance::new(0, -2.0)).unwrap();
        assert_eq!(b.expected_value(0), -2.0);
        let wide = ValueSet::new(vec![-100.0, 0.0, 100.0]).unwrap();
        assert_eq!(Belief::prior(2, wide).expected_value(1), 0.0);
    }

    #[test]
    fn expected_reward_cases() {
        let fs = colors_shapes();
        let gc = fs.action(&["green", "circle"]).unwrap();
        let prior = Belief::prior(6, five());
        assert_eq!(prior.expected_reward(&gc), 0.0);
        let heard = prior.update(&Utterance::new(1, 2.0)).unwrap();
        assert_eq!(heard.expected_reward(&gc), 2.0);
        let w = fig1_world();
        let mut full = prior.clone();
        for (k, &v) in w.weights().iter().enumerate() {
            full = full.update(&Utterance::new(k, v)).unwrap();
        }
        for a in fs.action_space() {
            assert_eq!(full.expected_reward(&a), w.reward(&a).unwrap());
        }
    }

    #[test]
    fn policy_cases() {
        let fs = colors_shapes();
        let space = fs.action_space();
        let ctx = ActionContext::new(space[..3].to_vec()).unwrap();
        let prior = Belief::prior(6, five());
        let p = listener_policy(&prior, &ctx, 0.0);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));

        // green-circle, red-square, blue-triangle after <green, 2>: expected (2, 0, 0)
        let ctx = ActionContext::new(vec![
            fs.action(&["green", "circle"]).unwrap(),
            fs.action(&["red", "square"]).unwrap(),
            fs.action(&["blue", "triangle"]).unwrap(),
        ])
        .unwrap();
        let b = prior.update(&Utterance::new(1, 2.0)).unwrap();
        let p = listener_policy(&b, &ctx, 3.0);
        // exp(6) / (exp(6) + 2) and 1 / (exp(6) + 2), evaluated independently
        assert!((p[0] - 0.995_066_951_257_284_5).abs() < 1e-9);
        assert!((p[1] - 0.002_466_524_371_357_751).abs() < 1e-9);
        assert!((p[2] - 0.002_466_524_371_357_751).abs() < 1e-9);

        let pair = ActionContext::new(vec![space[0].clone(), space[4].clone()]).unwrap();
        let p = listener_policy(&prior, &pair, 9.0);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn context_rejects_duplicates() {
        let fs = colors_shapes();
        let a = fs.action(&["red", "circle"]).unwrap();
        assert!(ActionContext::new(vec![a.clone(), a]).is_err());
        assert!(ActionContext::new(vec![]).is_err());
    }

    #[test]
    fn params_validation() {
        ModelParams::default().validate().unwrap();
        let p = ModelParams { beta_listener: -1.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = ModelParams { beta_action: Beta::Finite(-0.5), ..Default::default() };
        assert!(p.validate().unwrap_err().to_string().contains("betas.action"));
        let p = ModelParams { beta_reward_softmax: Beta::Finite(0.0), ..Default::default() };
        assert!(p.validate().is_err());
    }
}
