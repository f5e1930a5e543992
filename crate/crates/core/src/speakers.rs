//! Speaker utilities and production distributions.
//!
//! Every speaker knows the true world and reasons about a literal listener
//! who starts from the uniform prior and hears exactly one utterance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{listener_policy, ActionContext, Belief, ModelParams, Utterance, ValueSet, World};
use crate::softmax::{argmax_set, softmax, Beta};

/// Which utterance values are admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum UtteranceFilter {
    #[default]
    All,
    /// Strictly positive values only, as in reference games with labels.
    Positive,
}

/// The ordered set of messages a speaker may send.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceSpace {
    utterances: Vec<Utterance>,
}

impl UtteranceSpace {
    /// Every `<feature, value>` pair, feature-major, optionally filtered.
    pub fn grid(k: usize, values: &ValueSet, filter: UtteranceFilter) -> Result<Self> {
        let utterances = (0..k)
            .flat_map(|f| values.values().iter().map(move |&v| Utterance::new(f, v)))
            .filter(|u| filter == UtteranceFilter::All || u.value > 0.0)
            .collect();
        Self::new(utterances, values)
    }

    pub fn new(utterances: Vec<Utterance>, values: &ValueSet) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::config("utteranceFilter", "utterance space is empty"));
        }
        for (i, u) in utterances.iter().enumerate() {
            if !values.contains(u.value) {
                return Err(Error::InvalidUtterance { value: u.value });
            }
            if utterances[..i].contains(u) {
                return Err(Error::config("utterances", "duplicate utterance"));
            }
        }
        Ok(UtteranceSpace { utterances })
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

/// How the Action speaker picks the action it wants the listener to take
/// when several actions share the highest reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TargetRule {
    /// Target the whole argmax set: utility is the log of its total mass.
    #[default]
    ArgmaxSet,
    /// Target the first maximal action in context order.
    LowestPosition,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeakerKind {
    Belief,
    Action,
    Combined,
    /// Softmax-weighted targets with the given reward optimality.
    Generalized(Beta),
}

impl SpeakerKind {
    pub const MAIN: [SpeakerKind; 3] = [SpeakerKind::Belief, SpeakerKind::Action, SpeakerKind::Combined];

    pub fn name(&self) -> &'static str {
        match self {
            SpeakerKind::Belief => "belief",
            SpeakerKind::Action => "action",
            SpeakerKind::Combined => "combined",
            SpeakerKind::Generalized(_) => "generalized",
        }
    }

    /// Production optimality. The generalized speaker shares the Action
    /// speaker's, since both rank log-probabilities.
    pub fn beta(&self, params: &ModelParams) -> Beta {
        match self {
            SpeakerKind::Belief => params.beta_belief,
            SpeakerKind::Action | SpeakerKind::Generalized(_) => params.beta_action,
            SpeakerKind::Combined => params.beta_combined,
        }
    }
}

impl fmt::Display for SpeakerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Log posterior of the true world after a literal update.
///
/// With independent uniform priors, a true utterance pins one feature and
/// leaves `|V|^(K-1)` equally likely worlds. A false one rules the truth out.
pub fn belief_utility(u: &Utterance, world: &World) -> f64 {
    if world.is_true(u) {
        -((world.len() - 1) as f64) * (world.values().len() as f64).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Index of the highest-reward action; ties go to the earliest position.
pub fn select_target_action(context: &ActionContext, world: &World) -> Result<usize> {
    Ok(target_set(context, world)?[0])
}

/// Indices of every action with maximal true reward.
pub fn target_set(context: &ActionContext, world: &World) -> Result<Vec<usize>> {
    Ok(argmax_set(&context.rewards(world)?))
}

fn policy_after(u: &Utterance, context: &ActionContext, world: &World, params: &ModelParams) -> Result<Vec<f64>> {
    let belief = Belief::prior(world.len(), world.values().clone()).update(u)?;
    Ok(listener_policy(&belief, context, params.beta_listener))
}

fn targets_for(rule: TargetRule, rewards: &[f64]) -> Vec<usize> {
    let set = argmax_set(rewards);
    match rule {
        TargetRule::ArgmaxSet => set,
        TargetRule::LowestPosition => vec![set[0]],
    }
}

/// Log probability that the listener takes the speaker's target action.
pub fn action_utility(u: &Utterance, context: &ActionContext, world: &World, params: &ModelParams) -> Result<f64> {
    let rewards = context.rewards(world)?;
    let policy = policy_after(u, context, world, params)?;
    Ok(action_utility_from(&policy, &targets_for(params.target_rule, &rewards)))
}

fn action_utility_from(policy: &[f64], targets: &[usize]) -> f64 {
    targets.iter().map(|&i| policy[i]).sum::<f64>().ln()
}

/// Expected true reward of the listener's induced policy.
pub fn combined_utility(u: &Utterance, context: &ActionContext, world: &World, params: &ModelParams) -> Result<f64> {
    let rewards = context.rewards(world)?;
    let policy = policy_after(u, context, world, params)?;
    Ok(expectation(&policy, &rewards))
}

pub(crate) fn expectation(p: &[f64], x: &[f64]) -> f64 {
    p.iter().zip(x).map(|(p, x)| p * x).sum()
}

/// `sum_a t(a) log pi_L(a)` with `t = softmax(rewards, beta_reward)`.
///
/// At `beta_reward = inf` with a unique best action this is the Action utility.
pub fn generalized_utility(
    u: &Utterance,
    context: &ActionContext,
    world: &World,
    params: &ModelParams,
    beta_reward: Beta,
) -> Result<f64> {
    let rewards = context.rewards(world)?;
    let policy = policy_after(u, context, world, params)?;
    generalized_from(&policy, &rewards, beta_reward)
}

fn generalized_from(policy: &[f64], rewards: &[f64], beta_reward: Beta) -> Result<f64> {
    let weights = softmax(rewards, beta_reward)?;
    Ok(weights
        .iter()
        .zip(policy)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, p)| t * p.ln())
        .sum())
}

/// Utility of every utterance in `space`, in order.
pub fn speaker_utilities(
    kind: SpeakerKind,
    context: &ActionContext,
    world: &World,
    space: &UtteranceSpace,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    if let SpeakerKind::Belief = kind {
        return Ok(space.utterances().iter().map(|u| belief_utility(u, world)).collect());
    }
    let rewards = context.rewards(world)?;
    let policies = crate::metrics::policies(space, context, world, params)?;
    utilities_from_policies(kind, world, space, params, &rewards, &policies)
}

/// Utilities given the context's true rewards and the listener policy
/// after each utterance.
pub(crate) fn utilities_from_policies(
    kind: SpeakerKind,
    world: &World,
    space: &UtteranceSpace,
    params: &ModelParams,
    rewards: &[f64],
    policies: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let targets = targets_for(params.target_rule, rewards);
    space
        .utterances()
        .iter()
        .zip(policies)
        .map(|(u, policy)| {
            Ok(match kind {
                SpeakerKind::Belief => belief_utility(u, world),
                SpeakerKind::Action => action_utility_from(policy, &targets),
                SpeakerKind::Combined => expectation(policy, rewards),
                SpeakerKind::Generalized(b) => generalized_from(policy, rewards, b)?,
            })
        })
        .collect()
}

/// `P_S(u) ∝ exp(beta_S * U(u))` over the utterance space.
pub fn speaker_distribution(
    kind: SpeakerKind,
    context: &ActionContext,
    world: &World,
    space: &UtteranceSpace,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    if let SpeakerKind::Generalized(b) = kind {
        if !b.is_valid() || b == Beta::Finite(0.0) {
            return Err(Error::config("betas.rewardSoftmax", "must be > 0 or \"inf\""));
        }
    }
    let utilities = speaker_utilities(kind, context, world, space, params)?;
    softmax(&utilities, kind.beta(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureSpace;

    fn setup() -> (FeatureSpace, World, UtteranceSpace) {
        let fs = FeatureSpace::new([
            ("color", vec!["red", "green", "blue"]),
            ("shape", vec!["circle", "square", "triangle"]),
        ])
        .unwrap();
        let vs = ValueSet::new(vec![-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        let w = World::new(vec![0.0, 2.0, -2.0, 1.0, -1.0, 0.0], vs.clone()).unwrap();
        let space = UtteranceSpace::grid(6, &vs, UtteranceFilter::All).unwrap();
        (fs, w, space)
    }

    fn ctx(fs: &FeatureSpace, names: &[[&str; 2]]) -> ActionContext {
        ActionContext::new(names.iter().map(|n| fs.action(n).unwrap()).collect()).unwrap()
    }

    #[test]
    fn utterance_grid() {
        let (_, w, space) = setup();
        assert_eq!(space.len(), 30);
        assert_eq!(space.utterances()[0], Utterance::new(0, -2.0));
        let pos = UtteranceSpace::grid(6, w.values(), UtteranceFilter::Positive).unwrap();
        assert_eq!(pos.len(), 12);
        let none = ValueSet::new(vec![0.0]).unwrap();
        assert!(UtteranceSpace::grid(3, &none, UtteranceFilter::Positive).is_err());
    }

    #[test]
    fn belief_utility_closed_form() {
        let (_, w, _) = setup();
        let u = belief_utility(&Utterance::new(2, -2.0), &w);
        assert!((u - (-5.0 * 5f64.ln())).abs() < 1e-12);
        assert!((u - -8.047_189_562_170_502).abs() < 1e-12);
        assert_eq!(belief_utility(&Utterance::new(2, 2.0), &w), f64::NEG_INFINITY);
        let vs = ValueSet::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let single = World::new(vec![1.0], vs).unwrap();
        assert_eq!(belief_utility(&Utterance::new(0, 1.0), &single), 0.0);
    }

    #[test]
    fn target_selection() {
        let (fs, w, _) = setup();
        // rewards 3, 0, -3
        let c = ctx(&fs, &[["green", "circle"], ["red", "triangle"], ["blue", "square"]]);
        assert_eq!(select_target_action(&c, &w).unwrap(), 0);
        let c = ctx(&fs, &[["blue", "square"], ["red", "triangle"], ["green", "circle"]]);
        assert_eq!(select_target_action(&c, &w).unwrap(), 2);
    }

    #[test]
    fn ties_go_to_lowest_position() {
        let fs = FeatureSpace::new([("c", vec!["a", "b", "c"])]).unwrap();
        let vs = ValueSet::new(vec![-2.0, 0.0, 2.0]).unwrap();
        let w = World::new(vec![2.0, 2.0, 0.0], vs).unwrap();
        let c = ActionContext::new(fs.action_space()).unwrap();
        assert_eq!(select_target_action(&c, &w).unwrap(), 0);
        assert_eq!(target_set(&c, &w).unwrap(), vec![0, 1]);
        let single = ActionContext::new(vec![fs.action(&["c"]).unwrap()]).unwrap();
        assert_eq!(select_target_action(&single, &w).unwrap(), 0);
    }

    #[test]
    fn action_utility_cases() {
        let (fs, w, space) = setup();
        let c = ctx(&fs, &[["green", "circle"], ["red", "square"], ["blue", "triangle"]]);
        let params = ModelParams::default();
        let u = action_utility(&Utterance::new(1, 2.0), &c, &w, &params).unwrap();
        // ln(exp(6) / (exp(6) + 2))
        assert!((u - -0.004_945_256_391_496_415).abs() < 1e-9);

        let flat = ModelParams {
            beta_listener: 0.0,
            ..params
        };
        for u in space.utterances() {
            let v = action_utility(u, &c, &w, &flat).unwrap();
            assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        }

        // neither <red, x> nor <blue, x> for x=0 changes anything
        let a = action_utility(&Utterance::new(0, 0.0), &c, &w, &params).unwrap();
        let b = action_utility(&Utterance::new(4, 0.0), &c, &w, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn combined_utility_cases() {
        let (fs, w, _) = setup();
        let c = ctx(&fs, &[["green", "circle"], ["red", "triangle"], ["blue", "square"]]);
        let flat = ModelParams {
            beta_listener: 0.0,
            ..ModelParams::default()
        };
        let v = combined_utility(&Utterance::new(1, 2.0), &c, &w, &flat).unwrap();
        assert!(v.abs() < 1e-15);
        assert_eq!(expectation(&[1.0, 0.0, 0.0], &[3.0, 0.0, -3.0]), 3.0);
    }

    #[test]
    fn generalized_limits() {
        let (fs, w, space) = setup();
        let params = ModelParams::default();
        let c = ctx(&fs, &[["green", "circle"], ["red", "square"], ["blue", "triangle"]]);
        for u in space.utterances() {
            let g = generalized_utility(u, &c, &w, &params, Beta::Infinite).unwrap();
            let a = action_utility(u, &c, &w, &params).unwrap();
            assert!((g - a).abs() < 1e-12);

            let g0 = generalized_utility(u, &c, &w, &params, Beta::Finite(0.0)).unwrap();
            let pol = policy_after(u, &c, &w, &params).unwrap();
            let mean = pol.iter().map(|p| p.ln()).sum::<f64>() / 3.0;
            assert!((g0 - mean).abs() < 1e-12);
        }
        // rewards (2, 0): weights (e^2, 1) / (e^2 + 1)
        let t = softmax(&[2.0, 0.0], Beta::Finite(1.0)).unwrap();
        assert!((t[0] - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!((t[1] - 0.119_202_922_022_117_6).abs() < 1e-12);
    }

    #[test]
    fn belief_speaker_is_uniform_over_truths() {
        let (fs, w, space) = setup();
        let c = ctx(&fs, &[["green", "circle"], ["red", "square"], ["blue", "triangle"]]);
        let d = speaker_distribution(SpeakerKind::Belief, &c, &w, &space, &ModelParams::default()).unwrap();
        for (u, p) in space.utterances().iter().zip(&d) {
            if w.is_true(u) {
                assert!((p - 1.0 / 6.0).abs() < 1e-15);
            } else {
                assert_eq!(*p, 0.0);
            }
        }
    }

    #[test]
    fn all_false_space_has_no_support() {
        let (fs, w, _) = setup();
        let vs = w.values().clone();
        let lies = UtteranceSpace::new(vec![Utterance::new(0, 2.0), Utterance::new(1, -2.0)], &vs).unwrap();
        let c = ctx(&fs, &[["green", "circle"], ["red", "square"]]);
        let e = speaker_distribution(SpeakerKind::Belief, &c, &w, &lies, &ModelParams::default()).unwrap_err();
        assert_eq!(e, Error::EmptySupport);
    }

    #[test]
    fn infinite_combined_on_global_context_says_green_two() {
        let (fs, w, space) = setup();
        let c = ActionContext::new(fs.action_space()).unwrap();
        let params = ModelParams::default().with_infinite_speakers();
        let d = speaker_distribution(SpeakerKind::Combined, &c, &w, &space, &params).unwrap();
        let green_two = space.utterances().iter().position(|u| *u == Utterance::new(1, 2.0)).unwrap();
        assert_eq!(d[green_two], 1.0);
    }
}
