//! Evaluation metrics for speaker distributions, and context enumeration.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{listener_policy, Action, ActionContext, Belief, ModelParams, World};
use crate::softmax::argmax_set;
use crate::speakers::{expectation, UtteranceSpace};

/// A weighted set of action contexts.
#[derive(Debug, Clone)]
pub struct ContextDistribution {
    contexts: Vec<ActionContext>,
    probabilities: Vec<f64>,
}

impl ContextDistribution {
    pub fn new(contexts: Vec<ActionContext>, probabilities: Vec<f64>) -> Result<Self> {
        if contexts.is_empty() || contexts.len() != probabilities.len() {
            return Err(Error::config("contexts", "need one weight per context and at least one context"));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::config("contexts", "weights must be nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config("contexts", format!("weights sum to {total}, not 1")));
        }
        Ok(ContextDistribution {
            contexts,
            probabilities,
        })
    }

    pub fn uniform(contexts: Vec<ActionContext>) -> Result<Self> {
        let p = 1.0 / contexts.len().max(1) as f64;
        let probabilities = vec![p; contexts.len()];
        Self::new(contexts, probabilities)
    }

    pub fn contexts(&self) -> &[ActionContext] {
        &self.contexts
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ActionContext, f64)> {
        self.contexts.iter().zip(self.probabilities.iter().copied())
    }
}

/// One summary row. Inapplicable rewards are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsRow {
    pub speaker: String,
    pub p_truthful: f64,
    pub pi_optimal: f64,
    pub r_local: Option<f64>,
    pub r_generalization: Option<f64>,
}

/// All `C(n, size)` subsets of `actions` in lexicographic index order, uniformly weighted.
pub fn enumerate_contexts(actions: &[Action], size: usize) -> Result<ContextDistribution> {
    let n = actions.len();
    if size == 0 || size > n {
        return Err(Error::config(
            "contextSize",
            format!("context size {size} must be between 1 and the {n} available actions"),
        ));
    }
    let mut contexts = Vec::new();
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        contexts.push(ActionContext::new(idx.iter().map(|&i| actions[i].clone()).collect())?);
        // advance to the next combination
        let Some(i) = (0..size).rev().find(|&i| idx[i] != i + n - size) else {
            break;
        };
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
    ContextDistribution::uniform(contexts)
}

fn check_len(dist: &[f64], space: &UtteranceSpace) -> Result<()> {
    if dist.len() != space.len() {
        return Err(Error::config(
            "distribution",
            format!("{} probabilities for {} utterances", dist.len(), space.len()),
        ));
    }
    Ok(())
}

/// Probability mass the speaker places on literally true utterances.
pub fn p_truthful(dist: &[f64], space: &UtteranceSpace, world: &World) -> Result<f64> {
    check_len(dist, space)?;
    Ok(space
        .utterances()
        .iter()
        .zip(dist)
        .filter(|(u, _)| world.is_true(u))
        .map(|(_, p)| p)
        .sum())
}

/// Listener policy after each utterance, in space order.
pub(crate) fn policies(
    space: &UtteranceSpace,
    context: &ActionContext,
    world: &World,
    params: &ModelParams,
) -> Result<Vec<Vec<f64>>> {
    let prior = Belief::prior(world.len(), world.values().clone());
    space
        .utterances()
        .iter()
        .map(|u| Ok(listener_policy(&prior.update(u)?, context, params.beta_listener)))
        .collect()
}

/// Probability that the listener ends up on a best action. Ties count the
/// whole argmax set.
pub fn pi_optimal(
    dist: &[f64],
    space: &UtteranceSpace,
    context: &ActionContext,
    world: &World,
    params: &ModelParams,
) -> Result<f64> {
    check_len(dist, space)?;
    let best = argmax_set(&context.rewards(world)?);
    let pols = policies(space, context, world, params)?;
    Ok(dist
        .iter()
        .zip(&pols)
        .map(|(p, pol)| p * best.iter().map(|&i| pol[i]).sum::<f64>())
        .sum())
}

/// Expected true reward on `context` under the listener policies the speaker induces.
pub fn r_local(
    dist: &[f64],
    space: &UtteranceSpace,
    context: &ActionContext,
    world: &World,
    params: &ModelParams,
) -> Result<f64> {
    check_len(dist, space)?;
    let rewards = context.rewards(world)?;
    let pols = policies(space, context, world, params)?;
    Ok(dist
        .iter()
        .zip(&pols)
        .map(|(p, pol)| p * expectation(pol, &rewards))
        .sum())
}

/// For every utterance, the expected reward of the belief it induces,
/// averaged over `contexts`. Independent of the speaker.
pub fn generalization_rewards(
    space: &UtteranceSpace,
    contexts: &ContextDistribution,
    world: &World,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let rewards: Vec<Vec<f64>> = contexts
        .contexts()
        .iter()
        .map(|c| c.rewards(world))
        .collect::<Result<_>>()?;
    let prior = Belief::prior(world.len(), world.values().clone());
    space
        .utterances()
        .par_iter()
        .map(|u| {
            let belief = prior.update(u)?;
            Ok(contexts
                .iter()
                .zip(&rewards)
                .map(|((c, pc), r)| pc * expectation(&listener_policy(&belief, c, params.beta_listener), r))
                .sum())
        })
        .collect()
}

/// Expected reward of the induced belief over a distribution of contexts.
pub fn r_generalization(
    dist: &[f64],
    space: &UtteranceSpace,
    contexts: &ContextDistribution,
    world: &World,
    params: &ModelParams,
) -> Result<f64> {
    check_len(dist, space)?;
    Ok(expectation(dist, &generalization_rewards(space, contexts, world, params)?))
}
