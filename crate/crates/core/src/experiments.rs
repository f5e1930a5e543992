//! The reference game, local and global context sweeps, the hard-max
//! sweep, and the world calibration search.
//!
//! Contexts and calibration candidates are evaluated in parallel with rayon.
//! Results are always collected in canonical order before any reduction, so
//! outputs do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Constraint, ExperimentConfig, SearchSpec};
use crate::error::{Error, Result};
use crate::metrics::{enumerate_contexts, generalization_rewards, policies, ContextDistribution, MetricsRow};
use crate::model::{ActionContext, ValueSet, World};
use crate::softmax::{argmax_set, softmax};
use crate::speakers::{expectation, utilities_from_policies, SpeakerKind, UtteranceFilter};

/// Mean production probability of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HeatmapCell {
    pub speaker: String,
    pub feature: String,
    pub value: f64,
    pub probability: f64,
    pub is_true: bool,
}

/// Metric rows plus the utterance heatmap they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeResult {
    pub rows: Vec<MetricsRow>,
    pub heatmap: Vec<HeatmapCell>,
}

/// One row of the hard-max sweep, tagged `local` or `global`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub regime: &'static str,
    #[serde(flatten)]
    pub row: MetricsRow,
}

/// Everything a speaker needs about one context, computed once.
struct ContextEval {
    rewards: Vec<f64>,
    best: Vec<usize>,
    policies: Vec<Vec<f64>>,
}

impl ContextEval {
    fn new(cfg: &ExperimentConfig, context: &ActionContext) -> Result<Self> {
        let rewards = context.rewards(&cfg.world)?;
        Ok(ContextEval {
            best: argmax_set(&rewards),
            policies: policies(&cfg.utterances, context, &cfg.world, &cfg.params)?,
            rewards,
        })
    }

    fn distribution(&self, cfg: &ExperimentConfig, kind: SpeakerKind) -> Result<Vec<f64>> {
        let u = utilities_from_policies(kind, &cfg.world, &cfg.utterances, &cfg.params, &self.rewards, &self.policies)?;
        softmax(&u, kind.beta(&cfg.params))
    }

    fn pi_optimal(&self, dist: &[f64]) -> f64 {
        dist.iter()
            .zip(&self.policies)
            .map(|(p, pol)| p * self.best.iter().map(|&i| pol[i]).sum::<f64>())
            .sum()
    }

    fn r_local(&self, dist: &[f64]) -> f64 {
        dist.iter()
            .zip(&self.policies)
            .map(|(p, pol)| p * expectation(pol, &self.rewards))
            .sum()
    }
}

fn truthful(cfg: &ExperimentConfig, dist: &[f64]) -> f64 {
    cfg.utterances
        .utterances()
        .iter()
        .zip(dist)
        .filter(|(u, _)| cfg.world.is_true(u))
        .map(|(_, p)| p)
        .sum()
}

fn heatmap(cfg: &ExperimentConfig, kind: SpeakerKind, dist: &[f64]) -> Vec<HeatmapCell> {
    cfg.utterances
        .utterances()
        .iter()
        .zip(dist)
        .map(|(u, &p)| HeatmapCell {
            speaker: kind.name().to_string(),
            feature: cfg.feature_space.feature_name(u.feature).to_string(),
            value: u.value,
            probability: p,
            is_true: cfg.world.is_true(u),
        })
        .collect()
}

/// Per-speaker metrics on one fixed context; no generalization.
pub fn evaluate_context(cfg: &ExperimentConfig, context: &ActionContext) -> Result<Vec<MetricsRow>> {
    let eval = ContextEval::new(cfg, context)?;
    SpeakerKind::MAIN
        .iter()
        .map(|&kind| {
            let d = eval.distribution(cfg, kind)?;
            Ok(MetricsRow {
                speaker: kind.name().to_string(),
                p_truthful: truthful(cfg, &d),
                pi_optimal: eval.pi_optimal(&d),
                r_local: Some(eval.r_local(&d)),
                r_generalization: None,
            })
        })
        .collect()
}

/// Checks that the configuration is a Lewis game: one fixed context, a
/// single action with positive reward, every other action worth zero, and
/// positive-only messages.
pub fn validate_reference_game(cfg: &ExperimentConfig) -> Result<&ActionContext> {
    let context = cfg
        .context
        .as_ref()
        .ok_or_else(|| Error::config("context", "the reference game needs a fixed context"))?;
    if cfg.filter != UtteranceFilter::Positive {
        return Err(Error::config("utteranceFilter", "the reference game uses positive messages only"));
    }
    let rewards = context.rewards(&cfg.world)?;
    let positive = rewards.iter().filter(|r| **r > 0.0).count();
    let zero = rewards.iter().filter(|r| **r == 0.0).count();
    if positive != 1 || zero != rewards.len() - 1 {
        return Err(Error::config(
            "context",
            format!("need one rewarded target and zero-reward distractors, got rewards {rewards:?}"),
        ));
    }
    Ok(context)
}

/// The reference game. All speakers coincide here.
pub fn run_reference_game(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let context = validate_reference_game(cfg)?;
    evaluate_context(cfg, context)
}

fn local_contexts(cfg: &ExperimentConfig) -> Result<ContextDistribution> {
    enumerate_contexts(&cfg.action_space, cfg.context_size)
}

/// Every speaker on every context of the configured size, averaged.
pub fn run_local_contexts(cfg: &ExperimentConfig) -> Result<RegimeResult> {
    let contexts = local_contexts(cfg)?;
    let general = generalization_rewards(&cfg.utterances, &contexts, &cfg.world, &cfg.params)?;
    let evals: Vec<ContextEval> = contexts
        .contexts()
        .par_iter()
        .map(|c| ContextEval::new(cfg, c))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for kind in SpeakerKind::MAIN {
        let per_context: Vec<(Vec<f64>, [f64; 4])> = evals
            .par_iter()
            .map(|e| {
                let d = e.distribution(cfg, kind)?;
                let m = [truthful(cfg, &d), e.pi_optimal(&d), e.r_local(&d), expectation(&d, &general)];
                Ok((d, m))
            })
            .collect::<Result<_>>()?;
        let mut mean = [0.0; 4];
        let mut mean_dist = vec![0.0; cfg.utterances.len()];
        for ((d, m), p) in per_context.iter().zip(contexts.probabilities()) {
            for (acc, x) in mean.iter_mut().zip(m) {
                *acc += p * x;
            }
            for (acc, x) in mean_dist.iter_mut().zip(d) {
                *acc += p * x;
            }
        }
        rows.push(MetricsRow {
            speaker: kind.name().to_string(),
            p_truthful: mean[0],
            pi_optimal: mean[1],
            r_local: Some(mean[2]),
            r_generalization: Some(mean[3]),
        });
        cells.extend(heatmap(cfg, kind, &mean_dist));
    }
    Ok(RegimeResult { rows, heatmap: cells })
}

/// Speakers reason about the whole action space at once; the listener is
/// then scored on the smaller contexts.
pub fn run_global_context(cfg: &ExperimentConfig) -> Result<RegimeResult> {
    let contexts = local_contexts(cfg)?;
    let general = generalization_rewards(&cfg.utterances, &contexts, &cfg.world, &cfg.params)?;
    let global = ActionContext::new(cfg.action_space.clone())?;
    let global_eval = ContextEval::new(cfg, &global)?;
    let evals: Vec<ContextEval> = contexts
        .contexts()
        .par_iter()
        .map(|c| ContextEval::new(cfg, c))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for kind in SpeakerKind::MAIN {
        let d = global_eval.distribution(cfg, kind)?;
        let pi: Vec<f64> = evals.iter().map(|e| e.pi_optimal(&d)).collect();
        rows.push(MetricsRow {
            speaker: kind.name().to_string(),
            p_truthful: truthful(cfg, &d),
            pi_optimal: expectation(contexts.probabilities(), &pi),
            r_local: None,
            r_generalization: Some(expectation(&d, &general)),
        });
        cells.extend(heatmap(cfg, kind, &d));
    }
    Ok(RegimeResult { rows, heatmap: cells })
}

/// Both regimes with every speaker at the hard-max limit.
pub fn run_optimality_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let cfg = cfg.clone().with_infinite_speakers();
    let local = run_local_contexts(&cfg)?;
    let global = run_global_context(&cfg)?;
    Ok(local
        .rows
        .into_iter()
        .map(|row| SweepRow { regime: "local", row })
        .chain(global.rows.into_iter().map(|row| SweepRow { regime: "global", row }))
        .collect())
}

/// A candidate world and how far it lands from the targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub weights: Vec<f64>,
    pub value_set: Vec<f64>,
    pub max_deviation: f64,
    pub rows: Vec<MetricsRow>,
    /// Context reproducing the held-out single-context numbers, if any.
    pub held_out_context: Option<String>,
    pub held_out_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationReport {
    pub enumerated: usize,
    pub pruned_value_set: usize,
    pub pruned_constraint: usize,
    pub evaluated: usize,
    /// Candidates within tolerance, closest first.
    pub matches: Vec<Candidate>,
    /// Closest candidate overall, matched or not.
    pub best: Option<Candidate>,
}

impl CalibrationReport {
    /// The lexicographically smallest matching world.
    pub fn default_world(&self) -> Option<World> {
        self.matches
            .iter()
            .min_by(|a, b| lex_cmp(&a.weights, &b.weights).then(lex_cmp(&a.value_set, &b.value_set)))
            .map(|c| World::new(c.weights.clone(), ValueSet::new(c.value_set.clone()).unwrap()).unwrap())
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(a.len().cmp(&b.len()))
}

fn satisfies(spec: &SearchSpec, weights: &[f64], c: &Constraint) -> bool {
    let fs = &spec.feature_space;
    let (name, lowest) = match c {
        Constraint::LowestInDimension(n) => (n, true),
        Constraint::HighestInDimension(n) => (n, false),
    };
    let k = fs.index_of(name).expect("validated");
    let dim = fs.features()[k].dimension;
    (0..fs.len())
        .filter(|&j| j != k && fs.features()[j].dimension == dim)
        .all(|j| if lowest { weights[k] < weights[j] } else { weights[k] > weights[j] })
}

/// Every assignment of the free features, in feature order, for each value set.
fn enumerate_candidates(spec: &SearchSpec) -> Vec<(Vec<f64>, Vec<f64>)> {
    let free: Vec<usize> = (0..spec.fixed.len()).filter(|&k| spec.fixed[k].is_none()).collect();
    let mut assignments: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in &free {
        assignments = assignments
            .into_iter()
            .flat_map(|prefix| {
                spec.free_values.iter().map(move |&v| {
                    let mut a = prefix.clone();
                    a.push(v);
                    a
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for vs in &spec.value_sets {
        for a in &assignments {
            let mut w: Vec<f64> = spec.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
            for (&k, &v) in free.iter().zip(a) {
                w[k] = v;
            }
            out.push((w, vs.clone()));
        }
    }
    out
}

fn target_deviation(spec: &SearchSpec, rows: &[MetricsRow]) -> f64 {
    let mut dev: f64 = 0.0;
    for row in rows {
        if let Some(t) = spec.targets.get(&row.speaker) {
            let got = [
                row.p_truthful,
                row.pi_optimal,
                row.r_local.unwrap_or(f64::NAN),
                row.r_generalization.unwrap_or(f64::NAN),
            ];
            for (g, t) in got.iter().zip(t) {
                dev = dev.max((g - t).abs());
            }
        }
    }
    dev
}

/// Searches contexts for one whose Action and Combined metrics match the
/// held-out numbers. Returns the closest context label and its deviation.
fn held_out_check(spec: &SearchSpec, cfg: &ExperimentConfig) -> Result<Option<(String, f64)>> {
    let Some(h) = &spec.held_out else {
        return Ok(None);
    };
    let contexts = local_contexts(cfg)?;
    let mut best: Option<(String, f64)> = None;
    for c in contexts.contexts() {
        let rows = evaluate_context(cfg, c)?;
        let a = &rows[1];
        let m = &rows[2];
        let dev = [
            (a.pi_optimal - h.action[0]).abs(),
            (a.r_local.unwrap() - h.action[1]).abs(),
            (m.pi_optimal - h.combined[0]).abs(),
            (m.r_local.unwrap() - h.combined[1]).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(_, d)| dev < *d) {
            best = Some((c.to_string(), dev));
        }
    }
    Ok(best)
}

/// Exhaustive search for worlds that reproduce the target table.
pub fn calibrate_world(spec: &SearchSpec) -> Result<CalibrationReport> {
    let candidates = enumerate_candidates(spec);
    let enumerated = candidates.len();
    let mut pruned_value_set = 0;
    let mut pruned_constraint = 0;
    let mut worlds = Vec::new();
    for (w, vs) in candidates {
        let Ok(values) = ValueSet::new(vs.clone()) else {
            pruned_value_set += 1;
            continue;
        };
        let Ok(world) = World::new(w.clone(), values) else {
            pruned_value_set += 1;
            continue;
        };
        if !spec.constraints.iter().all(|c| satisfies(spec, &w, c)) {
            pruned_constraint += 1;
            continue;
        }
        worlds.push(world);
    }

    let make_cfg = |world: World| {
        ExperimentConfig::new(
            spec.feature_space.clone(),
            world,
            spec.params,
            UtteranceFilter::All,
            spec.context_size,
        )
    };

    let mut evaluated: Vec<Candidate> = worlds
        .par_iter()
        .map(|world| {
            let cfg = make_cfg(world.clone())?;
            let rows = run_local_contexts(&cfg)?.rows;
            Ok(Candidate {
                weights: world.weights().to_vec(),
                value_set: world.values().values().to_vec(),
                max_deviation: target_deviation(spec, &rows),
                rows,
                held_out_context: None,
                held_out_deviation: None,
            })
        })
        .collect::<Result<_>>()?;
    let n_evaluated = evaluated.len();

    evaluated.sort_by(|a, b| {
        a.max_deviation
            .total_cmp(&b.max_deviation)
            .then(lex_cmp(&a.weights, &b.weights))
            .then(lex_cmp(&a.value_set, &b.value_set))
    });
    let best = evaluated.first().cloned();
    let mut matches: Vec<Candidate> = evaluated
        .into_iter()
        .filter(|c| c.max_deviation <= spec.tolerance + 1e-12)
        .collect();
    for m in &mut matches {
        let world = World::new(m.weights.clone(), ValueSet::new(m.value_set.clone())?)?;
        if let Some((ctx, dev)) = held_out_check(spec, &make_cfg(world)?)? {
            m.held_out_context = Some(ctx);
            m.held_out_deviation = Some(dev);
        }
    }
    Ok(CalibrationReport {
        enumerated,
        pruned_value_set,
        pruned_constraint,
        evaluated: n_evaluated,
        matches,
        best,
    })
}
