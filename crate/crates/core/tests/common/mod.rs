//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use signaling_bandits::softmax::argmax_set;
use signaling_bandits::*;

/// Every weight vector in `values^k`, in odometer order.
pub fn all_worlds(k: usize, values: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|w| {
                values.iter().map(move |&v| {
                    let mut w = w.clone();
                    w.push(v);
                    w
                })
            })
            .collect();
    }
    out
}

pub fn consistent(slots: &[Slot], w: &[f64]) -> bool {
    slots.iter().zip(w).all(|(s, x)| match s {
        Slot::Prior => true,
        Slot::Known(v) => v == x,
    })
}

/// `sum_w R(a, w) P_L(w | belief)` with the posterior built by enumeration.
pub fn brute_expected_reward(belief: &Belief, indicator: &[bool]) -> f64 {
    let worlds = all_worlds(belief.slots().len(), belief.values().values());
    let live: Vec<&Vec<f64>> = worlds.iter().filter(|w| consistent(belief.slots(), w)).collect();
    let mass = 1.0 / live.len() as f64;
    live.iter()
        .map(|w| {
            let r: f64 = w.iter().zip(indicator).filter(|(_, &b)| b).map(|(x, _)| x).sum();
            r * mass
        })
        .sum()
}

/// `log P_L(w_true | u)` by enumeration.
pub fn brute_belief_utility(u: &Utterance, world: &World) -> f64 {
    let worlds = all_worlds(world.len(), world.values().values());
    let live: Vec<&Vec<f64>> = worlds.iter().filter(|w| w[u.feature] == u.value).collect();
    let p = live.iter().filter(|w| w.as_slice() == world.weights()).count() as f64 / live.len() as f64;
    p.ln()
}

/// A belief with each slot independently pinned with probability 1/2, and
/// a non-empty action over the same features.
pub fn random_belief(rng: &mut ChaCha8Rng, k: usize, values: &ValueSet) -> (Belief, Vec<bool>) {
    let mut b = Belief::prior(k, values.clone());
    for f in 0..k {
        if rng.gen_bool(0.5) {
            let v = values.values()[rng.gen_range(0..values.len())];
            b = b.update(&Utterance::new(f, v)).unwrap();
        }
    }
    let mut ind: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.5)).collect();
    if !ind.contains(&true) {
        ind[rng.gen_range(0..k)] = true;
    }
    (b, ind)
}

/// Sample mean and standard error of a metric.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn within(&self, exact: f64, standard_errors: f64) -> bool {
        (self.mean - exact).abs() <= standard_errors * self.se.max(1e-12)
    }
}

struct Prepared {
    rewards: Vec<f64>,
    best: Vec<usize>,
    speaker: WeightedIndex<f64>,
    listener: Vec<WeightedIndex<f64>>,
}

/// Estimates `[p_truthful, pi_optimal, r_local, r_generalization]` for one
/// speaker in the local regime by simulating games.
///
/// Each sample draws a context, an utterance from the speaker and an action
/// from the listener; generalization replays the utterance in an independent
/// context.
pub fn monte_carlo(cfg: &ExperimentConfig, kind: SpeakerKind, samples: usize, seed: u64) -> [Estimate; 4] {
    let contexts = enumerate_contexts(&cfg.action_space, cfg.context_size).unwrap();
    let utterances = cfg.utterances.utterances();
    let prior = Belief::prior(cfg.world.len(), cfg.world.values().clone());
    let prepared: Vec<Prepared> = contexts
        .contexts()
        .iter()
        .map(|c| {
            let rewards = c.rewards(&cfg.world).unwrap();
            let d = speaker_distribution(kind, c, &cfg.world, &cfg.utterances, &cfg.params).unwrap();
            let listener = utterances
                .iter()
                .map(|u| {
                    let p = listener_policy(&prior.update(u).unwrap(), c, cfg.params.beta_listener);
                    WeightedIndex::new(p).unwrap()
                })
                .collect();
            Prepared {
                best: argmax_set(&rewards),
                rewards,
                speaker: WeightedIndex::new(d).unwrap(),
                listener,
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = [0.0f64; 4];
    let mut squares = [0.0f64; 4];
    for _ in 0..samples {
        let c = &prepared[rng.gen_range(0..prepared.len())];
        let u = c.speaker.sample(&mut rng);
        let a = c.listener[u].sample(&mut rng);
        let g = &prepared[rng.gen_range(0..prepared.len())];
        let b = g.listener[u].sample(&mut rng);
        let x = [
            cfg.world.is_true(&utterances[u]) as u8 as f64,
            c.best.contains(&a) as u8 as f64,
            c.rewards[a],
            g.rewards[b],
        ];
        for i in 0..4 {
            sums[i] += x[i];
            squares[i] += x[i] * x[i];
        }
    }
    let n = samples as f64;
    std::array::from_fn(|i| {
        let mean = sums[i] / n;
        Estimate {
            mean,
            se: ((squares[i] / n - mean * mean).max(0.0) / n).sqrt(),
        }
    })
}
