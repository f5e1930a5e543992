//! Rational speaker models for signaling-bandit language games.
//!
//! A speaker who knows the true feature rewards sends one `<feature, value>`
//! message to a literal listener, who pins that feature and then picks an
//! action by softmax over expected reward. Three speaker objectives are
//! provided: informativeness about the world ([`SpeakerKind::Belief`]), the
//! probability of the single best action ([`SpeakerKind::Action`]), and the
//! expected reward of the induced policy ([`SpeakerKind::Combined`]).

pub mod config;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod output;
pub mod softmax;
pub mod speakers;

pub use config::{ExperimentConfig, SearchSpec};
pub use error::{Error, Result};
pub use metrics::{enumerate_contexts, p_truthful, pi_optimal, r_generalization, r_local, ContextDistribution, MetricsRow};
pub use model::{listener_policy, Action, ActionContext, Belief, FeatureSpace, ModelParams, Slot, Utterance, ValueSet, World};
pub use softmax::{softmax, Beta};
pub use speakers::{
    action_utility, belief_utility, combined_utility, generalized_utility, select_target_action, speaker_distribution,
    SpeakerKind, TargetRule, UtteranceFilter, UtteranceSpace,
};
