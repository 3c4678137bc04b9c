//! Contextual bandits with linear payoffs: LinUCB (disjoint and hybrid),
//! context-free baselines, an unbiased offline replay evaluator and
//! synthetic worlds to exercise them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod context;
pub mod error;
pub mod evaluator;
pub mod eventlog;
pub mod harness;
pub mod linalg;
pub mod policies;
pub mod synthworld;

pub use context::{
    Arm, ArmId, BanditRng, FeatureVector, History, LoggedEvent, RngSeed, TrialContext,
};
pub use error::{Error, Result};
pub use evaluator::{
    bucketed_replay, regret_curve, replay_evaluate, BucketReport, ReplayPlan, ReplayResult,
};
pub use policies::{ContextFreePolicy, LinearPolicy, Policy, RandomPolicy};
pub use synthworld::{gen_stream, SyntheticWorld, WorldSpec};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/linucb.md")]
    pub struct Linucb;
    #[doc = include_str!("../../../book/src/hybrid.md")]
    pub struct Hybrid;
    #[doc = include_str!("../../../book/src/replay.md")]
    pub struct Replay;
    #[doc = include_str!("../../../book/src/worlds.md")]
    pub struct Worlds;
    #[doc = include_str!("../../../book/src/features.md")]
    pub struct Features;
    #[doc = include_str!("../../../book/src/sweeps.md")]
    pub struct Sweeps;
}
