//! Arm-selection policies.
//!
//! Every policy implements [`Policy`]: `select` reads state and picks an arm,
//! `exploit_select` picks greedily with exploration switched off, and
//! `update` is the only mutator. Replay calls `update` solely for the arm
//! that `select` returned.
//!
//! Ties are broken towards the lexicographically lowest [`ArmId`].

mod context_free;
mod linear;

pub use context_free::{
    eps_greedy_select, omniscient_fit, segment_assign, ucb1_select, warm_start_score,
    ContextFreeArmStats, ContextFreePolicy, OffsetKey, OffsetTable, Omniscient, NUM_SEGMENTS,
};
pub use linear::{
    linucb_disjoint_score, linucb_disjoint_update, linucb_hybrid_score, linucb_hybrid_update,
    DisjointModelState, LinearModel, LinearPolicy, NEGATIVE_VARIANCE_TOLERANCE,
};

use rand::{Rng, RngCore};

use crate::context::{ArmId, TrialContext};
use crate::error::{Error, Result};
use crate::linalg::{quadratic_form, DenseMatrix};

/// A (possibly randomized) mapping from history and context to an arm.
pub trait Policy: Send {
    fn name(&self) -> String;

    fn select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId>;

    /// Selection with exploration disabled (ε = 0, α = 0) on current estimates.
    fn exploit_select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId>;

    fn update(&mut self, ctx: &TrialContext, chosen: &ArmId, reward: f64) -> Result<()>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        (**self).select(ctx, rng)
    }

    fn exploit_select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        (**self).exploit_select(ctx, rng)
    }

    fn update(&mut self, ctx: &TrialContext, chosen: &ArmId, reward: f64) -> Result<()> {
        (**self).update(ctx, chosen, reward)
    }
}

/// How a policy trades exploration against exploitation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exploration {
    /// Uniform arm with probability ε, greedy otherwise.
    EpsilonGreedy { epsilon: f64 },
    /// Greedy on mean plus `alpha` times the confidence width.
    Ucb { alpha: f64 },
}

impl Exploration {
    pub fn epsilon_greedy(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {epsilon} outside [0, 1]"
            )));
        }
        Ok(Self::EpsilonGreedy { epsilon })
    }

    pub fn ucb(alpha: f64) -> Result<Self> {
        Ok(Self::Ucb {
            alpha: AlphaParam::new(alpha)?.value(),
        })
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            Self::EpsilonGreedy { epsilon } => epsilon,
            Self::Ucb { alpha } => alpha,
        }
    }
}

/// Width multiplier of a confidence bound; finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AlphaParam(f64);

impl AlphaParam {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha {alpha} must be finite and non-negative"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `α = 1 + √(ln(2/δ)/2)`: the width under which the ridge estimate lies
/// within the bound with probability at least `1 − δ`.
pub fn alpha_from_delta(delta: f64) -> Result<AlphaParam> {
    if !(delta > 0.0 && delta <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} outside (0, 2]"
        )));
    }
    AlphaParam::new(1.0 + ((2.0 / delta).ln() / 2.0).sqrt())
}

/// Posterior entropy reduction `½ ln(1 + xᵀA⁻¹x)` from observing `x`.
/// Diagnostic only; selection never uses it.
pub fn entropy_reduction(a_inv: &DenseMatrix, x: &[f64]) -> Result<f64> {
    Ok(0.5 * quadratic_form(a_inv, x)?.ln_1p())
}

/// Index of the highest score; ties (and NaN) resolved towards the lowest id.
pub(crate) fn argmax_lowest_id(ctx: &TrialContext, scores: &[f64]) -> usize {
    debug_assert_eq!(ctx.len(), scores.len());
    let arms = ctx.arms();
    let mut best = 0;
    for i in 1..scores.len() {
        let (s, b) = (scores[i], scores[best]);
        if s > b || (s == b && arms[i].id < arms[best].id) || (b.is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    best
}

pub(crate) fn uniform_index(ctx: &TrialContext, rng: &mut dyn RngCore) -> usize {
    rng.random_range(0..ctx.len())
}

/// Greedy with probability `1 − ε`, uniform otherwise. Draws from `rng`
/// only when `ε > 0`.
pub(crate) fn epsilon_pick(
    ctx: &TrialContext,
    epsilon: f64,
    rng: &mut dyn RngCore,
    greedy: impl FnOnce() -> usize,
) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        uniform_index(ctx, rng)
    } else {
        greedy()
    }
}

/// Uniformly random arm; never learns.
#[derive(Debug, Clone, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        Ok(ctx.arms()[uniform_index(ctx, rng)].id.clone())
    }

    fn exploit_select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        self.select(ctx, rng)
    }

    fn update(&mut self, _: &TrialContext, _: &ArmId, _: f64) -> Result<()> {
        Ok(())
    }
}

/// Always plays the same arm when present, falling back to the lowest id.
#[derive(Debug, Clone)]
pub struct FixedArm(pub ArmId);

impl Policy for FixedArm {
    fn name(&self) -> String {
        format!("fixed({})", self.0)
    }

    fn select(&self, ctx: &TrialContext, _: &mut dyn RngCore) -> Result<ArmId> {
        if ctx.position(&self.0).is_some() {
            return Ok(self.0.clone());
        }
        Ok(ctx.ids().min().expect("contexts are non-empty").clone())
    }

    fn exploit_select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        self.select(ctx, rng)
    }

    fn update(&mut self, _: &TrialContext, _: &ArmId, _: f64) -> Result<()> {
        Ok(())
    }
}

/// Wraps a policy and discards every update, freezing what it has learned.
#[derive(Debug, Clone)]
pub struct Frozen<P>(pub P);

impl<P: Policy> Policy for Frozen<P> {
    fn name(&self) -> String {
        format!("frozen({})", self.0.name())
    }

    fn select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        self.0.select(ctx, rng)
    }

    fn exploit_select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        self.0.exploit_select(ctx, rng)
    }

    fn update(&mut self, _: &TrialContext, _: &ArmId, _: f64) -> Result<()> {
        Ok(())
    }
}
