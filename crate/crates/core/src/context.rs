//! Domain types shared by every other module: arms, per-trial contexts,
//! logged events, replay history and the seeding contract.
//!
//! The user of a trial never appears as a separate value. Everything a
//! policy may know about the user is folded into the per-arm feature
//! vectors, so a [`TrialContext`] is the complete observation.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The random generator used everywhere in the crate.
///
/// ChaCha is portable across platforms and releases, which keeps seeded
/// streams, tie-breaks and sweeps reproducible byte for byte.
pub type BanditRng = ChaCha8Rng;

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyFeatures);
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "feature dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Opaque arm identifier. Ordering is lexicographic and is the tie-break
/// order for every argmax in the crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(String);

impl ArmId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ArmId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ArmId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// One candidate arm as seen in a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub id: ArmId,
    /// Arm-specific features.
    pub x: FeatureVector,
    /// Shared (interaction) features, present in hybrid mode only.
    pub z: Option<FeatureVector>,
}

impl Arm {
    pub fn new(id: impl Into<ArmId>, x: FeatureVector) -> Self {
        Self {
            id: id.into(),
            x,
            z: None,
        }
    }

    pub fn with_shared(id: impl Into<ArmId>, x: FeatureVector, z: FeatureVector) -> Self {
        Self {
            id: id.into(),
            x,
            z: Some(z),
        }
    }
}

/// The arm set of one trial together with every arm's features.
///
/// Construct through [`TrialContext::new`], which enforces the invariants:
/// at least one arm, unique ids, one x dimension, and shared features on
/// all arms or on none.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialContext {
    arms: Vec<Arm>,
}

impl TrialContext {
    pub fn new(arms: Vec<Arm>) -> Result<Self> {
        validate_trial(Self { arms })
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn x_dim(&self) -> usize {
        self.arms[0].x.dim()
    }

    pub fn z_dim(&self) -> Option<usize> {
        self.arms[0].z.as_ref().map(FeatureVector::dim)
    }

    pub fn is_hybrid(&self) -> bool {
        self.arms[0].z.is_some()
    }

    pub fn position(&self, id: &ArmId) -> Option<usize> {
        self.arms.iter().position(|a| &a.id == id)
    }

    pub fn arm(&self, id: &ArmId) -> Option<&Arm> {
        self.arms.iter().find(|a| &a.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &ArmId> {
        self.arms.iter().map(|a| &a.id)
    }

    pub fn into_arms(self) -> Vec<Arm> {
        self.arms
    }
}

/// Checks every [`TrialContext`] invariant and hands the context back
/// unchanged when they hold.
pub fn validate_trial(ctx: TrialContext) -> Result<TrialContext> {
    let first = ctx.arms.first().ok_or(Error::EmptyArmSet)?;
    let d = first.x.dim();
    let k = first.z.as_ref().map(FeatureVector::dim);
    let mut seen = BTreeSet::new();
    for arm in &ctx.arms {
        if !seen.insert(&arm.id) {
            return Err(Error::DuplicateArm(arm.id.clone()));
        }
        // FeatureVector guarantees finiteness at construction, but arms can
        // be assembled field by field.
        for v in arm.x.iter().chain(arm.z.iter().flat_map(|z| z.iter())) {
            if !v.is_finite() {
                return Err(Error::NonFinite(*v));
            }
        }
        if arm.x.dim() != d {
            return Err(Error::InconsistentX {
                expected: d,
                found: arm.x.dim(),
            });
        }
        match (k, &arm.z) {
            (None, None) => {}
            (Some(k), Some(z)) if z.dim() == k => {}
            (Some(k), Some(z)) => {
                return Err(Error::InconsistentZ {
                    expected: k,
                    found: z.dim(),
                })
            }
            _ => return Err(Error::PartialSharedFeatures),
        }
    }
    Ok(ctx)
}

/// One interaction of the logging policy with the world.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEvent {
    pub context: TrialContext,
    pub chosen: ArmId,
    pub reward: f64,
    /// Probability with which the logging policy chose `chosen`.
    pub propensity: f64,
    /// Payoffs of every arm, aligned with `context.arms()`. Synthetic
    /// streams only; never read by policies or by the replay estimate.
    pub hidden: Option<Vec<f64>>,
}

impl LoggedEvent {
    /// Builds an event, defaulting the propensity to uniform `1/K`.
    pub fn new(
        context: TrialContext,
        chosen: ArmId,
        reward: f64,
        propensity: Option<f64>,
        hidden: Option<Vec<f64>>,
    ) -> Result<Self> {
        if context.position(&chosen).is_none() {
            return Err(Error::ChosenNotInContext(chosen));
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange(reward));
        }
        let propensity = propensity.unwrap_or(1.0 / context.len() as f64);
        if !(propensity > 0.0 && propensity <= 1.0) {
            return Err(Error::InvalidPropensity(propensity));
        }
        if let Some(h) = &hidden {
            if h.len() != context.len() {
                let missing = context.arms()[h.len().min(context.len() - 1)].id.clone();
                return Err(Error::HiddenCoverage(missing));
            }
            if let Some(&bad) = h.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::RewardOutOfRange(bad));
            }
        }
        Ok(Self {
            context,
            chosen,
            reward,
            propensity,
            hidden,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.context.len()
    }

    pub fn chosen_index(&self) -> usize {
        self.context
            .position(&self.chosen)
            .expect("chosen arm validated at construction")
    }

    pub fn hidden_reward(&self, id: &ArmId) -> Option<f64> {
        let i = self.context.position(id)?;
        self.hidden.as_ref().map(|h| h[i])
    }
}

/// Append-only record of the events a replay run retained.
#[derive(Debug, Clone, Default)]
pub struct History {
    records: Vec<(TrialContext, ArmId, f64)>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ctx: TrialContext, chosen: ArmId, reward: f64) {
        self.records.push((ctx, chosen, reward));
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(TrialContext, ArmId, f64)> {
        self.records.iter()
    }
}

/// Seed for every randomized operation. Same seed and same inputs give
/// the same outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> BanditRng {
        BanditRng::seed_from_u64(self.0)
    }

    /// A seed for an independent sub-stream, e.g. one sweep point.
    pub fn derive(self, salt: u64) -> RngSeed {
        // splitmix64 finalizer
        let mut z = self.0 ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}
