//! Synthetic ground truth: linear payoff worlds, uniformly logged streams
//! and the user/article feature-construction pipeline.
//!
//! A world holds the true coefficients `θ*_a` per arm (and `β*` in hybrid
//! mode). The Bernoulli click probability of an arm is
//! `clamp₀¹(zᵀβ* + xᵀθ*_a)`. Generators are built so that clamping is rare.

pub mod features;

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::context::{Arm, ArmId, FeatureVector, LoggedEvent, TrialContext};
use crate::error::{Error, Result};
use crate::linalg::dot;

pub use features::{
    fit_bilinear_lr, hybrid_context, interaction_features, kmeans_membership, normalize_profile,
    project_articles, project_users, reduce_features, select_by_support, synthetic_profiles,
    ClickExample, FeatureConfig, KMeans, LrConfig, ProfileSet, RawProfiles, ReducedFeatures,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorldMode {
    Disjoint,
    Hybrid,
}

/// How per-trial arm features are drawn.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ContextSampler {
    /// One user vector shared by every arm: `d − 1` memberships drawn
    /// uniformly from the simplex, then a constant 1.
    #[default]
    SharedSimplex,
    /// Like `SharedSimplex` but drawn independently for every arm.
    PerArmSimplex,
    /// Independent standard normal entries times `scale`, per arm.
    Gaussian { scale: f64 },
    /// Every arm always sees the all-ones vector: a context-free world.
    Constant,
}

/// Membership-like vector: `dim − 1` simplex weights followed by 1.
pub(crate) fn simplex_with_constant(dim: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    let mut v: Vec<f64> = (0..dim - 1).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|w| *w /= total);
    v.push(1.0);
    v
}

/// Like [`simplex_with_constant`] with Dirichlet concentration `c`; small
/// `c` puts most weight on one coordinate.
fn dirichlet_with_constant(dim: usize, c: f64, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    if c == 1.0 || dim == 1 {
        return Ok(simplex_with_constant(dim, rng));
    }
    let gamma =
        Gamma::new(c, 1.0).map_err(|e| Error::Config(format!("article concentration {c}: {e}")))?;
    let mut v: Vec<f64> = (0..dim - 1).map(|_| gamma.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        // every draw underflowed; fall back to a vertex
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|w| *w /= total);
    }
    v.push(1.0);
    Ok(v)
}

impl ContextSampler {
    fn draw(&self, d: usize, n_arms: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
        match self {
            Self::SharedSimplex => {
                let user = simplex_with_constant(d, rng);
                vec![user; n_arms]
            }
            Self::PerArmSimplex => (0..n_arms).map(|_| simplex_with_constant(d, rng)).collect(),
            Self::Gaussian { scale } => (0..n_arms)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            let g: f64 = StandardNormal.sample(&mut *rng);
                            scale * g
                        })
                        .collect::<Vec<f64>>()
                })
                .collect(),
            Self::Constant => vec![vec![1.0; d]; n_arms],
        }
    }
}

/// Coefficients drawn uniformly from `[low, high]`, or listed explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec<T> {
    Uniform { low: f64, high: f64 },
    Explicit(T),
}

/// An arrival/departure of arms at a trial index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolChange {
    pub at: u64,
    #[serde(default)]
    pub add: Vec<String>,
    #[serde(default)]
    pub remove: Vec<String>,
}

fn default_article_dim() -> usize {
    6
}

fn default_concentration() -> f64 {
    1.0
}

fn default_theta() -> CoefficientSpec<Vec<Vec<f64>>> {
    CoefficientSpec::Uniform {
        low: 0.0,
        high: 0.2,
    }
}

fn default_beta() -> CoefficientSpec<Vec<f64>> {
    CoefficientSpec::Uniform {
        low: 0.0,
        high: 0.1,
    }
}

/// World configuration, as read from a TOML file.
///
/// ```toml
/// mode = "hybrid"          # or "disjoint"
/// d = 6                    # x dimension
/// arms = 10                # K
/// article_dim = 6          # hybrid: z = x ⊗ article, k = d * article_dim
/// article_concentration = 1.0  # below 1: articles lean on one topic
/// seed = 17                # seed for θ*, β* and article features
/// sampler = { kind = "shared-simplex" }
/// theta = { low = 0.0, high = 0.02 }
/// beta = { low = 0.0, high = 0.1 }
///
/// [[schedule]]
/// at = 5000
/// add = ["a11"]
/// remove = ["a01"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub mode: WorldMode,
    pub d: usize,
    pub arms: usize,
    #[serde(default = "default_article_dim")]
    pub article_dim: usize,
    /// Dirichlet concentration of the article memberships.
    #[serde(default = "default_concentration")]
    pub article_concentration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampler: ContextSampler,
    #[serde(default = "default_theta")]
    pub theta: CoefficientSpec<Vec<Vec<f64>>>,
    #[serde(default = "default_beta")]
    pub beta: CoefficientSpec<Vec<f64>>,
    /// Extra arms that exist only through the schedule, beyond `arms`.
    #[serde(default)]
    pub extra_arms: usize,
    #[serde(default)]
    pub schedule: Vec<PoolChange>,
}

impl WorldSpec {
    pub fn disjoint(d: usize, arms: usize) -> Self {
        Self {
            mode: WorldMode::Disjoint,
            d,
            arms,
            article_dim: default_article_dim(),
            article_concentration: default_concentration(),
            seed: 0,
            sampler: ContextSampler::default(),
            theta: default_theta(),
            beta: default_beta(),
            extra_arms: 0,
            schedule: Vec::new(),
        }
    }

    pub fn hybrid(d: usize, arms: usize, article_dim: usize) -> Self {
        Self {
            mode: WorldMode::Hybrid,
            article_dim,
            ..Self::disjoint(d, arms)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<SyntheticWorld> {
        SyntheticWorld::from_spec(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldArm {
    pub id: ArmId,
    /// `θ*_a`, length `d`.
    pub theta: Vec<f64>,
    /// Article features (hybrid only); `z = x ⊗ article`.
    pub article: Option<Vec<f64>>,
}

/// Ground-truth environment for stream generation and regret.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticWorld {
    mode: WorldMode,
    d: usize,
    k: usize,
    arms: Vec<WorldArm>,
    beta: Option<Vec<f64>>,
    sampler: ContextSampler,
    /// Pool segments: from trial `.0` on, the pool is `.1` (arm indices).
    pools: Vec<(u64, Vec<usize>)>,
    #[serde(skip)]
    index: HashMap<ArmId, usize>,
}

fn arm_ids(n: usize) -> Vec<ArmId> {
    let width = n.to_string().len().max(2);
    (1..=n)
        .map(|i| ArmId::new(format!("a{i:0width$}")))
        .collect()
}

impl SyntheticWorld {
    /// Assembles a world from explicit parts. `pool_changes` may be empty.
    pub fn new(
        mode: WorldMode,
        arms: Vec<WorldArm>,
        beta: Option<Vec<f64>>,
        sampler: ContextSampler,
        pool_changes: &[PoolChange],
    ) -> Result<Self> {
        let first = arms.first().ok_or(Error::EmptyArmSet)?;
        let d = first.theta.len();
        if d == 0 {
            return Err(Error::EmptyFeatures);
        }
        let k = match mode {
            WorldMode::Disjoint => 0,
            WorldMode::Hybrid => {
                let m = first
                    .article
                    .as_ref()
                    .map(Vec::len)
                    .ok_or_else(|| Error::Config("hybrid arms need article features".into()))?;
                let beta = beta
                    .as_ref()
                    .ok_or_else(|| Error::Config("hybrid world needs beta".into()))?;
                if beta.len() != d * m {
                    return Err(Error::DimensionMismatch {
                        expected: d * m,
                        found: beta.len(),
                    });
                }
                d * m
            }
        };
        let mut index = HashMap::new();
        for (i, arm) in arms.iter().enumerate() {
            if arm.theta.len() != d {
                return Err(Error::InconsistentX {
                    expected: d,
                    found: arm.theta.len(),
                });
            }
            if mode == WorldMode::Hybrid && arm.article.as_ref().map(Vec::len) != Some(k / d) {
                return Err(Error::Config(format!(
                    "arm {} has malformed article features",
                    arm.id
                )));
            }
            if index.insert(arm.id.clone(), i).is_some() {
                return Err(Error::DuplicateArm(arm.id.clone()));
            }
        }
        let pools = build_pools(&arms, &index, pool_changes)?;
        Ok(Self {
            mode,
            d,
            k,
            arms,
            beta: if mode == WorldMode::Hybrid {
                beta
            } else {
                None
            },
            sampler,
            pools,
            index,
        })
    }

    pub fn from_spec(spec: &WorldSpec) -> Result<Self> {
        if spec.d == 0 || spec.arms == 0 {
            return Err(Error::Config("d and arms must be positive".into()));
        }
        let mut rng = crate::context::RngSeed(spec.seed).rng();
        let total = spec.arms + spec.extra_arms;
        let ids = arm_ids(total);
        let draw = |low: f64, high: f64, rng: &mut dyn RngCore| {
            if high > low {
                rng.random_range(low..=high)
            } else {
                low
            }
        };
        let thetas: Vec<Vec<f64>> = match &spec.theta {
            CoefficientSpec::Uniform { low, high } => (0..total)
                .map(|_| (0..spec.d).map(|_| draw(*low, *high, &mut rng)).collect())
                .collect(),
            CoefficientSpec::Explicit(rows) => {
                if rows.len() != total {
                    return Err(Error::Config(format!(
                        "theta lists {} arms, world has {total}",
                        rows.len()
                    )));
                }
                rows.clone()
            }
        };
        let (articles, beta) = match spec.mode {
            WorldMode::Disjoint => (vec![None; total], None),
            WorldMode::Hybrid => {
                let articles = (0..total)
                    .map(|_| {
                        dirichlet_with_constant(
                            spec.article_dim,
                            spec.article_concentration,
                            &mut rng,
                        )
                        .map(Some)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let k = spec.d * spec.article_dim;
                let beta = match &spec.beta {
                    CoefficientSpec::Uniform { low, high } => {
                        (0..k).map(|_| draw(*low, *high, &mut rng)).collect()
                    }
                    CoefficientSpec::Explicit(b) => b.clone(),
                };
                (articles, Some(beta))
            }
        };
        let arms = ids
            .into_iter()
            .zip(thetas)
            .zip(articles)
            .map(|((id, theta), article)| WorldArm { id, theta, article })
            .collect();
        Self::new(spec.mode, arms, beta, spec.sampler.clone(), &spec.schedule)
    }

    /// A context-free K-armed world with the given Bernoulli means.
    pub fn static_arms(means: &[f64]) -> Result<Self> {
        let arms = arm_ids(means.len())
            .into_iter()
            .zip(means)
            .map(|(id, m)| WorldArm {
                id,
                theta: vec![*m],
                article: None,
            })
            .collect();
        Self::new(
            WorldMode::Disjoint,
            arms,
            None,
            ContextSampler::Constant,
            &[],
        )
    }

    pub fn mode(&self) -> WorldMode {
        self.mode
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Shared-feature dimension (0 in disjoint mode).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn arms(&self) -> &[WorldArm] {
        &self.arms
    }

    pub fn beta(&self) -> Option<&[f64]> {
        self.beta.as_deref()
    }

    fn arm_index(&self, id: &ArmId) -> Result<usize> {
        if self.index.is_empty() && !self.arms.is_empty() {
            // deserialized worlds skip the index
            return self
                .arms
                .iter()
                .position(|a| &a.id == id)
                .ok_or_else(|| Error::UnknownArm(id.clone()));
        }
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownArm(id.clone()))
    }

    /// Arm indices in the pool at trial `t` (0-based).
    pub fn pool_at(&self, t: u64) -> &[usize] {
        let seg = self
            .pools
            .iter()
            .rposition(|(from, _)| *from <= t)
            .unwrap_or(0);
        &self.pools[seg].1
    }

    pub fn pool_ids_at(&self, t: u64) -> Vec<ArmId> {
        self.pool_at(t)
            .iter()
            .map(|i| self.arms[*i].id.clone())
            .collect()
    }

    /// Draws the context of trial `t`.
    pub fn sample_context(&self, t: u64, rng: &mut dyn RngCore) -> Result<TrialContext> {
        let pool = self.pool_at(t);
        let xs = self.sampler.draw(self.d, pool.len(), rng);
        let arms = pool
            .iter()
            .zip(xs)
            .map(|(i, x)| {
                let arm = &self.arms[*i];
                let z = match &arm.article {
                    Some(article) if self.mode == WorldMode::Hybrid => {
                        Some(FeatureVector::new(features::outer_flat(&x, article))?)
                    }
                    _ => None,
                };
                Ok(Arm {
                    id: arm.id.clone(),
                    x: FeatureVector::new(x)?,
                    z,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TrialContext::new(arms)
    }

    /// Unclamped linear payoff `zᵀβ* + xᵀθ*_a`.
    pub fn linear_payoff(&self, arm: &ArmId, x: &[f64], z: Option<&[f64]>) -> Result<f64> {
        let a = &self.arms[self.arm_index(arm)?];
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        let mut v = dot(x, &a.theta);
        if let (Some(beta), WorldMode::Hybrid) = (&self.beta, self.mode) {
            let z = z.ok_or_else(|| Error::InvalidParameter("hybrid payoff needs z".into()))?;
            if z.len() != beta.len() {
                return Err(Error::DimensionMismatch {
                    expected: beta.len(),
                    found: z.len(),
                });
            }
            v += dot(z, beta);
        }
        Ok(v)
    }

    /// Click probability of every arm of `ctx`, aligned with `ctx.arms()`.
    pub fn expected_payoffs(&self, ctx: &TrialContext) -> Result<Vec<f64>> {
        ctx.arms()
            .iter()
            .map(|a| true_expected_payoff(self, &a.id, &a.x, a.z.as_deref()))
            .collect()
    }

    /// Fraction of `n` sampled (context, arm) pairs whose linear payoff
    /// falls outside [0, 1].
    pub fn clamp_rate(&self, n: usize, rng: &mut dyn RngCore) -> Result<f64> {
        let mut clamped = 0usize;
        let mut total = 0usize;
        for t in 0..n {
            let ctx = self.sample_context(t as u64, rng)?;
            for a in ctx.arms() {
                let v = self.linear_payoff(&a.id, &a.x, a.z.as_deref())?;
                clamped += usize::from(!(0.0..=1.0).contains(&v));
                total += 1;
            }
        }
        Ok(clamped as f64 / total as f64)
    }
}

fn build_pools(
    arms: &[WorldArm],
    index: &HashMap<ArmId, usize>,
    changes: &[PoolChange],
) -> Result<Vec<(u64, Vec<usize>)>> {
    let lookup = |name: &str| {
        index
            .get(&ArmId::from(name))
            .copied()
            .ok_or_else(|| Error::UnknownArm(ArmId::from(name)))
    };
    let mut sorted: Vec<&PoolChange> = changes.iter().collect();
    sorted.sort_by_key(|c| c.at);
    // an arm starts outside the pool when the schedule first mentions it in `add`
    let mut first_mention: Vec<Option<bool>> = vec![None; arms.len()];
    for ch in &sorted {
        for name in &ch.remove {
            first_mention[lookup(name)?].get_or_insert(false);
        }
        for name in &ch.add {
            first_mention[lookup(name)?].get_or_insert(true);
        }
    }
    let mut pool: Vec<usize> = (0..arms.len())
        .filter(|i| first_mention[*i] != Some(true))
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptyArmSet);
    }
    let mut pools = vec![(0u64, pool.clone())];
    for ch in sorted {
        for name in &ch.remove {
            let i = lookup(name)?;
            pool.retain(|p| *p != i);
        }
        for name in &ch.add {
            let i = lookup(name)?;
            if !pool.contains(&i) {
                pool.push(i);
            }
        }
        if pool.is_empty() {
            return Err(Error::EmptyArmSet);
        }
        pool.sort_unstable();
        match pools.last_mut() {
            Some((at, p)) if *at == ch.at => *p = pool.clone(),
            _ => pools.push((ch.at, pool.clone())),
        }
    }
    Ok(pools)
}

/// `clamp₀¹(zᵀβ* + xᵀθ*_a)`; the z term is absent in disjoint worlds.
pub fn true_expected_payoff(
    world: &SyntheticWorld,
    arm: &ArmId,
    x: &[f64],
    z: Option<&[f64]>,
) -> Result<f64> {
    Ok(world.linear_payoff(arm, x, z)?.clamp(0.0, 1.0))
}

/// One uniformly logged event at trial `t`: a context, a Bernoulli payoff
/// for every arm (kept as hidden rewards) and a uniformly chosen arm whose
/// payoff is the observed reward.
fn gen_event(world: &SyntheticWorld, t: u64, rng: &mut dyn RngCore) -> Result<LoggedEvent> {
    let ctx = world.sample_context(t, rng)?;
    let means = world.expected_payoffs(&ctx)?;
    let hidden: Vec<f64> = means
        .iter()
        .map(|m| if rng.random::<f64>() < *m { 1.0 } else { 0.0 })
        .collect();
    let k = ctx.len();
    let i = rng.random_range(0..k);
    let chosen = ctx.arms()[i].id.clone();
    LoggedEvent::new(ctx, chosen, hidden[i], Some(1.0 / k as f64), Some(hidden))
}

/// `n_events` uniformly logged events.
pub fn gen_stream(
    world: &SyntheticWorld,
    n_events: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<LoggedEvent>> {
    if n_events == 0 {
        return Err(Error::InvalidParameter("n_events must be positive".into()));
    }
    (0..n_events as u64)
        .map(|t| gen_event(world, t, rng))
        .collect()
}

/// The same events as [`gen_stream`], generated on demand and without end.
pub fn stream_events<'w, R: RngCore + 'w>(
    world: &'w SyntheticWorld,
    mut rng: R,
) -> impl Iterator<Item = Result<LoggedEvent>> + 'w {
    (0u64..).map(move |t| gen_event(world, t, &mut rng))
}
