//! LinUCB and ε-greedy on linear payoff models, disjoint and hybrid.
//!
//! Both models produce, per arm, a ridge mean estimate and a predictive
//! variance `s`. LinUCB ranks by `mean + α√s`; the ε-greedy variants rank
//! by the mean and explore uniformly with probability ε.

use std::collections::BTreeMap;

use rand::RngCore;

use super::{argmax_lowest_id, epsilon_pick, Exploration, Policy};
use crate::context::{ArmId, TrialContext};
use crate::error::{Error, Result};
use crate::linalg::{dot, quadratic_form, HybridState, RidgeState, DEFAULT_REFRESH_PERIOD};

/// Largest round-off deficit tolerated (and clamped to 0) in the hybrid
/// variance before it is reported as an error.
pub const NEGATIVE_VARIANCE_TOLERANCE: f64 = 1e-9;

/// One independent ridge model per arm, created on first update.
#[derive(Debug, Clone)]
pub struct DisjointModelState {
    d: usize,
    refresh_period: usize,
    arms: BTreeMap<ArmId, RidgeState>,
}

impl DisjointModelState {
    pub fn new(d: usize) -> Self {
        Self::with_refresh_period(d, DEFAULT_REFRESH_PERIOD)
    }

    pub fn with_refresh_period(d: usize, refresh_period: usize) -> Self {
        assert!(d > 0, "feature dimension must be positive");
        Self {
            d,
            refresh_period,
            arms: BTreeMap::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn arm(&self, id: &ArmId) -> Option<&RidgeState> {
        self.arms.get(id)
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    fn remove(&mut self, id: &ArmId) {
        self.arms.remove(id);
    }
}

fn check_x_dim(ctx: &TrialContext, d: usize) -> Result<()> {
    if ctx.x_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: ctx.x_dim(),
        });
    }
    Ok(())
}

/// `(θ̂ᵀx, xᵀA⁻¹x)` per arm; unseen arms use `A = I`, `b = 0`. The width
/// is left at 0 unless `widths` is set.
fn disjoint_components(
    state: &DisjointModelState,
    ctx: &TrialContext,
    widths: bool,
) -> Result<Vec<(f64, f64)>> {
    check_x_dim(ctx, state.d)?;
    let fresh = RidgeState::new(state.d);
    ctx.arms()
        .iter()
        .map(|arm| {
            let ridge = state.arms.get(&arm.id).unwrap_or(&fresh);
            let theta = ridge.point_estimate();
            let var = if widths {
                quadratic_form(ridge.a_inv(), &arm.x)?
            } else {
                0.0
            };
            Ok((dot(&theta, &arm.x), var))
        })
        .collect()
}

/// Upper confidence bound `θ̂ᵀx + α√(xᵀA⁻¹x)` of every arm, aligned with
/// `ctx.arms()`.
pub fn linucb_disjoint_score(
    state: &DisjointModelState,
    ctx: &TrialContext,
    alpha: f64,
) -> Result<Vec<f64>> {
    Ok(disjoint_components(state, ctx, true)?
        .into_iter()
        .map(|(mean, var)| mean + alpha * var.sqrt())
        .collect())
}

/// Rank-1 update of the chosen arm's model; no other arm is touched.
pub fn linucb_disjoint_update(
    state: &mut DisjointModelState,
    chosen: &ArmId,
    x: &[f64],
    r: f64,
) -> Result<()> {
    if x.len() != state.d {
        return Err(Error::DimensionMismatch {
            expected: state.d,
            found: x.len(),
        });
    }
    let (d, period) = (state.d, state.refresh_period);
    state
        .arms
        .entry(chosen.clone())
        .or_insert_with(|| RidgeState::with_refresh_period(d, period))
        .rank1_update(x, r)
}

fn check_hybrid_dims(state: &HybridState, ctx: &TrialContext) -> Result<()> {
    check_x_dim(ctx, state.d())?;
    match ctx.z_dim() {
        Some(k) if k == state.k() => Ok(()),
        Some(k) => Err(Error::DimensionMismatch {
            expected: state.k(),
            found: k,
        }),
        None => Err(Error::InvalidParameter(
            "hybrid model needs shared features z on every arm".into(),
        )),
    }
}

fn clamp_variance(s: f64) -> Result<f64> {
    if s >= 0.0 {
        Ok(s)
    } else if s >= -NEGATIVE_VARIANCE_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance(s))
    }
}

/// `(zᵀβ̂ + xᵀθ̂_a, s_a)` per arm; `s_a` is left at 0 unless `widths` is set.
fn hybrid_components(
    state: &HybridState,
    ctx: &TrialContext,
    widths: bool,
) -> Result<Vec<(f64, f64)>> {
    check_hybrid_dims(state, ctx)?;
    let a0_inv = state.a0_inv();
    let beta = a0_inv.matvec(state.b0());
    let fresh = state.fresh_arm();
    ctx.arms()
        .iter()
        .map(|arm| {
            let blocks = state.arm(&arm.id).unwrap_or(&fresh);
            let (x, z) = (arm.x.as_slice(), arm.z.as_deref().expect("checked above"));
            let a_inv = blocks.a_inv();
            let b_mat = blocks.b_mat();

            // θ̂ = A⁻¹(b − Bβ̂)
            let b_beta = b_mat.matvec(&beta);
            let resid: Vec<f64> = blocks
                .b_vec()
                .iter()
                .zip(&b_beta)
                .map(|(b, bb)| b - bb)
                .collect();
            let theta = a_inv.matvec(&resid);
            let mean = dot(z, &beta) + dot(x, &theta);
            if !widths {
                return Ok((mean, 0.0));
            }

            // s = zᵀA₀⁻¹z − 2zᵀA₀⁻¹BᵀA⁻¹x + xᵀA⁻¹x + xᵀA⁻¹BA₀⁻¹BᵀA⁻¹x
            //   = (z − w)ᵀA₀⁻¹(z − w) + xᵀA⁻¹x  with  w = BᵀA⁻¹x
            let ainv_x = a_inv.matvec(x);
            let w = b_mat.matvec_t(&ainv_x);
            let u: Vec<f64> = z.iter().zip(&w).map(|(zi, wi)| zi - wi).collect();
            let s = dot(&u, &a0_inv.matvec(&u)) + dot(x, &ainv_x).max(0.0);
            Ok((mean, clamp_variance(s)?))
        })
        .collect()
}

/// Upper confidence bound `zᵀβ̂ + xᵀθ̂_a + α√s_a` of every arm, aligned
/// with `ctx.arms()`.
pub fn linucb_hybrid_score(
    state: &HybridState,
    ctx: &TrialContext,
    alpha: f64,
) -> Result<Vec<f64>> {
    Ok(hybrid_components(state, ctx, true)?
        .into_iter()
        .map(|(mean, var)| mean + alpha * var.sqrt())
        .collect())
}

/// The hybrid update, in order: fold the chosen arm's old blocks into the
/// shared statistics, update the arm's `A_a`, `B_a`, `b_a`, then take the
/// new blocks back out together with the shared `zzᵀ`, `rz` terms.
pub fn linucb_hybrid_update(
    state: &mut HybridState,
    chosen: &ArmId,
    z: &[f64],
    x: &[f64],
    r: f64,
) -> Result<()> {
    if x.len() != state.d() {
        return Err(Error::DimensionMismatch {
            expected: state.d(),
            found: x.len(),
        });
    }
    if z.len() != state.k() {
        return Err(Error::DimensionMismatch {
            expected: state.k(),
            found: z.len(),
        });
    }
    state.arm_entry(chosen);
    let arm = state.per_arm.get_mut(chosen).expect("created above");

    // A₀ += BᵀA⁻¹B, b₀ += BᵀA⁻¹b
    let (shared_a, shared_b) = shared_terms(arm.a_inv(), &arm.b_mat, arm.b_vec());
    state.a0.add_scaled(&shared_a, 1.0);
    for (b0, v) in state.b0.iter_mut().zip(&shared_b) {
        *b0 += v;
    }

    arm.ridge.rank1_update(x, r)?;
    arm.b_mat.add_outer(x, z, 1.0);

    // A₀ += zzᵀ − BᵀA⁻¹B, b₀ += rz − BᵀA⁻¹b
    let (shared_a, shared_b) = shared_terms(arm.a_inv(), &arm.b_mat, arm.b_vec());
    state.a0.add_outer(z, z, 1.0);
    state.a0.add_scaled(&shared_a, -1.0);
    for ((b0, v), zi) in state.b0.iter_mut().zip(&shared_b).zip(z) {
        *b0 += r * zi - v;
    }
    state.note_shared_update();
    Ok(())
}

/// `(BᵀA⁻¹B, BᵀA⁻¹b)`, the first symmetrized.
fn shared_terms(
    a_inv: &crate::linalg::DenseMatrix,
    b_mat: &crate::linalg::DenseMatrix,
    b_vec: &[f64],
) -> (crate::linalg::DenseMatrix, Vec<f64>) {
    let ainv_b = a_inv.matmul(b_mat);
    let mut bt_ainv_b = b_mat.t_matmul(&ainv_b);
    let k = bt_ainv_b.rows();
    for i in 0..k {
        for j in i + 1..k {
            let avg = 0.5 * (bt_ainv_b.get(i, j) + bt_ainv_b.get(j, i));
            bt_ainv_b.set(i, j, avg);
            bt_ainv_b.set(j, i, avg);
        }
    }
    let bt_ainv_bvec = b_mat.matvec_t(&a_inv.matvec(b_vec));
    (bt_ainv_b, bt_ainv_bvec)
}

#[derive(Debug, Clone)]
pub enum LinearModel {
    Disjoint(DisjointModelState),
    Hybrid(HybridState),
}

/// LinUCB or ε-greedy over a disjoint or hybrid linear model.
///
/// Arms that leave the pool keep their statistics. With
/// [`LinearPolicy::with_eviction`] an arm absent from the last `n` updated
/// trials is dropped and starts fresh if it returns.
#[derive(Debug, Clone)]
pub struct LinearPolicy {
    model: LinearModel,
    exploration: Exploration,
    evict_after: Option<u64>,
    trial: u64,
    last_seen: BTreeMap<ArmId, u64>,
}

impl LinearPolicy {
    pub fn new(model: LinearModel, exploration: Exploration) -> Self {
        Self {
            model,
            exploration,
            evict_after: None,
            trial: 0,
            last_seen: BTreeMap::new(),
        }
    }

    pub fn linucb_disjoint(d: usize, alpha: f64) -> Result<Self> {
        Ok(Self::new(
            LinearModel::Disjoint(DisjointModelState::new(d)),
            Exploration::ucb(alpha)?,
        ))
    }

    pub fn linucb_hybrid(d: usize, k: usize, alpha: f64) -> Result<Self> {
        Ok(Self::new(
            LinearModel::Hybrid(HybridState::new(d, k)),
            Exploration::ucb(alpha)?,
        ))
    }

    pub fn egreedy_disjoint(d: usize, epsilon: f64) -> Result<Self> {
        Ok(Self::new(
            LinearModel::Disjoint(DisjointModelState::new(d)),
            Exploration::epsilon_greedy(epsilon)?,
        ))
    }

    pub fn egreedy_hybrid(d: usize, k: usize, epsilon: f64) -> Result<Self> {
        Ok(Self::new(
            LinearModel::Hybrid(HybridState::new(d, k)),
            Exploration::epsilon_greedy(epsilon)?,
        ))
    }

    pub fn with_eviction(mut self, absent_trials: u64) -> Self {
        self.evict_after = Some(absent_trials);
        self
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn exploration(&self) -> Exploration {
        self.exploration
    }

    /// `(mean, variance)` per arm of `ctx`.
    pub fn components(&self, ctx: &TrialContext) -> Result<Vec<(f64, f64)>> {
        self.components_with(ctx, true)
    }

    fn components_with(&self, ctx: &TrialContext, widths: bool) -> Result<Vec<(f64, f64)>> {
        match &self.model {
            LinearModel::Disjoint(s) => disjoint_components(s, ctx, widths),
            LinearModel::Hybrid(s) => hybrid_components(s, ctx, widths),
        }
    }

    fn means(&self, ctx: &TrialContext) -> Result<Vec<f64>> {
        Ok(self
            .components_with(ctx, false)?
            .into_iter()
            .map(|(m, _)| m)
            .collect())
    }

    fn evict_stale(&mut self) {
        let Some(limit) = self.evict_after else {
            return;
        };
        let trial = self.trial;
        let stale: Vec<ArmId> = self
            .last_seen
            .iter()
            .filter(|(_, seen)| trial - **seen > limit)
            .map(|(id, _)| id.clone())
            .collect();
        for id in stale {
            self.last_seen.remove(&id);
            match &mut self.model {
                LinearModel::Disjoint(s) => s.remove(&id),
                LinearModel::Hybrid(s) => s.remove_arm(&id),
            }
        }
    }
}

impl Policy for LinearPolicy {
    fn name(&self) -> String {
        let base = match self.exploration {
            Exploration::EpsilonGreedy { .. } => "egreedy",
            Exploration::Ucb { .. } => "linucb",
        };
        let model = match self.model {
            LinearModel::Disjoint(_) => "disjoint",
            LinearModel::Hybrid(_) => "hybrid",
        };
        format!("{base}-{model}")
    }

    fn select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        let i = match self.exploration {
            Exploration::Ucb { alpha } => {
                let scores: Vec<f64> = self
                    .components(ctx)?
                    .iter()
                    .map(|(m, s)| m + alpha * s.sqrt())
                    .collect();
                argmax_lowest_id(ctx, &scores)
            }
            Exploration::EpsilonGreedy { epsilon } => {
                let means = self.means(ctx)?;
                epsilon_pick(ctx, epsilon, rng, || argmax_lowest_id(ctx, &means))
            }
        };
        Ok(ctx.arms()[i].id.clone())
    }

    fn exploit_select(&self, ctx: &TrialContext, _: &mut dyn RngCore) -> Result<ArmId> {
        let means = self.means(ctx)?;
        Ok(ctx.arms()[argmax_lowest_id(ctx, &means)].id.clone())
    }

    fn update(&mut self, ctx: &TrialContext, chosen: &ArmId, reward: f64) -> Result<()> {
        let arm = ctx
            .arm(chosen)
            .ok_or_else(|| Error::ChosenNotInContext(chosen.clone()))?;
        match &mut self.model {
            LinearModel::Disjoint(s) => linucb_disjoint_update(s, chosen, &arm.x, reward)?,
            LinearModel::Hybrid(s) => {
                let z = arm.z.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("hybrid model needs shared features z".into())
                })?;
                linucb_hybrid_update(s, chosen, z, &arm.x, reward)?
            }
        }
        if self.evict_after.is_some() {
            self.trial += 1;
            for id in ctx.ids() {
                self.last_seen.insert(id.clone(), self.trial);
            }
            self.evict_stale();
        }
        Ok(())
    }
}
