//! Policies that ignore features (ε-greedy, UCB1, omniscient), their
//! per-segment copies, and the warm-start offset wrapper.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::RngCore;
use serde::Deserialize;

use super::{argmax_lowest_id, epsilon_pick, Exploration, Policy};
use crate::context::{ArmId, LoggedEvent, TrialContext};
use crate::error::{Error, Result};

/// Number of user segments (k-means clusters) used by the `seg` variants.
pub const NUM_SEGMENTS: usize = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct ArmCounts {
    reward_sum: f64,
    views: u64,
}

/// Per-arm click and view counts with the empirical mean `μ̂ = clicks/views`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextFreeArmStats {
    arms: BTreeMap<ArmId, ArmCounts>,
}

impl ContextFreeArmStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, arm: &ArmId, reward: f64) {
        let c = self.arms.entry(arm.clone()).or_default();
        c.reward_sum += reward;
        c.views += 1;
    }

    /// Sets counts directly; `clicks` may not exceed `views`.
    pub fn set(&mut self, arm: impl Into<ArmId>, clicks: f64, views: u64) -> Result<()> {
        if !(clicks >= 0.0 && clicks <= views as f64) {
            return Err(Error::InvalidParameter(format!(
                "clicks {clicks} must lie in [0, views = {views}]"
            )));
        }
        self.arms.insert(
            arm.into(),
            ArmCounts {
                reward_sum: clicks,
                views,
            },
        );
        Ok(())
    }

    /// `μ̂`, or 0 for an arm never seen.
    pub fn mean(&self, arm: &ArmId) -> f64 {
        match self.arms.get(arm) {
            Some(c) if c.views > 0 => c.reward_sum / c.views as f64,
            _ => 0.0,
        }
    }

    pub fn views(&self, arm: &ArmId) -> u64 {
        self.arms.get(arm).map_or(0, |c| c.views)
    }

    pub fn clicks(&self, arm: &ArmId) -> f64 {
        self.arms.get(arm).map_or(0.0, |c| c.reward_sum)
    }

    pub fn total_views(&self) -> u64 {
        self.arms.values().map(|c| c.views).sum()
    }
}

fn check_nonempty(ctx: &TrialContext) -> Result<()> {
    if ctx.is_empty() {
        return Err(Error::EmptyArmSet);
    }
    Ok(())
}

/// Greedy on `μ̂` with probability `1 − ε`, uniform otherwise.
pub fn eps_greedy_select(
    stats: &ContextFreeArmStats,
    ctx: &TrialContext,
    epsilon: f64,
    rng: &mut dyn RngCore,
) -> Result<ArmId> {
    check_nonempty(ctx)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} outside [0, 1]"
        )));
    }
    let scores: Vec<f64> = ctx.ids().map(|id| stats.mean(id)).collect();
    let i = epsilon_pick(ctx, epsilon, rng, || argmax_lowest_id(ctx, &scores));
    Ok(ctx.arms()[i].id.clone())
}

fn ucb_scores(
    stats: &ContextFreeArmStats,
    ctx: &TrialContext,
    base: &[f64],
    alpha: f64,
) -> Vec<f64> {
    ctx.ids()
        .zip(base)
        .map(|(id, m)| match stats.views(id) {
            0 => f64::INFINITY,
            n => m + alpha / (n as f64).sqrt(),
        })
        .collect()
}

/// Argmax of `μ̂ + α/√n`; an arm with `n = 0` scores `+∞`.
pub fn ucb1_select(stats: &ContextFreeArmStats, ctx: &TrialContext, alpha: f64) -> Result<ArmId> {
    check_nonempty(ctx)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} must be >= 0"
        )));
    }
    let means: Vec<f64> = ctx.ids().map(|id| stats.mean(id)).collect();
    let scores = ucb_scores(stats, ctx, &means, alpha);
    Ok(ctx.arms()[argmax_lowest_id(ctx, &scores)].id.clone())
}

/// Empirical CTR of every arm over all of `events`, in hindsight.
pub fn omniscient_fit(events: &[LoggedEvent]) -> Result<ContextFreeArmStats> {
    if events.is_empty() {
        return Err(Error::InvalidParameter(
            "omniscient fit needs at least one event".into(),
        ));
    }
    let mut stats = ContextFreeArmStats::new();
    for ev in events {
        stats.record(&ev.chosen, ev.reward);
    }
    Ok(stats)
}

/// Segment (1-based) of a user from the five cluster memberships followed by
/// the constant feature: the dominant membership, ties to the lowest index.
pub fn segment_assign(membership: &[f64]) -> Result<usize> {
    if membership.len() != NUM_SEGMENTS + 1 {
        return Err(Error::InvalidMembership(format!(
            "expected {} entries, found {}",
            NUM_SEGMENTS + 1,
            membership.len()
        )));
    }
    let weights = &membership[..NUM_SEGMENTS];
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidMembership("negative membership".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidMembership(format!(
            "memberships sum to {total}, not 1"
        )));
    }
    let mut best = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > weights[best] {
            best = i;
        }
    }
    Ok(best + 1)
}

/// Warm-start ranking score: context-free estimate plus user-specific offset.
pub fn warm_start_score(base_ctr_estimate: f64, offset: f64) -> f64 {
    base_ctr_estimate + offset
}

/// Key of a warm-start offset: a user segment (1-based) or an exact hash of
/// the user feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OffsetKey {
    Segment(usize),
    FeatureHash(u64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OffsetRecord {
    #[serde(default)]
    segment: Option<usize>,
    #[serde(default)]
    feature_hash: Option<String>,
    arm: String,
    offset: f64,
}

/// Offline user-specific CTR corrections, keyed by (segment or feature hash, arm).
///
/// File format, one JSON object per line:
/// `{"segment":2,"arm":"a1","offset":0.013}` or
/// `{"feature_hash":"9ae16a3b2f90404f","arm":"a1","offset":-0.004}`.
#[derive(Debug, Clone, Default)]
pub struct OffsetTable {
    entries: HashMap<(OffsetKey, ArmId), f64>,
}

impl OffsetTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: OffsetKey, arm: impl Into<ArmId>, offset: f64) {
        self.entries.insert((key, arm.into()), offset);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// FNV-1a over the bit patterns of a user feature vector.
    pub fn feature_hash(user: &[f64]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in user {
            for byte in v.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    /// Exact feature-hash entry first, then the user's segment, else 0.
    pub fn offset(&self, user: &[f64], arm: &ArmId) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let hash = OffsetKey::FeatureHash(Self::feature_hash(user));
        if let Some(v) = self.entries.get(&(hash, arm.clone())) {
            return *v;
        }
        segment_assign(user)
            .ok()
            .and_then(|s| self.entries.get(&(OffsetKey::Segment(s), arm.clone())))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn parse_line(&mut self, line: &str) -> Result<()> {
        let rec: OffsetRecord =
            serde_json::from_str(line).map_err(|e| Error::Malformed(e.to_string()))?;
        if !rec.offset.is_finite() {
            return Err(Error::NonFinite(rec.offset));
        }
        let key = match (rec.segment, rec.feature_hash) {
            (Some(s), None) if (1..=NUM_SEGMENTS).contains(&s) => OffsetKey::Segment(s),
            (None, Some(h)) => OffsetKey::FeatureHash(
                u64::from_str_radix(&h, 16)
                    .map_err(|e| Error::Malformed(format!("feature_hash: {e}")))?,
            ),
            _ => {
                return Err(Error::Malformed(
                    "offset record needs exactly one of segment (1..=5) or feature_hash".into(),
                ))
            }
        };
        self.insert(key, rec.arm.as_str(), rec.offset);
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut table = Self::new();
        for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            table.parse_line(&line).map_err(|e| Error::AtLine {
                path: path.display().to_string(),
                line: n + 1,
                source: Box::new(e),
            })?;
        }
        Ok(table)
    }

    /// Per-segment corrections estimated from earlier uniformly logged
    /// traffic: segment CTR of an arm minus its overall CTR.
    pub fn from_logged(events: &[LoggedEvent]) -> Result<Self> {
        let overall = omniscient_fit(events)?;
        let mut per_segment = vec![ContextFreeArmStats::new(); NUM_SEGMENTS];
        for ev in events {
            let s = segment_assign(&ev.context.arms()[0].x)?;
            per_segment[s - 1].record(&ev.chosen, ev.reward);
        }
        let mut table = Self::new();
        for (s, stats) in per_segment.iter().enumerate() {
            for (arm, c) in &stats.arms {
                if c.views > 0 {
                    table.insert(
                        OffsetKey::Segment(s + 1),
                        arm.clone(),
                        stats.mean(arm) - overall.mean(arm),
                    );
                }
            }
        }
        Ok(table)
    }

    /// Canonical JSON lines, sorted by key then arm.
    pub fn to_lines(&self) -> Vec<String> {
        let mut keys: Vec<_> = self.entries.iter().collect();
        keys.sort_by(|a, b| a.0.cmp(b.0));
        keys.into_iter()
            .map(|((key, arm), off)| {
                let arm = serde_json::to_string(arm.as_str()).unwrap();
                match key {
                    OffsetKey::Segment(s) => {
                        format!("{{\"segment\":{s},\"arm\":{arm},\"offset\":{off:.16e}}}")
                    }
                    OffsetKey::FeatureHash(h) => {
                        format!(
                            "{{\"feature_hash\":\"{h:016x}\",\"arm\":{arm},\"offset\":{off:.16e}}}"
                        )
                    }
                }
            })
            .collect()
    }
}

/// ε-greedy or UCB1 on context-free CTR estimates, optionally one copy per
/// user segment (`seg`) and optionally with warm-start offsets (`warm`).
#[derive(Debug, Clone)]
pub struct ContextFreePolicy {
    exploration: Exploration,
    segmented: bool,
    stats: Vec<ContextFreeArmStats>,
    offsets: Option<OffsetTable>,
}

impl ContextFreePolicy {
    pub fn new(exploration: Exploration) -> Self {
        Self {
            exploration,
            segmented: false,
            stats: vec![ContextFreeArmStats::new()],
            offsets: None,
        }
    }

    pub fn epsilon_greedy(epsilon: f64) -> Result<Self> {
        Ok(Self::new(Exploration::epsilon_greedy(epsilon)?))
    }

    pub fn ucb(alpha: f64) -> Result<Self> {
        Ok(Self::new(Exploration::ucb(alpha)?))
    }

    /// Runs an independent copy in each of the five user segments.
    pub fn segmented(mut self) -> Self {
        self.segmented = true;
        self.stats = vec![ContextFreeArmStats::new(); NUM_SEGMENTS];
        self
    }

    pub fn with_warm_start(mut self, offsets: OffsetTable) -> Self {
        self.offsets = Some(offsets);
        self
    }

    pub fn exploration(&self) -> Exploration {
        self.exploration
    }

    fn segment_index(&self, ctx: &TrialContext) -> Result<usize> {
        if self.segmented {
            Ok(segment_assign(&ctx.arms()[0].x)? - 1)
        } else {
            Ok(0)
        }
    }

    pub fn stats(&self, segment: usize) -> &ContextFreeArmStats {
        &self.stats[segment]
    }

    fn base_scores(&self, ctx: &TrialContext) -> Result<(usize, Vec<f64>)> {
        check_nonempty(ctx)?;
        let seg = self.segment_index(ctx)?;
        let stats = &self.stats[seg];
        let user = &ctx.arms()[0].x;
        let scores = ctx
            .ids()
            .map(|id| {
                let offset = self.offsets.as_ref().map_or(0.0, |t| t.offset(user, id));
                warm_start_score(stats.mean(id), offset)
            })
            .collect();
        Ok((seg, scores))
    }
}

impl Policy for ContextFreePolicy {
    fn name(&self) -> String {
        let base = match self.exploration {
            Exploration::EpsilonGreedy { .. } => "egreedy",
            Exploration::Ucb { .. } => "ucb",
        };
        match (self.segmented, self.offsets.is_some()) {
            (false, false) => base.to_string(),
            (true, false) => format!("{base}-seg"),
            (false, true) => format!("{base}-warm"),
            (true, true) => format!("{base}-seg-warm"),
        }
    }

    fn select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        let (seg, scores) = self.base_scores(ctx)?;
        let i = match self.exploration {
            Exploration::EpsilonGreedy { epsilon } => {
                epsilon_pick(ctx, epsilon, rng, || argmax_lowest_id(ctx, &scores))
            }
            Exploration::Ucb { alpha } => {
                argmax_lowest_id(ctx, &ucb_scores(&self.stats[seg], ctx, &scores, alpha))
            }
        };
        Ok(ctx.arms()[i].id.clone())
    }

    fn exploit_select(&self, ctx: &TrialContext, _: &mut dyn RngCore) -> Result<ArmId> {
        let (_, scores) = self.base_scores(ctx)?;
        Ok(ctx.arms()[argmax_lowest_id(ctx, &scores)].id.clone())
    }

    fn update(&mut self, ctx: &TrialContext, chosen: &ArmId, reward: f64) -> Result<()> {
        if ctx.position(chosen).is_none() {
            return Err(Error::ChosenNotInContext(chosen.clone()));
        }
        let seg = self.segment_index(ctx)?;
        self.stats[seg].record(chosen, reward);
        Ok(())
    }
}

/// Best context-free arm in hindsight; never learns.
#[derive(Debug, Clone)]
pub struct Omniscient {
    stats: ContextFreeArmStats,
}

impl Omniscient {
    pub fn fit(events: &[LoggedEvent]) -> Result<Self> {
        Ok(Self {
            stats: omniscient_fit(events)?,
        })
    }

    pub fn from_stats(stats: ContextFreeArmStats) -> Self {
        Self { stats }
    }
}

impl Policy for Omniscient {
    fn name(&self) -> String {
        "omniscient".into()
    }

    fn select(&self, ctx: &TrialContext, _: &mut dyn RngCore) -> Result<ArmId> {
        check_nonempty(ctx)?;
        let scores: Vec<f64> = ctx.ids().map(|id| self.stats.mean(id)).collect();
        Ok(ctx.arms()[argmax_lowest_id(ctx, &scores)].id.clone())
    }

    fn exploit_select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        self.select(ctx, rng)
    }

    fn update(&mut self, _: &TrialContext, _: &ArmId, _: f64) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{Arm, FeatureVector, RngSeed};

    fn ctx(ids: &[&str]) -> TrialContext {
        let user = [0.2, 0.2, 0.2, 0.2, 0.2, 1.0];
        TrialContext::new(
            ids.iter()
                .map(|id| Arm::new(*id, FeatureVector::new(user.to_vec()).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    fn stats(entries: &[(&str, f64, u64)]) -> ContextFreeArmStats {
        let mut s = ContextFreeArmStats::new();
        for (id, clicks, views) in entries {
            s.set(*id, *clicks, *views).unwrap();
        }
        s
    }

    #[test]
    fn greedy_picks_highest_mean() {
        let s = stats(&[("a1", 2.0, 10), ("a2", 5.0, 10)]);
        let mut rng = RngSeed(1).rng();
        let c = ctx(&["a1", "a2"]);
        assert_eq!(
            eps_greedy_select(&s, &c, 0.0, &mut rng).unwrap(),
            "a2".into()
        );
    }

    #[test]
    fn greedy_on_unseen_arms_picks_lowest_id() {
        let mut rng = RngSeed(1).rng();
        let c = ctx(&["b", "a", "c"]);
        let s = ContextFreeArmStats::new();
        assert_eq!(
            eps_greedy_select(&s, &c, 0.0, &mut rng).unwrap(),
            "a".into()
        );
    }

    #[test]
    fn full_exploration_is_uniform() {
        let c = ctx(&["a1", "a2", "a3", "a4"]);
        let s = stats(&[("a1", 9.0, 10)]);
        let mut rng = RngSeed(42).rng();
        let n = 10_000;
        let mut counts = BTreeMap::new();
        for _ in 0..n {
            *counts
                .entry(eps_greedy_select(&s, &c, 1.0, &mut rng).unwrap())
                .or_insert(0) += 1;
        }
        // binomial(n, 1/4): sd = sqrt(n p (1-p))
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        for id in c.ids() {
            let k = counts[id] as f64;
            assert!((k - n as f64 / 4.0).abs() <= 3.0 * sd, "{id}: {k}");
        }
    }

    #[test]
    fn ucb1_prefers_wider_bound() {
        let s = stats(&[("a1", 50.0, 100), ("a2", 1.6, 4)]);
        let c = ctx(&["a1", "a2"]);
        // 0.5 + 1/10 = 0.6 < 0.4 + 1/2 = 0.9
        assert_eq!(ucb1_select(&s, &c, 1.0).unwrap(), "a2".into());
    }

    #[test]
    fn ucb1_plays_unseen_arm_first() {
        let s = stats(&[("a1", 90.0, 100), ("a2", 80.0, 100)]);
        let c = ctx(&["a1", "a2", "a3"]);
        assert_eq!(ucb1_select(&s, &c, 0.1).unwrap(), "a3".into());
    }

    #[test]
    fn ucb1_with_zero_alpha_is_greedy() {
        let s = stats(&[("a1", 3.0, 10), ("a2", 4.0, 10), ("a3", 1.0, 3)]);
        let c = ctx(&["a1", "a2", "a3"]);
        let mut rng = RngSeed(0).rng();
        assert_eq!(
            ucb1_select(&s, &c, 0.0).unwrap(),
            eps_greedy_select(&s, &c, 0.0, &mut rng).unwrap()
        );
    }

    #[test]
    fn omniscient_examples() {
        let mk = |id: &str, r: f64| {
            LoggedEvent::new(ctx(&["a1", "a2", "a3"]), id.into(), r, None, None).unwrap()
        };
        let mut events = Vec::new();
        for i in 0..100 {
            events.push(mk("a1", (i < 10) as u8 as f64));
            events.push(mk("a2", (i < 30) as u8 as f64));
        }
        let p = Omniscient::fit(&events).unwrap();
        let mut rng = RngSeed(0).rng();
        assert_eq!(
            p.select(&ctx(&["a1", "a2", "a3"]), &mut rng).unwrap(),
            "a2".into()
        );
        // a3 never logged: mean 0
        assert_eq!(omniscient_fit(&events).unwrap().mean(&"a3".into()), 0.0);

        let tie = omniscient_fit(&[mk("a2", 1.0), mk("a1", 1.0)]).unwrap();
        let p = Omniscient::from_stats(tie);
        assert_eq!(
            p.select(&ctx(&["a2", "a1"]), &mut rng).unwrap(),
            "a1".into()
        );
        assert!(omniscient_fit(&[]).is_err());
    }

    #[test]
    fn segment_examples() {
        assert_eq!(
            segment_assign(&[0.8, 0.05, 0.05, 0.05, 0.05, 1.0]).unwrap(),
            1
        );
        assert_eq!(
            segment_assign(&[0.2; 5].iter().chain(&[1.0]).copied().collect::<Vec<_>>()).unwrap(),
            1
        );
        assert_eq!(
            segment_assign(&[0.1, 0.15, 0.5, 0.15, 0.1, 1.0]).unwrap(),
            3
        );
        assert!(segment_assign(&[0.5, 0.5, 0.5, 0.0, 0.0, 1.0]).is_err());
        assert!(segment_assign(&[-0.1, 0.6, 0.5, 0.0, 0.0, 1.0]).is_err());
        assert!(segment_assign(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn warm_offsets_change_ranking() {
        let s = stats(&[("a1", 5.0, 10), ("a2", 4.0, 10)]);
        let c = ctx(&["a1", "a2"]);
        let mut rng = RngSeed(0).rng();

        let mut table = OffsetTable::new();
        table.insert(OffsetKey::Segment(1), "a1", -0.2);
        table.insert(OffsetKey::Segment(1), "a2", 0.2);
        let mut warm = ContextFreePolicy::epsilon_greedy(0.0)
            .unwrap()
            .with_warm_start(table);
        warm.stats[0] = s.clone();
        assert_eq!(warm.select(&c, &mut rng).unwrap(), "a2".into());

        // zero and constant offsets leave the base ranking alone
        for shift in [0.0, 0.37] {
            let mut table = OffsetTable::new();
            table.insert(OffsetKey::Segment(1), "a1", shift);
            table.insert(OffsetKey::Segment(1), "a2", shift);
            let mut p = ContextFreePolicy::epsilon_greedy(0.0)
                .unwrap()
                .with_warm_start(table);
            p.stats[0] = s.clone();
            assert_eq!(p.select(&c, &mut rng).unwrap(), "a1".into());
        }
        assert_eq!(warm_start_score(0.5, -0.2), 0.3);
    }

    #[test]
    fn offset_file_lines_round_trip() {
        let mut t = OffsetTable::new();
        t.insert(OffsetKey::Segment(2), "a1", 0.25);
        t.insert(OffsetKey::FeatureHash(0xdead_beef), "a2", -0.5);
        let mut back = OffsetTable::new();
        for line in t.to_lines() {
            back.parse_line(&line).unwrap();
        }
        assert_eq!(back.to_lines(), t.to_lines());
        assert!(back
            .parse_line(r#"{"segment":9,"arm":"a","offset":0}"#)
            .is_err());
        assert!(back.parse_line(r#"{"arm":"a","offset":0}"#).is_err());
    }

    #[test]
    fn feature_hash_takes_precedence() {
        let user = [0.2, 0.2, 0.2, 0.2, 0.2, 1.0];
        let mut t = OffsetTable::new();
        t.insert(OffsetKey::Segment(1), "a", 0.1);
        assert_eq!(t.offset(&user, &"a".into()), 0.1);
        t.insert(
            OffsetKey::FeatureHash(OffsetTable::feature_hash(&user)),
            "a",
            0.3,
        );
        assert_eq!(t.offset(&user, &"a".into()), 0.3);
        assert_eq!(t.offset(&user, &"b".into()), 0.0);
    }

    #[test]
    fn segmented_copies_are_independent() {
        let mut p = ContextFreePolicy::epsilon_greedy(0.0).unwrap().segmented();
        let seg1 = [0.9, 0.025, 0.025, 0.025, 0.025, 1.0];
        let seg3 = [0.025, 0.025, 0.9, 0.025, 0.025, 1.0];
        let mk = |u: &[f64]| {
            TrialContext::new(vec![
                Arm::new("a1", FeatureVector::new(u.to_vec()).unwrap()),
                Arm::new("a2", FeatureVector::new(u.to_vec()).unwrap()),
            ])
            .unwrap()
        };
        p.update(&mk(&seg1), &"a2".into(), 1.0).unwrap();
        let mut rng = RngSeed(0).rng();
        assert_eq!(p.select(&mk(&seg1), &mut rng).unwrap(), "a2".into());
        assert_eq!(p.select(&mk(&seg3), &mut rng).unwrap(), "a1".into());
        assert_eq!(p.stats(2).total_views(), 0);
    }
}
