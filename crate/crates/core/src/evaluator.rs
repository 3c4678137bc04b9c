//! Offline evaluation of a policy from uniformly logged events.
//!
//! The replay estimator steps through the log and keeps an event only when
//! the evaluated policy, given the history retained so far, picks the same
//! arm the logging policy did. Retained events extend the history and feed
//! the policy's update; skipped events leave no trace. Under uniform
//! logging each event is retained with probability `1/K` whatever the
//! history, so the retained histories are distributed exactly as if the
//! policy had interacted with the world, and the average retained payoff
//! is an unbiased estimate of the policy's CTR.
//!
//! [`bucketed_replay`] adds the learning/deployment traffic split and the
//! data-sparsity gate; [`regret_curve`] runs a policy directly against a
//! synthetic world.

use std::borrow::Borrow;

use rand::{Rng, RngCore};

use crate::context::{ArmId, History, LoggedEvent};
use crate::error::{Error, Result};
use crate::policies::Policy;
use crate::synthworld::SyntheticWorld;

/// Tolerance when checking that a logged propensity equals `1/K`.
const UNIFORM_TOLERANCE: f64 = 1e-9;

/// Outcome of one replay over a bucket of traffic.
#[derive(Debug, Clone, Default)]
pub struct ReplayResult {
    /// Events retained (`T`).
    pub retained: usize,
    /// Stream events routed to this bucket and examined.
    pub consumed: usize,
    /// Sum of retained payoffs (`R_T`).
    pub total_payoff: f64,
    /// Retained events whose payoff fed a policy update.
    pub updates: usize,
    /// Payoff of each retained event, when requested.
    pub per_trial_payoffs: Option<Vec<f64>>,
    /// Retained history, when requested.
    pub history: Option<History>,
    /// The stream ran out before the target number of events was retained.
    pub exhausted: bool,
}

impl ReplayResult {
    /// `R_T / T`, or 0 when nothing was retained.
    pub fn ctr(&self) -> f64 {
        if self.retained == 0 {
            0.0
        } else {
            self.total_payoff / self.retained as f64
        }
    }

    /// Binomial standard error of [`ReplayResult::ctr`].
    pub fn standard_error(&self) -> f64 {
        if self.retained == 0 {
            return f64::INFINITY;
        }
        let p = self.ctr();
        (p * (1.0 - p) / self.retained as f64).sqrt()
    }

    /// Turns an exhausted run into an error.
    pub fn require_complete(self) -> Result<Self> {
        if self.exhausted {
            Err(Error::InvalidParameter(format!(
                "stream exhausted after {} consumed events with {} retained",
                self.consumed, self.retained
            )))
        } else {
            Ok(self)
        }
    }

    fn retain(&mut self, event: &LoggedEvent, record: &ReplayOptions) {
        self.retained += 1;
        self.total_payoff += event.reward;
        if record.per_trial_payoffs {
            self.per_trial_payoffs
                .get_or_insert_with(Vec::new)
                .push(event.reward);
        }
        if record.history {
            self.history.get_or_insert_with(History::new).push(
                event.context.clone(),
                event.chosen.clone(),
                event.reward,
            );
        }
    }
}

/// Learning and deployment bucket estimates of one policy.
#[derive(Debug, Clone)]
pub struct BucketReport {
    pub learning: ReplayResult,
    pub deployment: ReplayResult,
    pub learning_fraction: f64,
}

/// Pre-filter that turns a non-uniformly logged stream into a uniform one.
///
/// An event is accepted with probability `p_min / propensity`, so that every
/// arm of a context survives with the same probability `p_min`. `p_min`
/// must not exceed any logging propensity of any arm in the stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionFilter {
    pub p_min: f64,
}

impl RejectionFilter {
    pub fn new(p_min: f64) -> Result<Self> {
        if !(p_min > 0.0 && p_min <= 1.0) {
            return Err(Error::InvalidPropensity(p_min));
        }
        Ok(Self { p_min })
    }

    /// `p_min` taken as the smallest logged propensity of the stream.
    pub fn from_stream(events: &[LoggedEvent]) -> Result<Self> {
        let p = events
            .iter()
            .map(|e| e.propensity)
            .fold(f64::INFINITY, f64::min);
        Self::new(p)
    }
}

/// Accepts `event` with probability `p_min / propensity(chosen)`.
pub fn rejection_accept(event: &LoggedEvent, p_min: f64, rng: &mut dyn RngCore) -> Result<bool> {
    if !(event.propensity > 0.0) {
        return Err(Error::InvalidPropensity(event.propensity));
    }
    if !(p_min > 0.0) || p_min > event.propensity * (1.0 + UNIFORM_TOLERANCE) {
        return Err(Error::InvalidParameter(format!(
            "p_min {p_min} must lie in (0, propensity = {}]",
            event.propensity
        )));
    }
    let accept = p_min / event.propensity;
    if accept >= 1.0 {
        return Ok(true);
    }
    Ok(rng.random::<f64>() < accept)
}

/// Gate for the sparsity experiments: `true` when a retained learning event
/// may update the policy. Draws from `rng` only for `0 < fraction < 1`.
pub fn subsample_gate(fraction: f64, rng: &mut dyn RngCore) -> bool {
    if fraction >= 1.0 {
        true
    } else if fraction <= 0.0 {
        false
    } else {
        rng.random::<f64>() < fraction
    }
}

/// What a replay run records and how it treats the stream.
#[derive(Debug, Clone, Default)]
pub struct ReplayOptions {
    pub per_trial_payoffs: bool,
    pub history: bool,
    /// Enables non-uniform logs through rejection sampling.
    pub rejection: Option<RejectionFilter>,
}

fn check_uniform(event: &LoggedEvent) -> Result<()> {
    let expected = 1.0 / event.num_arms() as f64;
    if (event.propensity - expected).abs() > UNIFORM_TOLERANCE {
        return Err(Error::NonUniformLogging {
            expected,
            found: event.propensity,
        });
    }
    Ok(())
}

/// Full replay plan: target retained count, traffic split and update gate.
#[derive(Debug, Clone)]
pub struct ReplayPlan {
    /// Stop once this many events are retained across both buckets.
    pub target: usize,
    /// Probability that a stream event is routed to the learning bucket.
    pub learning_fraction: f64,
    /// Probability that a retained learning event updates the policy.
    pub data_fraction: f64,
    pub options: ReplayOptions,
}

impl ReplayPlan {
    pub fn new(target: usize) -> Self {
        Self {
            target,
            learning_fraction: 1.0,
            data_fraction: 1.0,
            options: ReplayOptions::default(),
        }
    }

    pub fn learning_fraction(mut self, f: f64) -> Self {
        self.learning_fraction = f;
        self
    }

    pub fn data_fraction(mut self, f: f64) -> Self {
        self.data_fraction = f;
        self
    }

    pub fn options(mut self, options: ReplayOptions) -> Self {
        self.options = options;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.target == 0 {
            return Err(Error::InvalidParameter(
                "replay target T must be positive".into(),
            ));
        }
        if !(self.learning_fraction > 0.0 && self.learning_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "learning fraction {} outside (0, 1]",
                self.learning_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.data_fraction) {
            return Err(Error::InvalidParameter(format!(
                "data fraction {} outside [0, 1]",
                self.data_fraction
            )));
        }
        Ok(())
    }
}

/// Runs a [`ReplayPlan`]. For every stream event, in order:
///
/// 1. with rejection enabled, drop it unless [`rejection_accept`] passes;
/// 2. route it to the learning bucket with probability `learning_fraction`;
/// 3. learning: retain it if `select` matches the logged arm, then update
///    the policy if [`subsample_gate`] passes;
///    deployment: retain it if `exploit_select` matches; never update.
///
/// Random draws happen only where a fraction lies strictly inside (0, 1),
/// so a plan with both fractions at 1 consumes randomness exactly like the
/// plain estimator. The stream may yield owned events, so a log can be
/// produced lazily instead of held in memory.
pub fn run_replay<P, I>(
    policy: &mut P,
    stream: I,
    plan: &ReplayPlan,
    rng: &mut dyn RngCore,
) -> Result<BucketReport>
where
    P: Policy + ?Sized,
    I: IntoIterator,
    I::Item: Borrow<LoggedEvent>,
{
    plan.validate()?;
    let opts = &plan.options;
    let mut learning = ReplayResult::default();
    let mut deployment = ReplayResult::default();
    let mut done = false;
    for event in stream {
        let event = event.borrow();
        if let Some(filter) = opts.rejection {
            if !rejection_accept(event, filter.p_min, rng)? {
                continue;
            }
        } else {
            check_uniform(event)?;
        }
        let to_learning =
            plan.learning_fraction >= 1.0 || rng.random::<f64>() < plan.learning_fraction;
        if to_learning {
            learning.consumed += 1;
            let pick: ArmId = policy.select(&event.context, rng)?;
            if pick == event.chosen {
                learning.retain(event, opts);
                if subsample_gate(plan.data_fraction, rng) {
                    policy.update(&event.context, &event.chosen, event.reward)?;
                    learning.updates += 1;
                }
            }
        } else {
            deployment.consumed += 1;
            if policy.exploit_select(&event.context, rng)? == event.chosen {
                deployment.retain(event, opts);
            }
        }
        if learning.retained + deployment.retained >= plan.target {
            done = true;
            break;
        }
    }
    learning.exhausted = !done;
    deployment.exhausted = !done;
    Ok(BucketReport {
        learning,
        deployment,
        learning_fraction: plan.learning_fraction,
    })
}

/// The plain replay estimator: returns after `t` retained events or flags
/// exhaustion with the partial result.
pub fn replay_evaluate<P, I>(
    policy: &mut P,
    stream: I,
    t: usize,
    rng: &mut dyn RngCore,
) -> Result<ReplayResult>
where
    P: Policy + ?Sized,
    I: IntoIterator,
    I::Item: Borrow<LoggedEvent>,
{
    replay_evaluate_with(policy, stream, t, ReplayOptions::default(), rng)
}

pub fn replay_evaluate_with<P, I>(
    policy: &mut P,
    stream: I,
    t: usize,
    options: ReplayOptions,
    rng: &mut dyn RngCore,
) -> Result<ReplayResult>
where
    P: Policy + ?Sized,
    I: IntoIterator,
    I::Item: Borrow<LoggedEvent>,
{
    let plan = ReplayPlan::new(t).options(options);
    Ok(run_replay(policy, stream, &plan, rng)?.learning)
}

/// Learning/deployment split replay with a learning-data fraction.
pub fn bucketed_replay<P, I>(
    policy: &mut P,
    stream: I,
    t: usize,
    learning_fraction: f64,
    data_fraction: f64,
    rng: &mut dyn RngCore,
) -> Result<BucketReport>
where
    P: Policy + ?Sized,
    I: IntoIterator,
    I::Item: Borrow<LoggedEvent>,
{
    let plan = ReplayPlan::new(t)
        .learning_fraction(learning_fraction)
        .data_fraction(data_fraction);
    run_replay(policy, stream, &plan, rng)
}

/// Cumulative regret at the requested checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub points: Vec<(usize, f64)>,
}

impl RegretCurve {
    pub fn at(&self, t: usize) -> Option<f64> {
        self.points.iter().find(|(c, _)| *c == t).map(|(_, r)| *r)
    }

    pub fn last(&self) -> Option<(usize, f64)> {
        self.points.last().copied()
    }
}

/// Runs `policy` online against `world` for `t` trials and reports
/// `Σ (μ*_t − μ_{chosen,t})` at each checkpoint, using true means.
/// Rewards fed to the policy are Bernoulli draws of the chosen arm's mean.
pub fn regret_curve<P: Policy + ?Sized>(
    policy: &mut P,
    world: &SyntheticWorld,
    t: usize,
    checkpoints: &[usize],
    rng: &mut dyn RngCore,
) -> Result<RegretCurve> {
    let mut marks: Vec<usize> = checkpoints.iter().copied().filter(|c| *c <= t).collect();
    marks.sort_unstable();
    marks.dedup();
    let mut next = marks.iter().peekable();
    let mut points = Vec::with_capacity(marks.len());
    let mut regret = 0.0;
    for trial in 1..=t {
        let ctx = world.sample_context(trial as u64 - 1, rng)?;
        let means = world.expected_payoffs(&ctx)?;
        let pick = policy.select(&ctx, rng)?;
        let i = ctx.position(&pick).ok_or(Error::UnknownArm(pick.clone()))?;
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        regret += best - means[i];
        let reward = if rng.random::<f64>() < means[i] {
            1.0
        } else {
            0.0
        };
        policy.update(&ctx, &pick, reward)?;
        while next.peek().is_some_and(|c| **c == trial) {
            points.push((trial, regret));
            next.next();
        }
    }
    Ok(RegretCurve { points })
}
