//! Statistical properties of the replay estimator.

use linucb::evaluator::{
    bucketed_replay, replay_evaluate, run_replay, RejectionFilter, ReplayOptions, ReplayPlan,
};
use linucb::policies::{ContextFreePolicy, FixedArm, LinearPolicy, Omniscient};
use linucb::synthworld::{gen_stream, SyntheticWorld, WorldSpec};
use linucb::{
    Arm, ArmId, FeatureVector, LoggedEvent, Policy, RandomPolicy, Result, RngSeed, TrialContext,
};
use rand::{Rng, RngCore};

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Online CTR of `policy` over its first `t` trials in `world`.
fn online_ctr(
    policy: &mut dyn Policy,
    world: &SyntheticWorld,
    t: usize,
    rng: &mut dyn RngCore,
) -> f64 {
    let mut total = 0.0;
    for i in 0..t {
        let ctx = world.sample_context(i as u64, rng).unwrap();
        let means = world.expected_payoffs(&ctx).unwrap();
        let pick = policy.select(&ctx, rng).unwrap();
        let mu = means[ctx.position(&pick).unwrap()];
        let r = if rng.random::<f64>() < mu { 1.0 } else { 0.0 };
        total += r;
        policy.update(&ctx, &pick, r).unwrap();
    }
    total / t as f64
}

#[test]
fn learning_policy_replay_matches_online_runs() {
    // The replay CTR of a learning policy over T retained events has the
    // same expectation as its online CTR over its first T trials.
    let world = WorldSpec::disjoint(6, 5).build().unwrap();
    let t = 400;
    let runs = 40;
    let mut replay = Vec::new();
    let mut online = Vec::new();
    for s in 0..runs {
        let stream = gen_stream(&world, 5 * t + 600, &mut RngSeed(s).derive(1).rng()).unwrap();
        let mut p = LinearPolicy::linucb_disjoint(6, 1.0).unwrap();
        let r = replay_evaluate(&mut p, &stream, t, &mut RngSeed(s).rng()).unwrap();
        assert!(!r.exhausted);
        replay.push(r.ctr());
        let mut p = LinearPolicy::linucb_disjoint(6, 1.0).unwrap();
        online.push(online_ctr(
            &mut p,
            &world,
            t,
            &mut RngSeed(s).derive(2).rng(),
        ));
    }
    let (m1, s1) = mean_sd(&replay);
    let (m2, s2) = mean_sd(&online);
    let se = ((s1 * s1 + s2 * s2) / runs as f64).sqrt();
    assert!(
        (m1 - m2).abs() <= 3.0 * se,
        "replay {m1} vs online {m2}, se {se}"
    );
}

#[test]
fn retention_rate_is_one_over_k() {
    let world = WorldSpec::disjoint(4, 5).build().unwrap();
    let stream = gen_stream(&world, 60_000, &mut RngSeed(3).rng()).unwrap();
    // a learning policy: the retention probability must not depend on history
    let mut p = LinearPolicy::linucb_disjoint(4, 0.5).unwrap();
    let r = replay_evaluate(&mut p, &stream, 10_000, &mut RngSeed(4).rng()).unwrap();
    let rate = r.retained as f64 / r.consumed as f64;
    let sd = (0.2 * 0.8 / r.consumed as f64).sqrt();
    assert!((rate - 0.2).abs() <= 3.0 * sd, "rate {rate}");
}

#[test]
fn consumed_per_retained_is_k() {
    let world = WorldSpec::disjoint(4, 5).build().unwrap();
    let stream = gen_stream(&world, 12_000, &mut RngSeed(8).rng()).unwrap();
    let ratios: Vec<f64> = (0..30)
        .map(|s| {
            let mut p = FixedArm("a03".into());
            let r = replay_evaluate(&mut p, &stream, 2000, &mut RngSeed(s).rng()).unwrap();
            r.consumed as f64 / r.retained as f64
        })
        .collect();
    // every seed replays the same stream with a deterministic policy
    assert!(ratios.windows(2).all(|w| w[0] == w[1]));
    // consumed is negative binomial: mean T·K, variance T·K(K−1)
    let sd = (2000.0f64 * 5.0 * 4.0).sqrt() / 2000.0;
    assert!((ratios[0] - 5.0).abs() <= 3.0 * sd, "{}", ratios[0]);
}

fn single_arm_stream(n: usize, rng: &mut dyn RngCore) -> Vec<LoggedEvent> {
    (0..n)
        .map(|_| {
            let ctx =
                TrialContext::new(vec![Arm::new("a1", FeatureVector::new(vec![1.0]).unwrap())])
                    .unwrap();
            let r = f64::from(u8::from(rng.random::<f64>() < 0.3));
            LoggedEvent::new(ctx, "a1".into(), r, None, None).unwrap()
        })
        .collect()
}

#[test]
fn update_count_follows_data_fraction() {
    let stream = single_arm_stream(100_000, &mut RngSeed(1).rng());
    let mut p = ContextFreePolicy::epsilon_greedy(0.1).unwrap();
    let r = bucketed_replay(&mut p, &stream, 100_000, 1.0, 0.1, &mut RngSeed(2).rng()).unwrap();
    assert_eq!(r.learning.retained, 100_000);
    let sd = (100_000.0f64 * 0.1 * 0.9).sqrt();
    assert!((r.learning.updates as f64 - 10_000.0).abs() <= 3.0 * sd);
}

#[test]
fn frozen_policy_buckets_agree() {
    let world = SyntheticWorld::static_arms(&[0.1, 0.3, 0.5, 0.2]).unwrap();
    let stream = gen_stream(&world, 200_000, &mut RngSeed(5).rng()).unwrap();
    let mut p = Omniscient::fit(&stream).unwrap();
    let r = bucketed_replay(&mut p, &stream, 30_000, 0.5, 1.0, &mut RngSeed(6).rng()).unwrap();
    let (a, b) = (&r.learning, &r.deployment);
    let se = (a.standard_error().powi(2) + b.standard_error().powi(2)).sqrt();
    assert!((a.ctr() - b.ctr()).abs() <= 3.0 * se);
    assert!((a.ctr() - 0.5).abs() <= 3.0 * a.standard_error());
}

#[test]
fn full_exploration_learns_but_deploys_greedily() {
    let means = [0.05, 0.1, 0.4, 0.15];
    let world = SyntheticWorld::static_arms(&means).unwrap();
    let stream = gen_stream(&world, 200_000, &mut RngSeed(7).rng()).unwrap();
    let mut p = ContextFreePolicy::epsilon_greedy(1.0).unwrap();
    let r = bucketed_replay(&mut p, &stream, 30_000, 0.5, 1.0, &mut RngSeed(8).rng()).unwrap();
    let avg = means.iter().sum::<f64>() / 4.0;
    assert!((r.learning.ctr() - avg).abs() <= 3.0 * r.learning.standard_error());
    assert!(r.deployment.ctr() > r.learning.ctr());
    assert!(r.deployment.ctr() > 0.35);
}

/// Counts update calls so skipped events can be checked for side effects.
struct Counting<P> {
    inner: P,
    updates: usize,
}

impl<P: Policy> Policy for Counting<P> {
    fn name(&self) -> String {
        self.inner.name()
    }
    fn select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        self.inner.select(ctx, rng)
    }
    fn exploit_select(&self, ctx: &TrialContext, rng: &mut dyn RngCore) -> Result<ArmId> {
        self.inner.exploit_select(ctx, rng)
    }
    fn update(&mut self, ctx: &TrialContext, chosen: &ArmId, reward: f64) -> Result<()> {
        self.updates += 1;
        self.inner.update(ctx, chosen, reward)
    }
}

#[test]
fn skipped_events_leave_no_trace() {
    let world = WorldSpec::disjoint(3, 4).build().unwrap();
    let stream = gen_stream(&world, 5000, &mut RngSeed(9).rng()).unwrap();
    let mut p = Counting {
        inner: LinearPolicy::linucb_disjoint(3, 1.0).unwrap(),
        updates: 0,
    };
    let r = replay_evaluate(&mut p, &stream, 500, &mut RngSeed(1).rng()).unwrap();
    assert_eq!(p.updates, r.retained);
    let plan = ReplayPlan::new(500).learning_fraction(0.3);
    let mut q = Counting {
        inner: LinearPolicy::linucb_disjoint(3, 1.0).unwrap(),
        updates: 0,
    };
    let b = run_replay(&mut q, &stream, &plan, &mut RngSeed(1).rng()).unwrap();
    assert_eq!(q.updates, b.learning.retained);
    assert_eq!(b.learning.retained + b.deployment.retained, 500);

    // same inputs, same result
    let mut p2 = LinearPolicy::linucb_disjoint(3, 1.0).unwrap();
    let r2 = replay_evaluate(&mut p2, &stream, 500, &mut RngSeed(1).rng()).unwrap();
    assert_eq!((r.consumed, r.total_payoff), (r2.consumed, r2.total_payoff));
}

/// Events logged with propensities 0.5 / 0.25 / 0.25 over three arms.
fn skewed_stream(n: usize, means: [f64; 3], rng: &mut dyn RngCore) -> Vec<LoggedEvent> {
    let probs = [0.5, 0.25, 0.25];
    (0..n)
        .map(|_| {
            let ctx = TrialContext::new(
                ["a1", "a2", "a3"]
                    .iter()
                    .map(|id| Arm::new(*id, FeatureVector::new(vec![1.0]).unwrap()))
                    .collect(),
            )
            .unwrap();
            let u: f64 = rng.random();
            let i = if u < 0.5 {
                0
            } else if u < 0.75 {
                1
            } else {
                2
            };
            let r = f64::from(u8::from(rng.random::<f64>() < means[i]));
            LoggedEvent::new(
                ctx.clone(),
                ctx.arms()[i].id.clone(),
                r,
                Some(probs[i]),
                None,
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn rejection_filter_makes_choices_uniform() {
    let stream = skewed_stream(100_000, [0.1, 0.2, 0.3], &mut RngSeed(1).rng());
    let filter = RejectionFilter::from_stream(&stream).unwrap();
    assert_eq!(filter.p_min, 0.25);
    let mut rng = RngSeed(2).rng();
    let mut counts = [0usize; 3];
    for e in &stream {
        if linucb::evaluator::rejection_accept(e, filter.p_min, &mut rng).unwrap() {
            counts[e.chosen_index()] += 1;
        }
    }
    let n: usize = counts.iter().sum();
    let sd = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 / 3.0).abs() <= 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn rejection_replay_is_unbiased_on_skewed_logs() {
    let means = [0.1, 0.2, 0.3];
    let stream = skewed_stream(200_000, means, &mut RngSeed(3).rng());
    assert!(replay_evaluate(&mut RandomPolicy, &stream, 10, &mut RngSeed(0).rng()).is_err());
    let opts = ReplayOptions {
        rejection: Some(RejectionFilter::from_stream(&stream).unwrap()),
        ..ReplayOptions::default()
    };
    let plan = ReplayPlan::new(20_000).options(opts);
    let mut p = RandomPolicy;
    let r = run_replay(&mut p, &stream, &plan, &mut RngSeed(4).rng())
        .unwrap()
        .learning;
    // a uniform policy's CTR is the plain average even though the log favours a1
    let avg = means.iter().sum::<f64>() / 3.0;
    assert!(
        (r.ctr() - avg).abs() <= 3.0 * r.standard_error(),
        "{}",
        r.ctr()
    );
}
