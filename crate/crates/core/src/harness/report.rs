use serde::{Deserialize, Serialize};

use super::{Algorithm, Bucket, ReportRow};

/// Seed-averaged statistics of one (algorithm, parameter, fraction, bucket).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub parameter: Option<f64>,
    pub data_fraction: f64,
    pub bucket: Bucket,
    pub seeds: usize,
    pub mean_ctr: f64,
    pub sd_ctr: f64,
    pub mean_lift: Option<f64>,
    pub exhausted: usize,
}

/// Per algorithm and fraction: the parameter with the best mean
/// learning-bucket CTR, and how it does in deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedRow {
    pub algorithm: Algorithm,
    pub parameter: Option<f64>,
    pub data_fraction: f64,
    pub learn_ctr: f64,
    pub deploy_ctr: f64,
    pub deploy_lift: Option<f64>,
}

type Key = (Algorithm, Option<u64>, u64, Bucket);

fn key(r: &ReportRow) -> Key {
    (
        r.algorithm,
        r.parameter.map(f64::to_bits),
        r.data_fraction.to_bits(),
        r.bucket,
    )
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Groups rows over seeds, keeping first-appearance order.
pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(Key, Vec<&ReportRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(k, _)| *k == key(r)) {
            Some((_, v)) => v.push(r),
            None => groups.push((key(r), vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(_, g)| {
            let ctrs: Vec<f64> = g.iter().map(|r| r.ctr).collect();
            let m = mean(&ctrs);
            let sd = if ctrs.len() > 1 {
                (ctrs.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (ctrs.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            let lifts: Option<Vec<f64>> = g.iter().map(|r| r.lift_vs_baseline).collect();
            SummaryRow {
                algorithm: g[0].algorithm,
                parameter: g[0].parameter,
                data_fraction: g[0].data_fraction,
                bucket: g[0].bucket,
                seeds: g.len(),
                mean_ctr: m,
                sd_ctr: sd,
                mean_lift: lifts.map(|l| mean(&l)),
                exhausted: g.iter().filter(|r| r.exhausted).count(),
            }
        })
        .collect()
}

/// Picks each algorithm's parameter on the learning bucket.
pub fn tuned_table(summary: &[SummaryRow]) -> Vec<TunedRow> {
    let mut out: Vec<TunedRow> = Vec::new();
    for learn in summary.iter().filter(|s| s.bucket == Bucket::Learn) {
        let Some(deploy) = summary.iter().find(|s| {
            s.bucket == Bucket::Deploy
                && s.algorithm == learn.algorithm
                && s.parameter.map(f64::to_bits) == learn.parameter.map(f64::to_bits)
                && s.data_fraction.to_bits() == learn.data_fraction.to_bits()
        }) else {
            continue;
        };
        let row = TunedRow {
            algorithm: learn.algorithm,
            parameter: learn.parameter,
            data_fraction: learn.data_fraction,
            learn_ctr: learn.mean_ctr,
            deploy_ctr: deploy.mean_ctr,
            deploy_lift: deploy.mean_lift,
        };
        match out.iter_mut().find(|t| {
            t.algorithm == row.algorithm && t.data_fraction.to_bits() == row.data_fraction.to_bits()
        }) {
            Some(t) if row.learn_ctr > t.learn_ctr => *t = row,
            Some(_) => {}
            None => out.push(row),
        }
    }
    out
}
