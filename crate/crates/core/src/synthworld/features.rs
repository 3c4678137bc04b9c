//! User/article feature construction: support-filtered raw profiles, a
//! bilinear logistic model, projection into the induced space, k-means
//! with Gaussian-kernel memberships, and the 36-dim interaction vector.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::context::{Arm, ArmId, FeatureVector, TrialContext};
use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};

/// Dimension of reduced user and article features (5 memberships + 1).
pub const REDUCED_DIM: usize = 6;

/// Row-major flattening of `u ⊗ v`.
pub fn outer_flat(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter()
        .flat_map(|a| v.iter().map(move |b| a * b))
        .collect()
}

/// `vec(user ⊗ article)` for two reduced 6-vectors.
pub fn interaction_features(user: &[f64], article: &[f64]) -> Result<Vec<f64>> {
    for v in [user, article] {
        if v.len() != REDUCED_DIM {
            return Err(Error::DimensionMismatch {
                expected: REDUCED_DIM,
                found: v.len(),
            });
        }
    }
    Ok(outer_flat(user, article))
}

/// Trial context where every arm's `x` is the user vector and `z` is the
/// user/article interaction.
pub fn hybrid_context(user: &[f64], articles: &[(ArmId, Vec<f64>)]) -> Result<TrialContext> {
    let arms = articles
        .iter()
        .map(|(id, article)| {
            Ok(Arm::with_shared(
                id.clone(),
                FeatureVector::new(user.to_vec())?,
                FeatureVector::new(interaction_features(user, article)?)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    TrialContext::new(arms)
}

/// Fraction of rows in which each column is non-zero.
pub fn support(rows: &[Vec<f64>]) -> Vec<f64> {
    let Some(width) = rows.first().map(Vec::len) else {
        return Vec::new();
    };
    let mut counts = vec![0usize; width];
    for row in rows {
        for (c, v) in counts.iter_mut().zip(row) {
            *c += usize::from(*v != 0.0);
        }
    }
    counts
        .iter()
        .map(|c| *c as f64 / rows.len() as f64)
        .collect()
}

/// Columns whose support is at least `min_support`.
pub fn select_by_support(rows: &[Vec<f64>], min_support: f64) -> Vec<usize> {
    support(rows)
        .iter()
        .enumerate()
        .filter(|(_, s)| **s >= min_support)
        .map(|(i, _)| i)
        .collect()
}

/// Scales to unit length (zero vectors stay zero) and appends a constant 1.
pub fn normalize_profile(raw: &[f64]) -> Vec<f64> {
    let norm = dot(raw, raw).sqrt();
    let mut out: Vec<f64> = if norm > 0.0 {
        raw.iter().map(|v| v / norm).collect()
    } else {
        raw.to_vec()
    };
    out.push(1.0);
    out
}

/// Raw user/article profiles after support filtering and normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawProfiles {
    pub users: Vec<Vec<f64>>,
    pub articles: Vec<Vec<f64>>,
    pub user_columns: Vec<usize>,
    pub article_columns: Vec<usize>,
}

impl RawProfiles {
    pub fn build(users: &[Vec<f64>], articles: &[Vec<f64>], min_support: f64) -> Result<Self> {
        let prep = |rows: &[Vec<f64>], what: &str| -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
            let width = rows
                .first()
                .map(Vec::len)
                .ok_or_else(|| Error::DegenerateData(format!("no {what} profiles")))?;
            if rows.iter().any(|r| r.len() != width) {
                return Err(Error::Malformed(format!("ragged {what} profiles")));
            }
            let cols = select_by_support(rows, min_support);
            let out = rows
                .iter()
                .map(|r| normalize_profile(&cols.iter().map(|c| r[*c]).collect::<Vec<_>>()))
                .collect();
            Ok((out, cols))
        };
        let (users, user_columns) = prep(users, "user")?;
        let (articles, article_columns) = prep(articles, "article")?;
        Ok(Self {
            users,
            articles,
            user_columns,
            article_columns,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClickExample {
    pub user: Vec<f64>,
    pub article: Vec<f64>,
    pub clicked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrConfig {
    pub l2: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            tolerance: 1e-5,
            max_iter: 10_000,
        }
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Fits `P(click) = σ(φ_uᵀ W φ_a)` by accelerated gradient descent on the
/// mean logistic loss plus `l2/2 · ‖W‖²`. Stops once the gradient norm
/// reaches `tolerance` or after `max_iter` iterations.
pub fn fit_bilinear_lr(clicks: &[ClickExample], cfg: &LrConfig) -> Result<DenseMatrix> {
    let first = clicks
        .first()
        .ok_or_else(|| Error::DegenerateData("no click examples".into()))?;
    let (du, da) = (first.user.len(), first.article.len());
    if du == 0 || da == 0 {
        return Err(Error::EmptyFeatures);
    }
    for ex in clicks {
        if ex.user.len() != du || ex.article.len() != da {
            return Err(Error::DimensionMismatch {
                expected: du * da,
                found: ex.user.len() * ex.article.len(),
            });
        }
    }
    let positives = clicks.iter().filter(|e| e.clicked).count();
    if positives == 0 || positives == clicks.len() {
        return Err(Error::DegenerateData("all labels are identical".into()));
    }
    let n = clicks.len() as f64;
    // Lipschitz bound of the gradient: σ' ≤ 1/4.
    let lipschitz = 0.25
        * clicks
            .iter()
            .map(|e| dot(&e.user, &e.user) * dot(&e.article, &e.article))
            .fold(0.0, f64::max)
        + cfg.l2;
    let step = 1.0 / lipschitz;
    let gradient = |w: &DenseMatrix| {
        let mut grad = DenseMatrix::zeros(du, da);
        grad.add_scaled(w, cfg.l2);
        for ex in clicks {
            let p = sigmoid(dot(&ex.user, &w.matvec(&ex.article)));
            let resid = (p - f64::from(u8::from(ex.clicked))) / n;
            grad.add_outer(&ex.user, &ex.article, resid);
        }
        grad
    };
    // Nesterov momentum, restarted whenever the step opposes the momentum.
    let mut w = DenseMatrix::zeros(du, da);
    let mut y = w.clone();
    let mut t = 1.0f64;
    for _ in 0..cfg.max_iter {
        let grad = gradient(&y);
        if grad.frobenius_norm() <= cfg.tolerance {
            w = y;
            break;
        }
        let mut next = y.clone();
        next.add_scaled(&grad, -step);
        let mut momentum = next.clone();
        momentum.add_scaled(&w, -1.0);
        let uphill = dot(grad.as_slice(), momentum.as_slice()) > 0.0;
        let t_next = if uphill {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        y = next.clone();
        if !uphill {
            y.add_scaled(&momentum, (t - 1.0) / t_next);
        }
        w = next;
        t = t_next;
    }
    Ok(w)
}

/// `ψ_u = φ_uᵀ W`.
pub fn project_users(w: &DenseMatrix, phi_u: &[f64]) -> Result<Vec<f64>> {
    if phi_u.len() != w.rows() {
        return Err(Error::DimensionMismatch {
            expected: w.rows(),
            found: phi_u.len(),
        });
    }
    Ok(w.matvec_t(phi_u))
}

/// `ψ_a = W φ_a`.
pub fn project_articles(w: &DenseMatrix, phi_a: &[f64]) -> Result<Vec<f64>> {
    if phi_a.len() != w.cols() {
        return Err(Error::DimensionMismatch {
            expected: w.cols(),
            found: phi_a.len(),
        });
    }
    Ok(w.matvec(phi_a))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl KMeans {
    pub const MAX_ITER: usize = 300;
    pub const TOLERANCE: f64 = 1e-8;

    pub fn fit(points: &[Vec<f64>], n_clusters: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if n_clusters == 0 {
            return Err(Error::InvalidParameter(
                "n_clusters must be positive".into(),
            ));
        }
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points
            .iter()
            .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Malformed(
                "points must share a dimension and be finite".into(),
            ));
        }
        let distinct: HashSet<Vec<u64>> = points
            .iter()
            .map(|p| p.iter().map(|v| v.to_bits()).collect())
            .collect();
        if distinct.len() < n_clusters {
            return Err(Error::DegenerateData(format!(
                "{} distinct points for {n_clusters} clusters",
                distinct.len()
            )));
        }

        let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
        let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
        while centroids.len() < n_clusters {
            let total: f64 = d2.iter().sum();
            let mut target = rng.random::<f64>() * total;
            let mut pick = d2.iter().rposition(|v| *v > 0.0).unwrap_or(0);
            for (i, v) in d2.iter().enumerate() {
                if *v > 0.0 && target < *v {
                    pick = i;
                    break;
                }
                target -= v;
            }
            let c = points[pick].clone();
            for (dv, p) in d2.iter_mut().zip(points) {
                *dv = dv.min(sq_dist(p, &c));
            }
            centroids.push(c);
        }

        let mut km = Self {
            centroids,
            iterations: 0,
        };
        while km.iterations < Self::MAX_ITER {
            km.iterations += 1;
            let mut sums = vec![vec![0.0; dim]; n_clusters];
            let mut counts = vec![0usize; n_clusters];
            for p in points {
                let j = km.assign(p);
                counts[j] += 1;
                sums[j].iter_mut().zip(p).for_each(|(s, v)| *s += v);
            }
            let mut shift = 0.0f64;
            for ((c, s), n) in km.centroids.iter_mut().zip(sums).zip(counts) {
                if n == 0 {
                    continue;
                }
                let next: Vec<f64> = s.iter().map(|v| v / n as f64).collect();
                shift = shift.max(sq_dist(c, &next).sqrt());
                *c = next;
            }
            if shift <= Self::TOLERANCE {
                break;
            }
        }
        Ok(km)
    }

    /// Nearest centroid, lowest index on ties.
    pub fn assign(&self, p: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(p, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        best
    }

    /// Median pairwise centroid distance divided by √2.
    pub fn default_bandwidth(&self) -> f64 {
        let mut dists = Vec::new();
        for i in 0..self.centroids.len() {
            for j in i + 1..self.centroids.len() {
                dists.push(sq_dist(&self.centroids[i], &self.centroids[j]).sqrt());
            }
        }
        if dists.is_empty() {
            return 1.0;
        }
        dists.sort_by(f64::total_cmp);
        let m = dists.len();
        let median = if m % 2 == 1 {
            dists[m / 2]
        } else {
            0.5 * (dists[m / 2 - 1] + dists[m / 2])
        };
        if median > 0.0 {
            median / std::f64::consts::SQRT_2
        } else {
            1.0
        }
    }

    /// Normalized Gaussian-kernel weights to each centroid, then a constant 1.
    pub fn membership(&self, p: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidParameter(format!("bandwidth {bandwidth}")));
        }
        let d2: Vec<f64> = self.centroids.iter().map(|c| sq_dist(p, c)).collect();
        let nearest = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let mut w: Vec<f64> = d2
            .iter()
            .map(|d| (-(d - nearest) / (2.0 * bandwidth * bandwidth)).exp())
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w.push(1.0);
        Ok(w)
    }
}

/// Clusters `points` and returns each one's membership vector, along with
/// the fitted model and the bandwidth used.
pub fn kmeans_membership(
    points: &[Vec<f64>],
    n_clusters: usize,
    bandwidth: Option<f64>,
    rng: &mut dyn RngCore,
) -> Result<(Vec<Vec<f64>>, KMeans, f64)> {
    let km = KMeans::fit(points, n_clusters, rng)?;
    let sigma = bandwidth.unwrap_or_else(|| km.default_bandwidth());
    let rows = points
        .iter()
        .map(|p| km.membership(p, sigma))
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, km, sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub id: String,
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Click {
    pub user: String,
    pub article: String,
    pub clicked: bool,
}

/// Input of the feature pipeline: raw profiles plus observed clicks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub users: Vec<Profile>,
    pub articles: Vec<Profile>,
    pub clicks: Vec<Click>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub n_clusters: usize,
    pub min_support: f64,
    pub user_bandwidth: Option<f64>,
    pub article_bandwidth: Option<f64>,
    pub lr: LrConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_clusters: 5,
            min_support: 0.1,
            user_bandwidth: None,
            article_bandwidth: None,
            lr: LrConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedFeatures {
    pub users: BTreeMap<String, Vec<f64>>,
    pub articles: BTreeMap<String, Vec<f64>>,
    pub user_bandwidth: f64,
    pub article_bandwidth: f64,
}

impl ReducedFeatures {
    pub fn interaction(&self, user: &str, article: &str) -> Result<Vec<f64>> {
        let u = self
            .users
            .get(user)
            .ok_or_else(|| Error::Malformed(format!("unknown user {user}")))?;
        let a = self
            .articles
            .get(article)
            .ok_or_else(|| Error::Malformed(format!("unknown article {article}")))?;
        interaction_features(u, a)
    }
}

/// Runs the whole pipeline: support filter and normalization, bilinear LR,
/// projection, then separate k-means over users and articles.
pub fn reduce_features(
    set: &ProfileSet,
    cfg: &FeatureConfig,
    rng: &mut dyn RngCore,
) -> Result<ReducedFeatures> {
    let raw_users: Vec<Vec<f64>> = set.users.iter().map(|p| p.raw.clone()).collect();
    let raw_articles: Vec<Vec<f64>> = set.articles.iter().map(|p| p.raw.clone()).collect();
    let profiles = RawProfiles::build(&raw_users, &raw_articles, cfg.min_support)?;
    let user_idx: BTreeMap<&str, usize> = set
        .users
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let article_idx: BTreeMap<&str, usize> = set
        .articles
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let examples = set
        .clicks
        .iter()
        .map(|c| {
            let u = user_idx
                .get(c.user.as_str())
                .ok_or_else(|| Error::Malformed(format!("click for unknown user {}", c.user)))?;
            let a = article_idx.get(c.article.as_str()).ok_or_else(|| {
                Error::Malformed(format!("click for unknown article {}", c.article))
            })?;
            Ok(ClickExample {
                user: profiles.users[*u].clone(),
                article: profiles.articles[*a].clone(),
                clicked: c.clicked,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let w = fit_bilinear_lr(&examples, &cfg.lr)?;

    let psi_u = profiles
        .users
        .iter()
        .map(|p| project_users(&w, p))
        .collect::<Result<Vec<_>>>()?;
    let psi_a = profiles
        .articles
        .iter()
        .map(|p| project_articles(&w, p))
        .collect::<Result<Vec<_>>>()?;
    let (user_rows, _, user_bandwidth) =
        kmeans_membership(&psi_u, cfg.n_clusters, cfg.user_bandwidth, rng)?;
    let (article_rows, _, article_bandwidth) =
        kmeans_membership(&psi_a, cfg.n_clusters, cfg.article_bandwidth, rng)?;
    Ok(ReducedFeatures {
        users: set
            .users
            .iter()
            .map(|p| p.id.clone())
            .zip(user_rows)
            .collect(),
        articles: set
            .articles
            .iter()
            .map(|p| p.id.clone())
            .zip(article_rows)
            .collect(),
        user_bandwidth,
        article_bandwidth,
    })
}

/// Random binary profiles with planted structure: each user has a latent
/// taste and each article a latent category (both in `0..n_types`); raw
/// bits correlate with the latent label and clicks are likelier when taste
/// and category agree.
pub fn synthetic_profiles(
    n_users: usize,
    n_articles: usize,
    n_types: usize,
    n_clicks: usize,
    rng: &mut dyn RngCore,
) -> ProfileSet {
    let bits_per_type = 4;
    let width = n_types * bits_per_type + 2;
    let profile = |label: usize, rng: &mut dyn RngCore| -> Vec<f64> {
        (0..width)
            .map(|b| {
                let own = b / bits_per_type == label;
                let p = if b >= n_types * bits_per_type {
                    0.02 // rare bits, filtered by support
                } else if own {
                    0.7
                } else {
                    0.1
                };
                f64::from(u8::from(rng.random::<f64>() < p))
            })
            .collect()
    };
    let user_types: Vec<usize> = (0..n_users).map(|i| i % n_types).collect();
    let article_types: Vec<usize> = (0..n_articles).map(|i| i % n_types).collect();
    let users = user_types
        .iter()
        .enumerate()
        .map(|(i, t)| Profile {
            id: format!("u{i}"),
            raw: profile(*t, rng),
        })
        .collect();
    let articles = article_types
        .iter()
        .enumerate()
        .map(|(i, t)| Profile {
            id: format!("art{i}"),
            raw: profile(*t, rng),
        })
        .collect();
    let clicks = (0..n_clicks)
        .map(|_| {
            let u = rng.random_range(0..n_users);
            let a = rng.random_range(0..n_articles);
            let p = if user_types[u] == article_types[a] {
                0.4
            } else {
                0.05
            };
            Click {
                user: format!("u{u}"),
                article: format!("art{a}"),
                clicked: rng.random::<f64>() < p,
            }
        })
        .collect();
    ProfileSet {
        users,
        articles,
        clicks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::RngSeed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn interaction_examples() {
        let e = |i: usize| {
            let mut v = vec![0.0; 6];
            v[i] = 1.0;
            v
        };
        let z = interaction_features(&e(0), &e(1)).unwrap();
        assert_eq!(z.len(), 36);
        assert_eq!(z[1], 1.0);
        assert_eq!(z.iter().sum::<f64>(), 1.0);
        let z = interaction_features(&e(5), &e(5)).unwrap();
        assert_eq!(z[35], 1.0);
        assert_eq!(z.iter().sum::<f64>(), 1.0);
        assert!(interaction_features(&[1.0; 5], &e(0)).is_err());
    }

    #[test]
    fn projection_examples() {
        let w = DenseMatrix::from_row_major(2, 2, vec![0.2, 0.8, 0.5, 0.5]).unwrap();
        assert_eq!(project_users(&w, &[1.0, 0.0]).unwrap(), vec![0.2, 0.8]);
        let id = DenseMatrix::identity(3);
        assert_eq!(
            project_users(&id, &[0.1, 0.2, 0.3]).unwrap(),
            vec![0.1, 0.2, 0.3]
        );
        assert!(project_users(&w, &[1.0]).is_err());
        let (p, q) = ([0.3, -1.0], [2.0, 0.5]);
        let sum = project_users(&w, &[p[0] + q[0], p[1] + q[1]]).unwrap();
        let parts: Vec<f64> = project_users(&w, &p)
            .unwrap()
            .iter()
            .zip(project_users(&w, &q).unwrap())
            .map(|(a, b)| a + b)
            .collect();
        for (a, b) in sum.iter().zip(parts) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn lr_recovers_planted_interaction() {
        // positives only when user bit 1 and article bit 2 are both set
        let mut rng = RngSeed(3).rng();
        let clicks: Vec<ClickExample> = (0..400)
            .map(|_| {
                let user: Vec<f64> = (0..3)
                    .map(|_| f64::from(rng.random_range(0..2u8)))
                    .collect();
                let article: Vec<f64> = (0..3)
                    .map(|_| f64::from(rng.random_range(0..2u8)))
                    .collect();
                let clicked = user[1] == 1.0 && article[2] == 1.0;
                ClickExample {
                    user,
                    article,
                    clicked,
                }
            })
            .collect();
        let w = fit_bilinear_lr(&clicks, &LrConfig::default()).unwrap();
        assert_eq!((w.rows(), w.cols()), (3, 3));
        let mut best = (0, 0);
        for i in 0..3 {
            for j in 0..3 {
                if w.get(i, j) > w.get(best.0, best.1) {
                    best = (i, j);
                }
            }
        }
        assert_eq!(best, (1, 2));
    }

    #[test]
    fn lr_on_noise_stays_small() {
        let mut rng = RngSeed(4).rng();
        let mut gauss =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
        let raw: Vec<(Vec<f64>, Vec<f64>)> = (0..5000).map(|_| (gauss(3), gauss(2))).collect();
        let clicks: Vec<ClickExample> = raw
            .into_iter()
            .enumerate()
            .map(|(i, (u, a))| ClickExample {
                user: normalize_profile(&u),
                article: normalize_profile(&a),
                clicked: i % 2 == 0,
            })
            .collect();
        let w = fit_bilinear_lr(&clicks, &LrConfig::default()).unwrap();
        assert_eq!((w.rows(), w.cols()), (4, 3));
        assert!(w.frobenius_norm() < 0.25, "{}", w.frobenius_norm());
    }

    #[test]
    fn lr_rejects_single_label() {
        let ex = ClickExample {
            user: vec![1.0],
            article: vec![1.0],
            clicked: true,
        };
        assert!(matches!(
            fit_bilinear_lr(&[ex.clone(), ex], &LrConfig::default()),
            Err(Error::DegenerateData(_))
        ));
    }

    fn five_centroids() -> KMeans {
        KMeans {
            centroids: (0..5).map(|i| vec![10.0 * i as f64, 0.0]).collect(),
            iterations: 0,
        }
    }

    #[test]
    fn membership_kernel_decay() {
        let m = five_centroids().membership(&[0.0, 0.0], 1.0).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!(m[1..5].iter().all(|v| *v < 1e-12));
        assert_eq!(m[5], 1.0);
    }

    #[test]
    fn membership_symmetry() {
        let km = KMeans {
            centroids: (0..5)
                .map(|i| {
                    let a = i as f64 * std::f64::consts::TAU / 5.0;
                    vec![a.cos(), a.sin()]
                })
                .collect(),
            iterations: 0,
        };
        let m = km.membership(&[0.0, 0.0], 0.7).unwrap();
        for v in &m[..5] {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn kmeans_needs_distinct_points() {
        let pts = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(KMeans::fit(&pts, 3, &mut RngSeed(0).rng()).is_err());
        assert!(KMeans::fit(&pts, 2, &mut RngSeed(0).rng()).is_ok());
    }

    #[test]
    fn kmeans_separates_blobs_and_is_deterministic() {
        let mut rng = RngSeed(9).rng();
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|i| {
                let c = (i % 3) as f64 * 5.0;
                vec![
                    c + rng.random::<f64>() * 0.1,
                    -c + rng.random::<f64>() * 0.1,
                ]
            })
            .collect();
        let a = KMeans::fit(&pts, 3, &mut RngSeed(1).rng()).unwrap();
        let b = KMeans::fit(&pts, 3, &mut RngSeed(1).rng()).unwrap();
        assert_eq!(a, b);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.assign(&pts[i]) == a.assign(&pts[j]), i == j);
            }
        }
        assert!(a.iterations < KMeans::MAX_ITER);
    }

    #[test]
    fn support_filter() {
        let rows = vec![
            vec![1.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ];
        assert_eq!(select_by_support(&rows, 0.1), vec![0, 2]);
        assert_eq!(select_by_support(&rows, 0.5), vec![0]);
        let n = normalize_profile(&[3.0, 4.0]);
        assert_eq!(n, vec![0.6, 0.8, 1.0]);
    }

    #[test]
    fn pipeline_shapes() {
        let set = synthetic_profiles(200, 30, 5, 4000, &mut RngSeed(11).rng());
        let red = reduce_features(&set, &FeatureConfig::default(), &mut RngSeed(12).rng()).unwrap();
        assert_eq!(red.users.len(), 200);
        assert_eq!(red.articles.len(), 30);
        for v in red.users.values().chain(red.articles.values()) {
            assert_eq!(v.len(), 6);
            assert_eq!(v[5], 1.0);
            assert!((v[..5].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(red.interaction("u0", "art0").unwrap().len(), 36);
        let ctx = hybrid_context(
            &red.users["u3"],
            &[("art1".into(), red.articles["art1"].clone())],
        )
        .unwrap();
        assert_eq!(ctx.x_dim(), 6);
        assert_eq!(ctx.z_dim(), Some(36));
    }

    proptest! {
        #[test]
        fn memberships_are_a_distribution(
            pts in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 5..40),
            probe in proptest::collection::vec(-50.0f64..50.0, 3),
            seed in any::<u64>(),
        ) {
            if let Ok((rows, km, sigma)) = kmeans_membership(&pts, 5, None, &mut RngSeed(seed).rng()) {
                for m in rows.iter().chain(std::iter::once(&km.membership(&probe, sigma).unwrap())) {
                    prop_assert_eq!(m.len(), 6);
                    prop_assert!(m[..5].iter().all(|v| *v >= 0.0));
                    prop_assert!((m[..5].iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                    prop_assert_eq!(m[5], 1.0);
                }
            }
        }

        #[test]
        fn interaction_norm_identity(
            u in proptest::collection::vec(-3.0f64..3.0, 6),
            a in proptest::collection::vec(-3.0f64..3.0, 6),
        ) {
            let z = interaction_features(&u, &a).unwrap();
            let lhs = dot(&z, &z).sqrt();
            let rhs = dot(&u, &u).sqrt() * dot(&a, &a).sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }
    }
}
