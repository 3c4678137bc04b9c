//! Small dense linear algebra for incremental ridge regression.
//!
//! Every ridge model keeps only its sufficient statistics `A = DᵀD + I`
//! and `b = Dᵀc`; the design matrix is never stored. The inverse of `A` is
//! maintained with Sherman–Morrison rank-1 updates and recomputed from
//! scratch through a Cholesky factorization every `refresh_period`
//! updates, which bounds round-off drift.

use std::collections::BTreeMap;

use crate::context::ArmId;
use crate::error::{Error, Result};

/// Default number of rank-1 updates between exact re-inversions.
pub const DEFAULT_REFRESH_PERIOD: usize = 1000;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(&bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self · x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ · x`
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// `self · other`
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in dst.iter_mut().zip(other.row(l)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "t_matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for l in 0..self.rows {
            let a_row = self.row(l);
            let b_row = other.row(l);
            for (i, a) in a_row.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in dst.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self += scale · u vᵀ`
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (i, ui) in u.iter().enumerate() {
            let s = scale * ui;
            if s == 0.0 {
                continue;
            }
            let dst = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (o, vj) in dst.iter_mut().zip(v) {
                *o += s * vj;
            }
        }
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, other: &DenseMatrix, scale: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest entry of `|self · inv − I|`.
    pub fn inverse_residual(&self, inv: &DenseMatrix) -> f64 {
        let prod = self.matmul(inv);
        let mut worst = 0.0f64;
        for i in 0..prod.rows {
            for j in 0..prod.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod.get(i, j) - target).abs());
            }
        }
        worst
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor(self)
    }

    /// Inverse of a symmetric positive definite matrix.
    pub fn spd_inverse(&self) -> Result<DenseMatrix> {
        Ok(self.cholesky()?.inverse())
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch {
                expected: a.rows,
                found: a.cols,
            });
        }
        let n = a.rows;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a.get(j, j);
            for p in 0..j {
                diag -= l[j * n + p] * l[j * n + p];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in j + 1..n {
                // read the lower triangle only; symmetric input assumed
                let mut s = a.get(i, j);
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Self { n, l })
    }

    /// Solves `A y = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in 0..i {
                s -= self.l[i * n + p] * y[p];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in i + 1..n {
                s -= self.l[p * n + i] * y[p];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// `A⁻¹`, solved column by column against the identity and symmetrized.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.n;
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for (i, v) in col.into_iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, avg);
                inv.set(j, i, avg);
            }
        }
        inv
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `xᵀ A⁻¹ x` for a symmetric positive definite inverse; never negative.
pub fn quadratic_form(a_inv: &DenseMatrix, x: &[f64]) -> Result<f64> {
    if a_inv.rows != x.len() || a_inv.cols != x.len() {
        return Err(Error::DimensionMismatch {
            expected: a_inv.rows,
            found: x.len(),
        });
    }
    Ok(dot(x, &a_inv.matvec(x)).max(0.0))
}

/// Sufficient statistics of one ridge-regression model with unit penalty.
#[derive(Debug, Clone)]
pub struct RidgeState {
    a_mat: DenseMatrix,
    b_vec: Vec<f64>,
    a_inv: DenseMatrix,
    updates_since_refresh: usize,
    refresh_period: usize,
}

impl RidgeState {
    /// `A = I_d`, `b = 0`.
    pub fn new(d: usize) -> Self {
        Self::with_refresh_period(d, DEFAULT_REFRESH_PERIOD)
    }

    pub fn with_refresh_period(d: usize, refresh_period: usize) -> Self {
        assert!(d > 0, "ridge dimension must be positive");
        Self {
            a_mat: DenseMatrix::identity(d),
            b_vec: vec![0.0; d],
            a_inv: DenseMatrix::identity(d),
            updates_since_refresh: 0,
            refresh_period: refresh_period.max(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.b_vec.len()
    }

    pub fn a_mat(&self) -> &DenseMatrix {
        &self.a_mat
    }

    pub fn a_inv(&self) -> &DenseMatrix {
        &self.a_inv
    }

    pub fn b_vec(&self) -> &[f64] {
        &self.b_vec
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }

    /// Ridge estimate `θ̂ = A⁻¹ b`.
    pub fn point_estimate(&self) -> Vec<f64> {
        self.a_inv.matvec(&self.b_vec)
    }

    /// `A += x xᵀ`, `b += r x`, inverse kept current in O(d²).
    pub fn rank1_update(&mut self, x: &[f64], r: f64) -> Result<()> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        self.a_mat.add_outer(x, x, 1.0);
        for (b, xi) in self.b_vec.iter_mut().zip(x) {
            *b += r * xi;
        }
        // Sherman–Morrison: (A + xxᵀ)⁻¹ = A⁻¹ − (A⁻¹x)(A⁻¹x)ᵀ / (1 + xᵀA⁻¹x)
        let u = self.a_inv.matvec(x);
        let denom = 1.0 + dot(x, &u);
        self.a_inv.add_outer(&u, &u, -1.0 / denom);
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= self.refresh_period {
            self.refresh();
        }
        Ok(())
    }

    /// Recomputes the cached inverse exactly from `A`.
    pub fn refresh(&mut self) {
        self.a_inv = self
            .a_mat
            .spd_inverse()
            .expect("A = I + Σ xxᵀ is positive definite");
        self.updates_since_refresh = 0;
    }
}

/// Free-function form of [`RidgeState::point_estimate`].
pub fn ridge_point_estimate(state: &RidgeState) -> Vec<f64> {
    state.point_estimate()
}

/// Free-function form of [`RidgeState::rank1_update`].
pub fn rank1_update(state: &mut RidgeState, x: &[f64], r: f64) -> Result<()> {
    state.rank1_update(x, r)
}

/// Per-arm blocks of the hybrid model: `A_a`, `b_a` (with cached `A_a⁻¹`)
/// and the `d × k` coupling matrix `B_a`.
#[derive(Debug, Clone)]
pub struct HybridArm {
    pub(crate) ridge: RidgeState,
    pub(crate) b_mat: DenseMatrix,
}

impl HybridArm {
    pub fn new(d: usize, k: usize, refresh_period: usize) -> Self {
        Self {
            ridge: RidgeState::with_refresh_period(d, refresh_period),
            b_mat: DenseMatrix::zeros(d, k),
        }
    }

    pub fn a_mat(&self) -> &DenseMatrix {
        self.ridge.a_mat()
    }

    pub fn a_inv(&self) -> &DenseMatrix {
        self.ridge.a_inv()
    }

    pub fn b_vec(&self) -> &[f64] {
        self.ridge.b_vec()
    }

    pub fn b_mat(&self) -> &DenseMatrix {
        &self.b_mat
    }
}

/// Shared statistics `A₀` (k×k), `b₀` (k) plus per-arm [`HybridArm`] blocks.
///
/// `A₀` receives non-rank-1 updates, so its inverse is recomputed by
/// Cholesky every `shared_refresh_period` updates (1 by default, i.e. always
/// exact). Larger periods score with a stale `A₀⁻¹` between refreshes.
#[derive(Debug, Clone)]
pub struct HybridState {
    d: usize,
    k: usize,
    pub(crate) a0: DenseMatrix,
    pub(crate) b0: Vec<f64>,
    pub(crate) a0_inv: DenseMatrix,
    pub(crate) per_arm: BTreeMap<ArmId, HybridArm>,
    arm_refresh_period: usize,
    shared_refresh_period: usize,
    pub(crate) shared_updates_since_refresh: usize,
}

impl HybridState {
    pub fn new(d: usize, k: usize) -> Self {
        Self::with_refresh_periods(d, k, DEFAULT_REFRESH_PERIOD, 1)
    }

    pub fn with_refresh_periods(
        d: usize,
        k: usize,
        arm_period: usize,
        shared_period: usize,
    ) -> Self {
        assert!(d > 0 && k > 0, "hybrid dimensions must be positive");
        Self {
            d,
            k,
            a0: DenseMatrix::identity(k),
            b0: vec![0.0; k],
            a0_inv: DenseMatrix::identity(k),
            per_arm: BTreeMap::new(),
            arm_refresh_period: arm_period.max(1),
            shared_refresh_period: shared_period.max(1),
            shared_updates_since_refresh: 0,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn a0(&self) -> &DenseMatrix {
        &self.a0
    }

    pub fn a0_inv(&self) -> &DenseMatrix {
        &self.a0_inv
    }

    pub fn b0(&self) -> &[f64] {
        &self.b0
    }

    pub fn arm(&self, id: &ArmId) -> Option<&HybridArm> {
        self.per_arm.get(id)
    }

    pub fn arms(&self) -> impl Iterator<Item = (&ArmId, &HybridArm)> {
        self.per_arm.iter()
    }

    pub(crate) fn fresh_arm(&self) -> HybridArm {
        HybridArm::new(self.d, self.k, self.arm_refresh_period)
    }

    pub(crate) fn arm_entry(&mut self, id: &ArmId) -> &mut HybridArm {
        if !self.per_arm.contains_key(id) {
            let fresh = self.fresh_arm();
            self.per_arm.insert(id.clone(), fresh);
        }
        self.per_arm.get_mut(id).expect("inserted above")
    }

    pub(crate) fn remove_arm(&mut self, id: &ArmId) {
        self.per_arm.remove(id);
    }

    /// Counts one shared-block update and re-inverts `A₀` when due.
    pub(crate) fn note_shared_update(&mut self) {
        self.shared_updates_since_refresh += 1;
        if self.shared_updates_since_refresh >= self.shared_refresh_period {
            self.refresh_shared();
        }
    }

    fn refresh_shared(&mut self) {
        self.a0_inv = self
            .a0
            .spd_inverse()
            .expect("A0 stays positive definite under the hybrid updates");
        self.shared_updates_since_refresh = 0;
    }

    /// Recomputes every cached inverse exactly.
    pub fn refresh(&mut self) {
        self.refresh_shared();
        for arm in self.per_arm.values_mut() {
            arm.ridge.refresh();
        }
    }
}

/// Free-function form of [`HybridState::refresh`].
pub fn hybrid_blocks_refresh(state: &mut HybridState) {
    state.refresh();
}
