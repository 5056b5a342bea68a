//! Periodic-grid fields and spectral calculus on the box [−L, L)³.
//!
//! Derivatives, the Leray projection, and Poisson solves are exact Fourier
//! multipliers. The modified rotations Ω̃ᵢ, the scaling operator S̃, and the
//! interior/exterior cutoffs η/γ are built on top of them. Binary snapshot
//! IO lives here as well.

use std::io::{Read as _, Write as _};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::{Mat3, Vec3};

/// Cubic periodic grid with cached FFT plans and wavenumber tables.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    l: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed wavenumbers (π/L)·m̃ with the Nyquist mode zeroed; used for
    /// first derivatives so that odd multipliers stay real-to-real.
    k_der: Arc<Vec<f64>>,
    /// Signed wavenumbers with the Nyquist magnitude kept; used in |k|².
    k_full: Arc<Vec<f64>>,
    /// Per-axis 2/3-rule keep mask.
    keep: Arc<Vec<bool>>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.l == other.l
    }
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("l", &self.l).finish()
    }
}

impl Grid {
    /// `n` points per axis (power of two, ≥ 8) on the box [−L, L)³.
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!("grid n must be a power of two >= 8, got {n}")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Config(format!("box half-length must be positive, got {l}")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let base = std::f64::consts::PI / l;
        let mut k_der = vec![0.0; n];
        let mut k_full = vec![0.0; n];
        let mut keep = vec![false; n];
        for m in 0..n {
            let signed = if m <= n / 2 { m as i64 } else { m as i64 - n as i64 };
            k_full[m] = base * signed as f64;
            k_der[m] = if m == n / 2 { 0.0 } else { base * signed as f64 };
            keep[m] = signed.unsigned_abs() as usize <= n / 3;
        }
        Ok(Self {
            n,
            l,
            fwd,
            inv,
            k_der: Arc::new(k_der),
            k_full: Arc::new(k_full),
            keep: Arc::new(keep),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        let d = self.spacing();
        d * d * d
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn coord(&self, m: usize) -> f64 {
        -self.l + m as f64 * self.spacing()
    }

    /// Grid point for a flat index.
    #[inline]
    pub fn point(&self, idx: usize) -> Vec3 {
        let k = idx % self.n;
        let j = (idx / self.n) % self.n;
        let i = idx / (self.n * self.n);
        Vec3::new(self.coord(i), self.coord(j), self.coord(k))
    }

    fn fft3(&self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        let plan = if forward { &self.fwd } else { &self.inv };
        // axis 2: contiguous rows
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        // axes 1 and 0: gather strided lines into a scratch buffer
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    buf[j] = data[(i * n + j) * n + k];
                }
                plan.process(&mut buf);
                for j in 0..n {
                    data[(i * n + j) * n + k] = buf[j];
                }
            }
        }
        for j in 0..n {
            for k in 0..n {
                for i in 0..n {
                    buf[i] = data[(i * n + j) * n + k];
                }
                plan.process(&mut buf);
                for i in 0..n {
                    data[(i * n + j) * n + k] = buf[i];
                }
            }
        }
        if !forward {
            let scale = 1.0 / (n * n * n) as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub fn to_spectral(&self, data: &[f64]) -> Vec<Complex64> {
        let mut spec: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft3(&mut spec, true);
        spec
    }

    pub fn to_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.fft3(&mut spec, false);
        spec.into_iter().map(|c| c.re).collect()
    }

    /// Apply a Fourier multiplier given per-axis mode indices.
    pub fn spectral_filter(
        &self,
        data: &[f64],
        f: impl Fn(usize, usize, usize, Complex64) -> Complex64,
    ) -> Vec<f64> {
        let n = self.n;
        let mut spec = self.to_spectral(data);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let idx = (i * n + j) * n + k;
                    spec[idx] = f(i, j, k, spec[idx]);
                }
            }
        }
        self.to_real(spec)
    }

    /// All three spectral partials from a single forward transform.
    pub fn derivatives_all(&self, data: &[f64]) -> [Vec<f64>; 3] {
        let n = self.n;
        let spec = self.to_spectral(data);
        let mut out: [Vec<f64>; 3] = Default::default();
        for (axis, slot) in out.iter_mut().enumerate() {
            let mut s = spec.clone();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let idx = (i * n + j) * n + k;
                        let kk = self.k_der[[i, j, k][axis]];
                        let c = s[idx];
                        s[idx] = Complex64::new(-c.im * kk, c.re * kk);
                    }
                }
            }
            *slot = self.to_real(s);
        }
        out
    }

    /// Spectral ∂ along `axis`.
    pub fn derivative_vec(&self, data: &[f64], axis: usize) -> Vec<f64> {
        let kd = Arc::clone(&self.k_der);
        self.spectral_filter(data, move |i, j, k, c| {
            let kk = kd[[i, j, k][axis]];
            Complex64::new(-c.im * kk, c.re * kk)
        })
    }

    /// Spectral ∆.
    pub fn laplacian_vec(&self, data: &[f64]) -> Vec<f64> {
        let kf = Arc::clone(&self.k_full);
        self.spectral_filter(data, move |i, j, k, c| {
            c * -(kf[i] * kf[i] + kf[j] * kf[j] + kf[k] * kf[k])
        })
    }

    /// 2/3-rule dealiasing.
    pub fn dealias_vec(&self, data: &[f64]) -> Vec<f64> {
        let keep = Arc::clone(&self.keep);
        self.spectral_filter(data, move |i, j, k, c| {
            if keep[i] && keep[j] && keep[k] {
                c
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn wavenumber_der(&self, m: usize) -> f64 {
        self.k_der[m]
    }

    pub fn wavenumber_full(&self, m: usize) -> f64 {
        self.k_full[m]
    }
}

fn assert_same_grid(a: &Grid, b: &Grid) {
    assert!(a == b, "fields live on different grids: {a:?} vs {b:?}");
}

/// Shape-checking variant for fallible entry points.
pub fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape(format!("grid mismatch: {a:?} vs {b:?}")))
    }
}

// ---------------------------------------------------------------------------
// Scalar fields
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), data: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Vec3) -> f64) -> Self {
        let data = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        Self { grid: grid.clone(), data }
    }

    pub fn from_data(grid: &Grid, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len(), "data length must match grid");
        Self { grid: grid.clone(), data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn derivative(&self, axis: usize) -> Self {
        Self::from_data(&self.grid, self.grid.derivative_vec(&self.data, axis))
    }

    pub fn gradient(&self) -> VectorField {
        let [dx, dy, dz] = self.grid.derivatives_all(&self.data);
        VectorField {
            grid: self.grid.clone(),
            comps: [
                ScalarField::from_data(&self.grid, dx),
                ScalarField::from_data(&self.grid, dy),
                ScalarField::from_data(&self.grid, dz),
            ],
        }
    }

    pub fn laplacian(&self) -> Self {
        Self::from_data(&self.grid, self.grid.laplacian_vec(&self.data))
    }

    pub fn dealias(&self) -> Self {
        Self::from_data(&self.grid, self.grid.dealias_vec(&self.data))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    pub fn inner(&self, other: &Self) -> f64 {
        assert_same_grid(&self.grid, &other.grid);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// Pointwise product (no dealiasing; callers dealias when the factors are
    /// spectral fields).
    pub fn mul(&self, other: &Self) -> Self {
        assert_same_grid(&self.grid, &other.grid);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Self::from_data(&self.grid, data)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_data(&self.grid, self.data.iter().map(|v| a * v).collect())
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_same_grid(&self.grid, &other.grid);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// r∂ᵣ f = x·∇f.
    pub fn radial_scaling(&self) -> Self {
        let d = self.grid.derivatives_all(&self.data);
        let mut out = ScalarField::zeros(&self.grid);
        for idx in 0..self.data.len() {
            let x = self.grid.point(idx);
            out.data[idx] = x[0] * d[0][idx] + x[1] * d[1][idx] + x[2] * d[2][idx];
        }
        out
    }
}

impl std::ops::Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl std::ops::Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Grid,
    comps: [ScalarField; 3],
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            comps: [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Vec3) -> Vec3) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(grid.point(idx));
            for a in 0..3 {
                out.comps[a].data[idx] = v[a];
            }
        }
        out
    }

    pub fn from_comps(comps: [ScalarField; 3]) -> Self {
        assert_same_grid(comps[0].grid(), comps[1].grid());
        assert_same_grid(comps[0].grid(), comps[2].grid());
        Self { grid: comps[0].grid().clone(), comps }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn comp(&self, a: usize) -> &ScalarField {
        &self.comps[a]
    }

    pub fn comp_mut(&mut self, a: usize) -> &mut ScalarField {
        &mut self.comps[a]
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Vec3 {
        Vec3::new(self.comps[0].data[idx], self.comps[1].data[idx], self.comps[2].data[idx])
    }

    #[inline]
    pub fn set_at(&mut self, idx: usize, v: Vec3) {
        for a in 0..3 {
            self.comps[a].data[idx] = v[a];
        }
    }

    pub fn divergence(&self) -> ScalarField {
        let mut out = self.comps[0].derivative(0);
        out.axpy(1.0, &self.comps[1].derivative(1));
        out.axpy(1.0, &self.comps[2].derivative(2));
        out
    }

    /// (∇v)^i_j = ∂_j v^i.
    pub fn gradient(&self) -> MatrixField {
        let mut out = MatrixField::zeros(&self.grid);
        for i in 0..3 {
            for j in 0..3 {
                out.comps[i][j] = self.comps[i].derivative(j);
            }
        }
        out
    }

    pub fn curl(&self) -> VectorField {
        let d = |i: usize, j: usize| self.comps[i].derivative(j);
        VectorField::from_comps([
            &d(2, 1) - &d(1, 2),
            &d(0, 2) - &d(2, 0),
            &d(1, 0) - &d(0, 1),
        ])
    }

    pub fn laplacian(&self) -> Self {
        Self::from_comps([
            self.comps[0].laplacian(),
            self.comps[1].laplacian(),
            self.comps[2].laplacian(),
        ])
    }

    pub fn dealias(&self) -> Self {
        Self::from_comps([
            self.comps[0].dealias(),
            self.comps[1].dealias(),
            self.comps[2].dealias(),
        ])
    }

    pub fn l2_norm(&self) -> f64 {
        self.comps.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0f64, |a, c| a.max(c.max_abs()))
    }

    pub fn inner(&self, other: &Self) -> f64 {
        (0..3).map(|a| self.comps[a].inner(&other.comps[a])).sum()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_comps([
            self.comps[0].scaled(a),
            self.comps[1].scaled(a),
            self.comps[2].scaled(a),
        ])
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for c in 0..3 {
            self.comps[c].axpy(a, &other.comps[c]);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }
}

impl std::ops::Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl std::ops::Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

// ---------------------------------------------------------------------------
// Matrix fields
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct MatrixField {
    grid: Grid,
    comps: [[ScalarField; 3]; 3],
    /// Whether this field is known to be a spatial gradient (curl constraint).
    pub is_gradient: bool,
}

impl MatrixField {
    pub fn zeros(grid: &Grid) -> Self {
        let z = || ScalarField::zeros(grid);
        Self {
            grid: grid.clone(),
            comps: [[z(), z(), z()], [z(), z(), z()], [z(), z(), z()]],
            is_gradient: false,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Vec3) -> Mat3) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let m = f(grid.point(idx));
            for i in 0..3 {
                for j in 0..3 {
                    out.comps[i][j].data[idx] = m[(i, j)];
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn comp(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[i][j]
    }

    pub fn comp_mut(&mut self, i: usize, j: usize) -> &mut ScalarField {
        &mut self.comps[i][j]
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = self.comps[i][j].data[idx];
            }
        }
        m
    }

    #[inline]
    pub fn set_at(&mut self, idx: usize, m: Mat3) {
        for i in 0..3 {
            for j in 0..3 {
                self.comps[i][j].data[idx] = m[(i, j)];
            }
        }
    }

    /// (∇·H)^i = ∂_j H^i_j — contracts the second index.
    pub fn divergence(&self) -> VectorField {
        let mut out = VectorField::zeros(&self.grid);
        for i in 0..3 {
            for j in 0..3 {
                out.comps[i].axpy(1.0, &self.comps[i][j].derivative(j));
            }
        }
        out
    }

    pub fn trace(&self) -> ScalarField {
        let mut out = self.comps[0][0].clone();
        out.axpy(1.0, &self.comps[1][1]);
        out.axpy(1.0, &self.comps[2][2]);
        out
    }

    pub fn laplacian(&self) -> Self {
        let mut out = self.clone();
        for i in 0..3 {
            for j in 0..3 {
                out.comps[i][j] = self.comps[i][j].laplacian();
            }
        }
        out
    }

    pub fn dealias(&self) -> Self {
        let mut out = self.clone();
        for i in 0..3 {
            for j in 0..3 {
                out.comps[i][j] = self.comps[i][j].dealias();
            }
        }
        out
    }

    /// max over points and (i, j, k) of |∂_j H^i_k − ∂_k H^i_j|.
    pub fn curl_residual_max(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in (j + 1)..3 {
                    let a = self.comps[i][k].derivative(j);
                    let b = self.comps[i][j].derivative(k);
                    r = r.max((&a - &b).max_abs());
                }
            }
        }
        r
    }

    pub fn l2_norm(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0f64, |a, c| a.max(c.max_abs()))
    }

    pub fn inner(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.comps[i][j].inner(&other.comps[i][j]);
            }
        }
        s
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for i in 0..3 {
            for j in 0..3 {
                out.comps[i][j] = self.comps[i][j].scaled(a);
            }
        }
        out
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.comps[i][j].axpy(a, &other.comps[i][j]);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|c| c.is_finite())
    }
}

impl std::ops::Add for &MatrixField {
    type Output = MatrixField;
    fn add(self, rhs: &MatrixField) -> MatrixField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl std::ops::Sub for &MatrixField {
    type Output = MatrixField;
    fn sub(self, rhs: &MatrixField) -> MatrixField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

// ---------------------------------------------------------------------------
// Leray projection and Poisson solve
// ---------------------------------------------------------------------------

/// Project onto the divergence-free part; the mean (k = 0) mode is preserved.
pub fn leray_project(w: &VectorField) -> VectorField {
    let grid = w.grid().clone();
    let n = grid.n();
    let mut specs: Vec<Vec<Complex64>> =
        (0..3).map(|a| grid.to_spectral(w.comp(a).data())).collect();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let idx = (i * n + j) * n + k;
                let kv = [
                    grid.wavenumber_full(i),
                    grid.wavenumber_full(j),
                    grid.wavenumber_full(k),
                ];
                let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                if k2 == 0.0 {
                    continue;
                }
                let kdotw = kv[0] * specs[0][idx] + kv[1] * specs[1][idx] + kv[2] * specs[2][idx];
                for a in 0..3 {
                    specs[a][idx] -= kv[a] * kdotw / k2;
                }
            }
        }
    }
    let mut out = VectorField::zeros(&grid);
    for (a, spec) in specs.into_iter().enumerate() {
        *out.comp_mut(a) = ScalarField::from_data(&grid, grid.to_real(spec));
    }
    out
}

/// Solve ∆φ = rhs with zero-mean φ; the mean subtracted from rhs is returned
/// alongside.
pub fn poisson_solve(rhs: &ScalarField) -> (ScalarField, f64) {
    let grid = rhs.grid().clone();
    let n = grid.n();
    let mean = rhs.mean();
    let mut spec = grid.to_spectral(rhs.data());
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let idx = (i * n + j) * n + k;
                let kx = grid.wavenumber_full(i);
                let ky = grid.wavenumber_full(j);
                let kz = grid.wavenumber_full(k);
                let k2 = kx * kx + ky * ky + kz * kz;
                if k2 == 0.0 {
                    spec[idx] = Complex64::new(0.0, 0.0);
                } else {
                    spec[idx] /= -k2;
                }
            }
        }
    }
    (ScalarField::from_data(&grid, grid.to_real(spec)), mean)
}

// ---------------------------------------------------------------------------
// Vector fields Ω̃, S̃, S0
// ---------------------------------------------------------------------------

/// The constant rotation generators V^(1), V^(2), V^(3).
pub fn rotation_generator(i: usize) -> Mat3 {
    // (V^(i))^a_b = ε_{iab}: the so(3) generator paired with Ω_i = (x ∧ ∇)_i.
    // This relative sign is forced by requiring Ω̃ to commute with the linear
    // operator (∇v, ∇·H) and by closure of the [Ω̃ᵢ, Ω̃ⱼ] brackets.
    let mut v = Mat3::zeros();
    match i {
        0 => {
            // V^(1) = e2⊗e3 − e3⊗e2
            v[(1, 2)] = 1.0;
            v[(2, 1)] = -1.0;
        }
        1 => {
            // V^(2) = e3⊗e1 − e1⊗e3
            v[(2, 0)] = 1.0;
            v[(0, 2)] = -1.0;
        }
        2 => {
            // V^(3) = e1⊗e2 − e2⊗e1
            v[(0, 1)] = 1.0;
            v[(1, 0)] = -1.0;
        }
        _ => panic!("rotation axis must be 0, 1, or 2"),
    }
    v
}

/// Ω_i f = (x ∧ ∇)_i f.
pub fn omega_scalar(f: &ScalarField, i: usize) -> ScalarField {
    let grid = f.grid().clone();
    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
    let d = grid.derivatives_all(f.data());
    let mut out = ScalarField::zeros(&grid);
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        out.data_mut()[idx] = x[a] * d[b][idx] - x[b] * d[a][idx];
    }
    out
}

/// Ω̃ᵢ U = (Ω_i H + [V^(i), H], Ω_i v + V^(i) v).
pub fn omega_tilde(h: &MatrixField, v: &VectorField, i: usize) -> (MatrixField, VectorField) {
    assert_same_grid(h.grid(), v.grid());
    let vi = rotation_generator(i);
    let mut h_out = MatrixField::zeros(h.grid());
    h_out.is_gradient = false;
    for a in 0..3 {
        for b in 0..3 {
            *h_out.comp_mut(a, b) = omega_scalar(h.comp(a, b), i);
        }
    }
    let mut v_out = VectorField::zeros(v.grid());
    for a in 0..3 {
        *v_out.comp_mut(a) = omega_scalar(v.comp(a), i);
    }
    for idx in 0..h.grid().len() {
        let hm = h.at(idx);
        let comm = vi * hm - hm * vi;
        let mut cur = h_out.at(idx);
        cur += comm;
        h_out.set_at(idx, cur);
        let vv = v.at(idx);
        v_out.set_at(idx, v_out.at(idx) + vi * vv);
    }
    (h_out, v_out)
}

/// S̃U = t ∂ₜU + r∂ᵣU − U, with ∂ₜU supplied by the caller.
pub fn s_tilde(
    h: &MatrixField,
    v: &VectorField,
    t: f64,
    dh_dt: &MatrixField,
    dv_dt: &VectorField,
) -> (MatrixField, VectorField) {
    let mut h_out = MatrixField::zeros(h.grid());
    for i in 0..3 {
        for j in 0..3 {
            let mut c = h.comp(i, j).radial_scaling();
            c.axpy(t, dh_dt.comp(i, j));
            c.axpy(-1.0, h.comp(i, j));
            *h_out.comp_mut(i, j) = c;
        }
    }
    let mut v_out = VectorField::zeros(v.grid());
    for a in 0..3 {
        let mut c = v.comp(a).radial_scaling();
        c.axpy(t, dv_dt.comp(a));
        c.axpy(-1.0, v.comp(a));
        *v_out.comp_mut(a) = c;
    }
    (h_out, v_out)
}

// ---------------------------------------------------------------------------
// Cutoffs
// ---------------------------------------------------------------------------

/// Smooth profile with ζ ≡ 1 on (−∞, 1], ζ ≡ 0 on [2, ∞), built from the
/// standard exp(−1/s) quotient.
pub fn zeta(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let phi = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
        let a = phi(2.0 - s);
        a / (a + phi(s - 1.0))
    }
}

/// Cutoff configuration: η(t, r) = ζ(m r / ⟨t⟩) with integer m > 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutoffParams {
    pub m: u32,
}

impl CutoffParams {
    pub fn new(m: u32) -> Result<Self> {
        if m <= 4 {
            return Err(Error::Config(format!("cutoff m must be > 4, got {m}")));
        }
        Ok(Self { m })
    }
}

impl Default for CutoffParams {
    fn default() -> Self {
        Self { m: 5 }
    }
}

/// ⟨t⟩ = (t² + 1)^{1/2}.
pub fn japanese_bracket(t: f64) -> f64 {
    (t * t + 1.0).sqrt()
}

/// Interior/exterior partition (η, γ) at time t; η + γ = 1 exactly.
pub fn cutoffs(t: f64, params: &CutoffParams, grid: &Grid) -> (ScalarField, ScalarField) {
    let bt = japanese_bracket(t);
    let m = params.m as f64;
    let eta = ScalarField::from_fn(grid, |x| zeta(m * x.norm() / bt));
    let gamma = ScalarField::from_fn(grid, |x| 1.0 - zeta(m * x.norm() / bt));
    (eta, gamma)
}

// ---------------------------------------------------------------------------
// Synthetic fields for test batteries
// ---------------------------------------------------------------------------

/// Band-limited random scalar: a sum of `n_modes` cosine modes with integer
/// frequency vectors bounded by `max_mode` in each axis.
pub fn random_band_limited_scalar(
    grid: &Grid,
    rng: &mut impl Rng,
    max_mode: i64,
    n_modes: usize,
) -> ScalarField {
    let base = std::f64::consts::PI / grid.half_length();
    let mut modes = Vec::with_capacity(n_modes);
    for _ in 0..n_modes {
        let mut m = [0i64; 3];
        while m == [0, 0, 0] {
            for mi in &mut m {
                *mi = rng.gen_range(-max_mode..=max_mode);
            }
        }
        let amp = crate::rng::standard_normal(rng) / n_modes as f64;
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        modes.push((m, amp, phase));
    }
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(m, amp, phase)| {
                let arg = base * (m[0] as f64 * x[0] + m[1] as f64 * x[1] + m[2] as f64 * x[2]);
                amp * (arg + phase).cos()
            })
            .sum()
    })
}

/// Smooth radial window: 1 for r ≤ r0, 0 for r ≥ r1.
pub fn radial_window(grid: &Grid, r0: f64, r1: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| zeta(1.0 + (x.norm() - r0) / (r1 - r0)))
}

// ---------------------------------------------------------------------------
// Binary snapshot IO
// ---------------------------------------------------------------------------

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"VELA";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotField {
    pub name: String,
    pub components: u32,
    /// components × n³ values, each component row-major.
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: u32,
    pub l: f64,
    pub fields: Vec<SnapshotField>,
}

impl Snapshot {
    pub fn field(&self, name: &str) -> Option<&SnapshotField> {
        self.fields.iter().find(|f| f.name == name)
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&snap.n.to_le_bytes())?;
    w.write_all(&snap.l.to_le_bytes())?;
    w.write_all(&(snap.fields.len() as u32).to_le_bytes())?;
    let n3 = (snap.n as usize).pow(3);
    for f in &snap.fields {
        if f.data.len() != f.components as usize * n3 {
            return Err(Error::Format(format!(
                "field '{}' has {} values, expected {}",
                f.name,
                f.data.len(),
                f.components as usize * n3
            )));
        }
        w.write_all(&(f.name.len() as u32).to_le_bytes())?;
        w.write_all(f.name.as_bytes())?;
        w.write_all(&f.components.to_le_bytes())?;
        for v in &f.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl std::io::Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let magic: [u8; 4] = read_exact(&mut r)?;
    if magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let n = u32::from_le_bytes(read_exact(&mut r)?);
    let l = f64::from_le_bytes(read_exact(&mut r)?);
    let count = u32::from_le_bytes(read_exact(&mut r)?);
    let n3 = (n as usize).pow(3);
    let mut fields = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = u32::from_le_bytes(read_exact(&mut r)?) as usize;
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf)?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| Error::Format("field name is not UTF-8".into()))?;
        let components = u32::from_le_bytes(read_exact(&mut r)?);
        let len = components as usize * n3;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(read_exact(&mut r)?));
        }
        fields.push(SnapshotField { name, components, data });
    }
    Ok(Snapshot { n, l, fields })
}
