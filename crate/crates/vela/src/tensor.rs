//! Pointwise rank-4 and rank-6 tensors with the contractions used by the
//! constitutive and null-condition machinery.
//!
//! Index conventions (matching the continuum notation H^i_j = row i, col j):
//! - `Rank4Tensor` stores A^{lm}_{pj} with upper pair first:
//!   `get(l, m, p, j)`.
//! - `Rank6Tensor` stores B^{lmn}_{pjk}: `get(l, m, n, p, j, k)`.

pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Dense 81-component tensor at a single material point.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank4Tensor {
    data: [f64; 81],
}

impl Default for Rank4Tensor {
    fn default() -> Self {
        Self::zero()
    }
}

impl Rank4Tensor {
    pub fn zero() -> Self {
        Self { data: [0.0; 81] }
    }

    #[inline]
    fn idx(l: usize, m: usize, p: usize, j: usize) -> usize {
        ((l * 3 + m) * 3 + p) * 3 + j
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize, p: usize, j: usize) -> f64 {
        self.data[Self::idx(l, m, p, j)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: usize, p: usize, j: usize, v: f64) {
        self.data[Self::idx(l, m, p, j)] = v;
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zero();
        for l in 0..3 {
            for m in 0..3 {
                for p in 0..3 {
                    for j in 0..3 {
                        t.set(l, m, p, j, f(l, m, p, j));
                    }
                }
            }
        }
        t
    }

    pub fn components(&self) -> &[f64; 81] {
        &self.data
    }

    /// The closed-form value at the identity,
    /// (c1^2 - c2^2) d^l_p d^m_j + c2^2 d^{lm} d_{pj}.
    pub fn ahat_identity(c1: f64, c2: f64) -> Self {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Self::from_fn(|l, m, p, j| (c1 * c1 - c2 * c2) * d(l, p) * d(m, j) + c2 * c2 * d(l, m) * d(p, j))
    }

    /// Quadratic form A^{lm}_{pj} X^p_l Y^j_m.
    pub fn contract_quad(&self, x: &Mat3, y: &Mat3) -> f64 {
        let mut s = 0.0;
        for l in 0..3 {
            for m in 0..3 {
                for p in 0..3 {
                    for j in 0..3 {
                        s += self.get(l, m, p, j) * x[(p, l)] * y[(j, m)];
                    }
                }
            }
        }
        s
    }

    /// Double contraction A^{lm}_{pj} w_l w_m x^p y^j for vectors; used by the
    /// Legendre-Hadamard check and the null-condition identity part.
    pub fn contract_vectors(&self, w1: &Vec3, w2: &Vec3, x: &Vec3, y: &Vec3) -> f64 {
        let mut s = 0.0;
        for l in 0..3 {
            for m in 0..3 {
                for p in 0..3 {
                    for j in 0..3 {
                        s += self.get(l, m, p, j) * w1[l] * w2[m] * x[p] * y[j];
                    }
                }
            }
        }
        s
    }

    /// Maximum absolute deviation from the major symmetry
    /// A^{lm}_{pj} = A^{ml}_{jp}.
    pub fn major_symmetry_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for l in 0..3 {
            for m in 0..3 {
                for p in 0..3 {
                    for j in 0..3 {
                        r = r.max((self.get(l, m, p, j) - self.get(m, l, j, p)).abs());
                    }
                }
            }
        }
        r
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// Flatten the quadratic form M -> A M M into a symmetric 9x9 matrix over
    /// vec(M) with M^p_l at flat index 3*p + l, so that eigenvalues of the
    /// returned matrix bound the contraction from below.
    pub fn quad_form_matrix(&self) -> nalgebra::SMatrix<f64, 9, 9> {
        let mut q = nalgebra::SMatrix::<f64, 9, 9>::zeros();
        for l in 0..3 {
            for m in 0..3 {
                for p in 0..3 {
                    for j in 0..3 {
                        let a = 3 * p + l;
                        let b = 3 * j + m;
                        q[(a, b)] += 0.5 * self.get(l, m, p, j);
                        q[(b, a)] += 0.5 * self.get(l, m, p, j);
                    }
                }
            }
        }
        q
    }
}

impl std::ops::Sub<&Rank4Tensor> for &Rank4Tensor {
    type Output = Rank4Tensor;
    fn sub(self, rhs: &Rank4Tensor) -> Rank4Tensor {
        let mut out = Rank4Tensor::zero();
        for i in 0..81 {
            out.data[i] = self.data[i] - rhs.data[i];
        }
        out
    }
}

impl std::ops::Add<&Rank4Tensor> for &Rank4Tensor {
    type Output = Rank4Tensor;
    fn add(self, rhs: &Rank4Tensor) -> Rank4Tensor {
        let mut out = Rank4Tensor::zero();
        for i in 0..81 {
            out.data[i] = self.data[i] + rhs.data[i];
        }
        out
    }
}

/// Dense 729-component tensor, assembled only at H = I.
#[derive(Debug, Clone)]
pub struct Rank6Tensor {
    data: Vec<f64>,
}

impl Rank6Tensor {
    pub fn zero() -> Self {
        Self { data: vec![0.0; 729] }
    }

    #[inline]
    fn idx(l: usize, m: usize, n: usize, p: usize, j: usize, k: usize) -> usize {
        ((((l * 3 + m) * 3 + n) * 3 + p) * 3 + j) * 3 + k
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize, n: usize, p: usize, j: usize, k: usize) -> f64 {
        self.data[Self::idx(l, m, n, p, j, k)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: usize, n: usize, p: usize, j: usize, k: usize, v: f64) {
        self.data[Self::idx(l, m, n, p, j, k)] = v;
    }

    /// B^{lmn}_{pjk} w_l w_m w_n x^p y^j z^k.
    pub fn contract(&self, w: &Vec3, x: &Vec3, y: &Vec3, z: &Vec3) -> f64 {
        let mut s = 0.0;
        for l in 0..3 {
            for m in 0..3 {
                let wlm = w[l] * w[m];
                for n in 0..3 {
                    let wlmn = wlm * w[n];
                    for p in 0..3 {
                        for j in 0..3 {
                            for k in 0..3 {
                                s += self.get(l, m, n, p, j, k) * wlmn * x[p] * y[j] * z[k];
                            }
                        }
                    }
                }
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Rank6Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
