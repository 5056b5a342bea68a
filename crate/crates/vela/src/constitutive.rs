//! Elasticity tensors for incompressible isotropic viscoelasticity.
//!
//! A material is described either by a strain-energy function W(F) — from
//! which the Piola stress S = ∂W/∂F and the elasticity tensor
//! A^{pk}_{in} = ∂²W/∂F^i_p ∂F^n_k follow by differentiation — or by the
//! Oldroyd-B closed form, which is not derivable from a stress-free W.
//!
//! From A(F) the working tensor Â(H) is assembled by the four-fold
//! contraction with F = H⁻¹ plus the null Lagrangian
//! L^{pq}_{mr} = c2²(δ^p_m δ^q_r − δ^p_r δ^q_m), so that
//! Â(I) = (c1²−c2²)δ^p_m δ^q_r + c2² δ^{pq} δ_{mr} is positive definite.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Mat3, Rank4Tensor, Vec3};

/// Default central-difference step for first derivatives of W.
pub const FD_STEP_FIRST: f64 = 1e-5;
/// Default nested central-difference step for second derivatives of W.
pub const FD_STEP_SECOND: f64 = 1e-4;

/// Wave speeds and viscosity. The shear speed c2 is fixed to 1 by convention;
/// c1 is the pressure-wave speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub c1: f64,
    pub c2: f64,
    pub nu: f64,
}

impl MaterialParams {
    /// c2 is fixed to 1; requires c1 ≥ 1 and ν ≥ 0.
    pub fn new(c1: f64, nu: f64) -> Result<Self> {
        let p = Self { c1, c2: 1.0, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c2 == 1.0) {
            return Err(Error::Config(format!("c2 must be 1, got {}", self.c2)));
        }
        if !(self.c1 >= self.c2) || !self.c1.is_finite() {
            return Err(Error::Config(format!("c1 must satisfy c1 >= c2 = 1, got {}", self.c1)));
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(Error::Config(format!("nu must be >= 0, got {}", self.nu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrainEnergyKind {
    BuiltinIsotropic,
    UserSupplied,
}

/// A strain-energy function W over the admissible set det F = 1.
#[derive(Clone)]
pub struct StrainEnergy {
    kind: StrainEnergyKind,
    eval: Arc<dyn Fn(&Mat3) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for StrainEnergy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StrainEnergy").field("kind", &self.kind).finish()
    }
}

impl StrainEnergy {
    /// The simplest isotropic polynomial in the invariants I1 = tr(FᵀF) and
    /// I2 = tr((FᵀF)²) whose stress vanishes at the identity and whose
    /// elasticity tensor at the identity hits the target (c1, c2):
    ///
    ///   W(F) = a(I1 − 3) + b(I2 − 3) + c(I1 − 3)²
    ///
    /// with a = −c2²/2, b = c2²/4, c = (c1² − 2c2²)/8.
    pub fn builtin(params: &MaterialParams) -> Self {
        let (a, b, c) = builtin_coefficients(params);
        Self {
            kind: StrainEnergyKind::BuiltinIsotropic,
            eval: Arc::new(move |f: &Mat3| {
                let cmat = f.transpose() * f;
                let i1 = cmat.trace();
                let i2 = (cmat * cmat).trace();
                a * (i1 - 3.0) + b * (i2 - 3.0) + c * (i1 - 3.0) * (i1 - 3.0)
            }),
        }
    }

    pub fn user_supplied(f: impl Fn(&Mat3) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: StrainEnergyKind::UserSupplied,
            eval: Arc::new(f),
        }
    }

    pub fn kind(&self) -> StrainEnergyKind {
        self.kind
    }

    pub fn eval(&self, f: &Mat3) -> Result<f64> {
        let w = (self.eval)(f);
        if w.is_finite() {
            Ok(w)
        } else {
            Err(Error::Evaluation)
        }
    }
}

fn builtin_coefficients(params: &MaterialParams) -> (f64, f64, f64) {
    let c2sq = params.c2 * params.c2;
    let c1sq = params.c1 * params.c1;
    (-c2sq / 2.0, c2sq / 4.0, (c1sq - 2.0 * c2sq) / 8.0)
}

/// Piola stress S^i_p = ∂W/∂F^i_p by central finite differences.
/// `step` defaults to [`FD_STEP_FIRST`] when `None`.
pub fn piola_stress(w: &StrainEnergy, f: &Mat3, step: Option<f64>) -> Result<Mat3> {
    let h = step.unwrap_or(FD_STEP_FIRST);
    if !(h > f64::EPSILON) {
        return Err(Error::Config(format!("FD step underflow: h = {h}")));
    }
    if f.determinant() <= 0.0 {
        return Err(Error::Domain(format!(
            "piola_stress requires det F > 0, got {}",
            f.determinant()
        )));
    }
    let mut s = Mat3::zeros();
    for i in 0..3 {
        for p in 0..3 {
            let mut fp = *f;
            let mut fm = *f;
            fp[(i, p)] += h;
            fm[(i, p)] -= h;
            s[(i, p)] = (w.eval(&fp)? - w.eval(&fm)?) / (2.0 * h);
        }
    }
    Ok(s)
}

/// Elasticity tensor A^{pk}_{in} = ∂²W/∂F^i_p ∂F^n_k by nested central
/// differences; stored as `get(p, k, i, n)`.
pub fn elasticity_tensor(w: &StrainEnergy, f: &Mat3, step: Option<f64>) -> Result<Rank4Tensor> {
    let h = step.unwrap_or(FD_STEP_SECOND);
    if !(h > f64::EPSILON) {
        return Err(Error::Config(format!("FD step underflow: h = {h}")));
    }
    if f.determinant() <= 0.0 {
        return Err(Error::Domain(format!(
            "elasticity_tensor requires det F > 0, got {}",
            f.determinant()
        )));
    }
    let mut a = Rank4Tensor::zero();
    for p in 0..3 {
        for k in 0..3 {
            for i in 0..3 {
                for n in 0..3 {
                    let mut fpp = *f;
                    let mut fpm = *f;
                    let mut fmp = *f;
                    let mut fmm = *f;
                    fpp[(i, p)] += h;
                    fpp[(n, k)] += h;
                    fpm[(i, p)] += h;
                    fpm[(n, k)] -= h;
                    fmp[(i, p)] -= h;
                    fmp[(n, k)] += h;
                    fmm[(i, p)] -= h;
                    fmm[(n, k)] -= h;
                    let val = (w.eval(&fpp)? - w.eval(&fpm)? - w.eval(&fmp)? + w.eval(&fmm)?)
                        / (4.0 * h * h);
                    a.set(p, k, i, n, val);
                }
            }
        }
    }
    Ok(a)
}

/// Closed-form elasticity tensor of the builtin W, avoiding FD entirely:
///
///   A^{pk}_{in}(F) = 2a δ_in δ_pk
///                  + 4b[δ_in C_kp + F^i_k F^n_p + (FFᵀ)_in δ_pk]
///                  + 4c[2 F^n_k F^i_p + (I1 − 3) δ_in δ_pk]
///
/// with C = FᵀF and the coefficients of [`StrainEnergy::builtin`].
pub fn elasticity_tensor_analytic(params: &MaterialParams, f: &Mat3) -> Rank4Tensor {
    let (a, b, c) = builtin_coefficients(params);
    let cmat = f.transpose() * f;
    let bmat = f * f.transpose();
    let i1 = cmat.trace();
    let d = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
    Rank4Tensor::from_fn(|p, k, i, n| {
        2.0 * a * d(i, n) * d(p, k)
            + 4.0 * b * (d(i, n) * cmat[(k, p)] + f[(i, k)] * f[(n, p)] + bmat[(i, n)] * d(p, k))
            + 4.0 * c * (2.0 * f[(n, k)] * f[(i, p)] + (i1 - 3.0) * d(i, n) * d(p, k))
    })
}

/// Assemble Â^{pq}_{mr}(H) = A^{lk}_{jn}(F) F^p_l F^j_m F^n_r F^q_k + L^{pq}_{mr}
/// with F = H⁻¹ and the null Lagrangian L; stored as `get(p, q, m, r)`.
///
/// The pairing attaches m to the lower-first slot of A and p to the
/// upper-first slot (the pairing produced by substituting δ^l_i = F^l_m H^m_i
/// and ∂F = −F(∂Ḣ)F into A ∂F); it is the one with the major symmetry
/// Â^{pq}_{mr} = Â^{qp}_{rm}, and both pairings agree at H = I.
pub fn ahat_from_a(a: &Rank4Tensor, h: &Mat3, c2: f64) -> Result<Rank4Tensor> {
    let f = invert(h)?;
    // Contract one index at a time: 4 stages of 3^5 multiplies instead of 3^8.
    let mut t1 = [[[[0.0f64; 3]; 3]; 3]; 3]; // t1[l][k][j][r] = A^{lk}_{jn} F^n_r
    for l in 0..3 {
        for k in 0..3 {
            for j in 0..3 {
                for r in 0..3 {
                    let mut s = 0.0;
                    for n in 0..3 {
                        s += a.get(l, k, j, n) * f[(n, r)];
                    }
                    t1[l][k][j][r] = s;
                }
            }
        }
    }
    let mut t2 = [[[[0.0f64; 3]; 3]; 3]; 3]; // t2[l][q][j][r] = t1[l][k][j][r] F^q_k
    for l in 0..3 {
        for q in 0..3 {
            for j in 0..3 {
                for r in 0..3 {
                    let mut s = 0.0;
                    for k in 0..3 {
                        s += t1[l][k][j][r] * f[(q, k)];
                    }
                    t2[l][q][j][r] = s;
                }
            }
        }
    }
    let mut t3 = [[[[0.0f64; 3]; 3]; 3]; 3]; // t3[p][q][j][r] = t2[l][q][j][r] F^p_l
    for p in 0..3 {
        for q in 0..3 {
            for j in 0..3 {
                for r in 0..3 {
                    let mut s = 0.0;
                    for l in 0..3 {
                        s += t2[l][q][j][r] * f[(p, l)];
                    }
                    t3[p][q][j][r] = s;
                }
            }
        }
    }
    let c2sq = c2 * c2;
    let d = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
    Ok(Rank4Tensor::from_fn(|p, q, m, r| {
        let mut s = 0.0;
        for j in 0..3 {
            s += t3[p][q][j][r] * f[(j, m)];
        }
        s + c2sq * (d(p, m) * d(q, r) - d(p, r) * d(q, m))
    }))
}

/// Oldroyd-B closed form Â^{pq}_{mr}(H) = (FFᵀ)_pq (FᵀF)_mr with F = H⁻¹.
pub fn oldroyd_b_ahat(h: &Mat3) -> Result<Rank4Tensor> {
    let f = invert(h)?;
    let b = f * f.transpose();
    let c = f.transpose() * f;
    Ok(Rank4Tensor::from_fn(|p, q, m, r| b[(p, q)] * c[(m, r)]))
}

fn invert(h: &Mat3) -> Result<Mat3> {
    let det = h.determinant();
    if det.abs() < 1e-12 {
        return Err(Error::Singular { det });
    }
    h.try_inverse().ok_or(Error::Singular { det })
}

/// Minimum of A^{jk}_{in} ξ_j ξ_k ω^i ω^n over `n_samples` seeded pairs
/// (ξ, ω) ∈ S² × S². Reports pass iff strictly positive.
pub fn legendre_hadamard_check(a_at_i: &Rank4Tensor, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Config("legendre_hadamard_check needs n_samples >= 1".into()));
    }
    let mut rng = rng::stream(seed, "legendre-hadamard");
    let mut min = f64::INFINITY;
    for _ in 0..n_samples {
        let xi: Vec3 = rng::unit_vector(&mut rng);
        let om: Vec3 = rng::unit_vector(&mut rng);
        let val = a_at_i.contract_vectors(&xi, &xi, &om, &om);
        min = min.min(val);
    }
    Ok(min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    BuiltinIsotropic,
    OldroydB,
    Custom,
}

/// Wave speeds, viscosity, and an Â(H) evaluator.
#[derive(Clone)]
pub struct MaterialModel {
    pub params: MaterialParams,
    pub kind: ModelKind,
    energy: Option<StrainEnergy>,
    custom_ahat: Option<Arc<dyn Fn(&Mat3) -> Rank4Tensor + Send + Sync>>,
}

impl std::fmt::Debug for MaterialModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MaterialModel")
            .field("params", &self.params)
            .field("kind", &self.kind)
            .finish()
    }
}

impl MaterialModel {
    /// Builtin isotropic model with the analytic A/Â path.
    pub fn builtin(params: MaterialParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            energy: Some(StrainEnergy::builtin(&params)),
            params,
            kind: ModelKind::BuiltinIsotropic,
            custom_ahat: None,
        })
    }

    /// Oldroyd-B model; its Â has the identity-value structure of c1 = c2 = 1.
    pub fn oldroyd_b(nu: f64) -> Result<Self> {
        let params = MaterialParams::new(1.0, nu)?;
        Ok(Self {
            params,
            kind: ModelKind::OldroydB,
            energy: None,
            custom_ahat: None,
        })
    }

    /// Model with an arbitrary Â(H) evaluator; used by verification fixtures.
    pub fn custom(
        params: MaterialParams,
        ahat: impl Fn(&Mat3) -> Rank4Tensor + Send + Sync + 'static,
    ) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            kind: ModelKind::Custom,
            energy: None,
            custom_ahat: Some(Arc::new(ahat)),
        })
    }

    pub fn strain_energy(&self) -> Option<&StrainEnergy> {
        self.energy.as_ref()
    }

    /// Â(H). Builtin models use the analytic A(F) closed form (no FD);
    /// Oldroyd-B uses its product form; custom models call their evaluator.
    pub fn ahat(&self, h: &Mat3) -> Result<Rank4Tensor> {
        match self.kind {
            ModelKind::BuiltinIsotropic => {
                let f = invert(h)?;
                let a = elasticity_tensor_analytic(&self.params, &f);
                ahat_from_a(&a, h, self.params.c2)
            }
            ModelKind::OldroydB => oldroyd_b_ahat(h),
            ModelKind::Custom => {
                let eval = self.custom_ahat.as_ref().expect("custom model has evaluator");
                Ok(eval(h))
            }
        }
    }

    /// Â(H) with A obtained by nested finite differences of W instead of the
    /// closed form. Only available for strain-energy-backed models.
    pub fn ahat_fd(&self, h: &Mat3) -> Result<Rank4Tensor> {
        let w = self
            .energy
            .as_ref()
            .ok_or_else(|| Error::Config("ahat_fd requires a strain-energy model".into()))?;
        let f = invert(h)?;
        let a = elasticity_tensor(w, &f, None)?;
        ahat_from_a(&a, h, self.params.c2)
    }

    /// Closed-form Â(I) for this model's wave speeds (Oldroyd-B uses the
    /// c1 = c2 = 1 structure).
    pub fn ahat_identity(&self) -> Rank4Tensor {
        Rank4Tensor::ahat_identity(self.params.c1, self.params.c2)
    }
}
