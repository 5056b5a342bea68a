//! Shear-wave null condition verification.
//!
//! The rank-6 tensor B^{lmn}_{pjk} = (∂Â^{lm}_{pj}/∂H^k_n, Â^{lm}_{pj} δ^n_k)
//! at H = I must annihilate triples contracted with ω³ and tangentially
//! projected ξ vectors. The two parts are kept separately retrievable; their
//! contractions are reported individually and summed.

use crate::constitutive::MaterialModel;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Mat3, Rank4Tensor, Rank6Tensor, Vec3};

/// Default FD step for ∂Â/∂H at the identity.
pub const B_FD_STEP: f64 = 1e-5;
/// Richardson residual above which the FD quality warning is raised.
pub const B_FD_WARN_TOL: f64 = 1e-6;

/// The two parts of B at H = I.
#[derive(Debug, Clone)]
pub struct BTensor {
    /// ∂Â^{lm}_{pj}/∂H^k_n at H = I, stored `get(l, m, n, p, j, k)`.
    pub derivative: Rank6Tensor,
    /// Â^{lm}_{pj}(I) δ^n_k, same storage.
    pub ahat_delta: Rank6Tensor,
    /// Max entry difference between the h and h/2 finite-difference runs.
    pub richardson_residual: f64,
    /// True when `richardson_residual` exceeds [`B_FD_WARN_TOL`].
    pub fd_warning: bool,
}

impl BTensor {
    /// Sum of the derivative and Â·δ parts.
    pub fn total(&self) -> Rank6Tensor {
        let mut t = Rank6Tensor::zero();
        for l in 0..3 {
            for m in 0..3 {
                for n in 0..3 {
                    for p in 0..3 {
                        for j in 0..3 {
                            for k in 0..3 {
                                t.set(
                                    l, m, n, p, j, k,
                                    self.derivative.get(l, m, n, p, j, k)
                                        + self.ahat_delta.get(l, m, n, p, j, k),
                                );
                            }
                        }
                    }
                }
            }
        }
        t
    }
}

fn dahat_fd(model: &MaterialModel, step: f64) -> Result<Rank6Tensor> {
    let mut out = Rank6Tensor::zero();
    for k in 0..3 {
        for n in 0..3 {
            let mut hp = Mat3::identity();
            let mut hm = Mat3::identity();
            hp[(k, n)] += step;
            hm[(k, n)] -= step;
            let ap = model.ahat(&hp)?;
            let am = model.ahat(&hm)?;
            for l in 0..3 {
                for m in 0..3 {
                    for p in 0..3 {
                        for j in 0..3 {
                            let d = (ap.get(l, m, p, j) - am.get(l, m, p, j)) / (2.0 * step);
                            out.set(l, m, n, p, j, k, d);
                        }
                    }
                }
            }
        }
    }
    if !out.is_finite() {
        return Err(Error::Evaluation);
    }
    Ok(out)
}

/// Assemble B at H = I: the ∂Â/∂H part by central FD in each H entry (with a
/// Richardson h vs h/2 quality comparison) and the Â(I)·δ part exactly.
pub fn b_tensor(model: &MaterialModel) -> Result<BTensor> {
    let d_h = dahat_fd(model, B_FD_STEP)?;
    let d_h2 = dahat_fd(model, B_FD_STEP / 2.0)?;
    let richardson_residual = d_h.max_abs_diff(&d_h2);
    let ahat_i = model.ahat(&Mat3::identity())?;
    let mut ahat_delta = Rank6Tensor::zero();
    for l in 0..3 {
        for m in 0..3 {
            for p in 0..3 {
                for j in 0..3 {
                    // δ^n_k: only the n = k diagonal is populated.
                    let a = ahat_i.get(l, m, p, j);
                    for n in 0..3 {
                        ahat_delta.set(l, m, n, p, j, n, a);
                    }
                }
            }
        }
    }
    Ok(BTensor {
        derivative: d_h2,
        ahat_delta,
        richardson_residual,
        fd_warning: richardson_residual > B_FD_WARN_TOL,
    })
}

/// Orthogonal projection onto span{ω}⊥.
pub fn p1_project(u: &Vec3, omega: &Vec3) -> Result<Vec3> {
    check_unit(omega)?;
    Ok(u - omega * u.dot(omega))
}

/// Orthogonal projection onto span{ω}.
pub fn p2_project(u: &Vec3, omega: &Vec3) -> Result<Vec3> {
    check_unit(omega)?;
    Ok(omega * u.dot(omega))
}

fn check_unit(omega: &Vec3) -> Result<()> {
    if (omega.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "projection direction must be unit length, |ω| = {}",
            omega.norm()
        )));
    }
    Ok(())
}

/// |B^{lmn}_{pjk} ω_l ω_m ω_n (P1ξ1)^p (P1ξ2)^j (P1ξ3)^k|.
pub fn null_residual(
    b: &Rank6Tensor,
    omega: &Vec3,
    xi1: &Vec3,
    xi2: &Vec3,
    xi3: &Vec3,
) -> Result<f64> {
    let t1 = p1_project(xi1, omega)?;
    let t2 = p1_project(xi2, omega)?;
    let t3 = p1_project(xi3, omega)?;
    Ok(b.contract(omega, &t1, &t2, &t3).abs())
}

/// Sampled verification result with the per-part breakdown.
#[derive(Debug, Clone)]
pub struct NullReport {
    pub n_samples: usize,
    pub seed: u64,
    /// Max |contraction| of the summed tensor.
    pub max_residual: f64,
    /// Max |contraction| of the ∂Â/∂H part alone.
    pub max_derivative_part: f64,
    /// Max |contraction| of the Â(I)·δ part alone (zero in exact arithmetic).
    pub max_ahat_delta_part: f64,
    pub threshold: f64,
    pub fd_warning: bool,
    pub richardson_residual: f64,
}

impl NullReport {
    pub fn pass(&self) -> bool {
        self.max_residual <= self.threshold
    }
}

impl std::fmt::Display for NullReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "null condition check: {}", if self.pass() { "PASS" } else { "FAIL" })?;
        writeln!(f, "  samples:             {}", self.n_samples)?;
        writeln!(f, "  seed:                {}", self.seed)?;
        writeln!(f, "  max residual (sum):  {:.3e}", self.max_residual)?;
        writeln!(f, "  max dA/dH part:      {:.3e}", self.max_derivative_part)?;
        writeln!(f, "  max A*delta part:    {:.3e}", self.max_ahat_delta_part)?;
        writeln!(f, "  threshold:           {:.3e}", self.threshold)?;
        write!(
            f,
            "  FD quality:          residual {:.3e}{}",
            self.richardson_residual,
            if self.fd_warning { " (WARNING: above tolerance)" } else { "" }
        )
    }
}

/// Max null residual over `n_samples` seeded (ω, ξ1, ξ2, ξ3) samples with ω
/// uniform on S² and ξ uniform in the unit ball. Deterministic under `seed`.
pub fn null_condition_check(
    model: &MaterialModel,
    n_samples: usize,
    seed: u64,
    threshold: f64,
) -> Result<NullReport> {
    if n_samples == 0 {
        return Err(Error::Config("null_condition_check needs n_samples >= 1".into()));
    }
    let b = b_tensor(model)?;
    let total = b.total();
    let mut rng = rng::stream(seed, "null-condition");
    let mut max_residual: f64 = 0.0;
    let mut max_d: f64 = 0.0;
    let mut max_ad: f64 = 0.0;
    for _ in 0..n_samples {
        let omega = rng::unit_vector(&mut rng);
        let xi1 = rng::ball_point(&mut rng);
        let xi2 = rng::ball_point(&mut rng);
        let xi3 = rng::ball_point(&mut rng);
        max_residual = max_residual.max(null_residual(&total, &omega, &xi1, &xi2, &xi3)?);
        max_d = max_d.max(null_residual(&b.derivative, &omega, &xi1, &xi2, &xi3)?);
        max_ad = max_ad.max(null_residual(&b.ahat_delta, &omega, &xi1, &xi2, &xi3)?);
    }
    Ok(NullReport {
        n_samples,
        seed,
        max_residual,
        max_derivative_part: max_d,
        max_ahat_delta_part: max_ad,
        threshold,
        fd_warning: b.fd_warning,
        richardson_residual: b.richardson_residual,
    })
}

/// Planted-violation fixture: Â(H) = Â(I) + Ḣ¹₁ · T with T a dense constant
/// tensor. Its H-derivative δ_k1 δ_n1 · T contracts to a generically nonzero
/// value on tangential triples, so the check must fail on it.
///
/// Note a trace-coupled violation Â(I) + (tr Ḣ)·T cannot work: the derivative
/// of tr Ḣ is δ^n_k, whose contraction picks up ⟨ω, P1ξ3⟩ = 0 and therefore
/// vanishes identically. Coupling to a single entry of Ḣ avoids that
/// degeneracy.
pub fn adversarial_model() -> MaterialModel {
    let params = crate::constitutive::MaterialParams::new(1.0, 0.0).unwrap();
    MaterialModel::custom(params, |h: &Mat3| {
        let base = Rank4Tensor::ahat_identity(1.0, 1.0);
        let hdot11 = h[(0, 0)] - 1.0;
        Rank4Tensor::from_fn(|l, m, p, j| base.get(l, m, p, j) + 10.0 * hdot11)
    })
    .unwrap()
}
