//! Run-time verification functionals: generalized energies built from the
//! scaling and rotation vector fields, weighted dispersive norms, spectral
//! projections along the radial direction, local-energy-decay ratios,
//! pressure-bound monitors, weighted Sobolev/Hardy inequality checks, and
//! CSV report assembly.
//!
//! All functionals are truncated to derivative orders σ ≤ 2, θ ≤ 1: the
//! grid cannot support the high derivative counts of the analytical
//! estimates, so every monitor here is a desk-scale proxy with its measured
//! constant reported rather than assumed.

use crate::constitutive::MaterialModel;
use crate::dynamics::{nonlinear_terms, pressure_gradient, time_derivative, SolverConfig, State};
use crate::error::{Error, Result};
use crate::fields::{
    cutoffs, japanese_bracket, omega_scalar, omega_tilde, s_tilde, CutoffParams, Grid,
    MatrixField, ScalarField, VectorField,
};
use crate::tensor::{Mat3, Rank4Tensor, Vec3};

// ---------------------------------------------------------------------------
// Word enumeration over the vector fields Υ ∈ {∂₁, ∂₂, ∂₃, Ω̃₁, Ω̃₂, Ω̃₃}
// ---------------------------------------------------------------------------

/// Number of first-order letters: three translations and three rotations.
const UPSILON_LETTERS: usize = 6;

/// Apply one letter of Υ to the pair U̇ = (Ḣ, v̇).
fn apply_upsilon(h: &MatrixField, v: &VectorField, letter: usize) -> (MatrixField, VectorField) {
    if letter < 3 {
        pair_derivative(h, v, letter)
    } else {
        omega_tilde(h, v, letter - 3)
    }
}

/// Apply one letter of Υ to a plain vector field (translation, or rotation
/// with the vector transformation law Ω v + V⁽ⁱ⁾v).
fn apply_upsilon_vector(v: &VectorField, letter: usize) -> VectorField {
    if letter < 3 {
        let mut out = VectorField::zeros(v.grid());
        for a in 0..3 {
            *out.comp_mut(a) = v.comp(a).derivative(letter);
        }
        out
    } else {
        omega_tilde(&MatrixField::zeros(v.grid()), v, letter - 3).1
    }
}

/// Coordinate derivative ∂ of both components of a pair.
fn pair_derivative(h: &MatrixField, v: &VectorField, axis: usize) -> (MatrixField, VectorField) {
    let mut ho = MatrixField::zeros(h.grid());
    for i in 0..3 {
        for j in 0..3 {
            *ho.comp_mut(i, j) = h.comp(i, j).derivative(axis);
        }
    }
    let mut vo = VectorField::zeros(v.grid());
    for a in 0..3 {
        *vo.comp_mut(a) = v.comp(a).derivative(axis);
    }
    (ho, vo)
}

fn pair_norm(h: &MatrixField, v: &VectorField) -> f64 {
    let hn = h.l2_norm();
    let vn = v.l2_norm();
    (hn * hn + vn * vn).sqrt()
}

/// ‖∇(Ḣ, v̇)‖ with all coordinate derivatives under one norm.
fn pair_gradient_norm(h: &MatrixField, v: &VectorField) -> f64 {
    let mut acc = 0.0;
    for axis in 0..3 {
        let (gh, gv) = pair_derivative(h, v, axis);
        let hn = gh.l2_norm();
        let vn = gv.l2_norm();
        acc += hn * hn + vn * vn;
    }
    acc.sqrt()
}

/// Visit every word S̃ᵃΥᵅU̇ with a + |α| ≤ `sigma`, a ≤ `theta`, calling
/// `visit(a, |α|, word_h, word_v)` once per word in a fixed deterministic
/// order.  Since the letters of Υ are purely spatial, ∂ₜ(ΥᵅU̇) = Υᵅ(∂ₜU̇),
/// so the scaling field S̃ = t∂ₜ + r∂ᵣ − 1 is applied after Υᵅ using the
/// letter-transported time derivative.  `du` must be supplied when θ ≥ 1.
fn walk_words<F>(
    h: &MatrixField,
    v: &VectorField,
    t: f64,
    du: Option<(&MatrixField, &VectorField)>,
    sigma: usize,
    theta: usize,
    visit: &mut F,
) -> Result<()>
where
    F: FnMut(usize, usize, &MatrixField, &VectorField) -> Result<()>,
{
    if theta >= 1 && sigma >= 1 && du.is_none() {
        return Err(Error::Config(
            "scaling words (theta >= 1) require the time derivative of the state".into(),
        ));
    }
    walk_recurse(h, v, du, 0, t, sigma, theta, visit)
}

#[allow(clippy::too_many_arguments)]
fn walk_recurse<F>(
    h: &MatrixField,
    v: &VectorField,
    du: Option<(&MatrixField, &VectorField)>,
    depth: usize,
    t: f64,
    sigma: usize,
    theta: usize,
    visit: &mut F,
) -> Result<()>
where
    F: FnMut(usize, usize, &MatrixField, &VectorField) -> Result<()>,
{
    visit(0, depth, h, v)?;
    if theta >= 1 && depth + 1 <= sigma {
        let (dh, dv) = du.expect("time derivative checked by walk_words");
        let (sh, sv) = s_tilde(h, v, t, dh, dv);
        visit(1, depth, &sh, &sv)?;
    }
    if depth < sigma {
        for letter in 0..UPSILON_LETTERS {
            let (ch, cv) = apply_upsilon(h, v, letter);
            // Children need a transported time derivative only if a scaling
            // word is still reachable below them.
            let child_du = if theta >= 1 && depth + 2 <= sigma {
                let (dh, dv) = du.expect("time derivative checked by walk_words");
                Some(apply_upsilon(dh, dv, letter))
            } else {
                None
            };
            walk_recurse(
                &ch,
                &cv,
                child_du.as_ref().map(|(a, b)| (a, b)),
                depth + 1,
                t,
                sigma,
                theta,
                visit,
            )?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Generalized energies
// ---------------------------------------------------------------------------

fn check_energy_orders(sigma: usize, theta: usize) -> Result<()> {
    if sigma > 2 || theta > 1 || theta > sigma {
        return Err(Error::Capability { sigma, theta });
    }
    Ok(())
}

/// Pointwise Â(I + Ḣ) over the whole grid, computed once and reused across
/// all words of the energy quadratic form.
fn pointwise_ahat(state: &State, model: &MaterialModel) -> Result<Vec<Rank4Tensor>> {
    let grid = state.grid();
    let id = Mat3::identity();
    let mut out = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let ahat = model.ahat(&(id + state.hdot.at(idx))).map_err(|e| {
            Error::StateInvalid(format!("elasticity tensor failed at grid index {idx}: {e}"))
        })?;
        out.push(ahat);
    }
    Ok(out)
}

fn word_energy(ahat: &[Rank4Tensor], wh: &MatrixField, wv: &VectorField) -> f64 {
    let mut acc = 0.0;
    for (idx, a) in ahat.iter().enumerate() {
        let hm = wh.at(idx);
        acc += 0.5 * (a.contract_quad(&hm, &hm) + wv.at(idx).norm_squared());
    }
    acc
}

/// Generalized energy
/// E_{σ,θ} = ½ Σ_{a+|α| ≤ σ, a ≤ θ} ∫ [Â(H) S̃ᵃΥᵅḢ · S̃ᵃΥᵅḢ + |S̃ᵃΥᵅv̇|²].
///
/// Supported truncation: σ ≤ 2, θ ≤ 1.  The time derivative `du` of the
/// state is required whenever θ ≥ 1.
pub fn energy(
    state: &State,
    model: &MaterialModel,
    sigma: usize,
    theta: usize,
    du: Option<(&MatrixField, &VectorField)>,
) -> Result<f64> {
    check_energy_orders(sigma, theta)?;
    let ahat = pointwise_ahat(state, model)?;
    let cell = state.grid().cell_volume();
    let mut total = 0.0;
    walk_words(
        &state.hdot,
        &state.vdot,
        state.t,
        du,
        sigma,
        theta,
        &mut |_, _, wh, wv| {
            total += word_energy(&ahat, wh, wv) * cell;
            Ok(())
        },
    )?;
    Ok(total)
}

/// All four truncated energies plus the viscous dissipation rates, computed
/// in a single pass over the σ = 2, θ = 1 word set.
#[derive(Debug, Clone, Copy)]
pub struct EnergyTable {
    pub e00: f64,
    pub e10: f64,
    pub e20: f64,
    pub e21: f64,
    /// Σ ‖∇S̃ᵃΥᵅv̇‖² over a + |α| ≤ 2, a ≤ 1 (the index set of the
    /// uniform-in-time estimate).
    pub diss_rate_low: f64,
    /// Same sum restricted to a = 0 (the index set of the slow-growth
    /// estimate at the truncated orders).
    pub diss_rate_high: f64,
}

pub fn energy_table(
    state: &State,
    model: &MaterialModel,
    du: (&MatrixField, &VectorField),
) -> Result<EnergyTable> {
    let ahat = pointwise_ahat(state, model)?;
    let cell = state.grid().cell_volume();
    let mut tab = EnergyTable {
        e00: 0.0,
        e10: 0.0,
        e20: 0.0,
        e21: 0.0,
        diss_rate_low: 0.0,
        diss_rate_high: 0.0,
    };
    walk_words(
        &state.hdot,
        &state.vdot,
        state.t,
        Some(du),
        2,
        1,
        &mut |a, len, wh, wv| {
            let c = word_energy(&ahat, wh, wv) * cell;
            if a == 0 {
                if len == 0 {
                    tab.e00 += c;
                }
                if len <= 1 {
                    tab.e10 += c;
                }
                tab.e20 += c;
            }
            tab.e21 += c;
            let mut gv2 = 0.0;
            for comp in 0..3 {
                let n = wv.comp(comp).gradient().l2_norm();
                gv2 += n * n;
            }
            tab.diss_rate_low += gv2;
            if a == 0 {
                tab.diss_rate_high += gv2;
            }
            Ok(())
        },
    )?;
    Ok(tab)
}

// ---------------------------------------------------------------------------
// Spectral projections along ω = x/|x|
// ---------------------------------------------------------------------------

/// ω = x/|x| at a grid point, zeroed at the origin.
fn omega_at(grid: &Grid, idx: usize) -> Vec3 {
    let x = grid.point(idx);
    let r = x.norm();
    if r == 0.0 {
        Vec3::zeros()
    } else {
        x / r
    }
}

/// Eigenvalues λ₊ = 1, λ₋ = −1, λ₀ = 0 of A(ω), indexed 0, 1, 2.
pub const EIGENVALUES: [f64; 3] = [1.0, -1.0, 0.0];

/// Pointwise projection of (Ḣ, v̇) onto the eigenspace `iota` of A(ω):
///   P₊U̇ = ½((v̇ + Ḣω) ⊗ ω, v̇ + Ḣω)
///   P₋U̇ = ½(−(v̇ − Ḣω) ⊗ ω, v̇ − Ḣω)
///   P₀U̇ = (Ḣ(I − ω⊗ω), 0).
fn project_point(iota: usize, hm: &Mat3, vv: &Vec3, om: &Vec3) -> (Mat3, Vec3) {
    match iota {
        0 => {
            let w = vv + hm * om;
            (0.5 * w * om.transpose(), 0.5 * w)
        }
        1 => {
            let w = vv - hm * om;
            (-0.5 * w * om.transpose(), 0.5 * w)
        }
        2 => {
            let proj = Mat3::identity() - om * om.transpose();
            (hm * proj, Vec3::zeros())
        }
        _ => panic!("projection index must be 0, 1, or 2"),
    }
}

#[derive(Debug, Clone)]
pub struct ProjectedPair {
    pub h: MatrixField,
    pub v: VectorField,
}

#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub plus: ProjectedPair,
    pub minus: ProjectedPair,
    pub zero: ProjectedPair,
}

impl SpectralSplit {
    pub fn part(&self, iota: usize) -> &ProjectedPair {
        match iota {
            0 => &self.plus,
            1 => &self.minus,
            2 => &self.zero,
            _ => panic!("projection index must be 0, 1, or 2"),
        }
    }
}

/// Split U̇ = (Ḣ, v̇) into the three radial eigencomponents P₊U̇, P₋U̇,
/// P₀U̇.  The three parts sum back to the input exactly, including at the
/// origin where ω is zeroed.
pub fn spectral_split(h: &MatrixField, v: &VectorField) -> SpectralSplit {
    let grid = h.grid().clone();
    let mut parts: Vec<ProjectedPair> = (0..3)
        .map(|_| ProjectedPair {
            h: MatrixField::zeros(&grid),
            v: VectorField::zeros(&grid),
        })
        .collect();
    for idx in 0..grid.len() {
        let om = omega_at(&grid, idx);
        let hm = h.at(idx);
        let vv = v.at(idx);
        for (iota, part) in parts.iter_mut().enumerate() {
            let (ph, pv) = project_point(iota, &hm, &vv, &om);
            part.h.set_at(idx, ph);
            part.v.set_at(idx, pv);
        }
    }
    let zero = parts.pop().expect("three parts");
    let minus = parts.pop().expect("three parts");
    let plus = parts.pop().expect("three parts");
    SpectralSplit { plus, minus, zero }
}

/// The radial symbol A(ω) applied pointwise: A(ω)U̇ = (v̇ ⊗ ω, Ḣω).
pub fn a_omega_apply(h: &MatrixField, v: &VectorField) -> (MatrixField, VectorField) {
    let grid = h.grid().clone();
    let mut ho = MatrixField::zeros(&grid);
    let mut vo = VectorField::zeros(&grid);
    for idx in 0..grid.len() {
        let om = omega_at(&grid, idx);
        ho.set_at(idx, v.at(idx) * om.transpose());
        vo.set_at(idx, h.at(idx) * om);
    }
    (ho, vo)
}

// ---------------------------------------------------------------------------
// Weighted dispersive norms X, Ξ, Ψ
// ---------------------------------------------------------------------------

/// The weighted norms
///   X_{σ,θ} = Σ_ι Σ_j Σ_{|α|+a ≤ σ−1, a ≤ θ} ‖⟨λ_ι t − r⟩ P_ι ∂_j S̃ᵃΥᵅU̇‖
///   Ξ_{σ,θ} = the same with the exterior cutoff γ inside the norm
///   Ψ_{σ,θ} = Σ_{|α|+a ≤ σ−1, a ≤ θ} ‖η ⟨t⟩ ∇S̃ᵃΥᵅU̇‖.
///
/// Supported: 1 ≤ σ ≤ 3 with θ ≤ min(1, σ−1); the time derivative is
/// required when θ ≥ 1.
pub fn weighted_norms(
    state: &State,
    du: Option<(&MatrixField, &VectorField)>,
    params: &CutoffParams,
    sigma: usize,
    theta: usize,
) -> Result<(f64, f64, f64)> {
    if sigma == 0 || sigma > 3 || theta > 1 || theta + 1 > sigma {
        return Err(Error::Capability { sigma, theta });
    }
    let grid = state.grid().clone();
    let t = state.t;
    let (eta, gamma) = cutoffs(t, params, &grid);
    let bt = japanese_bracket(t);
    let cell = grid.cell_volume();
    let geom: Vec<(Vec3, f64)> = (0..grid.len())
        .map(|idx| (omega_at(&grid, idx), grid.point(idx).norm()))
        .collect();

    let mut x = 0.0;
    let mut xi = 0.0;
    let mut psi = 0.0;
    walk_words(
        &state.hdot,
        &state.vdot,
        t,
        du,
        sigma - 1,
        theta,
        &mut |_, _, wh, wv| {
            let mut psi2 = 0.0;
            for axis in 0..3 {
                let (gh, gv) = pair_derivative(wh, wv, axis);
                let mut x2 = [0.0; 3];
                let mut xi2 = [0.0; 3];
                for idx in 0..grid.len() {
                    let hm = gh.at(idx);
                    let vv = gv.at(idx);
                    let mag_grad = hm.norm_squared() + vv.norm_squared();
                    let we = eta.data()[idx] * bt;
                    psi2 += we * we * mag_grad;
                    let (om, r) = geom[idx];
                    let gm = gamma.data()[idx];
                    for (iota, &lam) in EIGENVALUES.iter().enumerate() {
                        let (ph, pv) = project_point(iota, &hm, &vv, &om);
                        let w = japanese_bracket(lam * t - r);
                        let mag = w * w * (ph.norm_squared() + pv.norm_squared());
                        x2[iota] += mag;
                        xi2[iota] += gm * gm * mag;
                    }
                }
                for iota in 0..3 {
                    x += (x2[iota] * cell).sqrt();
                    xi += (xi2[iota] * cell).sqrt();
                }
            }
            psi += (psi2 * cell).sqrt();
            Ok(())
        },
    )?;
    Ok((x, xi, psi))
}

// ---------------------------------------------------------------------------
// Local energy decay ratios (base form, a = 0, α = ∅)
// ---------------------------------------------------------------------------

/// One time sample of the interior/exterior local-energy-decay estimates,
/// measured as ratios of their left and right sides.
#[derive(Debug, Clone, Copy)]
pub struct LedSample {
    pub t: f64,
    pub interior_lhs: f64,
    pub interior_rhs: f64,
    pub interior_ratio: f64,
    pub exterior_lhs: f64,
    pub exterior_rhs: f64,
    pub exterior_ratio: f64,
    /// Both sides vanished; the ratio is reported as 0 by convention.
    pub degenerate: bool,
    /// A zero right side with a nonzero left side.
    pub anomaly: bool,
}

/// Time series of LED samples with simple summary queries.
#[derive(Debug, Clone, Default)]
pub struct DecayReport {
    pub samples: Vec<LedSample>,
}

impl DecayReport {
    pub fn push(&mut self, sample: LedSample) {
        self.samples.push(sample);
    }

    pub fn max_interior_ratio(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.interior_ratio)
            .fold(0.0, f64::max)
    }

    pub fn max_exterior_ratio(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.exterior_ratio)
            .fold(0.0, f64::max)
    }

    pub fn any_anomaly(&self) -> bool {
        self.samples.iter().any(|s| s.anomaly)
    }
}

fn weighted_vec_norm(v: &VectorField, w: &ScalarField, scale: f64) -> f64 {
    let grid = v.grid();
    let mut acc = 0.0;
    for idx in 0..grid.len() {
        let wv = scale * w.data()[idx];
        acc += wv * wv * v.at(idx).norm_squared();
    }
    (acc * grid.cell_volume()).sqrt()
}

fn weighted_mat_norm(m: &MatrixField, w: &ScalarField, scale: f64) -> f64 {
    let grid = m.grid();
    let mut acc = 0.0;
    for idx in 0..grid.len() {
        let wv = scale * w.data()[idx];
        acc += wv * wv * m.at(idx).norm_squared();
    }
    (acc * grid.cell_volume()).sqrt()
}

/// ‖w · s · ∇(Ḣ, v̇)‖ with all coordinate derivatives under one norm.
fn weighted_grad_pair_norm(h: &MatrixField, v: &VectorField, w: &ScalarField, scale: f64) -> f64 {
    let mut acc = 0.0;
    for axis in 0..3 {
        let (gh, gv) = pair_derivative(h, v, axis);
        let hn = weighted_mat_norm(&gh, w, scale);
        let vn = weighted_vec_norm(&gv, w, scale);
        acc += hn * hn + vn * vn;
    }
    acc.sqrt()
}

fn ratio_with_convention(lhs: f64, rhs: f64) -> (f64, bool, bool) {
    if rhs == 0.0 {
        if lhs == 0.0 {
            (0.0, true, false)
        } else {
            (f64::INFINITY, false, true)
        }
    } else {
        (lhs / rhs, false, false)
    }
}

/// Measure the interior and exterior local-energy-decay estimates at the
/// base derivative order (no S̃ or Υ prefix).  `f` and `g` are the measured
/// forcings of the first-order system
///   ∂ₜḢ + ∇v̇ = f,    ∂ₜv̇ + ∇·Ḣ − ν∆v̇ = g,
/// i.e. g already contains the pressure gradient with its sign.
///
/// Interior:  ‖η⟨t⟩∇U̇‖ + ‖ηνt∆v̇‖ against
///            ν‖∇S̃Ḣ‖ + ‖S̃U̇‖ + ‖∇U̇‖ + ‖U̇‖ + ‖ηtf‖ + ‖ηtg‖ + ν‖ηt∇·f‖.
/// Exterior:  ‖γ[r∂ᵣ − tA(∇)]U̇‖ + ‖γνt∆v̇‖ against
///            Σᵢ‖Ω̃ᵢḢ‖ + ‖S̃U̇‖ + ‖∇v̇‖ + ‖v̇‖ + ‖γtf‖ + ‖γtg‖.
pub fn led_ratio(
    state: &State,
    f: &MatrixField,
    g: &VectorField,
    params: &CutoffParams,
    nu: f64,
) -> LedSample {
    let grid = state.grid().clone();
    let t = state.t;
    let (eta, gamma) = cutoffs(t, params, &grid);
    let bt = japanese_bracket(t);

    let grad_v = state.vdot.gradient();
    let div_h = state.hdot.divergence();
    let lap_v = state.vdot.laplacian();

    // Time derivative implied by the forced system, used by S̃.
    let mut dh = f.clone();
    dh.axpy(-1.0, &grad_v);
    let mut dv = g.clone();
    dv.axpy(-1.0, &div_h);
    dv.axpy(nu, &lap_v);
    let (sh, sv) = s_tilde(&state.hdot, &state.vdot, t, &dh, &dv);

    // Interior estimate.
    let interior_lhs = weighted_grad_pair_norm(&state.hdot, &state.vdot, &eta, bt)
        + weighted_vec_norm(&lap_v, &eta, nu * t);
    let grad_sh_norm = {
        let mut acc = 0.0;
        for axis in 0..3 {
            let mut gh = MatrixField::zeros(&grid);
            for i in 0..3 {
                for j in 0..3 {
                    *gh.comp_mut(i, j) = sh.comp(i, j).derivative(axis);
                }
            }
            let n = gh.l2_norm();
            acc += n * n;
        }
        acc.sqrt()
    };
    let interior_rhs = nu * grad_sh_norm
        + pair_norm(&sh, &sv)
        + pair_gradient_norm(&state.hdot, &state.vdot)
        + pair_norm(&state.hdot, &state.vdot)
        + weighted_mat_norm(f, &eta, t)
        + weighted_vec_norm(g, &eta, t)
        + nu * weighted_vec_norm(&f.divergence(), &eta, t);

    // Exterior estimate: [r∂ᵣ − tA(∇)]U̇ = (r∂ᵣḢ − t∇v̇, r∂ᵣv̇ − t∇·Ḣ).
    let mut eh = MatrixField::zeros(&grid);
    for i in 0..3 {
        for j in 0..3 {
            *eh.comp_mut(i, j) = state.hdot.comp(i, j).radial_scaling();
        }
    }
    eh.axpy(-t, &grad_v);
    let mut ev = VectorField::zeros(&grid);
    for a in 0..3 {
        *ev.comp_mut(a) = state.vdot.comp(a).radial_scaling();
    }
    ev.axpy(-t, &div_h);
    let exterior_lhs = {
        let hn = weighted_mat_norm(&eh, &gamma, 1.0);
        let vn = weighted_vec_norm(&ev, &gamma, 1.0);
        (hn * hn + vn * vn).sqrt() + weighted_vec_norm(&lap_v, &gamma, nu * t)
    };
    let zero_v = VectorField::zeros(&grid);
    let mut omega_h = 0.0;
    for i in 0..3 {
        omega_h += omega_tilde(&state.hdot, &zero_v, i).0.l2_norm();
    }
    let exterior_rhs = omega_h
        + pair_norm(&sh, &sv)
        + {
            let mut acc = 0.0;
            for a in 0..3 {
                let n = state.vdot.comp(a).gradient().l2_norm();
                acc += n * n;
            }
            acc.sqrt()
        }
        + state.vdot.l2_norm()
        + weighted_mat_norm(f, &gamma, t)
        + weighted_vec_norm(g, &gamma, t);

    let (interior_ratio, deg_i, anom_i) = ratio_with_convention(interior_lhs, interior_rhs);
    let (exterior_ratio, deg_e, anom_e) = ratio_with_convention(exterior_lhs, exterior_rhs);
    LedSample {
        t,
        interior_lhs,
        interior_rhs,
        interior_ratio,
        exterior_lhs,
        exterior_rhs,
        exterior_ratio,
        degenerate: deg_i || deg_e,
        anomaly: anom_i || anom_e,
    }
}

/// Measured constant of the pointwise projection bound
///   |(λ_ι t − r) P_ι ∂_j U̇| ≤ |(tA(∇) − r∂ᵣ)U̇| + C·(t/r + 1)·|Ω U̇|,
/// reported as the supremum over the grid (origin excluded) of the left side
/// divided by the right side with C = 1.
pub fn projection_bound_constant(state: &State) -> f64 {
    let grid = state.grid().clone();
    let t = state.t;

    let grads: Vec<(MatrixField, VectorField)> = (0..3)
        .map(|axis| pair_derivative(&state.hdot, &state.vdot, axis))
        .collect();

    // (tA(∇) − r∂ᵣ)U̇ = (t∇v̇ − r∂ᵣḢ, t∇·Ḣ − r∂ᵣv̇).
    let mut ah = state.vdot.gradient().scaled(t);
    let mut av = state.hdot.divergence().scaled(t);
    for i in 0..3 {
        for j in 0..3 {
            ah.comp_mut(i, j)
                .axpy(-1.0, &state.hdot.comp(i, j).radial_scaling());
        }
    }
    for a in 0..3 {
        av.comp_mut(a)
            .axpy(-1.0, &state.vdot.comp(a).radial_scaling());
    }

    // Plain coordinate rotations Ω_i applied to every component.
    let rotations: Vec<(MatrixField, VectorField)> = (0..3)
        .map(|i| {
            let mut rh = MatrixField::zeros(&grid);
            for a in 0..3 {
                for b in 0..3 {
                    *rh.comp_mut(a, b) = omega_scalar(state.hdot.comp(a, b), i);
                }
            }
            let mut rv = VectorField::zeros(&grid);
            for a in 0..3 {
                *rv.comp_mut(a) = omega_scalar(state.vdot.comp(a), i);
            }
            (rh, rv)
        })
        .collect();

    let mut sup = 0.0_f64;
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        let r = x.norm();
        if r == 0.0 {
            continue;
        }
        let om = x / r;
        let mut lhs = 0.0_f64;
        for (gh, gv) in &grads {
            let hm = gh.at(idx);
            let vv = gv.at(idx);
            for (iota, &lam) in EIGENVALUES.iter().enumerate() {
                let (ph, pv) = project_point(iota, &hm, &vv, &om);
                let mag = (lam * t - r).abs()
                    * (ph.norm_squared() + pv.norm_squared()).sqrt();
                lhs = lhs.max(mag);
            }
        }
        let a_mag = (ah.at(idx).norm_squared() + av.at(idx).norm_squared()).sqrt();
        let mut rot2 = 0.0;
        for (rh, rv) in &rotations {
            rot2 += rh.at(idx).norm_squared() + rv.at(idx).norm_squared();
        }
        let rhs = a_mag + (t / r + 1.0) * rot2.sqrt();
        if rhs > 0.0 {
            sup = sup.max(lhs / rhs);
        }
    }
    sup
}

// ---------------------------------------------------------------------------
// Hardy and weighted Sobolev inequality checks
// ---------------------------------------------------------------------------

/// Radial derivative ∂_ρ f = ω·∇f, zeroed at the origin.
fn radial_derivative(f: &ScalarField) -> ScalarField {
    let grid = f.grid().clone();
    let grad = f.gradient();
    let mut out = ScalarField::zeros(&grid);
    for idx in 0..grid.len() {
        out.data_mut()[idx] = omega_at(&grid, idx).dot(&grad.at(idx));
    }
    out
}

/// ‖ρ^power · f‖ with the origin point omitted from the quadrature.
fn radial_weighted_norm(f: &ScalarField, power: f64) -> f64 {
    let grid = f.grid();
    let mut acc = 0.0;
    for idx in 0..grid.len() {
        let r = grid.point(idx).norm();
        if r == 0.0 {
            continue;
        }
        let w = r.powf(power) * f.data()[idx];
        acc += w * w;
    }
    (acc * grid.cell_volume()).sqrt()
}

/// Measured Hardy quotient ‖ρ⁻¹f‖ / ‖∂_ρf‖, which the inequality bounds
/// by 2 for smooth compactly supported f.
pub fn hardy_ratio(f: &ScalarField) -> Result<f64> {
    let den = radial_derivative(f).l2_norm();
    if den == 0.0 {
        return Err(Error::Degenerate(
            "Hardy quotient needs a field with a nonzero radial derivative".into(),
        ));
    }
    Ok(radial_weighted_norm(f, -1.0) / den)
}

/// All scalar rotation words Ω^α f with |α| ≤ max_len, base word included.
fn scalar_rotation_words(f: &ScalarField, max_len: usize) -> Vec<ScalarField> {
    let mut words = vec![f.clone()];
    let mut level = vec![f.clone()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(level.len() * 3);
        for w in &level {
            for i in 0..3 {
                next.push(omega_scalar(w, i));
            }
        }
        words.extend(next.iter().cloned());
        level = next;
    }
    words
}

/// Measured quotient of the weighted Sobolev inequality
///   |f(x)| ≲ [Σ_{|α|≤1} ‖ρ^{−λ} ∂_ρ Ω^α f‖^{1/2}] ·
///            [Σ_{|α|≤2} ‖ρ^{λ−2} Ω^α f‖^{1/2}],   λ ∈ [0, 2],
/// evaluated with full-box norms (which dominate the exterior-ball norms of
/// the inequality for every x).
pub fn sobolev3_check(f: &ScalarField, lambda: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "Sobolev weight exponent must lie in [0, 2], got {lambda}"
        )));
    }
    let words2 = scalar_rotation_words(f, 2);
    let mut factor1 = 0.0;
    for w in &words2[..4] {
        factor1 += radial_weighted_norm(&radial_derivative(w), -lambda).sqrt();
    }
    let mut factor2 = 0.0;
    for w in &words2 {
        factor2 += radial_weighted_norm(w, lambda - 2.0).sqrt();
    }
    let den = factor1 * factor2;
    if den == 0.0 {
        return Err(Error::Degenerate(
            "Sobolev quotient needs a nonzero input field".into(),
        ));
    }
    Ok(f.max_abs() / den)
}

// ---------------------------------------------------------------------------
// Corollary monitors (weighted pointwise decay ratios)
// ---------------------------------------------------------------------------

/// Measured ratios of the five weighted pointwise decay inequalities,
/// evaluated at the base word (a = 0, α = ∅).
#[derive(Debug, Clone, Copy, Default)]
pub struct SobolevMonitors {
    /// sup ⟨r⟩|U̇| over Σ_{|β|≤2}‖ΥᵝU̇‖.
    pub sob4: f64,
    /// sup over ι of ⟨r⟩⟨λ_ιt−r⟩^{1/2}|P_ιU̇| over the same sum plus X_{3,0}.
    pub sob5: f64,
    /// sup η⟨t⟩|U̇| over the same sum plus Ψ_{3,0}.
    pub sob6: f64,
    /// sup r^{3/2}|ω·(Ḣω)| over the sum plus Σ_{|β|≤1}‖r ΥᵝM^H(Ḣ)‖.
    pub sob7: f64,
    /// sup r^{3/2}|ω·v̇| over Σ_{|β|≤2}‖ΥᵝU̇‖.
    pub sob8: f64,
}

/// M^H(Ḣ) = −∇[½((tr Ḣ)² − tr(Ḣ²)) + det Ḣ], computed from the state alone.
fn m_h_field(hdot: &MatrixField) -> VectorField {
    let grid = hdot.grid().clone();
    let mut q = ScalarField::zeros(&grid);
    for idx in 0..grid.len() {
        let hm = hdot.at(idx);
        let tr = hm.trace();
        let tr2 = (hm * hm).trace();
        q.data_mut()[idx] = 0.5 * (tr * tr - tr2) + hm.determinant();
    }
    q.gradient().scaled(-1.0)
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn corollary_monitors(state: &State, params: &CutoffParams) -> Result<SobolevMonitors> {
    let grid = state.grid().clone();
    let t = state.t;
    let bt = japanese_bracket(t);
    let (eta, _) = cutoffs(t, params, &grid);

    // Shared right side Σ_{|β|≤2}‖ΥᵝU̇‖.
    let mut d2 = 0.0;
    walk_words(
        &state.hdot,
        &state.vdot,
        t,
        None,
        2,
        0,
        &mut |_, _, wh, wv| {
            d2 += pair_norm(wh, wv);
            Ok(())
        },
    )?;
    let (x30, _, psi30) = weighted_norms(state, None, params, 3, 0)?;

    let mut sup4 = 0.0_f64;
    let mut sup5 = 0.0_f64;
    let mut sup6 = 0.0_f64;
    let mut sup7 = 0.0_f64;
    let mut sup8 = 0.0_f64;
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        let r = x.norm();
        let om = omega_at(&grid, idx);
        let hm = state.hdot.at(idx);
        let vv = state.vdot.at(idx);
        let mag = (hm.norm_squared() + vv.norm_squared()).sqrt();
        let br = japanese_bracket(r);
        sup4 = sup4.max(br * mag);
        for (iota, &lam) in EIGENVALUES.iter().enumerate() {
            let (ph, pv) = project_point(iota, &hm, &vv, &om);
            let pmag = (ph.norm_squared() + pv.norm_squared()).sqrt();
            sup5 = sup5.max(br * japanese_bracket(lam * t - r).sqrt() * pmag);
        }
        sup6 = sup6.max(eta.data()[idx] * bt * mag);
        let r32 = r.powf(1.5);
        sup7 = sup7.max(r32 * om.dot(&(hm * om)).abs());
        sup8 = sup8.max(r32 * om.dot(&vv).abs());
    }

    // M^H right-side terms for the radial Ḣ component: Σ_{|β|≤1}‖r ΥᵝM^H‖.
    let mh = m_h_field(&state.hdot);
    let mut mh_terms = radial_weighted_norm_vec(&mh);
    for letter in 0..UPSILON_LETTERS {
        mh_terms += radial_weighted_norm_vec(&apply_upsilon_vector(&mh, letter));
    }

    Ok(SobolevMonitors {
        sob4: ratio_or_zero(sup4, d2),
        sob5: ratio_or_zero(sup5, d2 + x30),
        sob6: ratio_or_zero(sup6, d2 + psi30),
        sob7: ratio_or_zero(sup7, d2 + mh_terms),
        sob8: ratio_or_zero(sup8, d2),
    })
}

/// ‖r w‖ for a vector field.
fn radial_weighted_norm_vec(w: &VectorField) -> f64 {
    let grid = w.grid();
    let mut acc = 0.0;
    for idx in 0..grid.len() {
        let r = grid.point(idx).norm();
        acc += r * r * w.at(idx).norm_squared();
    }
    (acc * grid.cell_volume()).sqrt()
}

// ---------------------------------------------------------------------------
// Theorem-shape monitor
// ---------------------------------------------------------------------------

/// One entry of a run's energy time series, as produced from `EnergyTable`.
#[derive(Debug, Clone, Copy)]
pub struct MonitorSample {
    pub t: f64,
    /// E_{2,1}, the uniform-estimate proxy.
    pub e_low: f64,
    /// E_{2,0}, the slow-growth-estimate proxy.
    pub e_high: f64,
    pub diss_rate_low: f64,
    pub diss_rate_high: f64,
}

#[derive(Debug, Clone)]
pub struct TheoremReport {
    /// Smallest constant making the uniform estimate hold over the series.
    pub c_low: f64,
    /// Smallest constant for the ⟨t⟩^δ-growth estimate.
    pub c_high: f64,
    /// max(c_low, c_high), the single constant the run must admit.
    pub c_prime: f64,
    pub threshold: f64,
    pub pass: bool,
    /// First sample time at which the threshold was exceeded.
    pub failure_time: Option<f64>,
}

/// Check the two truncated-order energy estimates against a run history:
///   E_{2,1}(t) + (ν/2)∫₀ᵗ Σ‖∇S̃ᵃΥᵅv̇‖² ≤ C′ E_{2,1}(0)
///   E_{2,0}(t) + (ν/2)∫₀ᵗ Σ‖∇ΥᵅV̇‖²   ≤ C′ E_{2,0}(0) ⟨t⟩^δ
/// with the dissipation integrals accumulated by the trapezoid rule.
/// A zero-data run (all entries zero) passes with C′ = 1.
pub fn theorem_monitor(
    samples: &[MonitorSample],
    nu: f64,
    delta: f64,
    threshold: f64,
) -> Result<TheoremReport> {
    if samples.is_empty() {
        return Err(Error::Config("theorem monitor needs at least one sample".into()));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Config(format!(
            "growth exponent delta must lie in [0, 1), got {delta}"
        )));
    }
    if threshold <= 0.0 {
        return Err(Error::Config("threshold must be positive".into()));
    }
    let e_low0 = samples[0].e_low;
    let e_high0 = samples[0].e_high;
    let grade = |lhs: f64, rhs: f64| -> f64 {
        if rhs == 0.0 {
            if lhs == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            lhs / rhs
        }
    };

    let mut int_low = 0.0;
    let mut int_high = 0.0;
    let mut c_low = 0.0_f64;
    let mut c_high = 0.0_f64;
    let mut failure_time = None;
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            let prev = &samples[i - 1];
            let dt = s.t - prev.t;
            int_low += 0.5 * dt * (prev.diss_rate_low + s.diss_rate_low);
            int_high += 0.5 * dt * (prev.diss_rate_high + s.diss_rate_high);
        }
        let cl = grade(s.e_low + 0.5 * nu * int_low, e_low0);
        let ch = grade(
            s.e_high + 0.5 * nu * int_high,
            e_high0 * japanese_bracket(s.t).powf(delta),
        );
        let c_here = cl.max(ch);
        if (!c_here.is_finite() || c_here > threshold) && failure_time.is_none() {
            failure_time = Some(s.t);
        }
        c_low = c_low.max(cl);
        c_high = c_high.max(ch);
    }
    let c_prime = c_low.max(c_high);
    Ok(TheoremReport {
        c_low,
        c_high,
        c_prime,
        threshold,
        pass: c_prime.is_finite() && c_prime <= threshold,
        failure_time,
    })
}

// ---------------------------------------------------------------------------
// Per-sample report and CSV emission
// ---------------------------------------------------------------------------

/// All per-sample diagnostics for one output cadence.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub t: f64,
    pub e00: f64,
    pub e10: f64,
    pub e20: f64,
    pub e21: f64,
    /// Caller-accumulated (ν/2)-weighted dissipation integral for E_{2,1}.
    pub dissip_int: f64,
    pub div_v_max: f64,
    pub det_res_max: f64,
    pub curl_res_max: f64,
    pub x: f64,
    pub xi: f64,
    pub psi: f64,
    pub led_int_ratio: f64,
    pub led_ext_ratio: f64,
    pub p_ratio: f64,
    pub sob: SobolevMonitors,
    /// Instantaneous dissipation rates, used to continue the integral.
    pub diss_rate_low: f64,
    pub diss_rate_high: f64,
}

pub const CSV_HEADER: &str = "t,E_0_0,E_1_0,E_2_0,E_2_1,dissip_int,div_v_max,det_res_max,\
curl_res_max,X,Xi,Psi,led_int_ratio,led_ext_ratio,p_ratio,sob4,sob5,sob6,sob7,sob8";

impl EnergyReport {
    /// One CSV row matching `CSV_HEADER`, with fixed scientific formatting so
    /// repeated identical runs emit byte-identical output.
    pub fn csv_row(&self) -> String {
        let vals = [
            self.t,
            self.e00,
            self.e10,
            self.e20,
            self.e21,
            self.dissip_int,
            self.div_v_max,
            self.det_res_max,
            self.curl_res_max,
            self.x,
            self.xi,
            self.psi,
            self.led_int_ratio,
            self.led_ext_ratio,
            self.p_ratio,
            self.sob.sob4,
            self.sob.sob5,
            self.sob.sob6,
            self.sob.sob7,
            self.sob.sob8,
        ];
        vals.iter()
            .map(|v| format!("{v:.12e}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn monitor_sample(&self) -> MonitorSample {
        MonitorSample {
            t: self.t,
            e_low: self.e21,
            e_high: self.e20,
            diss_rate_low: self.diss_rate_low,
            diss_rate_high: self.diss_rate_high,
        }
    }
}

/// Assemble the full per-sample report for a state evolving under `cfg`.
/// `dissip_int` is the running (ν/2)-weighted dissipation integral, which the
/// caller accumulates from the reported rates.
pub fn report(
    state: &State,
    cfg: &SolverConfig,
    params: &CutoffParams,
    dissip_int: f64,
) -> Result<EnergyReport> {
    let grid = state.grid().clone();
    let du = time_derivative(state, cfg)?;
    let table = energy_table(state, &cfg.model, (&du.0, &du.1))?;
    let (x, xi, psi) = weighted_norms(state, Some((&du.0, &du.1)), params, 2, 1)?;

    let (f, n_v, m_h) = if cfg.linear {
        (
            MatrixField::zeros(&grid),
            VectorField::zeros(&grid),
            VectorField::zeros(&grid),
        )
    } else {
        let terms = nonlinear_terms(state, &cfg.model, cfg.dealias)?;
        (terms.n_h, terms.n_v, terms.m_h)
    };
    let c1 = cfg.model.params.c1;
    let mut rhs_v = n_v.clone();
    rhs_v.axpy(-(c1 * c1 - 1.0), &m_h);
    let grad_p = pressure_gradient(state, &rhs_v);
    let mut g = rhs_v;
    g.axpy(-1.0, &grad_p);

    let led = led_ratio(state, &f, &g, params, cfg.model.params.nu);
    let p_ratio = ratio_or_zero(grad_p.l2_norm(), n_v.l2_norm() + m_h.l2_norm());
    let sob = corollary_monitors(state, params)?;
    let res = state.constraint_residuals();

    Ok(EnergyReport {
        t: state.t,
        e00: table.e00,
        e10: table.e10,
        e20: table.e20,
        e21: table.e21,
        dissip_int,
        div_v_max: res.div_v_max,
        det_res_max: res.det_res_max,
        curl_res_max: res.curl_res_max,
        x,
        xi,
        psi,
        led_int_ratio: led.interior_ratio,
        led_ext_ratio: led.exterior_ratio,
        p_ratio,
        sob,
        diss_rate_low: table.diss_rate_low,
        diss_rate_high: table.diss_rate_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::MaterialParams;
    use crate::dynamics::{generate_initial_data, step, SolverConfig};
    use crate::fields::{radial_window, random_band_limited_scalar};
    use crate::rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model(c1: f64, nu: f64) -> MaterialModel {
        MaterialModel::builtin(MaterialParams::new(c1, nu).unwrap()).unwrap()
    }

    fn grid16() -> Grid {
        Grid::new(16, 2.0 * std::f64::consts::PI).unwrap()
    }

    fn small_state(grid: &Grid, mdl: &MaterialModel, seed: u64) -> State {
        generate_initial_data(grid, mdl, seed, 0.01).unwrap()
    }

    fn random_pair(grid: &Grid, seed: u64) -> (MatrixField, VectorField) {
        let mut r = rng::stream(seed, "diagnostics-pair");
        let mut h = MatrixField::zeros(grid);
        for i in 0..3 {
            for j in 0..3 {
                *h.comp_mut(i, j) = random_band_limited_scalar(grid, &mut r, 2, 3);
            }
        }
        let mut v = VectorField::zeros(grid);
        for a in 0..3 {
            *v.comp_mut(a) = random_band_limited_scalar(grid, &mut r, 2, 3);
        }
        (h, v)
    }

    #[test]
    fn energy_of_zero_state_is_zero() {
        let grid = grid16();
        let mdl = model(1.5, 0.1);
        let st = State::zeros(&grid);
        let zero_du = (MatrixField::zeros(&grid), VectorField::zeros(&grid));
        for (s, th) in [(0, 0), (1, 0), (2, 0), (2, 1)] {
            let e = energy(&st, &mdl, s, th, Some((&zero_du.0, &zero_du.1))).unwrap();
            assert_eq!(e, 0.0, "E_{{{s},{th}}} of the zero state");
        }
    }

    #[test]
    fn energy_reduces_to_velocity_norm_without_displacement() {
        let grid = grid16();
        let mdl = model(1.7, 0.0);
        let mut r = rng::stream(11, "velocity-only");
        let mut st = State::zeros(&grid);
        for a in 0..3 {
            *st.vdot.comp_mut(a) = random_band_limited_scalar(&grid, &mut r, 2, 3);
        }
        let e = energy(&st, &mdl, 0, 0, None).unwrap();
        let vn = st.vdot.l2_norm();
        assert_relative_eq!(e, 0.5 * vn * vn, max_relative = 1e-12);
    }

    #[test]
    fn energy_rejects_unsupported_orders() {
        let grid = grid16();
        let mdl = model(1.5, 0.1);
        let st = State::zeros(&grid);
        match energy(&st, &mdl, 3, 0, None) {
            Err(Error::Capability { sigma: 3, theta: 0 }) => {}
            other => panic!("expected capability error, got {other:?}"),
        }
        match energy(&st, &mdl, 2, 1, None) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error for missing time derivative, got {other:?}"),
        }
    }

    #[test]
    fn energy_is_monotone_in_truncation_orders() {
        let grid = grid16();
        let mdl = model(1.4, 0.01);
        let st = small_state(&grid, &mdl, 3);
        let cfg = SolverConfig::new(mdl.clone(), &grid);
        let du = time_derivative(&st, &cfg).unwrap();
        let du_ref = Some((&du.0, &du.1));
        let e00 = energy(&st, &mdl, 0, 0, du_ref).unwrap();
        let e10 = energy(&st, &mdl, 1, 0, du_ref).unwrap();
        let e20 = energy(&st, &mdl, 2, 0, du_ref).unwrap();
        let e21 = energy(&st, &mdl, 2, 1, du_ref).unwrap();
        assert!(e00 > 0.0);
        assert!(e00 <= e10 && e10 <= e20 && e20 <= e21, "{e00} {e10} {e20} {e21}");
    }

    #[test]
    fn energy_matches_plain_norm_sum_for_small_data() {
        let grid = grid16();
        let mdl = model(1.4, 0.01);
        let st = small_state(&grid, &mdl, 5);
        let cfg = SolverConfig::new(mdl.clone(), &grid);
        let du = time_derivative(&st, &cfg).unwrap();
        let e21 = energy(&st, &mdl, 2, 1, Some((&du.0, &du.1))).unwrap();
        let mut plain = 0.0;
        walk_words(
            &st.hdot,
            &st.vdot,
            st.t,
            Some((&du.0, &du.1)),
            2,
            1,
            &mut |_, _, wh, wv| {
                let n = pair_norm(wh, wv);
                plain += 0.5 * n * n;
                Ok(())
            },
        )
        .unwrap();
        let ratio = e21 / plain;
        assert!((0.9..=1.1).contains(&ratio), "equivalence ratio {ratio}");
    }

    #[test]
    fn energy_table_matches_individual_energies() {
        let grid = grid16();
        let mdl = model(1.4, 0.01);
        let st = small_state(&grid, &mdl, 7);
        let cfg = SolverConfig::new(mdl.clone(), &grid);
        let du = time_derivative(&st, &cfg).unwrap();
        let du_ref = (&du.0, &du.1);
        let tab = energy_table(&st, &mdl, du_ref).unwrap();
        assert_relative_eq!(tab.e00, energy(&st, &mdl, 0, 0, Some(du_ref)).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(tab.e10, energy(&st, &mdl, 1, 0, Some(du_ref)).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(tab.e20, energy(&st, &mdl, 2, 0, Some(du_ref)).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(tab.e21, energy(&st, &mdl, 2, 1, Some(du_ref)).unwrap(), max_relative = 1e-12);
        assert!(tab.diss_rate_low >= tab.diss_rate_high);
    }

    #[test]
    fn spectral_split_is_resolution_of_identity() {
        let grid = grid16();
        let (h, v) = random_pair(&grid, 21);
        let split = spectral_split(&h, &v);
        let mut max_err = 0.0_f64;
        for idx in 0..grid.len() {
            let hsum = split.plus.h.at(idx) + split.minus.h.at(idx) + split.zero.h.at(idx);
            let vsum = split.plus.v.at(idx) + split.minus.v.at(idx) + split.zero.v.at(idx);
            max_err = max_err.max((hsum - h.at(idx)).abs().max());
            max_err = max_err.max((vsum - v.at(idx)).abs().max());
        }
        assert!(max_err <= 1e-14, "resolution of identity residual {max_err}");
    }

    #[test]
    fn spectral_split_satisfies_eigenvalue_relations() {
        let grid = grid16();
        let (h, v) = random_pair(&grid, 22);
        let split = spectral_split(&h, &v);
        for (iota, &lam) in EIGENVALUES.iter().enumerate() {
            let part = split.part(iota);
            let (ah, av) = a_omega_apply(&part.h, &part.v);
            let mut max_err = 0.0_f64;
            for idx in 0..grid.len() {
                // ω is zeroed at the origin, which kills A(ω) there while
                // P± keep v̇/2; the eigenrelation is a statement about ω ∈ S².
                if grid.point(idx).norm() == 0.0 {
                    continue;
                }
                max_err = max_err.max((ah.at(idx) - lam * part.h.at(idx)).abs().max());
                max_err = max_err.max((av.at(idx) - lam * part.v.at(idx)).abs().max());
            }
            assert!(max_err <= 1e-12, "eigenrelation residual {max_err} for iota {iota}");
        }
    }

    #[test]
    fn plus_projection_matches_hand_oracle() {
        let grid = grid16();
        let mut r = rng::stream(23, "plus-oracle");
        let a = crate::rng::unit_vector(&mut r) * 0.7;
        let mut h = MatrixField::zeros(&grid);
        let mut v = VectorField::zeros(&grid);
        for idx in 0..grid.len() {
            let om = omega_at(&grid, idx);
            // Ḣ = ω ⊗ a, so Ḣω = (a·ω)ω and the plus component has the
            // closed-form velocity part ½(a + (a·ω)ω).
            h.set_at(idx, om * a.transpose());
            v.set_at(idx, a);
        }
        let split = spectral_split(&h, &v);
        let mut max_err = 0.0_f64;
        for idx in 0..grid.len() {
            let om = omega_at(&grid, idx);
            let oracle = 0.5 * (a + a.dot(&om) * om);
            max_err = max_err.max((split.plus.v.at(idx) - oracle).abs().max());
        }
        assert!(max_err <= 1e-14, "hand-oracle residual {max_err}");
    }

    #[test]
    fn tangential_displacement_has_no_radial_modes() {
        let grid = grid16();
        let mut r = rng::stream(24, "tangential");
        let u = crate::rng::unit_vector(&mut r);
        let amp = random_band_limited_scalar(&grid, &mut r, 2, 2);
        // Ḣ = s(x) u ⊗ P₁e₁ has Ḣω = 0 pointwise, so only P₀ survives.
        let mut h = MatrixField::zeros(&grid);
        for idx in 0..grid.len() {
            let om = omega_at(&grid, idx);
            let e1 = Vec3::new(1.0, 0.0, 0.0);
            let p1 = e1 - e1.dot(&om) * om;
            h.set_at(idx, amp.data()[idx] * u * p1.transpose());
        }
        let v = VectorField::zeros(&grid);
        let split = spectral_split(&h, &v);
        let plus = pair_norm(&split.plus.h, &split.plus.v);
        let minus = pair_norm(&split.minus.h, &split.minus.v);
        assert!(plus <= 1e-14 && minus <= 1e-14, "plus {plus}, minus {minus}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn pointwise_projections_resolve_and_diagonalize(
            entries in proptest::array::uniform9(-2.0f64..2.0),
            vel in proptest::array::uniform3(-2.0f64..2.0),
            dir in proptest::array::uniform3(-1.0f64..1.0),
        ) {
            let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            prop_assume!(norm > 1e-3);
            let om = Vec3::new(dir[0], dir[1], dir[2]) / norm;
            let hm = Mat3::from_row_slice(&entries);
            let vv = Vec3::new(vel[0], vel[1], vel[2]);
            let mut hsum = Mat3::zeros();
            let mut vsum = Vec3::zeros();
            for (iota, &lam) in EIGENVALUES.iter().enumerate() {
                let (ph, pv) = project_point(iota, &hm, &vv, &om);
                hsum += ph;
                vsum += pv;
                // A(ω) acts as (v⊗ω, Hω); on each eigencomponent it scales by λ.
                let ah = pv * om.transpose();
                let av = ph * om;
                prop_assert!((ah - lam * ph).abs().max() <= 1e-12);
                prop_assert!((av - lam * pv).abs().max() <= 1e-12);
            }
            prop_assert!((hsum - hm).abs().max() <= 1e-13);
            prop_assert!((vsum - vv).abs().max() <= 1e-13);
        }
    }

    #[test]
    fn weighted_norms_psi_bounded_at_time_zero() {
        let grid = grid16();
        let mdl = model(1.4, 0.01);
        let st = small_state(&grid, &mdl, 9);
        let cfg = SolverConfig::new(mdl.clone(), &grid);
        let du = time_derivative(&st, &cfg).unwrap();
        let params = CutoffParams::default();
        let (_, _, psi) = weighted_norms(&st, Some((&du.0, &du.1)), &params, 2, 1).unwrap();
        let mut unweighted = 0.0;
        walk_words(&st.hdot, &st.vdot, st.t, Some((&du.0, &du.1)), 1, 1, &mut |_, _, wh, wv| {
            unweighted += pair_gradient_norm(wh, wv);
            Ok(())
        })
        .unwrap();
        assert!(psi > 0.0 && psi <= unweighted + 1e-12, "psi {psi} vs {unweighted}");
    }

    #[test]
    fn weighted_norms_gamma_split_is_dominated() {
        let grid = grid16();
        let mdl = model(1.4, 0.01);
        let mut st = small_state(&grid, &mdl, 10);
        st.t = 0.7;
        let cfg = SolverConfig::new(mdl.clone(), &grid);
        let du = time_derivative(&st, &cfg).unwrap();
        let params = CutoffParams::default();
        let (x, xi, psi) = weighted_norms(&st, Some((&du.0, &du.1)), &params, 2, 1).unwrap();
        assert!(x.is_finite() && xi.is_finite() && psi.is_finite());
        assert!(x > 0.0);
        assert!(xi <= x + 1e-12, "xi {xi} exceeds x {x}");
    }

    #[test]
    fn weighted_norms_rejects_bad_orders() {
        let grid = grid16();
        let st = State::zeros(&grid);
        let params = CutoffParams::default();
        for (s, th) in [(0, 0), (4, 0), (1, 1)] {
            match weighted_norms(&st, None, &params, s, th) {
                Err(Error::Capability { .. }) => {}
                other => panic!("expected capability error for ({s},{th}), got {other:?}"),
            }
        }
    }

    #[test]
    fn led_ratio_of_zero_state_is_zero_by_convention() {
        let grid = grid16();
        let st = State::zeros(&grid);
        let f = MatrixField::zeros(&grid);
        let g = VectorField::zeros(&grid);
        let s = led_ratio(&st, &f, &g, &CutoffParams::default(), 0.1);
        assert_eq!(s.interior_ratio, 0.0);
        assert_eq!(s.exterior_ratio, 0.0);
        assert!(s.degenerate);
        assert!(!s.anomaly);
    }

    #[test]
    fn led_ratio_stays_bounded_along_linear_run() {
        let grid = grid16();
        let mdl = model(1.4, 0.05);
        let mut cfg = SolverConfig::new(mdl.clone(), &grid);
        cfg.linear = true;
        let mut st = small_state(&grid, &mdl, 12);
        let params = CutoffParams::default();
        let f = MatrixField::zeros(&grid);
        let mut report = DecayReport::default();
        for _ in 0..6 {
            st = step(&st, &cfg).unwrap();
            let grad_p = pressure_gradient(&st, &VectorField::zeros(&grid));
            let g = grad_p.scaled(-1.0);
            report.push(led_ratio(&st, &f, &g, &params, mdl.params.nu));
        }
        assert!(!report.any_anomaly());
        let mi = report.max_interior_ratio();
        let me = report.max_exterior_ratio();
        assert!(mi.is_finite() && me.is_finite());
        assert!(mi < 100.0 && me < 100.0, "interior {mi}, exterior {me}");
    }

    #[test]
    fn projection_bound_constant_is_finite_on_data() {
        let grid = grid16();
        let mdl = model(1.4, 0.01);
        let mut st = small_state(&grid, &mdl, 13);
        st.t = 0.5;
        let c = projection_bound_constant(&st);
        assert!(c.is_finite() && c > 0.0, "measured constant {c}");
    }

    #[test]
    fn hardy_ratio_of_windowed_gaussian_is_below_two() {
        let grid = Grid::new(32, 2.0 * std::f64::consts::PI).unwrap();
        let window = radial_window(&grid, 1.5, 4.0);
        let f = ScalarField::from_fn(&grid, |x| {
            let r2 = x.norm_squared();
            (-(r2 - 4.0) * (r2 - 4.0) / 4.0).exp()
        })
        .mul(&window);
        let ratio = hardy_ratio(&f).unwrap();
        assert!(ratio <= 2.0 + 1e-6, "Hardy quotient {ratio}");
    }

    #[test]
    fn hardy_ratio_rejects_zero_field() {
        let grid = grid16();
        match hardy_ratio(&ScalarField::zeros(&grid)) {
            Err(Error::Degenerate(_)) => {}
            other => panic!("expected degenerate-input error, got {other:?}"),
        }
    }

    #[test]
    fn hardy_battery_respects_the_constant() {
        let grid = Grid::new(32, 2.0 * std::f64::consts::PI).unwrap();
        let window = radial_window(&grid, 1.5, 4.5);
        let mut r = rng::stream(31, "hardy-battery");
        for _ in 0..20 {
            let f = random_band_limited_scalar(&grid, &mut r, 3, 4).mul(&window);
            let ratio = hardy_ratio(&f).unwrap();
            assert!(ratio <= 2.0 + 1e-6, "Hardy quotient {ratio}");
        }
    }

    #[test]
    fn sobolev3_rejects_bad_inputs() {
        let grid = grid16();
        let f = ScalarField::from_fn(&grid, |x| (-x.norm_squared()).exp());
        match sobolev3_check(&f, 3.0) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
        match sobolev3_check(&ScalarField::zeros(&grid), 1.0) {
            Err(Error::Degenerate(_)) => {}
            other => panic!("expected degenerate-input error, got {other:?}"),
        }
    }

    #[test]
    fn sobolev3_empirical_constant_is_uniform() {
        let grid = Grid::new(32, 2.0 * std::f64::consts::PI).unwrap();
        let window = radial_window(&grid, 1.5, 4.5);
        let mut r = rng::stream(37, "sobolev-battery");
        let mut worst = 0.0_f64;
        for _ in 0..50 {
            let f = random_band_limited_scalar(&grid, &mut r, 3, 4).mul(&window);
            let ratio = sobolev3_check(&f, 1.0).unwrap();
            assert!(ratio.is_finite() && ratio > 0.0);
            worst = worst.max(ratio);
        }
        // Empirical constant of the inequality on this family; the bound
        // below freezes the measured value with a 2x margin.
        assert!(worst <= 1.0, "empirical Sobolev constant {worst}");
    }

    #[test]
    fn corollary_monitors_vanish_on_zero_state() {
        let grid = grid16();
        let st = State::zeros(&grid);
        let m = corollary_monitors(&st, &CutoffParams::default()).unwrap();
        assert_eq!(
            (m.sob4, m.sob5, m.sob6, m.sob7, m.sob8),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn corollary_monitors_are_finite_on_generated_data() {
        let grid = grid16();
        let mdl = model(1.4, 0.01);
        let mut st = small_state(&grid, &mdl, 17);
        st.t = 0.4;
        let m = corollary_monitors(&st, &CutoffParams::default()).unwrap();
        for (name, v) in [
            ("sob4", m.sob4),
            ("sob5", m.sob5),
            ("sob6", m.sob6),
            ("sob7", m.sob7),
            ("sob8", m.sob8),
        ] {
            assert!(v.is_finite() && v >= 0.0, "{name} = {v}");
            assert!(v < 50.0, "{name} = {v} unexpectedly large");
        }
    }

    #[test]
    fn theorem_monitor_passes_trivially_for_zero_data() {
        let samples: Vec<MonitorSample> = (0..5)
            .map(|i| MonitorSample {
                t: i as f64 * 0.1,
                e_low: 0.0,
                e_high: 0.0,
                diss_rate_low: 0.0,
                diss_rate_high: 0.0,
            })
            .collect();
        let rep = theorem_monitor(&samples, 0.1, 0.5, 4.0).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.c_prime, 1.0);
        assert!(rep.failure_time.is_none());
    }

    #[test]
    fn theorem_monitor_grades_growth_against_the_threshold() {
        let make = |factor: f64| -> Vec<MonitorSample> {
            (0..3)
                .map(|i| {
                    let s = 1.0 + (factor - 1.0) * i as f64 / 2.0;
                    MonitorSample {
                        t: i as f64,
                        e_low: s,
                        e_high: s,
                        diss_rate_low: 0.0,
                        diss_rate_high: 0.0,
                    }
                })
                .collect()
        };
        let ok = theorem_monitor(&make(2.0), 0.0, 0.5, 4.0).unwrap();
        assert!(ok.pass);
        assert_relative_eq!(ok.c_low, 2.0, max_relative = 1e-12);
        // e grows 1 → 5.5 → 10; the threshold 4 is first exceeded at t = 1.
        let bad = theorem_monitor(&make(10.0), 0.0, 0.5, 4.0).unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.failure_time, Some(1.0));
    }

    #[test]
    fn theorem_monitor_includes_the_dissipation_integral() {
        // Constant energy 1 with constant dissipation rate 2 and ν = 1:
        // lhs(t) = 1 + 0.5·1·2t, so at t = 1 the constant is 2.
        let samples: Vec<MonitorSample> = (0..3)
            .map(|i| MonitorSample {
                t: i as f64 * 0.5,
                e_low: 1.0,
                e_high: 1.0,
                diss_rate_low: 2.0,
                diss_rate_high: 2.0,
            })
            .collect();
        let rep = theorem_monitor(&samples, 1.0, 0.5, 4.0).unwrap();
        assert_relative_eq!(rep.c_low, 2.0, max_relative = 1e-12);
        assert!(rep.pass);
    }

    #[test]
    fn csv_row_matches_header_and_is_deterministic() {
        let rep = EnergyReport {
            t: 0.25,
            e00: 1.0,
            e10: 2.0,
            e20: 3.0,
            e21: 4.0,
            dissip_int: 0.5,
            div_v_max: 1e-12,
            det_res_max: 1e-9,
            curl_res_max: 1e-11,
            x: 1.5,
            xi: 0.5,
            psi: 0.25,
            led_int_ratio: 3.0,
            led_ext_ratio: 2.0,
            p_ratio: 0.9,
            sob: SobolevMonitors {
                sob4: 0.1,
                sob5: 0.2,
                sob6: 0.3,
                sob7: 0.4,
                sob8: 0.5,
            },
            diss_rate_low: 0.0,
            diss_rate_high: 0.0,
        };
        let row = rep.csv_row();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert_eq!(row, rep.csv_row());
    }

    #[test]
    fn report_assembles_consistent_values() {
        let grid = grid16();
        let mdl = model(1.4, 0.02);
        let cfg = SolverConfig::new(mdl.clone(), &grid);
        let mut st = small_state(&grid, &mdl, 19);
        for _ in 0..3 {
            st = step(&st, &cfg).unwrap();
        }
        let params = CutoffParams::default();
        let rep = report(&st, &cfg, &params, 0.0).unwrap();
        assert!(rep.e00 > 0.0);
        assert!(rep.e00 <= rep.e10 && rep.e10 <= rep.e20 && rep.e20 <= rep.e21);
        assert!(rep.xi <= rep.x + 1e-12);
        assert!(rep.div_v_max < 1e-9);
        assert!(rep.p_ratio.is_finite() && rep.p_ratio >= 0.0);
        assert!(rep.led_int_ratio.is_finite() && rep.led_ext_ratio.is_finite());
        let again = report(&st, &cfg, &params, 0.0).unwrap();
        assert_eq!(rep.csv_row(), again.csv_row());
    }
}
