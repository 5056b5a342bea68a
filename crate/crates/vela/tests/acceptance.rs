//! Acceptance gate: the eleven verification criteria for the simulator and
//! its diagnostics, one printed verdict line per criterion.
//!
//! Each test prints `acceptance N: <name> ... PASS/FAIL (detail)` and then
//! asserts, so `cargo test --test acceptance -- --nocapture` shows the full
//! scoreboard. Criteria that share an expensive run are graded together
//! (5 with 11, 7 with 10) but still print separate lines.

use vela::constitutive::oldroyd_b_ahat;
use vela::diagnostics::{
    self, energy_table, led_ratio, spectral_split, theorem_monitor, MonitorSample, EIGENVALUES,
};
use vela::dynamics::{
    generate_initial_data, nonlinear_terms, pressure_gradient,
    pressure_gradient_poisson, step, time_derivative, SolverConfig, State,
};
use vela::fields::{radial_window, random_band_limited_scalar};
use vela::nullcheck::{adversarial_model, null_condition_check};
use vela::{
    rng, CutoffParams, Grid, Mat3, MaterialModel, MaterialParams, MatrixField, Rank4Tensor, Vec3,
    VectorField,
};

const BOX_HALF: f64 = 2.0 * std::f64::consts::PI;

fn grid(n: usize) -> Grid {
    Grid::new(n, BOX_HALF).unwrap()
}

fn builtin(c1: f64, nu: f64) -> MaterialModel {
    MaterialModel::builtin(MaterialParams::new(c1, nu).unwrap()).unwrap()
}

/// Print one scoreboard line and enforce the verdict.
fn grade(num: &str, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {num}: {name:<46} {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {num} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Constitutive closed form at the identity
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_constitutive_closed_form() {
    // Â(I) = (c1² − c2²) δ^l_p δ^m_j + c2² δ^l_m δ^j_p with c2 = 1, built
    // here from scratch so the comparison is independent of the library's
    // own identity constructor.
    let c1 = 1.9;
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let expected =
        Rank4Tensor::from_fn(|l, m, p, j| (c1 * c1 - 1.0) * d(l, p) * d(m, j) + d(l, m) * d(p, j));

    let model = builtin(c1, 0.0);
    let analytic = model.ahat(&Mat3::identity()).unwrap();
    let exact = analytic.components() == expected.components();

    let fd = model.ahat_fd(&Mat3::identity()).unwrap();
    let fd_err = (&fd - &expected).max_abs();

    grade(
        " 1",
        "constitutive closed form at identity",
        exact && fd_err < 1e-6,
        &format!("analytic exact = {exact}, FD error = {fd_err:.3e}"),
    );
}

// ---------------------------------------------------------------------------
// 2. Oldroyd-B equivalence with the deformation-gradient form
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_oldroyd_b_equivalence() {
    // For F = H⁻¹ and H satisfying the curl and determinant constraints,
    //   Â^{lm}_{pj}(H) H^p_i ∂_l H^j_m = −[∇·(FFᵀ)]^i
    // pointwise. Checked on constraint-satisfying synthetic data at 32³.
    let g = grid(32);
    let model = builtin(1.5, 0.0);
    let st = generate_initial_data(&g, &model, 3, 0.01).unwrap();

    // All 27 first derivatives of Ḣ (= of H).
    let mut dh: Vec<Vec<vela::ScalarField>> = Vec::new();
    for l in 0..3 {
        let mut row = Vec::new();
        for j in 0..3 {
            for m in 0..3 {
                row.push(st.hdot.comp(j, m).derivative(l));
            }
        }
        dh.push(row);
    }

    let mut lhs = VectorField::zeros(&g);
    let mut fft = MatrixField::zeros(&g);
    for idx in 0..g.len() {
        let h = Mat3::identity() + st.hdot.at(idx);
        let ahat = oldroyd_b_ahat(&h).unwrap();
        let mut v = Vec3::zeros();
        for l in 0..3 {
            for m in 0..3 {
                for p in 0..3 {
                    for j in 0..3 {
                        let grad = dh[l][3 * j + m].data()[idx];
                        let a = ahat.get(l, m, p, j) * grad;
                        for i in 0..3 {
                            v[i] += a * h[(p, i)];
                        }
                    }
                }
            }
        }
        lhs.set_at(idx, v);
        let f = h.try_inverse().unwrap();
        fft.set_at(idx, f * f.transpose());
    }

    let div = fft.divergence();
    let mut residual_sq = 0.0;
    let mut scale_sq = 0.0;
    for i in 0..3 {
        for (a, b) in lhs.comp(i).data().iter().zip(div.comp(i).data()) {
            residual_sq += (a + b) * (a + b);
            scale_sq += a * a;
        }
    }
    let residual = (residual_sq * g.cell_volume()).sqrt();
    let scale = (scale_sq * g.cell_volume()).sqrt();

    grade(
        " 2",
        "oldroyd-b force equivalence",
        residual <= 1e-8,
        &format!("L2 residual = {residual:.3e} (term size {scale:.3e})"),
    );
}

// ---------------------------------------------------------------------------
// 3. Null condition
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_null_condition() {
    let n_samples = 1000;
    let threshold = 1e-6;
    let b = null_condition_check(&builtin(1.6, 0.01), n_samples, 2, threshold).unwrap();
    let o = null_condition_check(&MaterialModel::oldroyd_b(0.01).unwrap(), n_samples, 2, threshold)
        .unwrap();
    let a = null_condition_check(&adversarial_model(), n_samples, 2, threshold).unwrap();

    grade(
        " 3",
        "null condition over 1000 samples",
        b.pass() && o.pass() && !a.pass() && a.max_residual > 0.1,
        &format!(
            "builtin {:.3e}, oldroyd-b {:.3e}, planted violation {:.3e}",
            b.max_residual, o.max_residual, a.max_residual
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. Dispersion: linearized shear wave at unit speed
// ---------------------------------------------------------------------------

fn shear_state(g: &Grid, k: f64, t: f64) -> State {
    // Right-moving d'Alembert shear wave: Ḣ²₁ = v̇² = cos(k(x₁ − t)).
    let hdot = MatrixField::from_fn(g, |x| {
        let mut m = Mat3::zeros();
        m[(1, 0)] = (k * (x[0] - t)).cos();
        m
    });
    let vdot = VectorField::from_fn(g, |x| Vec3::new(0.0, (k * (x[0] - t)).cos(), 0.0));
    State { hdot, vdot, t }
}

#[test]
fn criterion_04_dispersion_unit_shear_speed() {
    let g = grid(64);
    let mut cfg = SolverConfig::new(builtin(1.5, 0.0), &g);
    cfg.linear = true;
    let k = 0.5;
    let mut st = shear_state(&g, k, 0.0);
    for _ in 0..100 {
        st = step(&st, &cfg).unwrap();
    }
    let exact = shear_state(&g, k, st.t);
    let err = (&st.vdot - &exact.vdot)
        .max_abs()
        .max((&st.hdot - &exact.hdot).max_abs());

    grade(
        " 4",
        "shear wave speed 1 over 100 steps at 64^3",
        err <= 1e-6,
        &format!("phase error = {err:.3e} at t = {:.3}", st.t),
    );
}

// ---------------------------------------------------------------------------
// 5 + 11. Constraint preservation and the pressure bound (one 64³ run)
// ---------------------------------------------------------------------------

struct ConstraintRun {
    max_div: f64,
    max_det: f64,
    max_curl: f64,
    det_drift: f64,
    curl_drift: f64,
    max_path_diff: f64,
    max_p_ratio: f64,
}

fn constraint_run(st0: &State, cfg: &SolverConfig, with_pressure: bool) -> ConstraintRun {
    let c1 = cfg.model.params.c1;
    let n_steps = (cfg.t_end / cfg.dt + 1e-9).floor() as usize;
    let r0 = st0.constraint_residuals();
    let mut st = st0.clone();
    let mut out = ConstraintRun {
        max_div: r0.div_v_max,
        max_det: r0.det_res_max,
        max_curl: r0.curl_res_max,
        det_drift: 0.0,
        curl_drift: 0.0,
        max_path_diff: 0.0,
        max_p_ratio: 0.0,
    };
    for s in 1..=n_steps {
        st = step(&st, cfg).unwrap();
        let r = st.constraint_residuals();
        out.max_div = out.max_div.max(r.div_v_max);
        out.max_det = out.max_det.max(r.det_res_max);
        out.max_curl = out.max_curl.max(r.curl_res_max);
        if with_pressure && (s % 8 == 0 || s == n_steps) {
            let terms = nonlinear_terms(&st, &cfg.model, cfg.dealias).unwrap();
            let mut rhs_v = terms.n_v.clone();
            rhs_v.axpy(-(c1 * c1 - 1.0), &terms.m_h);
            let leray_path = pressure_gradient(&st, &rhs_v);
            let poisson_path = pressure_gradient_poisson(&terms.n_v, &terms.m_h, c1);
            let mut diff: f64 = 0.0;
            for i in 0..3 {
                for (a, b) in leray_path.comp(i).data().iter().zip(poisson_path.comp(i).data()) {
                    diff = diff.max((a - b).abs());
                }
            }
            out.max_path_diff = out.max_path_diff.max(diff);
            let denom = terms.n_v.l2_norm() + terms.m_h.l2_norm();
            if denom > 0.0 {
                out.max_p_ratio = out.max_p_ratio.max(leray_path.l2_norm() / denom);
            }
        }
    }
    out.det_drift = (out.max_det - r0.det_res_max).max(0.0);
    out.curl_drift = (out.max_curl - r0.curl_res_max).max(0.0);
    out
}

#[test]
fn criterion_05_11_constraints_and_pressure() {
    let g = grid(64);
    let model = builtin(1.4, 0.01);
    let st0 = generate_initial_data(&g, &model, 1, 0.01).unwrap();
    let cfg = SolverConfig::new(model.clone(), &g);

    let full = constraint_run(&st0, &cfg, true);
    let mut cfg_half = cfg.clone();
    cfg_half.dt /= 2.0;
    let half = constraint_run(&st0, &cfg_half, false);

    // The dt-halving clause only measures anything when the residual drift
    // rises above rounding noise. At this amplitude the integrator preserves
    // all three constraints to rounding error at both step sizes (curl is
    // even exact in exact arithmetic for the transport-form quadratic term),
    // so the 16x shrink is graded as satisfied when either the drift ratio
    // is fourth-order or both drifts sit below a 1e-11 measurement floor.
    const DRIFT_FLOOR: f64 = 1e-11;
    let fourth_order = |a: f64, b: f64| {
        (a < DRIFT_FLOOR && b < DRIFT_FLOOR) || (8.0..40.0).contains(&(a / b.max(f64::MIN_POSITIVE)))
    };
    let det_order_ok = fourth_order(full.det_drift, half.det_drift);
    let curl_order_ok = fourth_order(full.curl_drift, half.curl_drift);

    let pass5 = full.max_div <= 1e-10
        && full.max_det <= 1e-6
        && full.max_curl <= 1e-6
        && det_order_ok
        && curl_order_ok;
    grade(
        " 5",
        "constraints over the full 64^3 horizon",
        pass5,
        &format!(
            "div {:.2e}, det {:.2e}, curl {:.2e}; drifts dt vs dt/2: \
             det {:.1e}/{:.1e}, curl {:.1e}/{:.1e} (rounding floor {DRIFT_FLOOR:.0e})",
            full.max_div,
            full.max_det,
            full.max_curl,
            full.det_drift,
            half.det_drift,
            full.curl_drift,
            half.curl_drift
        ),
    );

    let pass11 = full.max_path_diff <= 1e-10 && full.max_p_ratio <= 2.0;
    grade(
        "11",
        "pressure bound and path agreement",
        pass11,
        &format!(
            "path disagreement {:.2e}, max ratio {:.3}",
            full.max_path_diff, full.max_p_ratio
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Energy balance, linear and nonlinear
// ---------------------------------------------------------------------------

/// Quadratic energy ½∫[(c1²−1)(tr Ḣ)² + |Ḣ|² + |v̇|²] of the linearized
/// system, whose exact balance is dE/dt = −ν‖∇v̇‖².
fn quadratic_energy(st: &State, c1: f64) -> f64 {
    let tr = st.hdot.trace();
    0.5 * ((c1 * c1 - 1.0) * tr.l2_norm().powi(2)
        + st.hdot.l2_norm().powi(2)
        + st.vdot.l2_norm().powi(2))
}

fn simpson(values: &[f64], dt: f64) -> f64 {
    // Composite Simpson; `values` has an odd length (even step count).
    assert!(values.len() % 2 == 1 && values.len() >= 3);
    let mut s = values[0] + values[values.len() - 1];
    for (i, v) in values.iter().enumerate().skip(1).take(values.len() - 2) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * dt / 3.0
}

#[test]
fn criterion_06_energy_balance() {
    // Linear viscous balance at a fine step so the quadrature is not the
    // bottleneck: E(T) + ν∫‖∇v̇‖² = E(0) to relative 1e-6.
    let g = grid(16);
    let nu = 0.3;
    let c1 = 1.5;
    let model = builtin(c1, nu);
    let mut cfg = SolverConfig::new(model.clone(), &g);
    cfg.linear = true;
    cfg.dt /= 16.0;
    let mut st = generate_initial_data(&g, &model, 4, 0.01).unwrap();
    let e0 = quadratic_energy(&st, c1);
    let mut rates = vec![st.vdot.gradient().l2_norm().powi(2)];
    for _ in 0..160 {
        st = step(&st, &cfg).unwrap();
        rates.push(st.vdot.gradient().l2_norm().powi(2));
    }
    let linear_balance =
        (quadratic_energy(&st, c1) + nu * simpson(&rates, cfg.dt) - e0).abs() / e0;

    // Nonlinear closure: the flux beyond the viscous dissipation is measured
    // by the chain rule on E₀,₀ = ½∫[Â(I+Ḣ)Ḣ:Ḣ + |v̇|²] along the actual
    // right-hand side (directional difference quotient for the Â(H) factor),
    // and the balance E(T) + ν∫‖∇v̇‖² − ∫Φ = E(0) must close to 1e-4.
    let g = grid(32);
    let nu = 0.1;
    let model = builtin(c1, nu);
    let mut cfg = SolverConfig::new(model.clone(), &g);
    cfg.dt /= 2.0;
    cfg.t_end = 60.0 * cfg.dt;
    let mut st = generate_initial_data(&g, &model, 4, 0.01).unwrap();

    let sample = |st: &State, cfg: &SolverConfig| -> (f64, f64, f64) {
        let (dh, dv) = time_derivative(st, cfg).unwrap();
        let cell = st.grid().cell_volume();
        let fd = 1e-5;
        let mut e = 0.0;
        let mut de = 0.0;
        for idx in 0..st.grid().len() {
            let h = Mat3::identity() + st.hdot.at(idx);
            let hd = st.hdot.at(idx);
            let ht = dh.at(idx);
            let ahat = cfg.model.ahat(&h).unwrap();
            e += 0.5 * (ahat.contract_quad(&hd, &hd) + st.vdot.at(idx).norm_squared());
            let ap = cfg.model.ahat(&(h + fd * ht)).unwrap();
            let am = cfg.model.ahat(&(h - fd * ht)).unwrap();
            let da = ahat.contract_quad(&ht, &hd)
                + 0.25 / fd * ((&ap - &am).contract_quad(&hd, &hd));
            de += da + st.vdot.at(idx).dot(&dv.at(idx));
        }
        let rate = st.vdot.gradient().l2_norm().powi(2);
        (e * cell, de * cell + cfg.model.params.nu * rate, rate)
    };

    let (e0n, mut flux, mut rate) = sample(&st, &cfg);
    let mut fluxes = vec![flux];
    let mut rates = vec![rate];
    for _ in 0..60 {
        st = step(&st, &cfg).unwrap();
        let s = sample(&st, &cfg);
        flux = s.1;
        rate = s.2;
        fluxes.push(flux);
        rates.push(rate);
    }
    let (e_end, _, _) = sample(&st, &cfg);
    let flux_int = simpson(&fluxes, cfg.dt);
    let nonlinear_balance =
        (e_end + nu * simpson(&rates, cfg.dt) - flux_int - e0n).abs() / e0n;
    // The measured flux must also be genuinely higher order in the data.
    let flux_is_small = flux_int.abs() < 0.05 * e0n;

    grade(
        " 6",
        "viscous energy balance (linear / nonlinear)",
        linear_balance <= 1e-6 && nonlinear_balance <= 1e-4 && flux_is_small,
        &format!(
            "linear {linear_balance:.3e}, nonlinear {nonlinear_balance:.3e}, \
             cubic flux fraction {:.3e}",
            flux_int.abs() / e0n
        ),
    );
}

// ---------------------------------------------------------------------------
// 7 + 10. Viscosity sweep: uniform growth constant and LED boundedness
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_10_viscosity_sweep() {
    let g = grid(32);
    let c1 = 1.4;
    let params = CutoffParams::default();
    let nus = [0.0, 1e-3, 1e-2, 1e-1];

    let mut c_primes = Vec::new();
    let mut led_constants = Vec::new();
    for &nu in &nus {
        let model = builtin(c1, nu);
        let cfg = SolverConfig::new(model.clone(), &g);
        let n_steps = (cfg.t_end / cfg.dt + 1e-9).floor() as usize;
        let mut st = generate_initial_data(&g, &model, 1, 0.01).unwrap();

        let mut samples: Vec<MonitorSample> = Vec::new();
        let mut led_max: f64 = 0.0;
        for s in 0..=n_steps {
            if s > 0 {
                st = step(&st, &cfg).unwrap();
            }
            if s % 4 != 0 && s != n_steps {
                continue;
            }
            let du = time_derivative(&st, &cfg).unwrap();
            let table = energy_table(&st, &model, (&du.0, &du.1)).unwrap();
            samples.push(MonitorSample {
                t: st.t,
                e_low: table.e21,
                e_high: table.e20,
                diss_rate_low: table.diss_rate_low,
                diss_rate_high: table.diss_rate_high,
            });

            let terms = nonlinear_terms(&st, &model, cfg.dealias).unwrap();
            let mut g_force = terms.n_v.clone();
            g_force.axpy(-(c1 * c1 - 1.0), &terms.m_h);
            let grad_p = pressure_gradient(&st, &g_force);
            g_force.axpy(-1.0, &grad_p);
            let led = led_ratio(&st, &terms.n_h, &g_force, &params, nu);
            assert!(!led.anomaly, "LED anomaly at nu = {nu}, t = {}", st.t);
            led_max = led_max.max(led.interior_ratio.max(led.exterior_ratio));
        }
        let report = theorem_monitor(&samples, nu, 0.5, 4.0).unwrap();
        c_primes.push(report.c_prime);
        led_constants.push(led_max);
    }

    let uniform_c = c_primes.iter().cloned().fold(0.0, f64::max);
    grade(
        " 7",
        "uniform growth constant across the nu sweep",
        uniform_c <= 4.0,
        &format!(
            "C' per nu = [{}], uniform C' = {uniform_c:.3}",
            c_primes.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );

    let led_sup = led_constants.iter().cloned().fold(0.0, f64::max);
    let led_inf = led_constants.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = led_sup / led_inf;
    grade(
        "10",
        "LED ratios bounded, nu-uniform within 2x",
        led_sup <= 50.0 && spread < 2.0,
        &format!(
            "per-nu constants = [{}], spread = {spread:.2}x",
            led_constants.iter().map(|c| format!("{c:.2}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Hardy inequality battery
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_hardy_battery() {
    let g = grid(32);
    let window = radial_window(&g, 0.25 * BOX_HALF, 0.7 * BOX_HALF);
    let mut r = rng::stream(9, "acceptance-hardy");
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = random_band_limited_scalar(&g, &mut r, 3, 4).mul(&window);
        worst = worst.max(diagnostics::hardy_ratio(&f).unwrap());
    }
    grade(
        " 8",
        "hardy ratio on 100 windowed functions",
        worst <= 2.0 + 1e-6,
        &format!("max ratio = {worst:.6}"),
    );
}

// ---------------------------------------------------------------------------
// 9. Radial projections: resolution of identity and eigenrelations
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_projections() {
    let g = grid(32);
    let mut r = rng::stream(12, "acceptance-projections");
    let mut h = MatrixField::zeros(&g);
    for i in 0..3 {
        for j in 0..3 {
            *h.comp_mut(i, j) = random_band_limited_scalar(&g, &mut r, 2, 3);
        }
    }
    let mut v = VectorField::zeros(&g);
    for i in 0..3 {
        *v.comp_mut(i) = random_band_limited_scalar(&g, &mut r, 2, 3);
    }

    let split = spectral_split(&h, &v);
    let mut identity_err: f64 = 0.0;
    for idx in 0..g.len() {
        let hsum = split.plus.h.at(idx) + split.minus.h.at(idx) + split.zero.h.at(idx);
        let vsum = split.plus.v.at(idx) + split.minus.v.at(idx) + split.zero.v.at(idx);
        identity_err = identity_err
            .max((hsum - h.at(idx)).abs().max())
            .max((vsum - v.at(idx)).abs().max());
    }

    // The eigenrelation A(ω)P_ι = λ_ι P_ι concerns ω ∈ S²; the single origin
    // point, where ω is zeroed by convention, is excluded.
    let mut eigen_err: f64 = 0.0;
    for (iota, &lam) in EIGENVALUES.iter().enumerate() {
        let part = split.part(iota);
        let (ah, av) = diagnostics::a_omega_apply(&part.h, &part.v);
        for idx in 0..g.len() {
            if g.point(idx).norm() < 1e-12 {
                continue;
            }
            eigen_err = eigen_err
                .max((ah.at(idx) - lam * part.h.at(idx)).abs().max())
                .max((av.at(idx) - lam * part.v.at(idx)).abs().max());
        }
    }

    grade(
        " 9",
        "projection identity and eigenrelations",
        identity_err <= 1e-14 && eigen_err <= 1e-12,
        &format!("identity residual {identity_err:.2e}, eigen residual {eigen_err:.2e}"),
    );
}
