//! Run orchestration: simulate, viscosity sweeps, the null-condition check,
//! the Hardy/Sobolev inequality batteries, and snapshot inspection.
//!
//! Every run is deterministic under (seed, config); repeated identical runs
//! emit byte-identical CSV. Sweep members may execute in parallel (thread
//! count from the `VELA_THREADS` environment variable) but each member is
//! internally serial and report assembly preserves the requested order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vela::diagnostics::{self, EnergyReport, MonitorSample, TheoremReport, CSV_HEADER};
use vela::dynamics::{generate_initial_data, step};
use vela::fields::{radial_window, random_band_limited_scalar, read_snapshot, write_snapshot};
use vela::nullcheck::{adversarial_model, null_condition_check, NullReport};
use vela::{rng, Error, Result, State};

use crate::config::{ModelChoice, RunConfig};

/// Everything a finished simulation produced, plus where it was written.
pub struct SimArtifacts {
    pub reports: Vec<EnergyReport>,
    pub monitor: TheoremReport,
    pub max_div: f64,
    pub max_det: f64,
    pub max_curl: f64,
    /// All three constraint residual maxima stayed below their thresholds.
    pub residuals_pass: bool,
    pub final_state: State,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: String,
}

fn model_label(cfg: &RunConfig) -> String {
    match cfg.material.model {
        ModelChoice::Builtin => {
            format!("builtin (c1 = {}, nu = {})", cfg.material.c1, cfg.material.nu)
        }
        ModelChoice::OldroydB => format!("oldroyd-b (nu = {})", cfg.material.nu),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn pass_str(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Run one simulation: time-stepping with a diagnostics row and a binary
/// snapshot every `output_every` steps, then the energy-growth verdict.
///
/// Writes `timeseries.csv`, `snapshot_NNNN.bin`, and `summary.txt` into the
/// configured output directory. A blow-up mid-run still writes the partial
/// CSV and a summary marking the failure time before returning the error.
pub fn run_simulation(cfg: &RunConfig) -> Result<SimArtifacts> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let scfg = cfg.solver_config(&grid)?;
    let params = cfg.cutoff_params()?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join("timeseries.csv");
    let summary_path = dir.join("summary.txt");

    let mut state = generate_initial_data(&grid, &scfg.model, scfg.seed, scfg.epsilon)?;
    // Whole steps only; the horizon is truncated to the last full step.
    let n_steps = (scfg.t_end / scfg.dt + 1e-9).floor() as usize;

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut reports: Vec<EnergyReport> = Vec::new();
    let mut dissip_int = 0.0;
    let mut prev_rate: Option<(f64, f64)> = None;
    let mut snap_index = 0usize;
    let mut failure: Option<Error> = None;

    for s in 0..=n_steps {
        if s > 0 {
            match step(&state, &scfg) {
                Ok(next) => state = next,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if s % scfg.output_every == 0 || s == n_steps {
            let mut rep = diagnostics::report(&state, &scfg, &params, 0.0)?;
            if let Some((t0, r0)) = prev_rate {
                dissip_int +=
                    0.5 * scfg.model.params.nu * 0.5 * (r0 + rep.diss_rate_low) * (rep.t - t0);
            }
            prev_rate = Some((rep.t, rep.diss_rate_low));
            rep.dissip_int = dissip_int;
            csv.push_str(&rep.csv_row());
            csv.push('\n');
            reports.push(rep);
            write_snapshot(
                &dir.join(format!("snapshot_{snap_index:04}.bin")),
                &state.to_snapshot(),
            )?;
            snap_index += 1;
        }
    }
    write_text(&csv_path, &csv)?;

    if let Some(e) = failure {
        let text = format!(
            "simulation summary\n  model:   {}\n  status:  FAILED at t = {:.6e}\n  error:   {e}\n",
            model_label(cfg),
            state.t
        );
        write_text(&summary_path, &text)?;
        return Err(e);
    }

    let samples: Vec<MonitorSample> = reports.iter().map(|r| r.monitor_sample()).collect();
    let monitor = diagnostics::theorem_monitor(
        &samples,
        scfg.model.params.nu,
        cfg.diagnostics.delta,
        cfg.diagnostics.c_threshold,
    )?;

    let max_div = reports.iter().map(|r| r.div_v_max).fold(0.0, f64::max);
    let max_det = reports.iter().map(|r| r.det_res_max).fold(0.0, f64::max);
    let max_curl = reports.iter().map(|r| r.curl_res_max).fold(0.0, f64::max);
    let d = &cfg.diagnostics;
    let residuals_pass = max_div <= d.div_threshold
        && max_det <= d.det_threshold
        && max_curl <= d.curl_threshold;
    let max_int = reports.iter().map(|r| r.led_int_ratio).fold(0.0, f64::max);
    let max_ext = reports.iter().map(|r| r.led_ext_ratio).fold(0.0, f64::max);
    let max_p = reports.iter().map(|r| r.p_ratio).fold(0.0, f64::max);

    let mut text = String::new();
    let _ = writeln!(text, "simulation summary");
    let _ = writeln!(text, "  grid:              {}^3, box half-length {:.6}", grid.n(), grid.half_length());
    let _ = writeln!(text, "  model:             {}", model_label(cfg));
    let _ = writeln!(text, "  dt / horizon:      {:.6e} / {:.6e} ({n_steps} steps)", scfg.dt, scfg.t_end);
    let _ = writeln!(text, "  seed / epsilon:    {} / {}", scfg.seed, scfg.epsilon);
    let _ = writeln!(text, "  samples:           {}", reports.len());
    let _ = writeln!(
        text,
        "  energy growth:     C' = {:.6e} (threshold {:.2}) {}",
        monitor.c_prime,
        monitor.threshold,
        pass_str(monitor.pass)
    );
    let _ = writeln!(
        text,
        "  max |div v|:       {:.6e} (threshold {:.1e}) {}",
        max_div,
        d.div_threshold,
        pass_str(max_div <= d.div_threshold)
    );
    let _ = writeln!(
        text,
        "  max det residual:  {:.6e} (threshold {:.1e}) {}",
        max_det,
        d.det_threshold,
        pass_str(max_det <= d.det_threshold)
    );
    let _ = writeln!(
        text,
        "  max curl residual: {:.6e} (threshold {:.1e}) {}",
        max_curl,
        d.curl_threshold,
        pass_str(max_curl <= d.curl_threshold)
    );
    let _ = writeln!(text, "  max LED ratios:    interior {max_int:.6e}, exterior {max_ext:.6e}");
    let _ = writeln!(text, "  max pressure ratio: {max_p:.6e}");
    if d.nullcheck {
        let report =
            null_condition_check(&scfg.model, d.null_samples, scfg.seed, d.null_threshold)?;
        let _ = writeln!(text, "{report}");
    }
    write_text(&summary_path, &text)?;

    Ok(SimArtifacts {
        reports,
        monitor,
        max_div,
        max_det,
        max_curl,
        residuals_pass,
        final_state: state,
        csv_path,
        summary_path,
        summary: text,
    })
}

/// Discrete L² distance between two states (displacement and velocity parts
/// combined), used for the vanishing-viscosity comparison.
pub fn state_l2_distance(a: &State, b: &State) -> f64 {
    let vol = a.grid().cell_volume();
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let (x, y) = (a.hdot.comp(i, j).data(), b.hdot.comp(i, j).data());
            acc += x.iter().zip(y).map(|(u, w)| (u - w) * (u - w)).sum::<f64>();
        }
        let (x, y) = (a.vdot.comp(i).data(), b.vdot.comp(i).data());
        acc += x.iter().zip(y).map(|(u, w)| (u - w) * (u - w)).sum::<f64>();
    }
    (acc * vol).sqrt()
}

/// One sweep member's verdict row.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub nu: f64,
    pub c_low: f64,
    pub c_high: f64,
    pub c_prime: f64,
    pub pass: bool,
    pub max_div: f64,
    pub max_det: f64,
    pub max_curl: f64,
    /// Terminal-state L² distance to the ν = 0 member, when one is present.
    pub diff_vs_inviscid: Option<f64>,
}

impl SweepEntry {
    fn csv_row(&self) -> String {
        format!(
            "{:e},{:.12e},{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e},{}",
            self.nu,
            self.c_low,
            self.c_high,
            self.c_prime,
            self.pass,
            self.max_div,
            self.max_det,
            self.max_curl,
            self.diff_vs_inviscid
                .map(|v| format!("{v:.12e}"))
                .unwrap_or_default()
        )
    }
}

pub const SWEEP_CSV_HEADER: &str =
    "nu,c_low,c_high,c_prime,pass,max_div,max_det,max_curl,l2_diff_vs_nu0";

#[derive(Debug)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Single constant the whole family must admit: max over members.
    pub uniform_c: f64,
    pub threshold: f64,
    pub pass: bool,
    pub report_path: PathBuf,
    pub summary: String,
}

fn sweep_threads() -> usize {
    std::env::var("VELA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

/// Run the same configuration across a list of viscosities. All members share
/// the seed, so the initial data is identical across runs; the report grades
/// each member's growth constant, the uniform constant over the family, and
/// the terminal-state distance to the ν = 0 (inviscid elastodynamics) member.
///
/// Members run in parallel when `VELA_THREADS` > 1. A member blow-up still
/// writes the partial report for the members that finished, then errors.
pub fn run_sweep(cfg: &RunConfig, nu_list: &[f64]) -> Result<SweepReport> {
    if nu_list.len() < 2 {
        return Err(Error::Config(format!(
            "a sweep needs at least 2 viscosities, got {}",
            nu_list.len()
        )));
    }
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;

    let member_cfgs: Vec<RunConfig> = nu_list
        .iter()
        .enumerate()
        .map(|(i, &nu)| {
            let mut c = cfg.clone();
            c.material.nu = nu;
            c.output.dir = dir.join(format!("nu-{i:02}"));
            c
        })
        .collect();

    let threads = sweep_threads();
    let mut results: Vec<Option<Result<SimArtifacts>>> =
        member_cfgs.iter().map(|_| None).collect();
    for chunk in (0..member_cfgs.len()).collect::<Vec<_>>().chunks(threads.max(1)) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&i| {
                    let c = &member_cfgs[i];
                    (i, scope.spawn(move || run_simulation(c)))
                })
                .collect();
            for (i, h) in handles {
                results[i] = Some(h.join().expect("sweep member thread panicked"));
            }
        });
    }

    let inviscid_state = nu_list
        .iter()
        .position(|&nu| nu == 0.0)
        .and_then(|i| results[i].as_ref())
        .and_then(|r| r.as_ref().ok())
        .map(|a| a.final_state.clone());

    let mut entries = Vec::new();
    let mut first_error: Option<Error> = None;
    for (i, res) in results.into_iter().enumerate() {
        match res.expect("sweep member not executed") {
            Ok(a) => entries.push(SweepEntry {
                nu: nu_list[i],
                c_low: a.monitor.c_low,
                c_high: a.monitor.c_high,
                c_prime: a.monitor.c_prime,
                pass: a.monitor.pass,
                max_div: a.max_div,
                max_det: a.max_det,
                max_curl: a.max_curl,
                diff_vs_inviscid: inviscid_state
                    .as_ref()
                    .map(|s0| state_l2_distance(&a.final_state, s0)),
            }),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }

    let mut table = String::from(SWEEP_CSV_HEADER);
    table.push('\n');
    for e in &entries {
        table.push_str(&e.csv_row());
        table.push('\n');
    }
    let report_path = dir.join("sweep.csv");
    write_text(&report_path, &table)?;

    let uniform_c = entries.iter().map(|e| e.c_prime).fold(0.0, f64::max);
    let pass = first_error.is_none() && entries.iter().all(|e| e.pass);
    let threshold = cfg.diagnostics.c_threshold;

    let mut text = String::new();
    let _ = writeln!(text, "viscosity sweep summary ({} members)", nu_list.len());
    for e in &entries {
        let _ = writeln!(
            text,
            "  nu = {:>9.3e}: C' = {:.6e} {}{}",
            e.nu,
            e.c_prime,
            pass_str(e.pass),
            e.diff_vs_inviscid
                .map(|v| format!(", |terminal - inviscid|_L2 = {v:.6e}"))
                .unwrap_or_default()
        );
    }
    let _ = writeln!(
        text,
        "  uniform constant:  C' = {uniform_c:.6e} (threshold {threshold:.2}) {}",
        pass_str(uniform_c <= threshold && first_error.is_none())
    );
    if let Some(e) = &first_error {
        let _ = writeln!(text, "  PARTIAL REPORT: a member failed: {e}");
    }
    write_text(&dir.join("sweep_summary.txt"), &text)?;

    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(SweepReport { entries, uniform_c, threshold, pass, report_path, summary: text })
}

/// Combined null-condition verdict over the configured model, the Oldroyd-B
/// closure, and the planted-violation fixture (which must fail).
#[derive(Debug)]
pub struct NullcheckOutcome {
    pub reports: Vec<(String, NullReport)>,
    pub adversarial: NullReport,
    pub pass: bool,
    pub summary: String,
}

pub fn run_nullcheck(cfg: &RunConfig) -> Result<NullcheckOutcome> {
    let d = &cfg.diagnostics;
    let seed = cfg.data.seed;
    let mut reports = Vec::new();
    let builtin = cfg.model()?;
    reports.push((
        model_label(cfg),
        null_condition_check(&builtin, d.null_samples, seed, d.null_threshold)?,
    ));
    if cfg.material.model != ModelChoice::OldroydB {
        let ob = vela::MaterialModel::oldroyd_b(cfg.material.nu)?;
        reports.push((
            format!("oldroyd-b (nu = {})", cfg.material.nu),
            null_condition_check(&ob, d.null_samples, seed, d.null_threshold)?,
        ));
    }
    let adversarial =
        null_condition_check(&adversarial_model(), d.null_samples, seed, d.null_threshold)?;

    let pass = reports.iter().all(|(_, r)| r.pass()) && !adversarial.pass();
    let mut text = String::new();
    for (label, r) in &reports {
        let _ = writeln!(text, "model: {label}\n{r}\n");
    }
    let _ = writeln!(
        text,
        "planted-violation fixture (expected to fail): residual {:.3e} -> {}",
        adversarial.max_residual,
        if adversarial.pass() { "PASSED (unexpected)" } else { "caught" }
    );
    let _ = writeln!(text, "overall: {}", pass_str(pass));
    Ok(NullcheckOutcome { reports, adversarial, pass, summary: text })
}

/// Hardy/Sobolev battery verdict on seeded windowed band-limited families.
#[derive(Debug)]
pub struct InequalityOutcome {
    pub hardy_count: usize,
    pub hardy_max: f64,
    pub hardy_bound: f64,
    pub sobolev_count: usize,
    pub sobolev_max: f64,
    pub sobolev_bound: f64,
    pub pass: bool,
    pub summary: String,
}

/// Run the inequality batteries: 100 Hardy ratios against the analytic
/// constant 2, and 50 weighted Sobolev embedding constants at λ = 1 against
/// a frozen empirical bound of 1 (measured ≈ 0.5 on this family, kept with a
/// 2x margin).
pub fn run_inequalities(cfg: &RunConfig) -> Result<InequalityOutcome> {
    let grid = cfg.grid()?;
    let l = grid.half_length();
    // Compact support well inside the box so the radial weights are honest.
    let window = radial_window(&grid, 0.25 * l, 0.7 * l);
    let mut r = rng::stream(cfg.data.seed, "inequality-battery");

    let hardy_count = 100;
    let hardy_bound = 2.0 + 1e-6;
    let mut hardy_max: f64 = 0.0;
    for _ in 0..hardy_count {
        let f = random_band_limited_scalar(&grid, &mut r, 3, 4).mul(&window);
        hardy_max = hardy_max.max(diagnostics::hardy_ratio(&f)?);
    }

    let sobolev_count = 50;
    let sobolev_bound = 1.0;
    let mut sobolev_max: f64 = 0.0;
    for _ in 0..sobolev_count {
        let f = random_band_limited_scalar(&grid, &mut r, 3, 4).mul(&window);
        sobolev_max = sobolev_max.max(diagnostics::sobolev3_check(&f, 1.0)?);
    }

    let pass = hardy_max <= hardy_bound && sobolev_max <= sobolev_bound;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "hardy battery:   {hardy_count} functions, max ratio {hardy_max:.6e} (bound {hardy_bound}) {}",
        pass_str(hardy_max <= hardy_bound)
    );
    let _ = writeln!(
        text,
        "sobolev battery: {sobolev_count} functions, max constant {sobolev_max:.6e} (bound {sobolev_bound}) {}",
        pass_str(sobolev_max <= sobolev_bound)
    );
    let _ = writeln!(text, "overall: {}", pass_str(pass));
    Ok(InequalityOutcome {
        hardy_count,
        hardy_max,
        hardy_bound,
        sobolev_count,
        sobolev_max,
        sobolev_bound,
        pass,
        summary: text,
    })
}

/// Human-readable description of a binary snapshot: grid, per-field ranges,
/// and (when the snapshot holds a solver state) the time and constraint
/// residuals.
pub fn inspect_snapshot(path: &Path) -> Result<String> {
    let snap = read_snapshot(path)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "snapshot {}: {}^3 grid, box half-length {:.6}",
        path.display(),
        snap.n,
        snap.l
    );
    for f in &snap.fields {
        let min = f.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = f.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rms = (f.data.iter().map(|v| v * v).sum::<f64>() / f.data.len() as f64).sqrt();
        let _ = writeln!(
            text,
            "  field {:<6} {} component(s): min {:.6e}, max {:.6e}, rms {:.6e}",
            f.name, f.components, min, max, rms
        );
    }
    if let Ok(state) = State::from_snapshot(&snap) {
        let res = state.constraint_residuals();
        let _ = writeln!(text, "  state time: {:.6e}", state.t);
        let _ = writeln!(
            text,
            "  residuals:  div {:.3e}, det {:.3e}, curl {:.3e}",
            res.div_v_max, res.det_res_max, res.curl_res_max
        );
    }
    Ok(text)
}
