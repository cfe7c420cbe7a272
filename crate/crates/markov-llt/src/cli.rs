//! Command-line front end: one experiment per invocation.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use markov_llt_core::kernel::REFINE_TOLERANCE;
use markov_llt_core::linalg::RMat;
use markov_llt_core::simulate::DUHAMEL_TOLERANCE;
use markov_llt_core::spectral::{alpha_grid, nonarithmetic_scan, ScanReport, MIN_RELATIVE_GAP};
use markov_llt_core::variance::{
    hessian_corrector, hessian_fd_checked, hessian_green_kubo, sigma_total, SigmaMatrix, PD_THRESHOLD,
};
use markov_llt_core::{GeneratorModel, Observable};

use serde_json::{json, Map, Value};

use crate::config::{load, ExperimentConfig, ExperimentKind, LoadedConfig, Resolved};
use crate::error::{Context, RunError};
use crate::mc::hessian_mc;
use crate::output::{num, vec_cell, write, Meta, Report, Table, Verdict};
use crate::verify::{
    eigprod_check, fastslow_llt_check, llt_check, llt_rho_check, nagaev_check, FastslowReport, LltReport, LltRow,
};

#[derive(Debug, Parser)]
#[command(name = "mllt", version, about = "Local limit theorem numerics for additive functionals of Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct ConfigArg {
    /// Path to the TOML experiment config.
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the generator, print ν and the ergodicity certificate.
    CheckModel(ConfigArg),
    /// Spectral radius of the one-step Fourier operators away from t = 0.
    ScanSpectrum(ConfigArg),
    /// Diffusion matrix with cross-checks of the Hessian routes.
    Sigma(ConfigArg),
    /// Monte Carlo characteristic function against the operator product.
    Nagaev(ConfigArg),
    /// Product of dominant eigenvalues against the Gaussian limit.
    Eigprod(ConfigArg),
    /// Local limit comparison for S_T.
    Llt(ConfigArg),
    /// Local limit comparison for the truncated functional S(ρ, T).
    LltRho(ConfigArg),
    /// Local limit comparison for the rescaled error of a fast–slow system.
    Fastslow(ConfigArg),
    /// Print the plan and effective settings without computing anything.
    Describe {
        config: PathBuf,
        /// Experiment to plan; defaults to the config's `experiment` key.
        #[arg(long, value_enum)]
        experiment: Option<ExperimentKind>,
    },
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<i32, RunError> {
    let (kind, path) = match command {
        Command::Describe { config, experiment } => {
            let loaded = load(&config)?;
            let kind = experiment.or(loaded.config.experiment).ok_or_else(|| {
                RunError::config("describe: name an experiment with --experiment or the config's `experiment` key")
            })?;
            emit(describe(kind, &loaded.config)?);
            return Ok(0);
        }
        Command::CheckModel(a) => (ExperimentKind::CheckModel, a.config),
        Command::ScanSpectrum(a) => (ExperimentKind::ScanSpectrum, a.config),
        Command::Sigma(a) => (ExperimentKind::Sigma, a.config),
        Command::Nagaev(a) => (ExperimentKind::Nagaev, a.config),
        Command::Eigprod(a) => (ExperimentKind::Eigprod, a.config),
        Command::Llt(a) => (ExperimentKind::Llt, a.config),
        Command::LltRho(a) => (ExperimentKind::LltRho, a.config),
        Command::Fastslow(a) => (ExperimentKind::Fastslow, a.config),
    };
    let loaded = load(&path)?;
    let (meta, report) = run(kind, &loaded)?;
    let (csv, summary) = write(&loaded.config.out_dir, &meta, &report)?;
    let mut lines = report.lines.clone();
    lines.push(format!("wrote {} and {}", csv.display(), summary.display()));
    lines.push(format!("{}: {}", kind, report.verdict.as_str()));
    emit(lines);
    Ok(report.verdict.exit_code())
}

/// Prints to stdout, stopping quietly if the reader has gone away.
fn emit(lines: impl IntoIterator<Item = String>) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    for line in lines {
        if writeln!(out, "{line}").is_err() {
            return;
        }
    }
    let _ = out.flush();
}

/// Runs one experiment on the configured thread pool.
pub fn run(kind: ExperimentKind, loaded: &LoadedConfig) -> Result<(Meta, Report), RunError> {
    let cfg = &loaded.config;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| RunError::config(format!("thread pool: {e}")))?;
    let report = pool.install(|| execute(kind, cfg))?;
    let meta = Meta {
        kind,
        config_sha256: loaded.sha256.clone(),
        seed: cfg.seed,
        tolerances: tolerances(cfg),
        thresholds: cfg.thresholds,
        notes: notes(kind),
    };
    Ok((meta, report))
}

fn tolerances(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let n = &cfg.numerics;
    vec![
        ("propagator_steps".into(), n.steps.to_string()),
        ("propagator_method".into(), format!("{:?}", n.method).to_lowercase()),
        ("refine_check".into(), n.refine_check.to_string()),
        ("refine_tolerance".into(), num(REFINE_TOLERANCE)),
        ("min_relative_gap".into(), num(MIN_RELATIVE_GAP)),
        ("scan_tolerance".into(), num(n.scan_tolerance)),
        ("scan_alphas".into(), n.scan_alphas.to_string()),
        ("quadrature_points".into(), n.quadrature_points.to_string()),
        ("fd_step".into(), num(n.fd_step)),
        ("pd_threshold".into(), num(PD_THRESHOLD)),
        ("duhamel_tolerance".into(), num(DUHAMEL_TOLERANCE)),
    ]
}

fn notes(kind: ExperimentKind) -> Vec<String> {
    match kind {
        ExperimentKind::Llt | ExperimentKind::LltRho | ExperimentKind::Fastslow => vec![
            "uniformity over u, f and mu is checked as a maximum over the finite bank only".into(),
        ],
        _ => Vec::new(),
    }
}

fn execute(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let model = cfg.build_model()?;
    match kind {
        ExperimentKind::CheckModel => check_model(cfg, &model),
        ExperimentKind::ScanSpectrum => {
            let b = cfg.build_observable(&model)?;
            let r = cfg.resolve(kind, b.dim())?;
            let scan = scan(cfg, &model, &b, &r)?;
            Ok(scan_report(&scan))
        }
        ExperimentKind::Sigma => sigma(cfg, &model),
        ExperimentKind::Nagaev => nagaev(cfg, &model),
        ExperimentKind::Eigprod => eigprod(cfg, &model),
        ExperimentKind::Llt | ExperimentKind::LltRho => llt(kind, cfg, &model),
        ExperimentKind::Fastslow => fastslow(cfg, &model),
    }
}

fn check_model(cfg: &ExperimentConfig, model: &GeneratorModel) -> Result<Report, RunError> {
    let n = &cfg.numerics;
    let cert = model.ergodicity_certificate(n.certificate_time).during("model::ergodicity_certificate")?;
    let mixing = model.dyadic_mixing_time(n.mixing_target).during("model::dyadic_mixing_time")?;
    let mut table = Table::new(["state", "label", "nu", "exit_rate"]);
    for (x, (label, p)) in model.labels().iter().zip(model.nu()).enumerate() {
        table.push(vec![x.to_string(), label.clone(), num(*p), num(-model.generator()[(x, x)])]);
    }
    let nu: Vec<String> = model.nu().iter().map(|p| format!("{p:.6}")).collect();
    let mut lines = vec![
        format!("states = {}", model.n()),
        format!("nu = ({})", nu.join(", ")),
        format!("certificate(T={}) = {cert:.6}", n.certificate_time),
        format!("dyadic mixing time (target {}) = {mixing}", n.mixing_target),
    ];
    let mut summary = Map::new();
    summary.insert("nu".into(), json!(model.nu()));
    summary.insert("certificate_time".into(), json!(n.certificate_time));
    summary.insert("certificate".into(), json!(cert));
    summary.insert("dyadic_mixing_time".into(), json!(mixing));
    let mut ok = cert < 1.0;
    if cfg.observable.is_some() {
        let b = cfg.build_observable(model)?;
        let span = b.span_check(&alpha_grid(n.scan_alphas)).during("observable::span_check")?;
        let centered = b.is_centered_under(model.nu(), 1e-12).during("observable::center")?;
        lines.push(format!("observable: d = {}, centered = {centered}, spans = {}", b.dim(), span.spans()));
        summary.insert("observable_dim".into(), json!(b.dim()));
        summary.insert("centered".into(), json!(centered));
        summary.insert("spans".into(), json!(span.spans()));
        ok &= span.spans();
    }
    Ok(Report {
        verdict: Verdict::from_bool(ok),
        table,
        summary,
        lines,
    })
}

fn scan(cfg: &ExperimentConfig, model: &GeneratorModel, b: &Observable, r: &Resolved) -> Result<ScanReport, RunError> {
    let n = &cfg.numerics;
    nonarithmetic_scan(model, b, &r.t_grid, &alpha_grid(n.scan_alphas), n.scan_tolerance, &n.propagator())
        .during("spectral::nonarithmetic_scan")
}

fn scan_report(scan: &ScanReport) -> Report {
    let mut table = Table::new(["t", "alpha", "spectral_radius", "verdict"]);
    for row in &scan.sanity {
        let ok = (row.radius - 1.0).abs() <= 1e-8;
        table.push(vec![vec_cell(&row.t), num(row.alpha), num(row.radius), Verdict::from_bool(ok).as_str().into()]);
    }
    for row in &scan.rows {
        let ok = row.radius < 1.0 - scan.tolerance;
        table.push(vec![vec_cell(&row.t), num(row.alpha), num(row.radius), Verdict::from_bool(ok).as_str().into()]);
    }
    let mut summary = Map::new();
    summary.insert("max_radius".into(), json!(scan.max_radius()));
    summary.insert("sanity_ok".into(), json!(scan.sanity_ok()));
    summary.insert("cells".into(), json!(scan.rows.len()));
    Report {
        verdict: Verdict::from_bool(scan.passed()),
        lines: vec![format!(
            "max spectral radius away from t = 0: {} (must be < 1 − {})",
            scan.max_radius(),
            scan.tolerance
        )],
        table,
        summary,
    }
}

fn matrix_json(m: &RMat) -> Value {
    json!((0..m.nrows()).map(|r| m.row(r).to_vec()).collect::<Vec<_>>())
}

fn sigma_json(s: &SigmaMatrix) -> Value {
    json!({
        "cov": matrix_json(&s.cov),
        "factor": matrix_json(&s.factor),
        "det_factor": s.det_factor(),
        "route": s.route.name(),
        "lower": s.lower,
        "upper": s.upper,
    })
}

fn sigma(cfg: &ExperimentConfig, model: &GeneratorModel) -> Result<Report, RunError> {
    let b = cfg.build_observable(model)?;
    let r = cfg.resolve(ExperimentKind::Sigma, b.dim())?;
    let n = &cfg.numerics;
    let th = &cfg.thresholds;
    let prop = n.propagator();
    let s = sigma_total(model, &b, n.quadrature_points).during("variance::sigma_total")?;
    let d = b.dim();
    let mut table = Table::new(["alpha", "j", "k", "green_kubo", "corrector", "finite_difference", "fd_richardson_gap"]);
    let (mut corrector_gap, mut fd_gap, mut max_eig) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for (alpha, gk) in &s.per_alpha {
        let cor = hessian_corrector(model, &b, *alpha).during("variance::hessian_corrector")?;
        let fd = hessian_fd_checked(model, &b, *alpha, n.fd_step, &prop).during("variance::hessian_fd")?;
        corrector_gap = corrector_gap.max(cor.max_abs_diff(gk));
        fd_gap = fd_gap.max(fd.hessian.max_abs_diff(gk));
        max_eig = max_eig.max(largest_eigenvalue(gk)?);
        for j in 0..d {
            for k in 0..d {
                table.push(vec![
                    num(*alpha),
                    j.to_string(),
                    k.to_string(),
                    num(gk[(j, k)]),
                    num(cor[(j, k)]),
                    num(fd.hessian[(j, k)]),
                    num(fd.richardson_gap),
                ]);
            }
        }
    }
    let gk_alpha = hessian_green_kubo(model, &b, r.mc_alpha).during("variance::hessian_green_kubo")?;
    let mut mc_rows = Vec::new();
    let mut mc_ok = true;
    for (ti, &horizon) in r.horizons.iter().enumerate() {
        let est = hessian_mc(model, &b, r.mc_alpha, horizon, r.reps, crate::mc::derive_seed(cfg.seed, ti as u64))
            .during("simulate::hessian_mc")?;
        let mut worst = 0.0f64;
        for j in 0..d {
            for k in 0..d {
                let z = (est.mean[(j, k)] - gk_alpha[(j, k)]).abs() / est.se[(j, k)].max(f64::MIN_POSITIVE);
                worst = worst.max(z);
            }
        }
        mc_ok &= worst <= th.route_mc_se_multiple;
        mc_rows.push(json!({
            "horizon": horizon,
            "alpha": r.mc_alpha,
            "reps": r.reps,
            "mean": matrix_json(&est.mean),
            "se": matrix_json(&est.se),
            "max_z": worst,
        }));
    }
    let routes_ok = corrector_gap <= 1e-8 && fd_gap <= th.route_fd;
    let negative = max_eig <= -1e-6;
    let mut summary = Map::new();
    summary.insert("sigma".into(), sigma_json(&s));
    summary.insert("corrector_vs_green_kubo".into(), json!(corrector_gap));
    summary.insert("fd_vs_green_kubo".into(), json!(fd_gap));
    summary.insert("max_hessian_eigenvalue".into(), json!(max_eig));
    summary.insert("monte_carlo".into(), json!(mc_rows));
    let lines = vec![
        format!("ΣΣ* = {:?}", (0..d).map(|r| s.cov.row(r).to_vec()).collect::<Vec<_>>()),
        format!("max |corrector − Green–Kubo| = {corrector_gap:e}"),
        format!("max |finite difference − Green–Kubo| = {fd_gap:e} (≤ {})", th.route_fd),
        format!("largest per-α Hessian eigenvalue = {max_eig}"),
        format!("Monte Carlo within {}·SE at every horizon: {mc_ok}", th.route_mc_se_multiple),
    ];
    Ok(Report {
        verdict: Verdict::from_bool(routes_ok && negative && mc_ok),
        table,
        summary,
        lines,
    })
}

fn largest_eigenvalue(m: &RMat) -> Result<f64, RunError> {
    let e = markov_llt_core::linalg::symmetric_eigenvalues(m).during("linalg::symmetric_eigenvalues")?;
    Ok(e.last().copied().unwrap_or(f64::NAN))
}

fn nagaev(cfg: &ExperimentConfig, model: &GeneratorModel) -> Result<Report, RunError> {
    let b = cfg.build_observable(model)?;
    let r = cfg.resolve(ExperimentKind::Nagaev, b.dim())?;
    let bank = cfg.build_bank(model, b.dim())?;
    let th = &cfg.thresholds;
    let rep = nagaev_check(model, &b, &r.t_grid, &r.horizons, &bank, r.reps, cfg.seed, &cfg.numerics.propagator(), th)
        .during("verify::nagaev_check")?;
    let mut table = Table::new([
        "t", "horizon", "f", "mu", "mc_re", "mc_im", "se", "exact_re", "exact_im", "deviation", "bound", "verdict",
    ]);
    for row in &rep.rows {
        table.push(vec![
            vec_cell(&row.t),
            num(row.horizon),
            row.f.clone(),
            row.mu.clone(),
            num(row.mc.re),
            num(row.mc.im),
            num(row.se),
            num(row.exact.re),
            num(row.exact.im),
            num(row.deviation),
            num(row.bound),
            Verdict::from_bool(row.passed()).as_str().into(),
        ]);
    }
    let failing = rep.rows.iter().filter(|r| !r.passed()).count();
    let worst = rep.rows.iter().map(|r| r.deviation / r.bound).fold(0.0, f64::max);
    let mut summary = Map::new();
    summary.insert("reps".into(), json!(rep.reps));
    summary.insert("cells".into(), json!(rep.rows.len()));
    summary.insert("failing_cells".into(), json!(failing));
    summary.insert("worst_deviation_over_bound".into(), json!(worst));
    Ok(Report {
        verdict: Verdict::from_bool(rep.passed()),
        lines: vec![format!("{} cells, {failing} failing, worst deviation/bound = {worst:.4}", rep.rows.len())],
        table,
        summary,
    })
}

fn eigprod(cfg: &ExperimentConfig, model: &GeneratorModel) -> Result<Report, RunError> {
    let b = cfg.build_observable(model)?;
    let r = cfg.resolve(ExperimentKind::Eigprod, b.dim())?;
    let th = &cfg.thresholds;
    let s = sigma_total(model, &b, cfg.numerics.quadrature_points).during("variance::sigma_total")?;
    let rep = eigprod_check(model, &b, &s, &r.tau_grid, &r.horizons, &cfg.numerics.propagator(), th)
        .during("verify::eigprod_check")?;
    let mut table = Table::new(["tau", "horizon", "product_re", "product_im", "gaussian", "deviation"]);
    for row in &rep.rows {
        table.push(vec![
            vec_cell(&row.tau),
            num(row.horizon),
            num(row.product.re),
            num(row.product.im),
            num(row.gaussian),
            num(row.deviation),
        ]);
    }
    let mut summary = Map::new();
    summary.insert("sigma".into(), sigma_json(&s));
    summary.insert("max_deviation_at_largest".into(), json!(rep.max_deviation_at_largest));
    summary.insert("monotone".into(), json!(rep.monotone));
    Ok(Report {
        verdict: Verdict::from_bool(rep.passed(th)),
        lines: vec![format!(
            "max deviation at largest T = {:e} (≤ {}), monotone = {}",
            rep.max_deviation_at_largest, th.eigprod_max, rep.monotone
        )],
        table,
        summary,
    })
}

fn llt_table() -> Table {
    Table::new(["rho", "horizon", "u", "f", "g", "mu", "lhs", "se", "rhs", "deviation"])
}

fn push_llt_rows(table: &mut Table, rows: &[LltRow]) {
    for row in rows {
        table.push(vec![
            num(row.rho),
            num(row.horizon),
            vec_cell(&row.u),
            row.f.clone(),
            row.g.clone(),
            row.mu.clone(),
            num(row.lhs),
            num(row.se),
            num(row.rhs),
            num(row.deviation),
        ]);
    }
}

fn llt_json(rep: &LltReport) -> Value {
    json!({
        "reps": rep.reps,
        "sups": rep.sups.iter().map(|s| json!({"horizon": s.horizon, "sup": s.sup, "max_se": s.max_se})).collect::<Vec<_>>(),
        "sup_at_largest": rep.sup_at_largest(),
    })
}

fn llt(kind: ExperimentKind, cfg: &ExperimentConfig, model: &GeneratorModel) -> Result<Report, RunError> {
    let b = cfg.build_observable(model)?;
    let d = b.dim();
    // The scan guards the Monte Carlo spend.
    let scan_grid = cfg.resolve(ExperimentKind::ScanSpectrum, d)?;
    let sc = scan(cfg, model, &b, &scan_grid)?;
    if !sc.passed() {
        let mut report = scan_report(&sc);
        report.lines.push("non-arithmetic scan failed; Monte Carlo skipped".into());
        report.summary.insert("stage".into(), json!("scan"));
        return Ok(report);
    }
    let r = cfg.resolve(kind, d)?;
    let bank = cfg.build_bank(model, d)?;
    let th = &cfg.thresholds;
    let mut table = llt_table();
    let mut summary = Map::new();
    summary.insert("scan_max_radius".into(), json!(sc.max_radius()));
    let mut lines = Vec::new();
    let passed = if kind == ExperimentKind::Llt {
        let s = sigma_total(model, &b, cfg.numerics.quadrature_points).during("variance::sigma_total")?;
        let rep = llt_check(model, &b, &s, &bank, &r.horizons, r.reps, cfg.seed).during("verify::llt_check")?;
        push_llt_rows(&mut table, &rep.rows);
        summary.insert("sigma".into(), sigma_json(&s));
        summary.insert("llt".into(), llt_json(&rep));
        lines.push(format!(
            "sup deviation at largest T = {:.4} (≤ {}), improves = {}",
            rep.sup_at_largest(),
            th.llt_sup,
            rep.improves(th)
        ));
        rep.passed(th)
    } else {
        let rep = llt_rho_check(model, &b, &r.rho, cfg.numerics.quadrature_points, &bank, &r.horizons, r.reps, cfg.seed)
            .during("verify::llt_rho_check")?;
        let mut cells = Vec::new();
        for c in &rep.cells {
            push_llt_rows(&mut table, &c.report.rows);
            lines.push(format!(
                "ρ = {}: sup deviation at largest T = {:.4}, improves = {}",
                c.rho,
                c.report.sup_at_largest(),
                c.report.improves(th)
            ));
            cells.push(json!({"rho": c.rho, "sigma": sigma_json(&c.sigma), "llt": llt_json(&c.report)}));
        }
        lines.push(format!("Σ_ρ continuous on the grid: {}", rep.continuous(th)));
        summary.insert("cells".into(), json!(cells));
        summary.insert("lipschitz".into(), json!(rep.lipschitz));
        summary.insert("jumps".into(), json!(rep.jumps));
        summary.insert("continuous".into(), json!(rep.continuous(th)));
        rep.passed(th)
    };
    Ok(Report {
        verdict: Verdict::from_bool(passed),
        table,
        summary,
        lines,
    })
}

fn fastslow(cfg: &ExperimentConfig, model: &GeneratorModel) -> Result<Report, RunError> {
    let (system, y0, eps) = cfg.build_fastslow(model)?;
    let d = system.dim();
    let r = cfg.resolve(ExperimentKind::Fastslow, d)?;
    let bank = cfg.build_bank(model, d)?;
    let th = &cfg.thresholds;
    let rep = fastslow_llt_check(&system, &eps, &y0, cfg.numerics.quadrature_points, &bank, r.reps, cfg.seed)
        .during("verify::fastslow_llt_check")?;
    let mut table = llt_table();
    let mut summary = Map::new();
    let mut lines = Vec::new();
    let verdict = match &rep {
        FastslowReport::NotApplicable => {
            lines.push("forcing does not depend on the fast state; the rescaled error vanishes".into());
            Verdict::NotApplicable
        }
        FastslowReport::Cells(cells) => {
            let mut out = Vec::new();
            for c in cells {
                push_llt_rows(&mut table, &c.report.rows);
                lines.push(format!(
                    "ε = {}: sup deviation = {:.4} (≤ {}), max Duhamel residual = {:e}",
                    c.eps,
                    c.report.sup_at_largest(),
                    th.llt_sup,
                    c.max_duhamel_residual
                ));
                out.push(json!({
                    "eps": c.eps,
                    "horizon": c.horizon,
                    "sigma": sigma_json(&c.sigma),
                    "max_duhamel_residual": c.max_duhamel_residual,
                    "llt": llt_json(&c.report),
                }));
            }
            summary.insert("cells".into(), json!(out));
            Verdict::from_bool(rep.passed(th))
        }
    };
    Ok(Report {
        verdict,
        table,
        summary,
        lines,
    })
}

/// The dry-run plan: operations in order, cost estimates, effective settings.
pub fn describe(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Vec<String>, RunError> {
    let model = cfg.build_model()?;
    let d = match kind {
        ExperimentKind::Fastslow => cfg.build_fastslow(&model)?.0.dim(),
        ExperimentKind::CheckModel if cfg.observable.is_none() => 1,
        _ => cfg.build_observable(&model)?.dim(),
    };
    let r = cfg.resolve(kind, d)?;
    let bank = cfg.build_bank(&model, d)?;
    let n = &cfg.numerics;
    let scan_grid = cfg.resolve(ExperimentKind::ScanSpectrum, d)?;
    let mean_exit: f64 = (0..model.n()).map(|x| -model.generator()[(x, x)] * model.nu()[x]).sum();
    let floor_sum: f64 = r.horizons.iter().map(|h| h.ceil()).sum();
    let mut plan = vec![format!("experiment: {kind}"), "operations:".to_string()];
    let mut step = |s: String| plan.push(format!("  - {s}"));
    let mc_budget = |paths: f64, time: f64| {
        format!("{paths:.0} paths, {:.3e} path-seconds, ≈{:.3e} jumps", paths * time, paths * time * mean_exit)
    };
    step("model::validate_generator, model::invariant_measure".into());
    match kind {
        ExperimentKind::CheckModel => {
            step(format!("model::ergodicity_certificate at 𝒯 = {}", n.certificate_time));
            step(format!("model::dyadic_mixing_time to target {}", n.mixing_target));
        }
        ExperimentKind::ScanSpectrum => {
            step(format!("spectral::nonarithmetic_scan: {} t × {} α eigenvalue problems", r.t_grid.len() + 1, n.scan_alphas));
        }
        ExperimentKind::Sigma => {
            step(format!("variance::sigma_total: {} Green–Kubo solves", n.quadrature_points));
            step(format!("variance::hessian_corrector, variance::hessian_fd at the {} nodes", n.quadrature_points));
            let time: f64 = r.horizons.iter().sum();
            step(format!("simulate::hessian_mc at α = {}: {}", r.mc_alpha, mc_budget(r.reps as f64, time)));
        }
        ExperimentKind::Nagaev => {
            step(format!("kernel::unit_factors: {} t × {floor_sum} operator builds", r.t_grid.len()));
            let time: f64 = r.horizons.iter().sum::<f64>() * bank.mu.len() as f64;
            step(format!("simulate: {}", mc_budget(r.reps as f64, time)));
        }
        ExperimentKind::Eigprod => {
            step(format!("variance::sigma_total: {} Green–Kubo solves", n.quadrature_points));
            step(format!("spectral::eigenvalue_product: {} τ × {floor_sum} dominant decompositions", r.tau_grid.len()));
        }
        ExperimentKind::Llt | ExperimentKind::LltRho => {
            step(format!("spectral::nonarithmetic_scan (guard): {} t × {} α", scan_grid.t_grid.len() + 1, n.scan_alphas));
            let cells = if kind == ExperimentKind::Llt { 1 } else { r.rho.len() };
            step(format!("variance::sigma_total: {cells} × {} Green–Kubo solves", n.quadrature_points));
            let paths = r.reps as f64 * (cells * r.horizons.len() * bank.mu.len()) as f64;
            let mean_t = r.horizons.iter().sum::<f64>() / r.horizons.len().max(1) as f64;
            step(format!("simulate: {}", mc_budget(paths, mean_t)));
            step(format!(
                "verify: {} bank rows per cell",
                bank.u_scales.len() * bank.g.len() * bank.f.len() * bank.mu.len()
            ));
        }
        ExperimentKind::Fastslow => {
            let spec = cfg.fastslow.as_ref().expect("checked by build_fastslow");
            step(format!("simulate::FastSlowSystem::duhamel_observable, variance::sigma_total: {} solves", n.quadrature_points));
            for e in &spec.eps {
                step(format!("simulate::fastslow_run at ε = {e}: {}", mc_budget(r.reps as f64, spec.t_final / e)));
            }
        }
    }
    plan.push("effective settings:".into());
    plan.push(format!("  seed = {}", cfg.seed));
    plan.push(format!("  threads = {}", if cfg.threads == 0 { "all cores".to_string() } else { cfg.threads.to_string() }));
    plan.push(format!("  out_dir = {}", cfg.out_dir.display()));
    for (k, v) in tolerances(cfg) {
        plan.push(format!("  {k} = {v}"));
    }
    plan.push(format!("  reps = {}", r.reps));
    plan.push(format!("  horizons = {:?}", r.horizons));
    plan.push(format!("  t_grid = {:?}", r.t_grid));
    plan.push(format!("  tau_grid = {:?}", r.tau_grid));
    plan.push(format!("  rho = {:?}", r.rho));
    plan.push(format!("  f = {:?}", bank.f.iter().map(|f| &f.name).collect::<Vec<_>>()));
    plan.push(format!("  g = {:?}", bank.g.iter().map(|g| g.name()).collect::<Vec<_>>()));
    plan.push(format!("  mu = {:?}", bank.mu.iter().map(|m| &m.name).collect::<Vec<_>>()));
    plan.push(format!("  u_scales = {:?}", bank.u_scales));
    plan.push(format!("  thresholds = {:?}", cfg.thresholds));
    Ok(plan)
}
