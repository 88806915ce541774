//! Command-line front end: wires JSON study configs to the simulation and
//! study harness and writes report artifacts with fixed names into an
//! output directory.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! study runs but fails its acceptance checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use reflect_core::bounds::{local_time_bound, local_time_bound_convex, BoundValue};
use reflect_core::geometry::{
    certify_condition_a, certify_condition_b, CertStatus, R0_INFINITE,
};
use reflect_core::harness::{
    bound_validation_study, moment_growth_study, strong_error_study, levels_csv,
    render_plot_svg, BoundConstants, StudyConfig, StudyStatus,
};
use reflect_core::paths::{sample_brownian, TimeGrid};
use reflect_core::sde::{solve_euler, solve_wong_zakai, Coefficients, Scheme};
use reflect_core::skorokhod::{verify, VerifyStatus, VerifyTolerances};

#[derive(Parser)]
#[command(
    name = "reflect-sim",
    about = "Simulation and convergence studies for reflecting diffusions",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON study configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if absent).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap; falls back to REFLECT_SIM_WORKERS, then to the
    /// machine default. Results never depend on this value.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as CSV.
    Simulate(RunArgs),
    /// Run a coupled strong-error convergence study.
    Converge(RunArgs),
    /// Evaluate a closed-form local-time bound from flags.
    Bounds(BoundArgs),
    /// Certify the reflection conditions for the configured domain.
    CheckDomain(RunArgs),
    /// Run the moment-growth study over dyadic windows.
    Moments(RunArgs),
    /// Verify Skorohod properties of simulated paths, and the local-time
    /// bound when the config supplies its constants.
    Verify(RunArgs),
}

#[derive(Args)]
struct BoundArgs {
    /// Direction quality constant (common-direction bound).
    #[arg(long)]
    beta: Option<f64>,
    /// Direction ball radius (common-direction bound).
    #[arg(long)]
    delta: Option<f64>,
    /// Exterior sphere radius; omit for flat (convex-like) boundaries.
    #[arg(long)]
    r0: Option<f64>,
    /// Variation exponent of the driver control.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Control value of the driver over the window.
    #[arg(long)]
    omega: f64,
    /// Driver oscillation over the window.
    #[arg(long = "sup-osc")]
    sup_osc: f64,
    /// Global driver oscillation entering the geometry factor; defaults
    /// to 0, the factor's smallest value.
    #[arg(long = "sup-w", default_value_t = 0.0)]
    sup_w: f64,
    /// Inscribed ball radius (convex bound; switches the formula).
    #[arg(long = "inner-radius")]
    inner_radius: Option<f64>,
    /// Largest distance of the solution from the ball center (convex bound).
    #[arg(long = "sup-xi", default_value_t = 0.0)]
    sup_xi: f64,
}

/// Top-level config file schema. Unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CliConfig {
    version: u32,
    study: StudyConfig,
    /// Random windows per path for bound validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    windows: Option<usize>,
    /// Constants for the local-time bound check run by `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bound: Option<BoundConstants>,
    /// Probe radius for the condition-(B) certificate in `check-domain`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    /// Exterior sphere radius asserted in `check-domain`; omit to use the
    /// domain's analytic value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
}

enum CliError {
    Usage(String),
    Study(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Study(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Study(m) => m,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => with_config(a, cmd_simulate),
        Command::Converge(a) => with_config(a, cmd_converge),
        Command::Bounds(a) => cmd_bounds(&a),
        Command::CheckDomain(a) => with_config(a, cmd_check_domain),
        Command::Moments(a) => with_config(a, cmd_moments),
        Command::Verify(a) => with_config(a, cmd_verify),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn with_config(
    args: RunArgs,
    run: fn(&CliConfig, &Path) -> Result<String, CliError>,
) -> Result<String, CliError> {
    init_workers(&args)?;
    let raw = fs::read_to_string(&args.config)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg: CliConfig = serde_json::from_str(&raw)
        .map_err(|e| usage(format!("invalid config {}: {e}", args.config.display())))?;
    if cfg.version != 1 {
        return Err(usage(format!(
            "unsupported config version {} (expected 1)",
            cfg.version
        )));
    }
    if let Some(seed) = args.seed {
        cfg.study.seed = seed;
    }
    fs::create_dir_all(&args.out)
        .map_err(|e| usage(format!("cannot create {}: {e}", args.out.display())))?;
    write_json(&args.out.join("config.echo.json"), &cfg)?;
    run(&cfg, &args.out)
}

fn init_workers(args: &RunArgs) -> Result<(), CliError> {
    let workers = match args.workers {
        Some(n) => Some(n),
        None => match std::env::var("REFLECT_SIM_WORKERS") {
            Ok(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| usage(format!("REFLECT_SIM_WORKERS={v} is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = workers {
        if n == 0 {
            return Err(usage("worker count must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("cannot configure workers: {e}")))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| usage(format!("cannot serialize {}: {e}", path.display())))?;
    body.push('\n');
    fs::write(path, body).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_simulate(cfg: &CliConfig, out: &Path) -> Result<String, CliError> {
    let study = &cfg.study;
    study.validate().map_err(usage)?;
    let coeff = Coefficients::new(study.coefficients.clone()).map_err(usage)?;
    let level = *study.levels.last().unwrap();
    let grid = TimeGrid::new(study.horizon, level).map_err(usage)?;
    let b = sample_brownian(coeff.noise_dim(), grid, study.seed, 0).map_err(usage)?;
    let traj = match study.scheme {
        Scheme::WongZakai => solve_wong_zakai(
            &study.domain,
            &coeff,
            &b,
            level,
            study.substeps,
            &study.x0,
            false,
        ),
        Scheme::Euler => solve_euler(&study.domain, &coeff, &b, level, &study.x0, false),
    }
    .map_err(|e| CliError::Study(e.to_string()))?;
    write_text(&out.join("trajectory.csv"), &traj.to_csv())?;
    #[derive(Serialize)]
    struct Summary<'a> {
        scheme: Scheme,
        level: usize,
        final_state: &'a [f64],
        local_time_total: f64,
        driver_variation: f64,
    }
    write_json(
        &out.join("report.json"),
        &Summary {
            scheme: traj.scheme,
            level: traj.level,
            final_state: traj.x.node(level),
            local_time_total: *traj.tv.last().unwrap(),
            driver_variation: *traj.driver_tv.last().unwrap(),
        },
    )?;
    Ok(format!(
        "simulate: level {level}, local time {:.6}, artifacts in {}",
        traj.tv.last().unwrap(),
        out.display()
    ))
}

fn cmd_converge(cfg: &CliConfig, out: &Path) -> Result<String, CliError> {
    let report = strong_error_study(&cfg.study).map_err(usage)?;
    write_json(&out.join("report.json"), &report)?;
    write_text(&out.join("levels.csv"), &levels_csv(&report))?;
    write_text(&out.join("plot.svg"), &render_plot_svg(&report))?;
    let slope = report
        .pt_fit
        .map(|f| format!("{:.4}", f.slope))
        .unwrap_or_else(|| "n/a".into());
    let line = format!(
        "converge: {} levels, pointwise slope {slope}, status {:?}",
        report.levels.len(),
        report.status
    );
    if report.status == StudyStatus::Fail {
        eprintln!("{line}");
        for f in &report.failures {
            eprintln!("  {f}");
        }
        return Err(CliError::Study("convergence study failed".into()));
    }
    Ok(line)
}

fn cmd_bounds(args: &BoundArgs) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Out {
        kind: &'static str,
        value: f64,
        overflow: bool,
    }
    let (kind, b): (&'static str, BoundValue) = if let Some(r) = args.inner_radius {
        if !(r > 0.0) {
            return Err(usage("--inner-radius must be positive"));
        }
        (
            "convex",
            local_time_bound_convex(r, args.q, args.omega, args.sup_xi, args.sup_osc),
        )
    } else {
        let beta = args
            .beta
            .ok_or_else(|| usage("--beta is required without --inner-radius"))?;
        let delta = args
            .delta
            .ok_or_else(|| usage("--delta is required without --inner-radius"))?;
        if !(beta >= 1.0) || !(delta > 0.0) {
            return Err(usage("need --beta >= 1 and --delta > 0"));
        }
        (
            "common_direction",
            local_time_bound(
                beta,
                delta,
                args.r0.unwrap_or(R0_INFINITE),
                args.q,
                args.omega,
                args.sup_w,
                args.sup_osc,
            ),
        )
    };
    serde_json::to_string(&Out {
        kind,
        value: b.value,
        overflow: b.overflow,
    })
    .map_err(|e| usage(e))
}

fn cmd_check_domain(cfg: &CliConfig, out: &Path) -> Result<String, CliError> {
    let domain = &cfg.study.domain;
    domain.validate().map_err(usage)?;
    let r0 = cfg.r0.unwrap_or_else(|| domain.exterior_sphere_radius());
    let cert_a = certify_condition_a(domain, 512, r0).map_err(usage)?;
    // conservative default: large probe radii mix normals of distant
    // boundary patches and fail bounded domains spuriously
    let delta = cfg.delta.unwrap_or_else(|| domain.length_scale() / 8.0);
    let cert_b = certify_condition_b(domain, delta, 256).map_err(usage)?;
    #[derive(Serialize)]
    struct Out<'a> {
        dimension: usize,
        convex: bool,
        exterior_radius: Option<f64>,
        condition_a: &'a reflect_core::geometry::ConditionACertificate,
        condition_b: &'a reflect_core::geometry::ConditionBCertificate,
    }
    write_json(
        &out.join("report.json"),
        &Out {
            dimension: domain.dimension(),
            convex: domain.is_convex(),
            exterior_radius: Some(domain.exterior_sphere_radius()).filter(|r| r.is_finite()),
            condition_a: &cert_a,
            condition_b: &cert_b,
        },
    )?;
    let ok = cert_a.status == CertStatus::Certified && cert_b.status == CertStatus::Certified;
    let line = format!(
        "check-domain: condition A {:?}, condition B {:?} (beta {:.4} at delta {delta})",
        cert_a.status, cert_b.status, cert_b.beta
    );
    if ok {
        Ok(line)
    } else {
        eprintln!("{line}");
        Err(CliError::Study("domain certification failed".into()))
    }
}

fn cmd_moments(cfg: &CliConfig, out: &Path) -> Result<String, CliError> {
    let report = moment_growth_study(&cfg.study).map_err(usage)?;
    write_json(&out.join("report.json"), &report)?;
    let slope = report
        .increment_fit
        .map(|f| format!("{:.4}", f.slope))
        .unwrap_or_else(|| "n/a".into());
    let line = format!("moments: increment slope {slope}, status {:?}", report.status);
    if report.status == StudyStatus::Fail {
        eprintln!("{line}");
        for f in &report.failures {
            eprintln!("  {f}");
        }
        return Err(CliError::Study("moment study failed".into()));
    }
    Ok(line)
}

fn cmd_verify(cfg: &CliConfig, out: &Path) -> Result<String, CliError> {
    let study = &cfg.study;
    study.validate().map_err(usage)?;
    let coeff = Coefficients::new(study.coefficients.clone()).map_err(usage)?;
    let level = *study.levels.last().unwrap();
    let grid = TimeGrid::new(study.horizon, level).map_err(usage)?;
    let checked = study.paths.min(20);
    let mut failures = 0usize;
    let mut reports = Vec::with_capacity(checked);
    for p in 0..checked {
        let b =
            sample_brownian(coeff.noise_dim(), grid, study.seed, p as u64).map_err(usage)?;
        let traj = match study.scheme {
            Scheme::WongZakai => solve_wong_zakai(
                &study.domain,
                &coeff,
                &b,
                level,
                study.substeps,
                &study.x0,
                true,
            ),
            Scheme::Euler => solve_euler(&study.domain, &coeff, &b, level, &study.x0, true),
        }
        .map_err(|e| CliError::Study(e.to_string()))?;
        let sol = traj.full.as_ref().expect("full solution requested");
        let report = verify(&study.domain, &sol.driver, sol, VerifyTolerances::default())
            .map_err(|e| CliError::Study(e.to_string()))?;
        if report.status != VerifyStatus::Pass {
            failures += 1;
        }
        reports.push(report);
    }
    let bound_report = match (&cfg.bound, cfg.windows) {
        (Some(constants), windows) => Some(
            bound_validation_study(study, windows.unwrap_or(50), constants)
                .map_err(|e| CliError::Study(e.to_string()))?,
        ),
        (None, _) => None,
    };
    let bound_fail = bound_report
        .as_ref()
        .is_some_and(|r| r.status == StudyStatus::Fail);
    #[derive(Serialize)]
    struct Out<'a> {
        paths_checked: usize,
        verification_failures: usize,
        verifications: &'a [reflect_core::skorokhod::VerificationReport],
        #[serde(skip_serializing_if = "Option::is_none")]
        bound_validation: &'a Option<reflect_core::harness::BoundValidationReport>,
    }
    write_json(
        &out.join("report.json"),
        &Out {
            paths_checked: checked,
            verification_failures: failures,
            verifications: &reports,
            bound_validation: &bound_report,
        },
    )?;
    let mut line = format!("verify: {checked} paths, {failures} failures");
    if let Some(r) = &bound_report {
        line.push_str(&format!(
            ", bound windows {} violations {} worst ratio {:.4}",
            r.windows, r.violations, r.worst_ratio
        ));
    }
    if failures > 0 || bound_fail {
        eprintln!("{line}");
        return Err(CliError::Study("verification failed".into()));
    }
    Ok(line)
}
