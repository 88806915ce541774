//! Monte Carlo study harness: coupled strong-error convergence studies,
//! empirical validation of the local-time bounds, moment-growth checks,
//! and log-log slope fitting. Paths are processed in parallel but
//! aggregated in path order, so results never depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{local_time_bound, local_time_bound_convex};
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, R0_INFINITE};
use crate::paths::{refine_to, sample_brownian, sup_oscillation, SampledPath, TimeGrid};
use crate::rng::{stream, CounterRng};
use crate::sde::{
    solve_euler, solve_reference, solve_wong_zakai, CoefficientKind, Coefficients, Scheme,
    TrajectoryPair,
};
use crate::vecmath as vm;

/// Pass floors applied to a convergence report. All checks are optional;
/// a slope floor passes when `slope >= floor - slope_se`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorFloors {
    pub pt_slope: Option<f64>,
    pub sup_slope: Option<f64>,
    /// Require e_sup strictly decreasing across levels.
    pub sup_monotone: bool,
    /// Require e_sup(last) < ratio * e_sup(first).
    pub sup_final_ratio: Option<f64>,
}

/// Full description of a Monte Carlo study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub domain: DomainSpec,
    pub coefficients: CoefficientKind,
    pub x0: Vec<f64>,
    pub horizon: f64,
    /// Study grid sizes, strictly increasing powers of two.
    pub levels: Vec<usize>,
    pub reference_level: usize,
    /// Monte Carlo path count.
    pub paths: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub floors: ErrorFloors,
}

fn default_substeps() -> usize {
    16
}

fn default_scheme() -> Scheme {
    Scheme::WongZakai
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidConfig("no study levels".into()));
        }
        for w in self.levels.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidConfig(
                    "study levels must be strictly increasing".into(),
                ));
            }
        }
        for &n in &self.levels {
            if !n.is_power_of_two() {
                return Err(Error::InvalidConfig(format!(
                    "study level {n} is not a power of two"
                )));
            }
        }
        if self.paths < 100 {
            return Err(Error::InvalidConfig("need at least 100 paths".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidConfig("substeps must be >= 1".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if self.x0.len() != self.domain.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.domain.dimension(),
                got: self.x0.len(),
            });
        }
        Ok(())
    }

    /// Additional constraints that only matter when a reference solve is
    /// involved: every level must divide the reference level, which must be
    /// at least 8x the largest study level.
    pub fn validate_reference(&self) -> Result<()> {
        self.validate()?;
        for &n in &self.levels {
            if self.reference_level % n != 0 {
                return Err(Error::InvalidConfig(format!(
                    "study level {n} does not divide the reference level {}",
                    self.reference_level
                )));
            }
        }
        let max = *self.levels.last().unwrap();
        if self.reference_level < 8 * max {
            return Err(Error::InvalidConfig(format!(
                "reference level {} must be >= 8x the largest study level {max}",
                self.reference_level
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyStatus {
    Pass,
    Fail,
}

/// Ordinary least squares fit of `log e` against `log delta`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
}

/// Per-level strong errors. `e_pt` is the largest node-wise mean squared
/// gap to the reference; `e_sup` is the mean of the path-wise largest gap.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelErrors {
    pub level: usize,
    pub delta: f64,
    pub e_pt: f64,
    pub se_pt: f64,
    pub e_sup: f64,
    pub se_sup: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub levels: Vec<LevelErrors>,
    /// Present only with at least 3 levels and strictly positive errors.
    pub pt_fit: Option<SlopeFit>,
    pub sup_fit: Option<SlopeFit>,
    pub paths_run: usize,
    pub paths_aborted: usize,
    pub status: StudyStatus,
    pub failures: Vec<String>,
}

/// Least squares on `(log delta, log e)`. Needs at least 3 strictly
/// positive points; `slope_se` is the usual OLS standard error (0 for an
/// exact power law).
pub fn fit_loglog_slope(deltas: &[f64], errors: &[f64]) -> Result<SlopeFit> {
    if deltas.len() != errors.len() || deltas.len() < 3 {
        return Err(Error::InvalidArgument(
            "slope fit needs at least 3 matched points".into(),
        ));
    }
    if deltas.iter().chain(errors).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "slope fit needs strictly positive inputs".into(),
        ));
    }
    let n = deltas.len() as f64;
    let xs: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let slope_se = if deltas.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        slope_se,
    })
}

struct PathOutcome {
    /// Squared node gaps per study level, indexed `[level][node]`.
    node_d2: Vec<Vec<f64>>,
    /// Largest squared node gap per study level.
    maxes: Vec<f64>,
}

fn solve_level(
    cfg: &StudyConfig,
    coeff: &Coefficients,
    fine: &SampledPath,
    level: usize,
) -> Result<TrajectoryPair> {
    match cfg.scheme {
        Scheme::WongZakai => {
            solve_wong_zakai(&cfg.domain, coeff, fine, level, cfg.substeps, &cfg.x0, false)
        }
        Scheme::Euler => solve_euler(&cfg.domain, coeff, fine, level, &cfg.x0, false),
    }
}

/// Coupled strong-error study: each Monte Carlo path is sampled on the
/// coarsest grid, bridge-refined to the reference grid, solved once at the
/// reference level and once per study level, and compared node by node.
pub fn strong_error_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate_reference()?;
    let coeff = Coefficients::new(cfg.coefficients.clone())?;
    let base_grid = TimeGrid::new(cfg.horizon, cfg.levels[0])?;
    let max_level = *cfg.levels.last().unwrap();

    let outcomes: Vec<Result<PathOutcome>> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| -> Result<PathOutcome> {
            let base = sample_brownian(coeff.noise_dim(), base_grid, cfg.seed, p as u64)?;
            let fine = refine_to(&base, cfg.reference_level, cfg.seed, p as u64)?;
            let reference =
                solve_reference(&cfg.domain, &coeff, &fine, cfg.substeps, &cfg.x0, max_level)?;
            let mut node_d2 = Vec::with_capacity(cfg.levels.len());
            let mut maxes = Vec::with_capacity(cfg.levels.len());
            for &level in &cfg.levels {
                let traj = solve_level(cfg, &coeff, &fine, level)?;
                let ratio = cfg.reference_level / level;
                let mut d2 = Vec::with_capacity(level + 1);
                let mut mx = 0.0f64;
                for k in 0..=level {
                    let g = vm::dist(traj.x.node(k), reference.x.node(k * ratio));
                    let v = g * g;
                    d2.push(v);
                    mx = mx.max(v);
                }
                node_d2.push(d2);
                maxes.push(mx);
            }
            Ok(PathOutcome { node_d2, maxes })
        })
        .collect();

    // in-order sequential reduction keeps the report worker-count invariant
    let nl = cfg.levels.len();
    let mut sum_d2: Vec<Vec<f64>> = cfg.levels.iter().map(|&n| vec![0.0; n + 1]).collect();
    let mut sumsq_d2: Vec<Vec<f64>> = cfg.levels.iter().map(|&n| vec![0.0; n + 1]).collect();
    let mut sum_max = vec![0.0; nl];
    let mut sumsq_max = vec![0.0; nl];
    let mut completed = 0usize;
    let mut aborted = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                completed += 1;
                for l in 0..nl {
                    for (k, &v) in o.node_d2[l].iter().enumerate() {
                        sum_d2[l][k] += v;
                        sumsq_d2[l][k] += v * v;
                    }
                    sum_max[l] += o.maxes[l];
                    sumsq_max[l] += o.maxes[l] * o.maxes[l];
                }
            }
            Err(_) => aborted += 1,
        }
    }
    let mut failures = Vec::new();
    if completed == 0 {
        return Err(Error::InvalidConfig("every path aborted".into()));
    }
    let abort_rate = aborted as f64 / cfg.paths as f64;
    if abort_rate > 0.01 {
        failures.push(format!(
            "{aborted} of {} paths aborted (> 1% tolerance)",
            cfg.paths
        ));
    }

    let m = completed as f64;
    let se_of = |sum: f64, sumsq: f64| -> f64 {
        if completed < 2 {
            return 0.0;
        }
        let mean = sum / m;
        let var = ((sumsq - m * mean * mean) / (m - 1.0)).max(0.0);
        (var / m).sqrt()
    };
    let mut levels = Vec::with_capacity(nl);
    for (l, &n) in cfg.levels.iter().enumerate() {
        // pointwise error: largest node mean; its SE is taken at that node
        let mut e_pt = 0.0;
        let mut se_pt = 0.0;
        for k in 0..=n {
            let mean = sum_d2[l][k] / m;
            if mean > e_pt {
                e_pt = mean;
                se_pt = se_of(sum_d2[l][k], sumsq_d2[l][k]);
            }
        }
        levels.push(LevelErrors {
            level: n,
            delta: cfg.horizon / n as f64,
            e_pt,
            se_pt,
            e_sup: sum_max[l] / m,
            se_sup: se_of(sum_max[l], sumsq_max[l]),
        });
    }

    let deltas: Vec<f64> = levels.iter().map(|r| r.delta).collect();
    let pts: Vec<f64> = levels.iter().map(|r| r.e_pt).collect();
    let sups: Vec<f64> = levels.iter().map(|r| r.e_sup).collect();
    let fit_if_valid = |errs: &[f64]| -> Option<SlopeFit> {
        if errs.len() >= 3 && errs.iter().all(|&e| e > 0.0) {
            fit_loglog_slope(&deltas, errs).ok()
        } else {
            None
        }
    };
    let pt_fit = fit_if_valid(&pts);
    let sup_fit = fit_if_valid(&sups);

    apply_floors(&cfg.floors, &levels, &pt_fit, &sup_fit, &mut failures);
    let status = if failures.is_empty() {
        StudyStatus::Pass
    } else {
        StudyStatus::Fail
    };
    Ok(ConvergenceReport {
        config: cfg.clone(),
        levels,
        pt_fit,
        sup_fit,
        paths_run: completed,
        paths_aborted: aborted,
        status,
        failures,
    })
}

fn apply_floors(
    floors: &ErrorFloors,
    levels: &[LevelErrors],
    pt_fit: &Option<SlopeFit>,
    sup_fit: &Option<SlopeFit>,
    failures: &mut Vec<String>,
) {
    // slopes are fitted on log delta, where delta shrinks as errors shrink,
    // so a positive decay rate appears as a positive slope
    if let Some(floor) = floors.pt_slope {
        match pt_fit {
            Some(f) if f.slope >= floor - f.slope_se => {}
            Some(f) => failures.push(format!(
                "pointwise slope {:.4} below floor {floor} - se {:.4}",
                f.slope, f.slope_se
            )),
            None => failures.push("pointwise slope floor set but no fit available".into()),
        }
    }
    if let Some(floor) = floors.sup_slope {
        match sup_fit {
            Some(f) if f.slope >= floor - f.slope_se => {}
            Some(f) => failures.push(format!(
                "sup slope {:.4} below floor {floor} - se {:.4}",
                f.slope, f.slope_se
            )),
            None => failures.push("sup slope floor set but no fit available".into()),
        }
    }
    if floors.sup_monotone {
        for w in levels.windows(2) {
            if w[1].e_sup >= w[0].e_sup {
                failures.push(format!(
                    "e_sup not strictly decreasing: {} at N={} vs {} at N={}",
                    w[0].e_sup, w[0].level, w[1].e_sup, w[1].level
                ));
            }
        }
    }
    if let Some(ratio) = floors.sup_final_ratio {
        let first = levels.first().unwrap().e_sup;
        let last = levels.last().unwrap().e_sup;
        if !(last < ratio * first) {
            failures.push(format!(
                "e_sup({}) = {last} not below {ratio} * e_sup({}) = {}",
                levels.last().unwrap().level,
                levels.first().unwrap().level,
                ratio * first
            ));
        }
    }
}

/// Analytic constants under which a local-time bound applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundConstants {
    /// Exterior-sphere radius `r0` (absent = flat) with a common
    /// reflection direction of quality `(beta, delta)`.
    CommonDirection {
        beta: f64,
        delta: f64,
        r0: Option<f64>,
    },
    /// Convex domain containing the ball of radius `inner_radius` around
    /// `center`.
    Convex { center: Vec<f64>, inner_radius: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowRecord {
    pub path: usize,
    pub s: f64,
    pub t: f64,
    /// Local-time variation of the solution on the window.
    pub phi: f64,
    /// Driver total variation on the window.
    pub omega: f64,
    /// Driver oscillation on the window.
    pub osc: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundValidationReport {
    pub constants: BoundConstants,
    pub windows: usize,
    pub violations: usize,
    pub worst_ratio: f64,
    pub records: Vec<WindowRecord>,
    pub status: StudyStatus,
}

const VIOLATION_SLACK: f64 = 1e-9;

/// Checks the local-time bound on random dyadic windows of simulated
/// paths: the empirical `phi` variation must never exceed the bound
/// evaluated from the driver's variation and oscillation.
pub fn bound_validation_study(
    cfg: &StudyConfig,
    windows_per_path: usize,
    constants: &BoundConstants,
) -> Result<BoundValidationReport> {
    cfg.validate()?;
    if let BoundConstants::Convex {
        center,
        inner_radius,
    } = constants
    {
        if center.len() != cfg.domain.dimension() || !(*inner_radius > 0.0) {
            return Err(Error::InvalidArgument(
                "convex bound constants need a center in the state space and a positive radius"
                    .into(),
            ));
        }
    }
    let level = *cfg.levels.last().unwrap();
    if level < 32 {
        return Err(Error::InvalidConfig(
            "bound validation needs a level of at least 32 for dyadic windows".into(),
        ));
    }
    let coeff = Coefficients::new(cfg.coefficients.clone())?;
    let grid = TimeGrid::new(cfg.horizon, level)?;

    let per_path: Vec<Result<Vec<WindowRecord>>> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| -> Result<Vec<WindowRecord>> {
            let b = sample_brownian(coeff.noise_dim(), grid, cfg.seed, p as u64)?;
            let traj =
                solve_wong_zakai(&cfg.domain, &coeff, &b, level, cfg.substeps, &cfg.x0, false)?;
            let sup_w = sup_oscillation(&traj.y, 0.0, cfg.horizon)?;
            let sup_xi = match constants {
                BoundConstants::Convex { center, .. } => (0..=level)
                    .map(|k| vm::dist(traj.x.node(k), center))
                    .fold(0.0, f64::max),
                _ => 0.0,
            };
            let rng = CounterRng::new(cfg.seed);
            let sid = stream::windows(p as u64);
            let mut records = Vec::with_capacity(windows_per_path);
            for w in 0..windows_per_path {
                let depth = 1 + (rng.raw(sid, 2 * w as u64) % 5) as u32;
                let pieces = 1usize << depth;
                let j = (rng.raw(sid, 2 * w as u64 + 1) % pieces as u64) as usize;
                let ka = j * (level / pieces);
                let kb = (j + 1) * (level / pieces);
                let (s, t) = (grid.node(ka), grid.node(kb));
                let phi = traj.tv[kb] - traj.tv[ka];
                let omega = traj.driver_tv[kb] - traj.driver_tv[ka];
                let osc = sup_oscillation(&traj.y, s, t)?;
                let bound = match constants {
                    BoundConstants::CommonDirection { beta, delta, r0 } => local_time_bound(
                        *beta,
                        *delta,
                        r0.unwrap_or(R0_INFINITE),
                        1.0,
                        omega,
                        sup_w,
                        osc,
                    ),
                    BoundConstants::Convex { inner_radius, .. } => {
                        local_time_bound_convex(*inner_radius, 1.0, omega, sup_xi, osc)
                    }
                };
                let ratio = if phi == 0.0 {
                    0.0
                } else if bound.value.is_infinite() {
                    0.0
                } else {
                    phi / bound.value
                };
                records.push(WindowRecord {
                    path: p,
                    s,
                    t,
                    phi,
                    omega,
                    osc,
                    bound: bound.value,
                    ratio,
                });
            }
            Ok(records)
        })
        .collect();

    let mut records = Vec::with_capacity(cfg.paths * windows_per_path);
    for r in per_path {
        records.extend(r?);
    }
    let violations = records
        .iter()
        .filter(|r| r.ratio > 1.0 + VIOLATION_SLACK)
        .count();
    let worst_ratio = records.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let status = if violations == 0 {
        StudyStatus::Pass
    } else {
        StudyStatus::Fail
    };
    Ok(BoundValidationReport {
        constants: constants.clone(),
        windows: records.len(),
        violations,
        worst_ratio,
        records,
        status,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentGrowthReport {
    pub config: StudyConfig,
    /// Dyadic window widths, widest first.
    pub widths: Vec<f64>,
    /// Mean squared state increment per width.
    pub increment_mean: Vec<f64>,
    /// Mean squared local-time variation per width.
    pub local_time_mean: Vec<f64>,
    pub increment_fit: Option<SlopeFit>,
    pub local_time_fit: Option<SlopeFit>,
    pub paths_run: usize,
    pub paths_aborted: usize,
    pub status: StudyStatus,
    pub failures: Vec<String>,
}

const MOMENT_DEPTHS: u32 = 6;
const MOMENT_SLOPE_RANGE: (f64, f64) = (0.9, 1.2);

/// Scaling of squared increments and local-time variation across dyadic
/// windows. Passing requires the increment slope to sit in
/// `MOMENT_SLOPE_RANGE`, the diffusive regime.
pub fn moment_growth_study(cfg: &StudyConfig) -> Result<MomentGrowthReport> {
    cfg.validate()?;
    let level = *cfg.levels.last().unwrap();
    if level < (1 << MOMENT_DEPTHS) {
        return Err(Error::InvalidConfig(format!(
            "moment study needs a level of at least {}",
            1 << MOMENT_DEPTHS
        )));
    }
    let coeff = Coefficients::new(cfg.coefficients.clone())?;
    let grid = TimeGrid::new(cfg.horizon, level)?;
    let nd = MOMENT_DEPTHS as usize;

    let per_path: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| -> Result<(Vec<f64>, Vec<f64>)> {
            let b = sample_brownian(coeff.noise_dim(), grid, cfg.seed, p as u64)?;
            let traj = match cfg.scheme {
                Scheme::WongZakai => solve_wong_zakai(
                    &cfg.domain,
                    &coeff,
                    &b,
                    level,
                    cfg.substeps,
                    &cfg.x0,
                    false,
                )?,
                Scheme::Euler => solve_euler(&cfg.domain, &coeff, &b, level, &cfg.x0, false)?,
            };
            let mut inc = vec![0.0; nd];
            let mut lt = vec![0.0; nd];
            for d in 1..=MOMENT_DEPTHS {
                let pieces = 1usize << d;
                let span = level / pieces;
                for j in 0..pieces {
                    let (ka, kb) = (j * span, (j + 1) * span);
                    let g = vm::dist(traj.x.node(kb), traj.x.node(ka));
                    inc[d as usize - 1] += g * g / pieces as f64;
                    let ph = traj.tv[kb] - traj.tv[ka];
                    lt[d as usize - 1] += ph * ph / pieces as f64;
                }
            }
            Ok((inc, lt))
        })
        .collect();

    let mut inc_sum = vec![0.0; nd];
    let mut lt_sum = vec![0.0; nd];
    let mut completed = 0usize;
    let mut aborted = 0usize;
    for r in per_path {
        match r {
            Ok((inc, lt)) => {
                completed += 1;
                for d in 0..nd {
                    inc_sum[d] += inc[d];
                    lt_sum[d] += lt[d];
                }
            }
            Err(_) => aborted += 1,
        }
    }
    if completed == 0 {
        return Err(Error::InvalidConfig("every path aborted".into()));
    }
    let mut failures = Vec::new();
    if aborted as f64 / cfg.paths as f64 > 0.01 {
        failures.push(format!("{aborted} of {} paths aborted", cfg.paths));
    }
    let widths: Vec<f64> = (1..=MOMENT_DEPTHS)
        .map(|d| cfg.horizon / (1u64 << d) as f64)
        .collect();
    let increment_mean: Vec<f64> = inc_sum.iter().map(|s| s / completed as f64).collect();
    let local_time_mean: Vec<f64> = lt_sum.iter().map(|s| s / completed as f64).collect();
    let fit_if_valid = |means: &[f64]| -> Option<SlopeFit> {
        if means.iter().all(|&v| v > 0.0) {
            fit_loglog_slope(&widths, means).ok()
        } else {
            None
        }
    };
    let increment_fit = fit_if_valid(&increment_mean);
    let local_time_fit = fit_if_valid(&local_time_mean);
    match &increment_fit {
        Some(f) if f.slope >= MOMENT_SLOPE_RANGE.0 && f.slope <= MOMENT_SLOPE_RANGE.1 => {}
        Some(f) => failures.push(format!(
            "increment slope {:.4} outside [{}, {}]",
            f.slope, MOMENT_SLOPE_RANGE.0, MOMENT_SLOPE_RANGE.1
        )),
        None => failures.push("no increment slope fit available".into()),
    }
    let status = if failures.is_empty() {
        StudyStatus::Pass
    } else {
        StudyStatus::Fail
    };
    Ok(MomentGrowthReport {
        config: cfg.clone(),
        widths,
        increment_mean,
        local_time_mean,
        increment_fit,
        local_time_fit,
        paths_run: completed,
        paths_aborted: aborted,
        status,
        failures,
    })
}

/// Per-level error table: `N,delta,e_pt,se_pt,e_sup,se_sup`.
pub fn levels_csv(report: &ConvergenceReport) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("N,delta,e_pt,se_pt,e_sup,se_sup\n");
    for r in &report.levels {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.level, r.delta, r.e_pt, r.se_pt, r.e_sup, r.se_sup
        );
    }
    s
}

/// Log-log error plot: per-level points for both error flavors plus the
/// fitted lines. Plain SVG, no external assets.
pub fn render_plot_svg(report: &ConvergenceReport) -> String {
    use std::fmt::Write as _;
    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 20.0, 50.0);
    let pts: Vec<(f64, f64, f64)> = report
        .levels
        .iter()
        .filter(|r| r.e_pt > 0.0 && r.e_sup > 0.0)
        .map(|r| (r.delta.ln(), r.e_pt.ln(), r.e_sup.ln()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    if pts.is_empty() {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">no positive errors to plot</text>",
            w / 2.0,
            h / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ymin = pts
        .iter()
        .flat_map(|p| [p.1, p.2])
        .fold(f64::INFINITY, f64::min);
    let ymax = pts
        .iter()
        .flat_map(|p| [p.1, p.2])
        .fold(f64::NEG_INFINITY, f64::max);
    let xpad = 0.05 * (xmax - xmin).max(1e-9);
    let ypad = 0.05 * (ymax - ymin).max(1e-9);
    let (xmin, xmax) = (xmin - xpad, xmax + xpad);
    let (ymin, ymax) = (ymin - ypad, ymax + ypad);
    let sx = |x: f64| ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);
    let _ = writeln!(
        svg,
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        w - ml - mr,
        h - mt - mb
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">log delta</text>",
        (ml + w - mr) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 16 {})\">log error</text>",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    );
    for (fit, color) in [(&report.pt_fit, "#1f77b4"), (&report.sup_fit, "#d62728")] {
        if let Some(f) = fit {
            let y0 = f.intercept + f.slope * xmin;
            let y1 = f.intercept + f.slope * xmax;
            let _ = writeln!(
                svg,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-dasharray=\"5,4\"/>",
                sx(xmin),
                sy(y0),
                sx(xmax),
                sy(y1)
            );
        }
    }
    for p in &pts {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#1f77b4\"/>",
            sx(p.0),
            sy(p.1)
        );
        let _ = writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"#d62728\"/>",
            sx(p.0) - 4.0,
            sy(p.2) - 4.0
        );
    }
    let mut legend_y = mt + 18.0;
    for (label, fit, color) in [
        ("pointwise", &report.pt_fit, "#1f77b4"),
        ("sup", &report.sup_fit, "#d62728"),
    ] {
        let text = match fit {
            Some(f) => format!("{label}: slope {:.3}", f.slope),
            None => format!("{label}: no fit"),
        };
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{legend_y}\" font-size=\"13\" fill=\"{color}\">{text}</text>",
            ml + 10.0
        );
        legend_y += 18.0;
    }
    svg.push_str("</svg>\n");
    svg
}
