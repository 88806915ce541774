//! Reflecting SDE integrators realized through the Skorohod correction:
//! the piecewise-linear-driver scheme (substepped reflecting ODE per
//! interval) and the frozen-coefficient Euler scheme with drift correction
//! `b + tr(Dσ)(σ)/2`, which makes the Ito-stepped scheme consistent with
//! the Stratonovich-interpreted equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::paths::{SampledPath, TimeGrid};
use crate::skorokhod::{PushRecord, SkorohodSolution};
use crate::vecmath as vm;

/// Built-in coefficient fields. `sigma` maps states to d×n matrices
/// (row-major), `drift` to d-vectors; all variants carry exact derivatives.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum CoefficientKind {
    /// Constant matrix sigma and constant drift.
    Constant { matrix: Vec<Vec<f64>>, drift: Vec<f64> },
    /// Diagonal field with unit baseline: `sigma_ii = 1 + a sin(x_i)` on
    /// even coordinates, `1 + a cos(x_i)` on odd ones.
    DiagSinusoid {
        dimension: usize,
        amplitude: f64,
        #[serde(default)]
        drift: Vec<f64>,
    },
    /// Planar rotation scaled by `scale`, with angle `sin x_1 + cos x_2`.
    Rotation {
        scale: f64,
        #[serde(default)]
        drift: Vec<f64>,
    },
    /// 1D multiplicative field `sigma(x) = slope * x`, zero drift.
    #[serde(rename = "linear_1d")]
    Linear1d { slope: f64 },
    /// 1D field `sigma(x) = sin x`, zero drift.
    #[serde(rename = "sin_1d")]
    Sin1d,
}

#[derive(Clone, Debug)]
pub struct Coefficients {
    kind: CoefficientKind,
    state_dim: usize,
    noise_dim: usize,
    /// Sup norms used for diagnostics and reach estimates.
    pub sup_sigma: f64,
    pub sup_drift: f64,
}

impl Coefficients {
    pub fn new(kind: CoefficientKind) -> Result<Self> {
        let (d, n, sup_sigma, sup_drift) = match &kind {
            CoefficientKind::Constant { matrix, drift } => {
                let d = matrix.len();
                if d == 0 || drift.len() != d {
                    return Err(Error::InvalidArgument(
                        "constant coefficients need a nonempty matrix and a matching drift".into(),
                    ));
                }
                let n = matrix[0].len();
                if matrix.iter().any(|row| row.len() != n) || n == 0 {
                    return Err(Error::InvalidArgument("ragged sigma matrix".into()));
                }
                let frob = matrix
                    .iter()
                    .flatten()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                (d, n, frob, vm::norm(drift))
            }
            CoefficientKind::DiagSinusoid {
                dimension,
                amplitude,
                drift,
            } => {
                if *dimension == 0 {
                    return Err(Error::InvalidArgument("dimension must be >= 1".into()));
                }
                if !drift.is_empty() && drift.len() != *dimension {
                    return Err(Error::DimensionMismatch {
                        expected: *dimension,
                        got: drift.len(),
                    });
                }
                (
                    *dimension,
                    *dimension,
                    (*dimension as f64).sqrt() * (1.0 + amplitude.abs()),
                    vm::norm(drift),
                )
            }
            CoefficientKind::Rotation { scale, drift } => {
                if !drift.is_empty() && drift.len() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        got: drift.len(),
                    });
                }
                (2, 2, 2.0_f64.sqrt() * scale.abs(), vm::norm(drift))
            }
            CoefficientKind::Linear1d { .. } => (1, 1, f64::INFINITY, 0.0),
            CoefficientKind::Sin1d => (1, 1, 1.0, 0.0),
        };
        Ok(Self {
            kind,
            state_dim: d,
            noise_dim: n,
            sup_sigma,
            sup_drift,
        })
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Evaluate sigma(x) into `out` (d*n, row-major).
    pub fn sigma(&self, x: &[f64], out: &mut [f64]) {
        let (d, n) = (self.state_dim, self.noise_dim);
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), d * n);
        match &self.kind {
            CoefficientKind::Constant { matrix, .. } => {
                for i in 0..d {
                    out[i * n..(i + 1) * n].copy_from_slice(&matrix[i]);
                }
            }
            CoefficientKind::DiagSinusoid { amplitude, .. } => {
                out.fill(0.0);
                for i in 0..d {
                    let v = if i % 2 == 0 {
                        1.0 + amplitude * x[i].sin()
                    } else {
                        1.0 + amplitude * x[i].cos()
                    };
                    out[i * n + i] = v;
                }
            }
            CoefficientKind::Rotation { scale, .. } => {
                let theta = x[0].sin() + x[1].cos();
                let (s, c) = theta.sin_cos();
                out[0] = scale * c;
                out[1] = -scale * s;
                out[2] = scale * s;
                out[3] = scale * c;
            }
            CoefficientKind::Linear1d { slope } => out[0] = slope * x[0],
            CoefficientKind::Sin1d => out[0] = x[0].sin(),
        }
    }

    pub fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match &self.kind {
            CoefficientKind::Constant { drift, .. }
            | CoefficientKind::DiagSinusoid { drift, .. }
            | CoefficientKind::Rotation { drift, .. } => {
                if !drift.is_empty() {
                    out.copy_from_slice(drift);
                }
            }
            _ => {}
        }
    }

    /// Exact derivative tensor `∂_j sigma^i_k`, flattened as
    /// `[(i*n + k)*d + j]`.
    pub fn dsigma_exact(&self, x: &[f64]) -> Option<Vec<f64>> {
        let (d, n) = (self.state_dim, self.noise_dim);
        let mut t = vec![0.0; d * n * d];
        match &self.kind {
            CoefficientKind::Constant { .. } => {}
            CoefficientKind::DiagSinusoid { amplitude, .. } => {
                for i in 0..d {
                    let dv = if i % 2 == 0 {
                        amplitude * x[i].cos()
                    } else {
                        -amplitude * x[i].sin()
                    };
                    t[(i * n + i) * d + i] = dv;
                }
            }
            CoefficientKind::Rotation { scale, .. } => {
                let theta = x[0].sin() + x[1].cos();
                let (s, c) = theta.sin_cos();
                // d sigma / d theta, times d theta / d x_j
                let dtheta = [x[0].cos(), -x[1].sin()];
                let dsig_dtheta = [-scale * s, -scale * c, scale * c, -scale * s];
                for (ik, &g) in dsig_dtheta.iter().enumerate() {
                    for j in 0..2 {
                        t[ik * 2 + j] = g * dtheta[j];
                    }
                }
            }
            CoefficientKind::Linear1d { slope } => t[0] = *slope,
            CoefficientKind::Sin1d => t[0] = x[0].cos(),
        }
        Some(t)
    }

    /// Central finite-difference derivative tensor with
    /// `h = 1e-5 * max(1, |x|)`.
    pub fn dsigma_fd(&self, x: &[f64]) -> Vec<f64> {
        let (d, n) = (self.state_dim, self.noise_dim);
        let h = 1e-5 * vm::norm(x).max(1.0);
        let mut t = vec![0.0; d * n * d];
        let mut plus = vec![0.0; d * n];
        let mut minus = vec![0.0; d * n];
        let mut xp = x.to_vec();
        for j in 0..d {
            xp[j] = x[j] + h;
            self.sigma(&xp, &mut plus);
            xp[j] = x[j] - h;
            self.sigma(&xp, &mut minus);
            xp[j] = x[j];
            for ik in 0..d * n {
                t[ik * d + j] = (plus[ik] - minus[ik]) / (2.0 * h);
            }
        }
        t
    }
}

/// Corrected drift `b^i + (1/2) Σ_{j,k} ∂_j sigma^i_k sigma^j_k`, using the
/// exact derivative tensor when available and central differences otherwise.
pub fn stratonovich_correction(coeff: &Coefficients, x: &[f64]) -> Vec<f64> {
    stratonovich_correction_with(coeff, x, true)
}

/// Same, but forcing the finite-difference derivative path.
pub fn stratonovich_correction_fd(coeff: &Coefficients, x: &[f64]) -> Vec<f64> {
    stratonovich_correction_with(coeff, x, false)
}

fn stratonovich_correction_with(coeff: &Coefficients, x: &[f64], exact: bool) -> Vec<f64> {
    let (d, n) = (coeff.state_dim(), coeff.noise_dim());
    let mut b = vec![0.0; d];
    coeff.drift(x, &mut b);
    let mut sig = vec![0.0; d * n];
    coeff.sigma(x, &mut sig);
    let t = if exact {
        coeff.dsigma_exact(x).unwrap_or_else(|| coeff.dsigma_fd(x))
    } else {
        coeff.dsigma_fd(x)
    };
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            for k in 0..n {
                acc += t[(i * n + k) * d + j] * sig[j * n + k];
            }
        }
        b[i] += 0.5 * acc;
    }
    b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    WongZakai,
    Euler,
}

/// One simulated trajectory: reflected state, local time, and the driver
/// path, all on the level grid. `tv` and `driver_tv` are accumulated at
/// substep resolution so window variations are exact.
#[derive(Clone, Debug)]
pub struct TrajectoryPair {
    pub x: SampledPath,
    pub phi: SampledPath,
    /// Driver `Y` (noise plus drift integral, no reflection) at level nodes.
    pub y: SampledPath,
    /// Total variation of phi on `[0, t_k]`.
    pub tv: Vec<f64>,
    /// Total variation of the driver on `[0, t_k]`.
    pub driver_tv: Vec<f64>,
    pub scheme: Scheme,
    pub level: usize,
    /// Substep-resolution solution, kept only when requested; feeds the
    /// Skorohod property verifier.
    pub full: Option<SkorohodSolution>,
}

/// Piecewise-linear-driver scheme at level `N`: on each interval the driver
/// slope is the interval increment of `fine_b` over the mesh, integrated
/// with `substeps` explicit substeps, each followed by a boundary
/// correction.
pub fn solve_wong_zakai(
    domain: &DomainSpec,
    coeff: &Coefficients,
    fine_b: &SampledPath,
    level: usize,
    substeps: usize,
    x0: &[f64],
    record_full: bool,
) -> Result<TrajectoryPair> {
    integrate(
        domain,
        coeff,
        fine_b,
        level,
        substeps,
        x0,
        Scheme::WongZakai,
        true,
        record_full,
    )
}

/// Frozen-coefficient Euler scheme: one affine step per interval with the
/// true Brownian increment and the corrected drift, then a single boundary
/// correction.
pub fn solve_euler(
    domain: &DomainSpec,
    coeff: &Coefficients,
    fine_b: &SampledPath,
    level: usize,
    x0: &[f64],
    record_full: bool,
) -> Result<TrajectoryPair> {
    integrate(
        domain,
        coeff,
        fine_b,
        level,
        1,
        x0,
        Scheme::Euler,
        true,
        record_full,
    )
}

/// Reference proxy for the true solution: the piecewise-linear-driver
/// scheme on the finest grid, which must be at least 8x finer than any
/// study level.
pub fn solve_reference(
    domain: &DomainSpec,
    coeff: &Coefficients,
    fine_b: &SampledPath,
    substeps: usize,
    x0: &[f64],
    max_study_level: usize,
) -> Result<TrajectoryPair> {
    if fine_b.grid.steps < 8 * max_study_level {
        return Err(Error::InvalidConfig(format!(
            "reference level {} must be >= 8x the largest study level {}",
            fine_b.grid.steps, max_study_level
        )));
    }
    solve_wong_zakai(
        domain,
        coeff,
        fine_b,
        fine_b.grid.steps,
        substeps,
        x0,
        false,
    )
}

#[allow(clippy::too_many_arguments)]
fn integrate(
    domain: &DomainSpec,
    coeff: &Coefficients,
    fine_b: &SampledPath,
    level: usize,
    substeps: usize,
    x0: &[f64],
    scheme: Scheme,
    corrected_drift_for_euler: bool,
    record_full: bool,
) -> Result<TrajectoryPair> {
    let d = coeff.state_dim();
    let n = coeff.noise_dim();
    if x0.len() != d || domain.dimension() != d || fine_b.dim != n {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x0.len() != d { x0.len() } else { fine_b.dim },
        });
    }
    if level == 0 || fine_b.grid.steps % level != 0 {
        return Err(Error::NonNestedGrids {
            fine: fine_b.grid.steps,
            coarse: level,
        });
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be >= 1".into()));
    }
    if !domain.contains(x0)? {
        return Err(Error::StartOutsideDomain);
    }
    let ratio = fine_b.grid.steps / level;
    let mesh = fine_b.grid.horizon / level as f64;
    let h = mesh / substeps as f64;
    let node_grid = TimeGrid {
        horizon: fine_b.grid.horizon,
        steps: level,
    };

    let mut x_path = SampledPath::zeros(node_grid, d);
    let mut phi_path = SampledPath::zeros(node_grid, d);
    let mut y_path = SampledPath::zeros(node_grid, d);
    let mut tv = vec![0.0; level + 1];
    let mut driver_tv = vec![0.0; level + 1];

    let sub_grid = TimeGrid {
        horizon: fine_b.grid.horizon,
        steps: level * substeps,
    };
    let mut full = if record_full {
        Some(SkorohodSolution {
            xi: SampledPath::zeros(sub_grid, d),
            phi: SampledPath::zeros(sub_grid, d),
            driver: SampledPath::zeros(sub_grid, d),
            tv: vec![0.0; sub_grid.steps + 1],
            push_records: Vec::new(),
        })
    } else {
        None
    };

    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut phi = vec![0.0; d];
    let mut tv_acc = 0.0;
    let mut ytv_acc = 0.0;
    x_path.node_mut(0).copy_from_slice(&x);
    y_path.node_mut(0).copy_from_slice(&y);
    if let Some(f) = full.as_mut() {
        f.xi.node_mut(0).copy_from_slice(&x);
        f.driver.node_mut(0).copy_from_slice(&y);
    }

    let mut sig = vec![0.0; d * n];
    let mut b = vec![0.0; d];
    let mut db = vec![0.0; n];
    let mut step_vec = vec![0.0; d];

    for k in 0..level {
        let a0 = fine_b.node(k * ratio);
        let a1 = fine_b.node((k + 1) * ratio);
        for c in 0..n {
            db[c] = (a1[c] - a0[c]) / substeps as f64;
        }
        let euler_drift: Option<Vec<f64>> = if scheme == Scheme::Euler {
            Some(if corrected_drift_for_euler {
                stratonovich_correction(coeff, &x)
            } else {
                let mut plain = vec![0.0; d];
                coeff.drift(&x, &mut plain);
                plain
            })
        } else {
            None
        };
        for s in 0..substeps {
            coeff.sigma(&x, &mut sig);
            match &euler_drift {
                Some(bd) => b.copy_from_slice(bd),
                None => coeff.drift(&x, &mut b),
            }
            for i in 0..d {
                let mut v = b[i] * h;
                for c in 0..n {
                    v += sig[i * n + c] * db[c];
                }
                step_vec[i] = v;
            }
            ytv_acc += vm::norm(&step_vec);
            let mut target = x.clone();
            for i in 0..d {
                target[i] += step_vec[i];
                y[i] += step_vec[i];
            }
            let sub_idx = k * substeps + s + 1;
            if domain.contains(&target)? {
                x = target;
            } else {
                let (corrected, normal, dist) = domain.pushback(&target)?;
                for i in 0..d {
                    phi[i] += corrected[i] - target[i];
                }
                tv_acc += dist;
                if let Some(f) = full.as_mut() {
                    f.push_records.push(PushRecord {
                        step: sub_idx,
                        normal,
                        magnitude: dist,
                    });
                }
                x = corrected;
            }
            if let Some(f) = full.as_mut() {
                f.xi.node_mut(sub_idx).copy_from_slice(&x);
                f.phi.node_mut(sub_idx).copy_from_slice(&phi);
                f.driver.node_mut(sub_idx).copy_from_slice(&y);
                f.tv[sub_idx] = tv_acc;
            }
        }
        x_path.node_mut(k + 1).copy_from_slice(&x);
        phi_path.node_mut(k + 1).copy_from_slice(&phi);
        y_path.node_mut(k + 1).copy_from_slice(&y);
        tv[k + 1] = tv_acc;
        driver_tv[k + 1] = ytv_acc;
    }

    Ok(TrajectoryPair {
        x: x_path,
        phi: phi_path,
        y: y_path,
        tv,
        driver_tv,
        scheme,
        level,
        full,
    })
}

impl TrajectoryPair {
    /// CSV in the Skorohod solution schema with a scheme/level comment line.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let scheme = match self.scheme {
            Scheme::WongZakai => "wong_zakai",
            Scheme::Euler => "euler",
        };
        let d = self.x.dim;
        let mut s = format!("# scheme={scheme},level={}\n", self.level);
        s.push('t');
        for i in 1..=d {
            let _ = write!(s, ",xi_{i}");
        }
        for i in 1..=d {
            let _ = write!(s, ",phi_{i}");
        }
        s.push_str(",tv\n");
        for k in 0..=self.x.grid.steps {
            let _ = write!(s, "{:.16e}", self.x.grid.node(k));
            for v in self.x.node(k) {
                let _ = write!(s, ",{v:.16e}");
            }
            for v in self.phi.node(k) {
                let _ = write!(s, ",{v:.16e}");
            }
            let _ = write!(s, ",{:.16e}\n", self.tv[k]);
        }
        s
    }
}
