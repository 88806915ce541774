//! Deterministic Skorohod problem for piecewise-linear drivers: the
//! explicit half-line map, an advance-then-correct discrete solver for the
//! supported domain families, and a verifier for the defining properties
//! (constraint to the closure, the additive identity, and local time that
//! grows only on the boundary along inward normals).

use serde::Serialize;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{cone_margin, DomainSpec};
use crate::paths::{SampledPath, TimeGrid};

/// One boundary correction applied by a solver.
#[derive(Clone, Debug)]
pub struct PushRecord {
    /// Node index of the post-push point on the solution grid.
    pub step: usize,
    /// Inward unit normal used for the push.
    pub normal: Vec<f64>,
    pub magnitude: f64,
}

/// Solution pair (xi, phi) with running total variation of phi and the
/// individual pushes. `driver` is the input path as accumulated by the
/// solver on the solution grid, so the additive identity can be checked
/// without re-interpolation error.
#[derive(Clone, Debug)]
pub struct SkorohodSolution {
    pub xi: SampledPath,
    pub phi: SampledPath,
    pub driver: SampledPath,
    /// `tv[k]` = total variation of phi on `[0, t_k]`, the exact sum of push
    /// magnitudes up to node k.
    pub tv: Vec<f64>,
    pub push_records: Vec<PushRecord>,
}

impl SkorohodSolution {
    /// CSV with columns `t, xi_1..xi_d, phi_1..phi_d, tv`.
    pub fn to_csv(&self) -> String {
        let d = self.xi.dim;
        let mut s = String::from("t");
        for i in 1..=d {
            let _ = write!(s, ",xi_{i}");
        }
        for i in 1..=d {
            let _ = write!(s, ",phi_{i}");
        }
        s.push_str(",tv\n");
        for k in 0..=self.xi.grid.steps {
            let _ = write!(s, "{:.16e}", self.xi.grid.node(k));
            for v in self.xi.node(k) {
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

/// Explicit Skorohod map on the half-line `[0, ∞)`:
/// `phi(t) = max(0, max_{s<=t} -w(s))`, `xi = w + phi`. Exact at nodes for
/// piecewise-linear input since segment extrema sit at the endpoints.
pub fn solve_halfline(w: &SampledPath) -> Result<SkorohodSolution> {
    if w.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: w.dim,
        });
    }
    if w.values[0] < 0.0 {
        return Err(Error::StartOutsideDomain);
    }
    let n = w.grid.steps;
    let mut phi = SampledPath::zeros(w.grid, 1);
    let mut xi = SampledPath::zeros(w.grid, 1);
    let mut tv = vec![0.0; n + 1];
    let mut push_records = Vec::new();
    let mut running = 0.0f64; // max(0, max -w) so far
    for k in 0..=n {
        let candidate = -w.values[k];
        if candidate > running {
            push_records.push(PushRecord {
                step: k,
                normal: vec![1.0],
                magnitude: candidate - running,
            });
            running = candidate;
        }
        phi.values[k] = running;
        xi.values[k] = w.values[k] + running;
        tv[k] = running;
    }
    Ok(SkorohodSolution {
        xi,
        phi,
        driver: w.clone(),
        tv,
        push_records,
    })
}

/// Advance-then-correct discrete Skorohod solver on the `m`-times refined
/// grid: each substep advances along the linear driver, then corrects back
/// to the closure (nearest-point projection on convex domains, radial
/// pushback on the ball complement). Local time is accumulated as the exact
/// sequence of correction vectors.
pub fn solve_discrete(
    domain: &DomainSpec,
    w: &SampledPath,
    substeps: usize,
) -> Result<SkorohodSolution> {
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be >= 1".into()));
    }
    if w.dim != domain.dimension() {
        return Err(Error::DimensionMismatch {
            expected: domain.dimension(),
            got: w.dim,
        });
    }
    if !domain.contains(w.node(0))? {
        return Err(Error::StartOutsideDomain);
    }
    let n = w.grid.steps;
    let grid = TimeGrid {
        horizon: w.grid.horizon,
        steps: n * substeps,
    };
    let d = w.dim;
    let mut xi = SampledPath::zeros(grid, d);
    let mut phi = SampledPath::zeros(grid, d);
    let mut driver = SampledPath::zeros(grid, d);
    let mut tv = vec![0.0; grid.steps + 1];
    let mut push_records = Vec::new();

    let mut x = w.node(0).to_vec();
    let mut wd = x.clone();
    let mut ph = vec![0.0; d];
    xi.node_mut(0).copy_from_slice(&x);
    driver.node_mut(0).copy_from_slice(&wd);

    let mut idx = 0usize;
    for k in 0..n {
        let a = w.node(k);
        let b = w.node(k + 1);
        for s in 1..=substeps {
            idx += 1;
            // driver position taken from the nodes directly, so interval
            // ends hit the input path bit-for-bit
            if s == substeps {
                wd.copy_from_slice(b);
            } else {
                let frac = s as f64 / substeps as f64;
                for c in 0..d {
                    wd[c] = a[c] + frac * (b[c] - a[c]);
                }
            }
            // xi = driver + phi holds exactly at every substep
            let target: Vec<f64> = (0..d).map(|c| wd[c] + ph[c]).collect();
            if domain.contains(&target)? {
                x = target;
                tv[idx] = tv[idx - 1];
            } else {
                let (y, normal, dist) = domain.pushback(&target)?;
                for c in 0..d {
                    ph[c] += y[c] - target[c];
                }
                tv[idx] = tv[idx - 1] + dist;
                push_records.push(PushRecord {
                    step: idx,
                    normal,
                    magnitude: dist,
                });
                x = y;
            }
            xi.node_mut(idx).copy_from_slice(&x);
            phi.node_mut(idx).copy_from_slice(&ph);
            driver.node_mut(idx).copy_from_slice(&wd);
        }
    }
    Ok(SkorohodSolution {
        xi,
        phi,
        driver,
        tv,
        push_records,
    })
}

/// Tolerances for [`verify`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerifyTolerances {
    /// Allowed distance outside the closure at any node.
    pub boundary: f64,
    /// Allowed residual of `xi - w - phi` at any node.
    pub identity: f64,
    /// Distance from the boundary beyond which a node counts as interior.
    pub interior_distance: f64,
    /// Allowed negative margin of the normal-cone inequality for pushes.
    pub cone_margin: f64,
    /// Total-variation increments below this count as flat.
    pub tv_flat: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self {
            boundary: 1e-9,
            identity: 1e-12,
            interior_distance: 1e-6,
            cone_margin: 1e-6,
            tv_flat: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub max_boundary_violation: f64,
    pub max_identity_residual: f64,
    /// Pushes recorded while the post-push point was strictly interior.
    pub interior_push_count: usize,
    /// Largest violation (positive number) of the normal-cone inequality
    /// across all recorded pushes; 0 when all margins are nonnegative.
    pub max_cone_margin_violation: f64,
    pub status: VerifyStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyStatus {
    Pass,
    Fail,
}

/// Check the Skorohod properties of a solution against its driver.
/// Violations are report entries, not errors.
pub fn verify(
    domain: &DomainSpec,
    w: &SampledPath,
    sol: &SkorohodSolution,
    tol: VerifyTolerances,
) -> Result<VerificationReport> {
    let steps = sol.xi.grid.steps;
    if steps % w.grid.steps != 0 {
        return Err(Error::NonNestedGrids {
            fine: steps,
            coarse: w.grid.steps,
        });
    }
    let ratio = steps / w.grid.steps;
    let d = sol.xi.dim;

    let mut max_boundary = 0.0f64;
    let mut max_identity = 0.0f64;
    let mut interior_pushes = 0usize;
    for k in 0..=steps {
        let x = sol.xi.node(k);
        let inset = domain.signed_inset(x);
        if inset < 0.0 {
            max_boundary = max_boundary.max(-inset);
        }
        // driver value: exact node of w when aligned, else linear interpolant
        let wk = if k % ratio == 0 {
            w.node(k / ratio).to_vec()
        } else {
            w.value_at(sol.xi.grid.node(k))?
        };
        for c in 0..d {
            max_identity =
                max_identity.max((x[c] - wk[c] - sol.phi.values[k * d + c]).abs());
        }
        if k > 0 {
            let inc = sol.tv[k] - sol.tv[k - 1];
            if inc > tol.tv_flat && domain.boundary_distance(x) > tol.interior_distance {
                interior_pushes += 1;
            }
        }
    }

    // tv must be nondecreasing and match the push records
    let mut from_records = vec![0.0f64; steps + 1];
    for r in &sol.push_records {
        from_records[r.step] += r.magnitude;
    }
    let mut acc = 0.0;
    for k in 0..=steps {
        acc += from_records[k];
        if (acc - sol.tv[k]).abs() > 1e-9 * (1.0 + acc) {
            // treat as an identity failure: tv is not the sum of pushes
            max_identity = max_identity.max((acc - sol.tv[k]).abs());
        }
        if k > 0 && sol.tv[k] < sol.tv[k - 1] {
            max_identity = max_identity.max(sol.tv[k - 1] - sol.tv[k]);
        }
    }

    // normal-cone membership of the push directions
    let zs = domain.sample_closure(128, 0xCE);
    let r0 = domain.exterior_sphere_radius();
    let mut worst_margin = 0.0f64;
    for r in &sol.push_records {
        if r.magnitude <= tol.tv_flat {
            continue;
        }
        let x = sol.xi.node(r.step);
        let mut min_margin = f64::INFINITY;
        for z in &zs {
            min_margin = min_margin.min(cone_margin(x, &r.normal, r0, z));
        }
        if min_margin < 0.0 {
            worst_margin = worst_margin.max(-min_margin);
        }
    }

    let pass = max_boundary <= tol.boundary
        && max_identity <= tol.identity
        && interior_pushes == 0
        && worst_margin <= tol.cone_margin;
    Ok(VerificationReport {
        max_boundary_violation: max_boundary,
        max_identity_residual: max_identity,
        interior_push_count: interior_pushes,
        max_cone_margin_violation: worst_margin,
        status: if pass {
            VerifyStatus::Pass
        } else {
            VerifyStatus::Fail
        },
    })
}
