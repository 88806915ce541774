//! Piecewise-linear sampled paths on uniform time grids: Brownian drivers,
//! their piecewise-linear interpolants, dyadic bridge refinement for coupled
//! convergence studies, and variation functionals.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::{stream, CounterRng};
use crate::vecmath as vm;

/// Uniform grid `t_k = k T / N` on `[0, T]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::InvalidArgument(
                "time grid needs positive horizon and at least one step".into(),
            ));
        }
        Ok(Self { horizon, steps })
    }

    #[inline]
    pub fn mesh(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.mesh()
        }
    }
}

/// A continuous path sampled on a grid, linear between nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    pub grid: TimeGrid,
    pub dim: usize,
    /// `(steps + 1) * dim` values, node-major.
    pub values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.steps + 1) * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                (grid.steps + 1) * dim,
                values.len()
            )));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        let n = (grid.steps + 1) * dim;
        Self {
            grid,
            dim,
            values: vec![0.0; n],
        }
    }

    /// 1D convenience constructor.
    pub fn from_nodes_1d(horizon: f64, nodes: &[f64]) -> Result<Self> {
        let grid = TimeGrid::new(horizon, nodes.len().saturating_sub(1).max(1))?;
        Self::new(grid, 1, nodes.to_vec())
    }

    #[inline]
    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Linear interpolation at an arbitrary time in `[0, T]`.
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.grid.horizon + 1e-12).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside [0, {}]",
                self.grid.horizon
            )));
        }
        let mesh = self.grid.mesh();
        let k = ((t / mesh).floor() as usize).min(self.grid.steps.saturating_sub(1));
        let frac = ((t - self.grid.node(k)) / mesh).clamp(0.0, 1.0);
        let a = self.node(k);
        let b = self.node(k + 1);
        Ok(a.iter().zip(b).map(|(x, y)| x + frac * (y - x)).collect())
    }

    /// CSV serialization: header `t,x1,...,xn`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 1..=self.dim {
            let _ = write!(s, ",x{i}");
        }
        s.push('\n');
        for k in 0..=self.grid.steps {
            let _ = write!(s, "{:.16e}", self.grid.node(k));
            for v in self.node(k) {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Brownian path on a grid: independent centered Gaussian increments with
/// variance `mesh` per coordinate, keyed by `(seed, path_index, step, coord)`.
pub fn sample_brownian(
    dim: usize,
    grid: TimeGrid,
    seed: u64,
    path_index: u64,
) -> Result<SampledPath> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    let rng = CounterRng::new(seed);
    let sid = stream::brownian(path_index);
    let sd = grid.mesh().sqrt();
    let mut path = SampledPath::zeros(grid, dim);
    for k in 0..grid.steps {
        for c in 0..dim {
            let z = rng.normal(sid, (k * dim + c) as u64);
            path.values[(k + 1) * dim + c] = path.values[k * dim + c] + sd * z;
        }
    }
    Ok(path)
}

/// Piecewise-linear interpolant of `fine` through the nodes of the coarse
/// grid with `coarse_steps` steps, resampled onto the fine grid.
pub fn wong_zakai_interpolant(fine: &SampledPath, coarse_steps: usize) -> Result<SampledPath> {
    if coarse_steps == 0 || fine.grid.steps % coarse_steps != 0 {
        return Err(Error::NonNestedGrids {
            fine: fine.grid.steps,
            coarse: coarse_steps,
        });
    }
    let ratio = fine.grid.steps / coarse_steps;
    let dim = fine.dim;
    let mut out = SampledPath::zeros(fine.grid, dim);
    for j in 0..=fine.grid.steps {
        let k = j / ratio;
        let rem = j % ratio;
        if rem == 0 {
            out.node_mut(j).copy_from_slice(fine.node(k * ratio));
        } else {
            let frac = rem as f64 / ratio as f64;
            let a = fine.node(k * ratio);
            let b = fine.node((k + 1) * ratio);
            for c in 0..dim {
                out.values[j * dim + c] = a[c] + frac * (b[c] - a[c]);
            }
        }
    }
    Ok(out)
}

/// Brownian bridge refinement: doubles the grid, keeps the original nodes
/// bit-for-bit, and draws each inserted midpoint from the bridge law
/// (mean = neighbor average, variance = mesh/4 per coordinate).
/// `level` is 1 for the first refinement of a base path, 2 for the next, ...
pub fn refine_brownian(
    path: &SampledPath,
    seed: u64,
    path_index: u64,
    level: u32,
) -> SampledPath {
    let rng = CounterRng::new(seed);
    let sid = stream::bridge(path_index, level);
    let dim = path.dim;
    let n = path.grid.steps;
    let fine_grid = TimeGrid {
        horizon: path.grid.horizon,
        steps: 2 * n,
    };
    let sd = (path.grid.mesh() / 4.0).sqrt();
    let mut out = SampledPath::zeros(fine_grid, dim);
    for k in 0..=n {
        out.node_mut(2 * k).copy_from_slice(path.node(k));
    }
    for k in 0..n {
        for c in 0..dim {
            let mid = 0.5 * (path.values[k * dim + c] + path.values[(k + 1) * dim + c]);
            let z = rng.normal(sid, (k * dim + c) as u64);
            out.values[(2 * k + 1) * dim + c] = mid + sd * z;
        }
    }
    out
}

/// Repeatedly refine `path` until it has `target_steps` steps (a power-of-two
/// multiple of the current step count). Bridge streams are keyed by the
/// refinement level, counted from the grid this is first called on.
pub fn refine_to(
    path: &SampledPath,
    target_steps: usize,
    seed: u64,
    path_index: u64,
) -> Result<SampledPath> {
    if target_steps % path.grid.steps != 0 || !(target_steps / path.grid.steps).is_power_of_two() {
        return Err(Error::NonNestedGrids {
            fine: target_steps,
            coarse: path.grid.steps,
        });
    }
    let mut current = path.clone();
    let mut level = 1u32;
    while current.grid.steps < target_steps {
        current = refine_brownian(&current, seed, path_index, level);
        level += 1;
    }
    Ok(current)
}

fn window_check(path: &SampledPath, s: f64, t: f64) -> Result<()> {
    if s > t {
        return Err(Error::InvalidArgument(format!("reversed window [{s}, {t}]")));
    }
    if s < -1e-12 || t > path.grid.horizon + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "window [{s}, {t}] outside [0, {}]",
            path.grid.horizon
        )));
    }
    Ok(())
}

fn interior_node_range(path: &SampledPath, s: f64, t: f64) -> (usize, usize) {
    let mesh = path.grid.mesh();
    let first = (s / mesh).ceil() as usize;
    let last = (t / mesh).floor() as usize;
    (first.min(path.grid.steps), last.min(path.grid.steps))
}

/// `max over s<=u<=v<=t of |w(u) - w(v)|`. For piecewise-linear paths the
/// maximum is attained at nodes or window endpoints.
pub fn sup_oscillation(path: &SampledPath, s: f64, t: f64) -> Result<f64> {
    window_check(path, s, t)?;
    let mut pts: Vec<Vec<f64>> = Vec::new();
    pts.push(path.value_at(s)?);
    let (first, last) = interior_node_range(path, s, t);
    for k in first..=last.min(path.grid.steps) {
        if k <= path.grid.steps {
            pts.push(path.node(k).to_vec());
        }
    }
    pts.push(path.value_at(t)?);
    if path.dim == 1 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &pts {
            lo = lo.min(p[0]);
            hi = hi.max(p[0]);
        }
        return Ok((hi - lo).max(0.0));
    }
    let mut best = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            best = best.max(vm::dist(&pts[i], &pts[j]));
        }
    }
    Ok(best)
}

/// Total variation over `[s, t]`, splitting partial boundary segments
/// linearly.
pub fn total_variation(path: &SampledPath, s: f64, t: f64) -> Result<f64> {
    window_check(path, s, t)?;
    let mut prev = path.value_at(s)?;
    let mut tv = 0.0;
    let (first, last) = interior_node_range(path, s, t);
    for k in first..=last {
        let cur = path.node(k);
        tv += vm::dist(&prev, cur);
        prev = cur.to_vec();
    }
    tv += vm::dist(&prev, &path.value_at(t)?);
    Ok(tv)
}

/// A superadditive control `ω(s,t)` for a piecewise-linear path: the
/// q-variation over the window (total variation when q = 1).
pub struct ControlFunction<'a> {
    pub path: &'a SampledPath,
    pub q: f64,
}

pub fn control_of_path(path: &SampledPath, q: f64) -> Result<ControlFunction<'_>> {
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("q must be >= 1, got {q}")));
    }
    Ok(ControlFunction { path, q })
}

impl ControlFunction<'_> {
    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        if self.q == 1.0 {
            return total_variation(self.path, s, t);
        }
        window_check(self.path, s, t)?;
        // q-variation over window points (endpoints plus interior nodes):
        // v[i] = max over j < i of v[j] + d(p_j, p_i)^q.
        let mut pts: Vec<Vec<f64>> = Vec::new();
        pts.push(self.path.value_at(s)?);
        let (first, last) = interior_node_range(self.path, s, t);
        for k in first..=last {
            pts.push(self.path.node(k).to_vec());
        }
        pts.push(self.path.value_at(t)?);
        let m = pts.len();
        let mut v = vec![0.0f64; m];
        for i in 1..m {
            let mut best = 0.0f64;
            for j in 0..i {
                best = best.max(v[j] + vm::dist(&pts[j], &pts[i]).powf(self.q));
            }
            v[i] = best;
        }
        Ok(v[m - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_starts_at_zero_and_is_deterministic() {
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let a = sample_brownian(3, grid, 42, 0).unwrap();
        let b = sample_brownian(3, grid, 42, 0).unwrap();
        assert_eq!(a.node(0), &[0.0, 0.0, 0.0]);
        assert_eq!(a.values, b.values);
        let c = sample_brownian(3, grid, 43, 0).unwrap();
        assert_ne!(a.values, c.values);
        let d = sample_brownian(3, grid, 42, 1).unwrap();
        assert_ne!(a.values, d.values);
    }

    #[test]
    fn brownian_increment_moments() {
        let grid = TimeGrid::new(100.0, 100_000).unwrap();
        let p = sample_brownian(1, grid, 7, 0).unwrap();
        let n = grid.steps;
        let mesh = grid.mesh();
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for k in 0..n {
            let inc = p.values[k + 1] - p.values[k];
            sum += inc;
            sumsq += inc * inc;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 * (mesh / n as f64).sqrt(), "mean = {mean}");
        assert!((var - mesh).abs() < 0.05 * mesh, "var = {var}");
    }

    #[test]
    fn interpolant_anchors_and_midpoints() {
        let fine = SampledPath::from_nodes_1d(1.0, &[0.0, 1.0, -1.0, 2.0, 0.0]).unwrap();
        let coarse = wong_zakai_interpolant(&fine, 2).unwrap();
        // anchors at coarse nodes 0, 2, 4
        assert_eq!(coarse.node(0), &[0.0]);
        assert_eq!(coarse.node(2), &[-1.0]);
        assert_eq!(coarse.node(4), &[0.0]);
        // linear midpoints
        assert_eq!(coarse.node(1), &[-0.5]);
        assert_eq!(coarse.node(3), &[-0.5]);
        assert!(wong_zakai_interpolant(&fine, 3).is_err());
    }

    #[test]
    fn refinement_pins_original_nodes() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let base = sample_brownian(2, grid, 11, 5).unwrap();
        let mut refined = base.clone();
        for level in 1..=3 {
            refined = refine_brownian(&refined, 11, 5, level);
        }
        let ratio = refined.grid.steps / base.grid.steps;
        for k in 0..=base.grid.steps {
            assert_eq!(refined.node(k * ratio), base.node(k));
        }
    }

    #[test]
    fn bridge_midpoint_variance() {
        let grid = TimeGrid::new(1000.0, 100_000).unwrap();
        // deterministic zero path: residuals are pure bridge noise
        let zero = SampledPath::zeros(grid, 1);
        let refined = refine_brownian(&zero, 3, 0, 1);
        let n = grid.steps;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for k in 0..n {
            let r = refined.values[2 * k + 1];
            sum += r;
            sumsq += r * r;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let target = grid.mesh() / 4.0; // 2.5e-3
        assert!((var - target).abs() < 0.05 * target, "var = {var}");
        let sd = target.sqrt();
        assert!(mean.abs() < 4.0 * sd / (n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn sup_oscillation_examples() {
        let constant = SampledPath::from_nodes_1d(1.0, &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(sup_oscillation(&constant, 0.0, 1.0).unwrap(), 0.0);
        let linear = SampledPath::from_nodes_1d(1.0, &[0.0, 0.5, 1.0]).unwrap();
        assert!((sup_oscillation(&linear, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let zig = SampledPath::from_nodes_1d(1.0, &[1.0, -1.0, 2.0]).unwrap();
        assert!((sup_oscillation(&zig, 0.0, 1.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(sup_oscillation(&zig, 0.8, 0.2).is_err());
    }

    #[test]
    fn sup_oscillation_window_monotone() {
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let p = sample_brownian(2, grid, 21, 0).unwrap();
        let inner = sup_oscillation(&p, 0.25, 0.5).unwrap();
        let outer = sup_oscillation(&p, 0.125, 0.75).unwrap();
        assert!(inner <= outer + 1e-15);
    }

    #[test]
    fn total_variation_examples() {
        let mono = SampledPath::from_nodes_1d(1.0, &[0.0, 1.0, 2.0]).unwrap();
        assert!((total_variation(&mono, 0.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let zig = SampledPath::from_nodes_1d(1.0, &[0.0, 1.0, 0.0]).unwrap();
        assert!((total_variation(&zig, 0.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        // half of a slope-2 segment: window [0.25, 0.5] inside segment [0, 0.5]
        let v = total_variation(&mono, 0.25, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn total_variation_additive_across_split() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let p = sample_brownian(1, grid, 33, 2).unwrap();
        for &(s, u, t) in &[(0.0, 0.37, 1.0), (0.1, 0.5, 0.9), (0.2, 0.21, 0.22)] {
            let whole = total_variation(&p, s, t).unwrap();
            let split =
                total_variation(&p, s, u).unwrap() + total_variation(&p, u, t).unwrap();
            assert!((whole - split).abs() < 1e-12);
        }
    }

    #[test]
    fn control_function_examples() {
        let zig = SampledPath::from_nodes_1d(1.0, &[0.0, 1.0, 0.0]).unwrap();
        let c = control_of_path(&zig, 1.0).unwrap();
        assert!((c.eval(0.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(c.eval(0.3, 0.3).unwrap(), 0.0);
        assert!(control_of_path(&zig, 0.5).is_err());
    }

    #[test]
    fn control_bounds_increments_and_is_superadditive() {
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let p = sample_brownian(1, grid, 8, 0).unwrap();
        let rng = CounterRng::new(99);
        for &q in &[1.0, 2.0] {
            let c = control_of_path(&p, q).unwrap();
            for k in 0..1000u64 {
                let mut a = rng.uniform(0, 3 * k);
                let mut b = rng.uniform(0, 3 * k + 1);
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                let u = a + rng.uniform(0, 3 * k + 2) * (b - a);
                let w = c.eval(a, b).unwrap();
                let ws = c.eval(a, u).unwrap();
                let wt = c.eval(u, b).unwrap();
                assert!(ws + wt <= w + 1e-12, "superadditivity q={q}");
                let pa = p.value_at(a).unwrap()[0];
                let pb = p.value_at(b).unwrap()[0];
                assert!((pb - pa).abs() <= w.powf(1.0 / q) + 1e-12, "increment bound q={q}");
            }
        }
    }

    #[test]
    fn csv_round_trip_digits() {
        let p = SampledPath::from_nodes_1d(1.0, &[0.0, 0.1 + 0.2, -1.0 / 3.0]).unwrap();
        let csv = p.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x1");
        let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        let parsed: f64 = row[1].parse().unwrap();
        assert_eq!(parsed, 0.1 + 0.2);
    }
}
