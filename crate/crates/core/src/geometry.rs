//! Reflecting domains and their boundary geometry.
//!
//! Supported domain families are half-spaces, axis boxes, balls, convex
//! polytopes, complements of balls (the non-convex test case), and convex
//! domains truncated by a ball. Each domain exposes closure membership,
//! nearest-point projection (convex variants), boundary pushback, inward
//! normal cones, and numerical certification of the uniform exterior
//! sphere condition and the uniform normal-cone compatibility condition
//! with explicit constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, CounterRng};
use crate::vecmath as vm;

/// Closure membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-12;
/// Boundary location tolerance for normal-cone queries.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Sentinel for an infinite exterior-sphere radius (convex domains).
/// Division by it yields an exact zero curvature term.
pub const R0_INFINITE: f64 = f64::INFINITY;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HalfSpaceSpec {
    /// Inward unit normal: the half-space is `{x : (normal, x) >= offset}`.
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Parametric description of the reflecting domain `D`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    HalfSpace {
        dimension: usize,
        normal: Vec<f64>,
        offset: f64,
    },
    Box {
        dimension: usize,
        /// `None` marks an unbounded end on that axis.
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    ConvexPolytope {
        dimension: usize,
        half_spaces: Vec<HalfSpaceSpec>,
    },
    /// Exterior of an open ball: `{x : |x - center| >= radius}`. Non-convex;
    /// satisfies the exterior sphere condition with `r0 = radius`.
    BallComplement {
        center: Vec<f64>,
        radius: f64,
    },
    /// `base ∩ B(center, radius)`, with `inner_radius` the radius of a ball
    /// around `center` known to lie inside `base`.
    Truncated {
        base: Box<DomainSpec>,
        center: Vec<f64>,
        radius: f64,
        inner_radius: f64,
    },
}

impl DomainSpec {
    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::HalfSpace { dimension, .. } => *dimension,
            DomainSpec::Box { dimension, .. } => *dimension,
            DomainSpec::Ball { center, .. } => center.len(),
            DomainSpec::ConvexPolytope { dimension, .. } => *dimension,
            DomainSpec::BallComplement { center, .. } => center.len(),
            DomainSpec::Truncated { base, .. } => base.dimension(),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            DomainSpec::BallComplement { .. } => false,
            DomainSpec::Truncated { base, .. } => base.is_convex(),
            _ => true,
        }
    }

    /// Exterior-sphere radius r0: infinite for convex variants, the excluded
    /// ball's radius for `BallComplement`.
    pub fn exterior_sphere_radius(&self) -> f64 {
        match self {
            DomainSpec::BallComplement { radius, .. } => *radius,
            DomainSpec::Truncated { base, .. } => base.exterior_sphere_radius(),
            _ => R0_INFINITE,
        }
    }

    /// Structural validation of the invariants of each variant.
    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if d == 0 {
            return Err(Error::InvalidDomain("dimension must be positive".into()));
        }
        match self {
            DomainSpec::HalfSpace {
                dimension, normal, ..
            } => {
                if normal.len() != *dimension {
                    return Err(Error::DimensionMismatch {
                        expected: *dimension,
                        got: normal.len(),
                    });
                }
                if (vm::norm(normal) - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidDomain(
                        "half-space normal must have unit norm".into(),
                    ));
                }
            }
            DomainSpec::Box {
                dimension,
                lower,
                upper,
            } => {
                if lower.len() != *dimension || upper.len() != *dimension {
                    return Err(Error::DimensionMismatch {
                        expected: *dimension,
                        got: lower.len().max(upper.len()),
                    });
                }
                for i in 0..*dimension {
                    if let (Some(l), Some(u)) = (lower[i], upper[i]) {
                        if l >= u {
                            return Err(Error::InvalidDomain(format!(
                                "box axis {i}: lower {l} must be < upper {u}"
                            )));
                        }
                    }
                }
            }
            DomainSpec::Ball { radius, .. } | DomainSpec::BallComplement { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::InvalidDomain("radius must be positive".into()));
                }
            }
            DomainSpec::ConvexPolytope {
                dimension,
                half_spaces,
            } => {
                if half_spaces.is_empty() {
                    return Err(Error::InvalidDomain(
                        "polytope needs at least one half-space".into(),
                    ));
                }
                for hs in half_spaces {
                    if hs.normal.len() != *dimension {
                        return Err(Error::DimensionMismatch {
                            expected: *dimension,
                            got: hs.normal.len(),
                        });
                    }
                    if (vm::norm(&hs.normal) - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidDomain(
                            "polytope face normal must have unit norm".into(),
                        ));
                    }
                }
            }
            DomainSpec::Truncated {
                base,
                center,
                radius,
                inner_radius,
            } => {
                base.validate()?;
                if center.len() != base.dimension() {
                    return Err(Error::DimensionMismatch {
                        expected: base.dimension(),
                        got: center.len(),
                    });
                }
                if *radius <= 0.0 || *inner_radius <= 0.0 {
                    return Err(Error::InvalidDomain("truncation radii must be positive".into()));
                }
                if *radius < *inner_radius {
                    return Err(Error::InvalidDomain(
                        "truncation radius must be >= inner ball radius".into(),
                    ));
                }
                // Sampled check that B(center, inner_radius) lies inside base.
                let rng = CounterRng::new(0x7A11);
                for k in 0..256u64 {
                    let dir = random_unit(&rng, stream::sampling(1), k, center.len());
                    let mut z = center.clone();
                    vm::axpy(&mut z, *inner_radius, &dir);
                    if !base.contains(&z)? {
                        return Err(Error::InvalidDomain(
                            "inner ball around truncation center is not contained in base".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Closure membership with tolerance `MEMBERSHIP_TOL` on the boundary.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.signed_inset(x) >= -MEMBERSHIP_TOL)
    }

    /// Distance-like inset: nonnegative inside the closure, negative outside.
    /// Exact distance to the boundary for points in the closure; for outside
    /// points the magnitude is the distance to `D̄` for all variants except
    /// polytope corners, where it is a lower-bound surrogate (max facet
    /// violation) used only for sign tests.
    pub fn signed_inset(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::HalfSpace { normal, offset, .. } => vm::dot(normal, x) - offset,
            DomainSpec::Box { lower, upper, .. } => {
                let mut m = f64::INFINITY;
                for i in 0..x.len() {
                    if let Some(l) = lower[i] {
                        m = m.min(x[i] - l);
                    }
                    if let Some(u) = upper[i] {
                        m = m.min(u - x[i]);
                    }
                }
                if m == f64::INFINITY {
                    // no bounded face at all
                    m = f64::MAX;
                }
                m
            }
            DomainSpec::Ball { center, radius } => radius - vm::dist(x, center),
            DomainSpec::ConvexPolytope { half_spaces, .. } => half_spaces
                .iter()
                .map(|hs| vm::dot(&hs.normal, x) - hs.offset)
                .fold(f64::INFINITY, f64::min),
            DomainSpec::BallComplement { center, radius } => vm::dist(x, center) - radius,
            DomainSpec::Truncated {
                base,
                center,
                radius,
                ..
            } => base.signed_inset(x).min(radius - vm::dist(x, center)),
        }
    }

    /// Distance from a point of the closure to the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.signed_inset(x).max(0.0)
    }

    /// Nearest point of the closure (convex variants only). Returns `x`
    /// unchanged when `x` is already in the closure.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if !self.is_convex() {
            return Err(Error::Unsupported(
                "nearest-point projection requires a convex domain".into(),
            ));
        }
        if self.contains(x)? {
            return Ok(x.to_vec());
        }
        Ok(self.project_unchecked(x))
    }

    fn project_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            DomainSpec::HalfSpace { normal, offset, .. } => {
                let gap = offset - vm::dot(normal, x);
                if gap <= 0.0 {
                    x.to_vec()
                } else {
                    let mut y = x.to_vec();
                    vm::axpy(&mut y, gap, normal);
                    y
                }
            }
            DomainSpec::Box { lower, upper, .. } => {
                let mut y = x.to_vec();
                for i in 0..y.len() {
                    if let Some(l) = lower[i] {
                        y[i] = y[i].max(l);
                    }
                    if let Some(u) = upper[i] {
                        y[i] = y[i].min(u);
                    }
                }
                y
            }
            DomainSpec::Ball { center, radius } => {
                let r = vm::dist(x, center);
                if r <= *radius {
                    x.to_vec()
                } else {
                    let mut y = center.clone();
                    let dir = vm::sub(x, center);
                    vm::axpy(&mut y, radius / r, &dir);
                    y
                }
            }
            DomainSpec::ConvexPolytope { half_spaces, .. } => {
                let sets: Vec<DomainSpec> = half_spaces
                    .iter()
                    .map(|hs| DomainSpec::HalfSpace {
                        dimension: x.len(),
                        normal: hs.normal.clone(),
                        offset: hs.offset,
                    })
                    .collect();
                dykstra(&sets, x)
            }
            DomainSpec::BallComplement { .. } => unreachable!("guarded by project()"),
            DomainSpec::Truncated {
                base,
                center,
                radius,
                ..
            } => {
                let ball = DomainSpec::Ball {
                    center: center.clone(),
                    radius: *radius,
                };
                dykstra(&[(**base).clone(), ball], x)
            }
        }
    }

    /// Correct an exterior point back onto the boundary. Returns the
    /// corrected point, the inward unit normal of the push, and the push
    /// distance. For non-convex variants the point must lie within `r0/2`
    /// of the boundary.
    pub fn pushback(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        self.check_dim(x)?;
        if self.contains(x)? {
            return Err(Error::InvalidArgument(
                "pushback requires a point outside the closure".into(),
            ));
        }
        match self {
            DomainSpec::BallComplement { center, radius } => {
                let depth = radius - vm::dist(x, center);
                if depth > radius / 2.0 {
                    return Err(Error::SubstepTooCoarse {
                        dist: depth,
                        limit: radius / 2.0,
                    });
                }
                let dir = vm::normalized(&vm::sub(x, center)).expect("depth <= r/2 keeps x off center");
                let mut y = center.clone();
                vm::axpy(&mut y, *radius, &dir);
                Ok((y, dir, depth))
            }
            _ => {
                let y = self.project(x)?;
                let d = vm::dist(&y, x);
                let n = vm::normalized(&vm::sub(&y, x))
                    .ok_or_else(|| Error::InvalidArgument("zero push distance".into()))?;
                Ok((y, n, d))
            }
        }
    }

    /// Representative inward normals at a boundary point: the unique normal
    /// on smooth faces, the facet generators of the cone at corners.
    pub fn normal_cone(&self, x: &[f64]) -> Result<NormalCone> {
        self.check_dim(x)?;
        let inset = self.signed_inset(x);
        if inset.abs() > BOUNDARY_TOL {
            return Err(Error::NotOnBoundary(inset.abs()));
        }
        let mut generators: Vec<Vec<f64>> = Vec::new();
        match self {
            DomainSpec::HalfSpace { normal, .. } => generators.push(normal.clone()),
            DomainSpec::Box { lower, upper, .. } => {
                for i in 0..x.len() {
                    if let Some(l) = lower[i] {
                        if (x[i] - l).abs() <= BOUNDARY_TOL {
                            let mut e = vec![0.0; x.len()];
                            e[i] = 1.0;
                            generators.push(e);
                        }
                    }
                    if let Some(u) = upper[i] {
                        if (u - x[i]).abs() <= BOUNDARY_TOL {
                            let mut e = vec![0.0; x.len()];
                            e[i] = -1.0;
                            generators.push(e);
                        }
                    }
                }
            }
            DomainSpec::Ball { center, radius } => {
                let dir = vm::sub(center, x);
                generators.push(vm::scale(&dir, 1.0 / radius));
            }
            DomainSpec::ConvexPolytope { half_spaces, .. } => {
                for hs in half_spaces {
                    if (vm::dot(&hs.normal, x) - hs.offset).abs() <= BOUNDARY_TOL {
                        generators.push(hs.normal.clone());
                    }
                }
            }
            DomainSpec::BallComplement { center, radius } => {
                let dir = vm::sub(x, center);
                generators.push(vm::scale(&dir, 1.0 / radius));
            }
            DomainSpec::Truncated {
                base,
                center,
                radius,
                ..
            } => {
                if base.signed_inset(x).abs() <= BOUNDARY_TOL {
                    generators.extend(base.normal_cone(x)?.generators);
                }
                if (radius - vm::dist(x, center)).abs() <= BOUNDARY_TOL {
                    let dir = vm::sub(center, x);
                    generators.push(vm::scale(&dir, 1.0 / radius));
                }
            }
        }
        // renormalize against accumulated rounding
        for g in &mut generators {
            let n = vm::norm(g);
            if (n - 1.0).abs() > 0.0 {
                for v in g.iter_mut() {
                    *v /= n;
                }
            }
        }
        if generators.is_empty() {
            return Err(Error::NotOnBoundary(inset.abs()));
        }
        Ok(NormalCone {
            base_point: x.to_vec(),
            generators,
            exterior_radius: self.exterior_sphere_radius(),
        })
    }

    /// Deterministic sample of boundary points, via projection/pushback of
    /// scattered exterior probes (star sampling for the ball complement).
    pub fn sample_boundary(&self, count: usize, tag: u64) -> Vec<Vec<f64>> {
        let rng = CounterRng::new(0xB0DA ^ tag);
        let d = self.dimension();
        let anchor = self.anchor();
        let scale = self.length_scale();
        let mut out = Vec::with_capacity(count);
        let mut counter = 0u64;
        while out.len() < count && counter < 64 * count as u64 + 1024 {
            match self {
                DomainSpec::BallComplement { center, radius } => {
                    let dir = random_unit(&rng, stream::sampling(tag), counter, d);
                    let mut y = center.clone();
                    vm::axpy(&mut y, *radius, &dir);
                    out.push(y);
                }
                _ => {
                    let mut z = anchor.clone();
                    for i in 0..d {
                        z[i] += scale
                            * rng.normal(stream::sampling(tag), counter * (d as u64) + i as u64);
                    }
                    if !self.contains(&z).unwrap_or(false) {
                        if let Ok(y) = self.project(&z) {
                            out.push(y);
                        }
                    }
                }
            }
            counter += 1;
        }
        out
    }

    /// Deterministic sample of points of the closure.
    pub fn sample_closure(&self, count: usize, tag: u64) -> Vec<Vec<f64>> {
        let rng = CounterRng::new(0xC105 ^ tag);
        let d = self.dimension();
        let anchor = self.anchor();
        let scale = self.length_scale();
        let mut out = Vec::with_capacity(count);
        let mut counter = 0u64;
        while out.len() < count && counter < 64 * count as u64 + 1024 {
            match self {
                DomainSpec::BallComplement { center, radius } => {
                    let dir = random_unit(&rng, stream::sampling(tag ^ 1), counter, d);
                    let extra = rng
                        .normal(stream::sampling(tag ^ 2), counter)
                        .abs()
                        * scale;
                    let mut y = center.clone();
                    vm::axpy(&mut y, radius + extra, &dir);
                    out.push(y);
                }
                _ => {
                    let mut z = anchor.clone();
                    for i in 0..d {
                        z[i] += scale
                            * rng.normal(
                                stream::sampling(tag ^ 1),
                                counter * (d as u64) + i as u64,
                            );
                    }
                    if self.contains(&z).unwrap_or(false) {
                        out.push(z);
                    } else if let Ok(y) = self.project(&z) {
                        out.push(y);
                    }
                }
            }
            counter += 1;
        }
        out
    }

    /// A reference point used to center the probe clouds.
    fn anchor(&self) -> Vec<f64> {
        match self {
            DomainSpec::HalfSpace { normal, offset, .. } => vm::scale(normal, *offset),
            DomainSpec::Box { lower, upper, .. } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| match (l, u) {
                    (Some(a), Some(b)) => 0.5 * (a + b),
                    (Some(a), None) => a + 1.0,
                    (None, Some(b)) => b - 1.0,
                    (None, None) => 0.0,
                })
                .collect(),
            DomainSpec::Ball { center, .. } | DomainSpec::BallComplement { center, .. } => {
                center.clone()
            }
            DomainSpec::ConvexPolytope {
                dimension,
                half_spaces,
            } => {
                // average of facet foot points, then projected into the set
                let mut a = vec![0.0; *dimension];
                for hs in half_spaces {
                    vm::axpy(&mut a, hs.offset / half_spaces.len() as f64, &hs.normal);
                }
                self.project_unchecked(&a)
            }
            DomainSpec::Truncated { center, .. } => center.clone(),
        }
    }

    /// Characteristic size used to pick default probe radii.
    pub fn length_scale(&self) -> f64 {
        match self {
            DomainSpec::Ball { radius, .. } | DomainSpec::BallComplement { radius, .. } => {
                2.0 * radius
            }
            DomainSpec::Truncated { radius, .. } => 1.5 * radius,
            DomainSpec::Box { lower, upper, .. } => {
                let mut s: f64 = 2.0;
                for (l, u) in lower.iter().zip(upper) {
                    if let (Some(a), Some(b)) = (l, u) {
                        s = s.max(b - a);
                    }
                }
                s
            }
            _ => 3.0,
        }
    }
}

fn random_unit(rng: &CounterRng, stream_id: u64, counter: u64, d: usize) -> Vec<f64> {
    loop_unit(rng, stream_id, counter, d)
}

fn loop_unit(rng: &CounterRng, stream_id: u64, counter: u64, d: usize) -> Vec<f64> {
    // Gaussian direction; a fresh sub-counter block per call.
    for attempt in 0..16u64 {
        let base = counter * 16 * d as u64 + attempt * d as u64;
        let v: Vec<f64> = (0..d)
            .map(|i| rng.normal(stream_id, base + i as u64))
            .collect();
        if let Some(u) = vm::normalized(&v) {
            return u;
        }
    }
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

/// Dykstra's alternating projection onto an intersection of convex sets.
/// Each set must expose an exact nearest-point map via `project_unchecked`.
fn dykstra(sets: &[DomainSpec], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut y = x.to_vec();
    let mut corrections = vec![vec![0.0; d]; sets.len()];
    let mut prev = y.clone();
    for iter in 0..20_000 {
        for (s, corr) in sets.iter().zip(corrections.iter_mut()) {
            let mut z = y.clone();
            for i in 0..d {
                z[i] += corr[i];
            }
            let p = s.project_unchecked(&z);
            for i in 0..d {
                corr[i] = z[i] - p[i];
            }
            y = p;
        }
        if iter % 4 == 3 {
            if vm::dist(&y, &prev) < 1e-15 {
                break;
            }
            prev = y.clone();
        }
    }
    // final cyclic polish so membership holds to tolerance
    for s in sets {
        y = s.project_unchecked(&y);
    }
    y
}

/// Finite representation of the inward normal cone at a boundary point.
#[derive(Clone, Debug, Serialize)]
pub struct NormalCone {
    pub base_point: Vec<f64>,
    pub generators: Vec<Vec<f64>>,
    /// Exterior-sphere radius certified for these normals; infinite for
    /// convex domains.
    pub exterior_radius: f64,
}

impl NormalCone {
    /// Worst margin of the defining inequality
    /// `(z - x, n) + |x - z|^2 / (2 r0) >= 0` over the given closure samples.
    pub fn worst_margin(&self, closure_samples: &[Vec<f64>]) -> f64 {
        let mut worst = f64::INFINITY;
        for n in &self.generators {
            for z in closure_samples {
                worst = worst.min(cone_margin(&self.base_point, n, self.exterior_radius, z));
            }
        }
        worst
    }
}

/// `(z - x, n) + |x - z|^2 / (2 r0)`, with the curvature term exactly zero
/// for the infinite-radius sentinel.
pub fn cone_margin(x: &[f64], n: &[f64], r0: f64, z: &[f64]) -> f64 {
    let zx = vm::sub(z, x);
    let lin = vm::dot(&zx, n);
    if r0.is_infinite() {
        lin
    } else {
        lin + vm::dot(&zx, &zx) / (2.0 * r0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionACertificate {
    pub condition: &'static str,
    pub status: CertStatus,
    pub r0: f64,
    pub worst_margin: f64,
    pub boundary_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertStatus {
    Certified,
    Failed,
}

/// Certificate for the normal-cone compatibility condition: a common unit
/// direction `l_x` making angle at most `arccos(1/beta)` with every inward
/// normal in a `delta`-neighborhood of each boundary point.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionBCertificate {
    pub condition: &'static str,
    pub status: CertStatus,
    pub delta: f64,
    pub beta: f64,
    /// Cone half-angle parameter when the certificate was derived from the
    /// interior cone condition; `None` for sampled certificates.
    pub alpha: Option<f64>,
    pub worst_inner_product: f64,
    pub boundary_samples: usize,
    /// Direction achieving the worst sampled bound, with its base point.
    pub worst_point: Vec<f64>,
    pub worst_direction: Vec<f64>,
}

/// Sampled verification of the uniform exterior sphere condition with a
/// candidate radius. Failure is a result, not an error.
pub fn certify_condition_a(
    domain: &DomainSpec,
    boundary_samples: usize,
    r0: f64,
) -> Result<ConditionACertificate> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidArgument("r0 must be positive or infinite".into()));
    }
    let xs = domain.sample_boundary(boundary_samples, 0xA);
    let zs = domain.sample_closure(512, 0xA);
    let mut worst = f64::INFINITY;
    for x in &xs {
        let cone = match domain.normal_cone(x) {
            Ok(c) => c,
            Err(_) => continue,
        };
        for n in &cone.generators {
            for z in &zs {
                worst = worst.min(cone_margin(x, n, r0, z));
            }
        }
    }
    Ok(ConditionACertificate {
        condition: "A",
        status: if worst >= -1e-9 {
            CertStatus::Certified
        } else {
            CertStatus::Failed
        },
        r0,
        worst_margin: worst,
        boundary_samples: xs.len(),
    })
}

/// Search for the best common direction at each sampled boundary point and
/// certify `beta` as the reciprocal of the worst achieved minimum inner
/// product.
pub fn certify_condition_b(
    domain: &DomainSpec,
    delta: f64,
    boundary_samples: usize,
) -> Result<ConditionBCertificate> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let xs = domain.sample_boundary(boundary_samples, 0xB);
    let rng = CounterRng::new(0xBE7A);
    let d = domain.dimension();
    let mut worst = f64::INFINITY;
    let mut worst_point = vec![0.0; d];
    let mut worst_dir = vec![0.0; d];
    for (xi, x) in xs.iter().enumerate() {
        // All representative normals within the delta-ball of x.
        let mut normals: Vec<Vec<f64>> = Vec::new();
        for y in &xs {
            if vm::dist(x, y) <= delta {
                if let Ok(cone) = domain.normal_cone(y) {
                    normals.extend(cone.generators);
                }
            }
        }
        if normals.is_empty() {
            continue;
        }
        let (l, min_ip) = best_common_direction(&normals, &rng, xi as u64);
        if min_ip < worst {
            worst = min_ip;
            worst_point = x.clone();
            worst_dir = l;
        }
    }
    let ok = worst > 0.0 && worst.is_finite();
    Ok(ConditionBCertificate {
        condition: "B",
        status: if ok {
            CertStatus::Certified
        } else {
            CertStatus::Failed
        },
        delta,
        beta: if ok { 1.0 / worst } else { f64::INFINITY },
        alpha: None,
        worst_inner_product: worst,
        boundary_samples: xs.len(),
        worst_point,
        worst_direction: worst_dir,
    })
}

/// Maximize `min_n (l, n)` over unit vectors `l`. The objective is concave
/// on the hemisphere; projected subgradient ascent from 32 random starts,
/// plus the normal average and all pairwise bisectors (exact optima for
/// two-normal cones) guards the nonsmooth min.
fn best_common_direction(raw_normals: &[Vec<f64>], rng: &CounterRng, tag: u64) -> (Vec<f64>, f64) {
    let mut normals: Vec<Vec<f64>> = Vec::new();
    for n in raw_normals {
        if !normals.iter().any(|m| vm::dist(m, n) < 1e-12) {
            normals.push(n.clone());
        }
    }
    let d = normals[0].len();
    let eval = |l: &[f64]| -> f64 {
        normals
            .iter()
            .map(|n| vm::dot(l, n))
            .fold(f64::INFINITY, f64::min)
    };
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(64);
    let mut mean = vec![0.0; d];
    for n in &normals {
        vm::axpy(&mut mean, 1.0, n);
    }
    if let Some(m) = vm::normalized(&mean) {
        starts.push(m);
    }
    starts.push(normals[0].clone());
    let pair_cap = normals.len().min(48);
    for i in 0..pair_cap {
        for j in (i + 1)..pair_cap {
            if let Some(b) = vm::normalized(&vm::add(&normals[i], &normals[j])) {
                starts.push(b);
            }
        }
    }
    for s in 0..32u64 {
        starts.push(random_unit(rng, stream::sampling(0xB1 ^ tag), s, d));
    }
    let mut best = starts[0].clone();
    let mut best_val = eval(&best);
    for start in starts {
        let v0 = eval(&start);
        if v0 > best_val {
            best_val = v0;
            best = start.clone();
        }
        let mut l = start;
        for it in 0..200 {
            // subgradient: the normal attaining the min
            let mut min_v = f64::INFINITY;
            let mut g = &normals[0];
            for n in &normals {
                let v = vm::dot(&l, n);
                if v < min_v {
                    min_v = v;
                    g = n;
                }
            }
            let step = 0.5 / (1.0 + it as f64 / 10.0);
            let mut next = l.clone();
            vm::axpy(&mut next, step, g);
            match vm::normalized(&next) {
                Some(u) => l = u,
                None => break,
            }
        }
        let v = eval(&l);
        if v > best_val {
            best_val = v;
            best = l;
        }
    }
    (best, best_val)
}

/// The interior cone condition with aperture parameter `alpha` implies the
/// normal compatibility condition with `beta = (1 - alpha^2)^{-1/2}`.
pub fn beta_from_alpha(alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "cone parameter alpha must lie in [0, 1), got {alpha}"
        )));
    }
    Ok((1.0 - alpha * alpha).powf(-0.5))
}

/// Truncate a convex domain by a ball and return the analytic constants
/// `delta = R0/2`, `beta = sqrt(1 + (2R/R0)^2)` certified for the bounded
/// convex intersection.
pub fn truncate(
    domain: &DomainSpec,
    x0: &[f64],
    big_r: f64,
    r0_inner: f64,
) -> Result<(DomainSpec, f64, f64)> {
    if !domain.is_convex() {
        return Err(Error::Unsupported("truncation requires a convex base".into()));
    }
    domain.check_dim(x0)?;
    if big_r < r0_inner {
        return Err(Error::InvalidArgument(format!(
            "truncation radius R={big_r} must be >= inner radius R0={r0_inner}"
        )));
    }
    let truncated = DomainSpec::Truncated {
        base: Box::new(domain.clone()),
        center: x0.to_vec(),
        radius: big_r,
        inner_radius: r0_inner,
    };
    truncated.validate()?; // includes the sampled inner-ball check
    let delta = r0_inner / 2.0;
    let beta = (1.0 + (2.0 * big_r / r0_inner).powi(2)).sqrt();
    Ok((truncated, delta, beta))
}

/// Largest certifying `delta` from the fixed candidate list
/// `{R0/2, R0/4, R0/8}`, paired with its sampled certificate.
pub fn certify_condition_b_auto(
    domain: &DomainSpec,
    r0_inner: f64,
    boundary_samples: usize,
) -> Result<ConditionBCertificate> {
    let mut last: Option<ConditionBCertificate> = None;
    for div in [2.0, 4.0, 8.0] {
        let cert = certify_condition_b(domain, r0_inner / div, boundary_samples)?;
        if cert.status == CertStatus::Certified {
            return Ok(cert);
        }
        last = Some(cert);
    }
    Ok(last.expect("candidate list is nonempty"))
}
