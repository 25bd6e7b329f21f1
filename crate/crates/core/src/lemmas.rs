//! Randomized checks of the geometric facts the cover relies on: inscribed
//! ellipsoids approximate their Macbeath regions, intersecting regions expand
//! into each other, vertical rays vary slowly inside a region, and covering
//! ellipsoids are not too thin.
//!
//! Each check draws instances from seeded random polytopes in two and three
//! dimensions (and their lifted bodies) and counts only instances whose
//! premise holds.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{default_lambda_c, expansion_factor};
use crate::error::Result;
use crate::hrep;
use crate::lifted::LiftedBody;
use crate::macbeath::{inscribed_ellipsoid, macbeath_ellipsoid, macbeath_region, Ellipsoid, MacbeathRegion};
use crate::polytope::{Halfspace, Polytope};
use crate::sampling::{sample_lifted, sample_polytope};
use crate::shapes::random_polytope;

/// Solver tolerance used for every ellipsoid in this module.
const VOLUME_TOL: f64 = 1e-7;
/// Slack allowed on region containment comparisons.
const CONTAINMENT_TOL: f64 = 1e-9;

/// Result of one randomized check.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaOutcome {
    pub name: &'static str,
    /// Instances whose premise held.
    pub instances: usize,
    pub failures: usize,
    /// Worst value of the checked ratio over all instances.
    pub worst: f64,
    /// The ratio's allowed limit (upper, except for ball containment where it is a lower limit).
    pub bound: f64,
}

impl LemmaOutcome {
    pub fn passed(&self, required: usize) -> bool {
        self.failures == 0 && self.instances >= required
    }
}

/// A convex body as halfspaces plus a sampler of strictly interior points.
struct Body {
    polytope: Polytope,
    lifted: Option<LiftedBody>,
    halfspaces: Vec<Halfspace>,
}

impl Body {
    fn dim(&self) -> usize {
        self.halfspaces[0].a.len()
    }

    fn interior_point(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let p = &self.polytope;
        let c = p.chebyshev_center().0;
        let x = sample_polytope(p, 1, rng.random(), 0).pop().expect("one sample");
        let x = &c + (x - &c) * rng.random_range(0.0..0.97);
        match &self.lifted {
            None => x,
            Some(_) => {
                let d = p.dim();
                let mut q = DVector::zeros(d + 1);
                q.rows_mut(0, d).copy_from(&x);
                q[d] = p.min_slack(&x).1 * rng.random_range(0.02..0.98);
                q
            }
        }
    }
}

fn bodies(seed: u64) -> Vec<Body> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..8 {
        let dim = 2 + i % 2;
        let facets = rng.random_range(dim + 3..=8);
        let p = random_polytope(dim, facets, rng.random()).normalize().0;
        let lifted = LiftedBody::lift(&p);
        out.push(Body { halfspaces: p.halfspaces().to_vec(), polytope: p.clone(), lifted: None });
        out.push(Body { halfspaces: lifted.halfspaces(), polytope: p, lifted: Some(lifted) });
    }
    out
}

/// Random point of the region as a Dirichlet-weighted mix of its vertices.
fn point_in(region: &MacbeathRegion, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let verts = region.vertices(1e-10);
    let w: Vec<f64> = verts.iter().map(|_| -rng.random_range(1e-12..1.0f64).ln()).collect();
    let total: f64 = w.iter().sum();
    verts.iter().zip(&w).fold(DVector::zeros(region.center().len()), |acc, (v, wi)| acc + v * (wi / total))
}

fn split(hs: &[Halfspace]) -> (Vec<DVector<f64>>, Vec<f64>) {
    (hs.iter().map(|h| h.a.clone()).collect(), hs.iter().map(|h| h.b).collect())
}

/// The inscribed ellipsoid lies inside its region, and the region lies inside
/// the ellipsoid scaled by `sqrt(n) (1 + 1e-3)` about the center.
pub fn john_containment(instances: usize, seed: u64) -> Result<LemmaOutcome> {
    let bodies = bodies(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10);
    let slack = 1e-3;
    let mut out = LemmaOutcome { name: "john_containment", instances: 0, failures: 0, worst: 0.0, bound: 1.0 + slack };
    for k in 0..instances {
        let body = &bodies[k % bodies.len()];
        let x = body.interior_point(&mut rng);
        let lambda = rng.random_range(0.05..1.0);
        let region = macbeath_region(&body.halfspaces, &x, lambda, 0.0)?;
        let e = inscribed_ellipsoid(&region, VOLUME_TOL)?;
        let n = body.dim() as f64;
        let inside = region.halfspaces().iter().all(|h| e.support(&h.a) <= h.b + 1e-8 * h.b.abs().max(1e-4));
        let ratio = region
            .vertices(1e-10)
            .iter()
            .map(|v| (e.value(v) / n).sqrt())
            .fold(0.0, f64::max);
        out.worst = out.worst.max(ratio);
        out.instances += 1;
        if !inside || !(ratio <= out.bound) {
            out.failures += 1;
        }
    }
    Ok(out)
}

/// With `lambda = 0.2`: when two regions intersect, the second lies inside the
/// first expanded by `beta = (3 + lambda) / (1 - lambda)`. Measured as the
/// largest support overshoot relative to the expanded slab width.
pub fn expansion_containment(instances: usize, seed: u64) -> Result<LemmaOutcome> {
    let bodies = bodies(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x20);
    let lambda = 0.2;
    let beta = expansion_factor(lambda);
    let mut out = LemmaOutcome { name: "expansion_containment", instances: 0, failures: 0, worst: 0.0, bound: 1.0 };
    let mut attempts = 0;
    while out.instances < instances && attempts < 20 * instances {
        attempts += 1;
        let body = &bodies[attempts % bodies.len()];
        let x = body.interior_point(&mut rng);
        let rx = macbeath_region(&body.halfspaces, &x, lambda, 0.0)?;
        let y = point_in(&rx.with_lambda(rng.random_range(0.5..2.5) * lambda)?, &mut rng);
        let Ok(ry) = macbeath_region(&body.halfspaces, &y, lambda, 0.0) else {
            continue;
        };
        let mut both = rx.halfspaces();
        both.extend(ry.halfspaces());
        let (normals, offsets) = split(&both);
        if !hrep::feasible(&normals, &offsets) {
            continue;
        }
        let big = rx.with_lambda(beta * lambda)?;
        let ratio = big
            .halfspaces()
            .iter()
            .zip(rx.slacks().iter().flat_map(|s| [s, s]))
            .map(|(h, s)| {
                let reach = ry.support(&h.a).unwrap_or(f64::INFINITY) - (h.b - beta * lambda * s);
                reach / (beta * lambda * s)
            })
            .fold(0.0, f64::max);
        out.worst = out.worst.max(ratio);
        out.instances += 1;
        if !big.contains_region(&ry, CONTAINMENT_TOL) {
            out.failures += 1;
        }
    }
    Ok(out)
}

/// Ellipsoid form of [`expansion_containment`]: when the inscribed ellipsoids
/// of two regions meet, the second lies inside the first scaled by
/// `beta sqrt(n)`. Measured as the scale actually needed over that factor.
pub fn ellipsoid_expansion(instances: usize, seed: u64) -> Result<LemmaOutcome> {
    let bodies = bodies(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x30);
    let lambda = 0.2;
    let beta = expansion_factor(lambda);
    let mut out = LemmaOutcome { name: "ellipsoid_expansion", instances: 0, failures: 0, worst: 0.0, bound: 1.0 + 1e-3 };
    let mut attempts = 0;
    while out.instances < instances && attempts < 20 * instances {
        attempts += 1;
        let body = &bodies[attempts % bodies.len()];
        let x = body.interior_point(&mut rng);
        let rx = macbeath_region(&body.halfspaces, &x, lambda, 0.0)?;
        let ex = inscribed_ellipsoid(&rx, VOLUME_TOL)?;
        let y = point_in(&rx.with_lambda(rng.random_range(0.5..2.0) * lambda)?, &mut rng);
        let Ok(ey) = macbeath_ellipsoid(&body.halfspaces, &y, lambda, VOLUME_TOL) else {
            continue;
        };
        if !crate::macbeath::ellipsoids_intersect(&ex, &ey, 0.0) {
            continue;
        }
        let factor = beta * (body.dim() as f64).sqrt();
        let ratio = ex.scaled(factor)?.max_value_over(&ey).sqrt();
        out.worst = out.worst.max(ratio);
        out.instances += 1;
        if !(ratio <= out.bound) {
            out.failures += 1;
        }
    }
    Ok(out)
}

/// In a lifted body, every point `y` of a region around `x` has an upward
/// vertical ray within `[(1 - lambda), (1 + lambda)]` times the ray at `x`.
/// Measured as `|ray(y) / ray(x) - 1| / lambda`.
pub fn ray_sandwich(instances: usize, seed: u64) -> Result<LemmaOutcome> {
    let bodies: Vec<Body> = bodies(seed).into_iter().filter(|b| b.lifted.is_some()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x40);
    let mut out = LemmaOutcome { name: "ray_sandwich", instances: 0, failures: 0, worst: 0.0, bound: 1.0 };
    for k in 0..instances {
        let body = &bodies[k % bodies.len()];
        let lifted = body.lifted.as_ref().expect("lifted body");
        let x = body.interior_point(&mut rng);
        let lambda = rng.random_range(0.05..0.9);
        let region = macbeath_region(&body.halfspaces, &x, lambda, 0.0)?;
        let y = point_in(&region, &mut rng);
        let rx = lifted.ray_up_distance(&x)?;
        let ry = lifted.ray_up_distance(&y)?;
        let ratio = (ry / rx - 1.0).abs() / lambda;
        out.worst = out.worst.max(ratio);
        out.instances += 1;
        if !(ry >= (1.0 - lambda) * rx - 1e-9 && ry <= (1.0 + lambda) * rx + 1e-9) {
            out.failures += 1;
        }
    }
    Ok(out)
}

/// Covering ellipsoids at `x` in the lifted body, built against the body
/// raised by `delta`, contain a ball of radius
/// `lambda_c delta / sqrt(2 (d + 1))`. Measured as the smallest semi-axis over
/// that radius (a lower limit of 1).
pub fn ball_containment(instances: usize, seed: u64) -> Result<LemmaOutcome> {
    let bodies: Vec<Body> = bodies(seed).into_iter().filter(|b| b.lifted.is_some()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50);
    let mut out =
        LemmaOutcome { name: "ball_containment", instances: 0, failures: 0, worst: f64::INFINITY, bound: 1.0 };
    for k in 0..instances {
        let body = &bodies[k % bodies.len()];
        let lifted = body.lifted.as_ref().expect("lifted body");
        let d = body.polytope.dim();
        let delta = [0.4, 0.2, 0.1, 0.05, 0.025][rng.random_range(0..5)];
        let expanded = lifted.expand(delta)?;
        let x = sample_lifted(&body.polytope, 1, rng.random(), 0).pop().expect("one sample");
        let lambda_c = default_lambda_c(d);
        let e: Ellipsoid = macbeath_ellipsoid(expanded.upper(), &x, lambda_c, VOLUME_TOL)?;
        let ratio = e.min_radius() / (lambda_c * delta / (2.0 * (d + 1) as f64).sqrt());
        out.worst = out.worst.min(ratio);
        out.instances += 1;
        if !(ratio >= out.bound * (1.0 - 1e-6)) {
            out.failures += 1;
        }
    }
    Ok(out)
}

/// All checks with `instances` each.
pub fn run_all(instances: usize, seed: u64) -> Result<Vec<LemmaOutcome>> {
    Ok(vec![
        john_containment(instances, seed)?,
        expansion_containment(instances, seed)?,
        ellipsoid_expansion(instances, seed)?,
        ray_sandwich(instances, seed)?,
        ball_containment(instances, seed)?,
    ])
}
