//! Reference fields: the exact min-slack oracle, the unblended witness field,
//! a discontinuity scanner and fixed-rate gradient walks that expose the
//! looping and jittering of witness-based answers.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blend;
use crate::config::BuildConfig;
use crate::cover::DagStructure;
use crate::error::{Error, Result};
use crate::polytope::Polytope;
use crate::sampling::sample_polytope;
use crate::shapes;

/// Lipschitz budget of the discontinuity scan, in normalized coordinates.
pub const SCAN_LIPSCHITZ: f64 = 4.0;
/// Window of recent points searched for revisits.
pub const CYCLE_WINDOW: usize = 64;
/// Consecutive short moves that count as convergence.
pub const CONVERGED_MOVES: usize = 5;

/// A scalar field over a polytope with a gradient.
pub trait Field {
    fn dim(&self) -> usize;
    fn value(&self, q: &DVector<f64>) -> Result<f64>;
    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>>;
    /// The polytope the field lives on; walks stay strictly inside it.
    fn domain(&self) -> &Polytope;
}

/// Exact boundary distance `min_j (b_j - a_j . x)`.
pub struct ExactField<'a>(pub &'a Polytope);

impl Field for ExactField<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, q: &DVector<f64>) -> Result<f64> {
        self.0.exact_boundary_distance(q)
    }

    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.value(q)?;
        let (j, _) = self.0.min_slack(q);
        Ok(-&self.0.halfspaces()[j].a)
    }

    fn domain(&self) -> &Polytope {
        self.0
    }
}

/// Representative distance of the single patch found by descent.
pub struct WitnessField<'a> {
    pub structure: &'a DagStructure,
}

impl<'a> WitnessField<'a> {
    pub fn new(structure: &'a DagStructure) -> Self {
        Self { structure }
    }

    fn patch(&self, q: &DVector<f64>) -> Result<usize> {
        check_inside(&self.structure.polytope, q)?;
        Ok(self.structure.witness_value(q)?.1)
    }
}

fn check_inside(p: &Polytope, q: &DVector<f64>) -> Result<()> {
    if q.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.len() });
    }
    if !p.contains(q, 0.0) {
        return Err(Error::OutsidePolytope);
    }
    Ok(())
}

/// `v_rep(q)` of the descent leaf, without blending.
pub fn witness_eval(w: &WitnessField, q: &DVector<f64>) -> Result<f64> {
    w.value(q)
}

impl Field for WitnessField<'_> {
    fn dim(&self) -> usize {
        self.structure.dim()
    }

    fn value(&self, q: &DVector<f64>) -> Result<f64> {
        let pi = self.patch(q)?;
        Ok(self.structure.patches[pi].v(q))
    }

    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let pi = self.patch(q)?;
        Ok(-&self.structure.patches[pi].a)
    }

    fn domain(&self) -> &Polytope {
        &self.structure.polytope
    }
}

/// The smooth blended field.
pub struct BlendedField<'a> {
    pub structure: &'a DagStructure,
}

impl<'a> BlendedField<'a> {
    pub fn new(structure: &'a DagStructure) -> Self {
        Self { structure }
    }
}

impl Field for BlendedField<'_> {
    fn dim(&self) -> usize {
        self.structure.dim()
    }

    fn value(&self, q: &DVector<f64>) -> Result<f64> {
        check_inside(&self.structure.polytope, q)?;
        Ok(blend::eval(self.structure, q)?.value)
    }

    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        check_inside(&self.structure.polytope, q)?;
        Ok(blend::eval(self.structure, q)?.gradient)
    }

    fn domain(&self) -> &Polytope {
        &self.structure.polytope
    }
}

/// Parameters `t` of the sample pairs `(x_k, x_{k+1})` whose values differ by
/// more than `SCAN_LIPSCHITZ * h`, with the size of each jump.
pub fn scan_discontinuities(
    field: &dyn Field,
    p0: &DVector<f64>,
    p1: &DVector<f64>,
    steps: usize,
) -> Result<Vec<(f64, f64)>> {
    scan_with_budget(field, p0, p1, steps, SCAN_LIPSCHITZ)
}

/// As [`scan_discontinuities`] with an explicit Lipschitz budget.
pub fn scan_with_budget(
    field: &dyn Field,
    p0: &DVector<f64>,
    p1: &DVector<f64>,
    steps: usize,
    lipschitz: f64,
) -> Result<Vec<(f64, f64)>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("a scan needs at least one step".into()));
    }
    let h = (p1 - p0).norm() / steps as f64;
    let budget = lipschitz * h;
    let mut out = Vec::new();
    let mut prev = field.value(p0)?;
    for k in 0..steps {
        let t = (k + 1) as f64 / steps as f64;
        let next = field.value(&shapes::lerp(p0, p1, t))?;
        let jump = (next - prev).abs();
        if jump > budget {
            out.push((k as f64 / steps as f64, jump));
        }
        prev = next;
    }
    Ok(out)
}

/// Random chords between pairs of seeded interior points.
pub fn random_segments(p: &Polytope, count: usize, seed: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
    let pts = sample_polytope(p, 2 * count, seed, 0x5e9);
    pts.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect()
}

/// Which way a walk follows the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Heading {
    /// Down the field, towards the boundary.
    Boundary,
    /// Up the field, towards the deepest point.
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxSteps,
    Cycled,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxSteps => "maxSteps",
            Termination::Cycled => "cycled",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentTrace {
    pub points: Vec<DVector<f64>>,
    pub values: Vec<f64>,
    pub terminated: Termination,
}

impl DescentTrace {
    /// Number of consecutive moves that turn by more than a right angle.
    pub fn jitter(&self) -> usize {
        let moves: Vec<DVector<f64>> = self.points.windows(2).map(|w| &w[1] - &w[0]).collect();
        moves.windows(2).filter(|m| m[0].dot(&m[1]) < 0.0).count()
    }

    /// Whether the values never move against the heading by more than `tol`.
    pub fn is_monotone(&self, heading: Heading, tol: f64) -> bool {
        self.values.windows(2).all(|v| match heading {
            Heading::Boundary => v[1] <= v[0] + tol,
            Heading::Interior => v[1] >= v[0] - tol,
        })
    }
}

/// Gradient walk `x <- x -/+ step * grad(x)`. A move that would leave the
/// domain is halved until its end point is strictly inside. The walk stops
/// after `CONVERGED_MOVES` consecutive moves shorter than `step / 10`, when a
/// full-length move lands within `step / 10` of one of the last
/// `CYCLE_WINDOW` points, or after `max_steps` moves.
pub fn trace_descent(
    field: &dyn Field,
    start: &DVector<f64>,
    step: f64,
    max_steps: usize,
    heading: Heading,
) -> Result<DescentTrace> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let domain = field.domain();
    let sign = match heading {
        Heading::Boundary => -1.0,
        Heading::Interior => 1.0,
    };
    let radius = step / 10.0;
    let mut x = start.clone();
    let mut points = vec![x.clone()];
    let mut values = vec![field.value(&x)?];
    let mut short = 0;
    for _ in 0..max_steps {
        let mut mv = field.gradient(&x)? * (sign * step);
        let mut halvings = 0;
        while !domain.contains(&(&x + &mv), 0.0) || domain.min_slack(&(&x + &mv)).1 <= 0.0 {
            mv *= 0.5;
            halvings += 1;
            if halvings > 60 {
                mv.fill(0.0);
                break;
            }
        }
        x += &mv;
        let len = mv.norm();
        // a revisit only counts for a full move; shrinking moves are convergence
        let revisit = halvings == 0
            && len >= radius
            && points.iter().rev().skip(1).take(CYCLE_WINDOW).any(|p| (p - &x).norm() <= radius);
        points.push(x.clone());
        values.push(field.value(&x)?);
        if revisit {
            return Ok(DescentTrace { points, values, terminated: Termination::Cycled });
        }
        short = if len < radius { short + 1 } else { 0 };
        if short >= CONVERGED_MOVES {
            return Ok(DescentTrace { points, values, terminated: Termination::Converged });
        }
    }
    Ok(DescentTrace { points, values, terminated: Termination::MaxSteps })
}

/// The curated demo inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Narrow wedge, walking inwards from near one edge.
    Wedge,
    /// Square, walking towards the center from off-center.
    SquareLoop,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wedge" => Ok(Scenario::Wedge),
            "square-loop" => Ok(Scenario::SquareLoop),
            other => Err(Error::InvalidArgument(format!("unknown scenario '{other}'"))),
        }
    }
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Wedge => "wedge",
            Scenario::SquareLoop => "square-loop",
        }
    }

    pub fn polytope(self) -> Polytope {
        match self {
            Scenario::Wedge => shapes::wedge(std::f64::consts::FRAC_PI_6, 1.0),
            Scenario::SquareLoop => shapes::unit_square(),
        }
    }

    pub fn epsilon(self) -> f64 {
        0.2
    }

    pub fn heading(self) -> Heading {
        Heading::Interior
    }

    /// Walk start and step, in normalized coordinates of the built structure.
    pub fn walk(self, s: &DagStructure) -> (DVector<f64>, f64) {
        let p = &s.polytope;
        let (c, _) = p.chebyshev_center();
        match self {
            Scenario::Wedge => {
                // a third of the way from the apex, off the axis
                let (lo, hi) = p.bounding_box();
                let x = DVector::from_vec(vec![
                    lo[0] + 0.3 * (hi[0] - lo[0]),
                    0.5 * (lo[1] + hi[1]) + 0.045 * (hi[1] - lo[1]),
                ]);
                (x, 0.005)
            }
            Scenario::SquareLoop => {
                let mut x = c.clone();
                x[0] += 0.12;
                x[1] += 0.05;
                (x, 0.01)
            }
        }
    }
}

/// Outcome of one demo run.
#[derive(Clone, Debug)]
pub struct DemoReport {
    pub scenario: Scenario,
    pub structure: DagStructure,
    pub witness: DescentTrace,
    pub blended: DescentTrace,
    /// Segments (of `segments` scanned) with at least one detected jump.
    pub witness_jump_segments: usize,
    pub blended_jump_segments: usize,
    pub segments: usize,
}

impl DemoReport {
    pub fn witness_misbehaves(&self) -> bool {
        self.witness.terminated != Termination::Converged || self.witness.jitter() >= 10
    }

    pub fn blended_behaves(&self) -> bool {
        self.blended.terminated == Termination::Converged && self.blended.jitter() == 0
    }
}

pub const DEMO_SEGMENTS: usize = 100;
pub const DEMO_SCAN_STEPS: usize = 2000;
pub const DEMO_MAX_STEPS: usize = 2000;

/// Builds the scenario, walks both fields and scans both for jumps.
pub fn run_demo(scenario: Scenario, seed: u64) -> Result<DemoReport> {
    let config = BuildConfig::new(scenario.epsilon(), seed);
    let structure = crate::cover::build(&scenario.polytope(), &config)?;
    let (start, step) = scenario.walk(&structure);
    let witness_field = WitnessField::new(&structure);
    let blended_field = BlendedField::new(&structure);
    let heading = scenario.heading();
    let witness = trace_descent(&witness_field, &start, step, DEMO_MAX_STEPS, heading)?;
    let blended = trace_descent(&blended_field, &start, step, DEMO_MAX_STEPS, heading)?;
    let mut rng_seed = ChaCha8Rng::seed_from_u64(seed);
    let segments = random_segments(&structure.polytope, DEMO_SEGMENTS, rand::Rng::random(&mut rng_seed));
    let (mut wj, mut bj) = (0, 0);
    for (p0, p1) in &segments {
        if !scan_discontinuities(&witness_field, p0, p1, DEMO_SCAN_STEPS)?.is_empty() {
            wj += 1;
        }
        if !scan_discontinuities(&blended_field, p0, p1, DEMO_SCAN_STEPS)?.is_empty() {
            bj += 1;
        }
    }
    Ok(DemoReport {
        scenario,
        structure,
        witness,
        blended,
        witness_jump_segments: wj,
        blended_jump_segments: bj,
        segments: segments.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(eps: f64) -> DagStructure {
        crate::cover::build(&shapes::unit_square(), &BuildConfig::new(eps, 1)).unwrap()
    }

    #[test]
    fn exact_field_has_no_jumps() {
        let p = shapes::regular_polygon(7, 1.0);
        let f = ExactField(&p);
        for (a, b) in random_segments(&p, 20, 3) {
            assert!(scan_discontinuities(&f, &a, &b, 500).unwrap().is_empty());
        }
    }

    #[test]
    fn scan_reports_a_step_function_jump() {
        struct Step(Polytope);
        impl Field for Step {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, q: &DVector<f64>) -> Result<f64> {
                Ok(if q[0] < 0.5 { 0.0 } else { 0.1 })
            }
            fn gradient(&self, _: &DVector<f64>) -> Result<DVector<f64>> {
                Ok(DVector::zeros(2))
            }
            fn domain(&self) -> &Polytope {
                &self.0
            }
        }
        let f = Step(shapes::unit_square());
        let a = DVector::from_vec(vec![0.1, 0.5]);
        let b = DVector::from_vec(vec![0.9, 0.5]);
        let jumps = scan_discontinuities(&f, &a, &b, 100).unwrap();
        assert_eq!(jumps.len(), 1);
        assert!((jumps[0].0 - 0.49).abs() < 1e-12);
        assert!((jumps[0].1 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_step_rejected() {
        let p = shapes::unit_square();
        let x = DVector::from_vec(vec![0.5, 0.5]);
        assert!(trace_descent(&ExactField(&p), &x, 0.0, 10, Heading::Boundary).is_err());
    }

    #[test]
    fn exact_walk_to_boundary_converges_straight() {
        let p = shapes::unit_square();
        let x = DVector::from_vec(vec![0.3, 0.45]);
        let t = trace_descent(&ExactField(&p), &x, 0.02, 1000, Heading::Boundary).unwrap();
        assert_eq!(t.terminated, Termination::Converged);
        assert_eq!(t.jitter(), 0);
        assert!(t.points.last().unwrap()[0] < 1e-3);
        assert!(t.is_monotone(Heading::Boundary, 0.0));
    }

    #[test]
    fn witness_matches_blend_where_one_patch_covers() {
        let s = square(0.2);
        let w = WitnessField::new(&s);
        let b = BlendedField::new(&s);
        let cutoff = s.config.tolerances.mollifier_cutoff;
        for q in sample_polytope(&s.polytope, 2000, 5, 0) {
            let (v, pi) = s.witness_value(&q).unwrap();
            let alone = blend::blend(&[&s.patches[pi]], &[pi], &q, cutoff);
            if let Ok(r) = alone {
                assert!((r.value - v).abs() <= 1e-12);
            }
            let r = blend::eval(&s, &q).unwrap();
            if r.contributions.iter().filter(|c| c.psi > 0.0).count() == 1 {
                assert!((w.value(&q).unwrap() - b.value(&q).unwrap()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn witness_is_deterministic_and_sandwiched() {
        let s = square(0.1);
        let w = WitnessField::new(&s);
        for q in sample_polytope(&s.polytope, 2000, 9, 0) {
            let v = witness_eval(&w, &q).unwrap();
            let d = s.polytope.exact_boundary_distance(&q).unwrap();
            assert!(v >= d - 1e-9 && v <= d + 0.1 + 1e-9);
            assert_eq!(v, witness_eval(&w, &q).unwrap());
        }
        let far = DVector::from_vec(vec![5.0, 5.0]);
        assert!(matches!(witness_eval(&w, &far), Err(Error::OutsidePolytope)));
    }

    #[test]
    fn scenario_names_parse() {
        assert_eq!("wedge".parse::<Scenario>().unwrap(), Scenario::Wedge);
        assert_eq!("square-loop".parse::<Scenario>().unwrap(), Scenario::SquareLoop);
        assert!("spiral".parse::<Scenario>().is_err());
    }
}
