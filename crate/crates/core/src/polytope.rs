//! H-representation polytopes, normalization to unit diameter, and the exact
//! min-slack boundary distance.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::hrep::{self, LpOutcome};

/// Closed halfspace `a . x <= b` with a unit outward normal.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub a: DVector<f64>,
    pub b: f64,
}

impl Halfspace {
    /// Requires `|a| = 1` within the unit-normal tolerance.
    pub fn new(a: DVector<f64>, b: f64) -> Result<Self> {
        let norm = a.norm();
        if (norm - 1.0).abs() > Tolerances::default().unit_normal {
            return Err(Error::InvalidPolytope(format!(
                "normal has length {norm}, expected 1"
            )));
        }
        Ok(Self { a, b })
    }

    /// Rescales an arbitrary nonzero normal (and the offset with it).
    pub fn from_raw(a: DVector<f64>, b: f64) -> Result<Self> {
        let norm = a.norm();
        if !(norm.is_finite() && norm > 0.0) || !b.is_finite() {
            return Err(Error::InvalidPolytope("degenerate halfspace".into()));
        }
        Ok(Self { a: a / norm, b: b / norm })
    }

    #[inline]
    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        self.b - self.a.dot(x)
    }
}

/// Bounded convex polytope with nonempty interior, `{x : a_j . x <= b_j}`.
///
/// Redundant halfspaces are kept; the min-slack distance stays exact with them.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    dim: usize,
    halfspaces: Vec<Halfspace>,
}

/// Uniform scaling followed by a translation: `x' = scale * x + translation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub translation: Vec<f64>,
}

impl NormalizationTransform {
    pub fn identity(dim: usize) -> Self {
        Self { scale: 1.0, translation: vec![0.0; dim] }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x * self.scale + DVector::from_column_slice(&self.translation)
    }

    pub fn invert(&self, y: &DVector<f64>) -> DVector<f64> {
        (y - DVector::from_column_slice(&self.translation)) / self.scale
    }

    /// Maps a normalized-coordinate length back to original units.
    pub fn length_to_original(&self, len: f64) -> f64 {
        len / self.scale
    }
}

impl Polytope {
    /// Validates dimensions, unit normals, boundedness and a nonempty interior.
    pub fn new(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPolytope("dimension must be positive".into()));
        }
        for h in &halfspaces {
            if h.a.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: h.a.len() });
            }
            if ((h.a.norm()) - 1.0).abs() > Tolerances::default().unit_normal {
                return Err(Error::InvalidPolytope("normals must be unit length".into()));
            }
        }
        let p = Self { dim, halfspaces };
        if p.halfspaces.len() <= dim {
            return Err(Error::UnboundedPolytope);
        }
        let (normals, offsets) = (p.normals(), p.offsets());
        let radius = match hrep::chebyshev_center(&normals, &offsets) {
            None => return Err(Error::EmptyInterior),
            Some((_, r)) => r,
        };
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut e = DVector::zeros(dim);
                e[i] = sign;
                match hrep::support(&normals, &offsets, &e) {
                    LpOutcome::Unbounded => return Err(Error::UnboundedPolytope),
                    LpOutcome::Infeasible => return Err(Error::EmptyInterior),
                    LpOutcome::Optimal { .. } => {}
                }
            }
        }
        if !(radius > Tolerances::default().geometric) {
            return Err(Error::EmptyInterior);
        }
        Ok(p)
    }

    /// Builds from rows with arbitrary (nonzero) normals.
    pub fn from_raw(dim: usize, rows: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let hs = rows
            .into_iter()
            .map(|(a, b)| {
                if a.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: a.len() });
                }
                Halfspace::from_raw(DVector::from_vec(a), b)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, hs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn len(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfspaces.is_empty()
    }

    pub fn normals(&self) -> Vec<DVector<f64>> {
        self.halfspaces.iter().map(|h| h.a.clone()).collect()
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.halfspaces.iter().map(|h| h.b).collect()
    }

    /// `(index, slack)` of the tightest halfspace; ties resolve to the lowest index.
    pub fn min_slack(&self, x: &DVector<f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, h) in self.halfspaces.iter().enumerate() {
            let s = h.slack(x);
            if s < best.1 {
                best = (j, s);
            }
        }
        best
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.slack(x) >= -tol)
    }

    /// Exact Euclidean distance to the boundary for a point inside.
    pub fn exact_boundary_distance(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let (_, s) = self.min_slack(x);
        if s < -Tolerances::default().membership {
            return Err(Error::PointOutside { slack: s });
        }
        Ok(s.max(0.0))
    }

    pub fn chebyshev_center(&self) -> (DVector<f64>, f64) {
        hrep::chebyshev_center(&self.normals(), &self.offsets())
            .expect("validated polytope has an interior")
    }

    pub fn vertices(&self) -> Vec<DVector<f64>> {
        hrep::vertices(&self.normals(), &self.offsets(), 1e-9)
    }

    /// Support value `max_{x in P} u . x`.
    pub fn support(&self, u: &DVector<f64>) -> f64 {
        match hrep::support(&self.normals(), &self.offsets(), u) {
            LpOutcome::Optimal { value, .. } => value,
            _ => unreachable!("validated polytope is bounded and nonempty"),
        }
    }

    /// Exact for `d <= 3` and `n <= 128` (vertex enumeration); otherwise the
    /// largest width over 1000 fixed pseudo-random directions.
    pub fn diameter(&self) -> f64 {
        if self.dim <= 3 && self.len() <= 128 {
            let v = self.vertices();
            let mut best: f64 = 0.0;
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    best = best.max((&v[i] - &v[j]).norm());
                }
            }
            return best;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1a3);
        let mut best: f64 = 0.0;
        for _ in 0..1000 {
            let u = random_unit(&mut rng, self.dim);
            let w = self.support(&u) + self.support(&-&u);
            best = best.max(w);
        }
        best
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (DVector<f64>, DVector<f64>) {
        let mut lo = DVector::zeros(self.dim);
        let mut hi = DVector::zeros(self.dim);
        for i in 0..self.dim {
            let mut e = DVector::zeros(self.dim);
            e[i] = 1.0;
            hi[i] = self.support(&e);
            lo[i] = -self.support(&-e);
        }
        (lo, hi)
    }

    /// Largest `t >= 0` with `x + t u` inside; `x` must be inside.
    pub fn ray_exit(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let mut t = f64::INFINITY;
        for h in &self.halfspaces {
            let rate = h.a.dot(u);
            if rate > 0.0 {
                t = t.min(h.slack(x).max(0.0) / rate);
            }
        }
        t
    }

    /// Image of the polytope under `x' = scale x + translation`.
    pub fn transformed(&self, t: &NormalizationTransform) -> Polytope {
        let shift = DVector::from_column_slice(&t.translation);
        let halfspaces = self
            .halfspaces
            .iter()
            .map(|h| Halfspace { a: h.a.clone(), b: t.scale * h.b + h.a.dot(&shift) })
            .collect();
        Polytope { dim: self.dim, halfspaces }
    }

    /// Scales to unit diameter with the Chebyshev centre at the origin.
    pub fn normalize(&self) -> (Polytope, NormalizationTransform) {
        let (center, _) = self.chebyshev_center();
        let scale = 1.0 / self.diameter();
        let translation = (-center * scale).as_slice().to_vec();
        let t = NormalizationTransform { scale, translation };
        (self.transformed(&t), t)
    }

    pub fn to_file(&self) -> PolytopeFile {
        PolytopeFile {
            dim: self.dim,
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| HalfspaceRecord { a: h.a.as_slice().to_vec(), b: h.b })
                .collect(),
        }
    }

    pub fn from_file(file: &PolytopeFile) -> Result<Self> {
        Self::from_raw(
            file.dim,
            file.halfspaces.iter().map(|h| (h.a.clone(), h.b)).collect(),
        )
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: PolytopeFile = serde_json::from_str(s)?;
        Self::from_file(&file)
    }
}

/// On-disk polytope: `{"dim": d, "halfspaces": [{"a": [..], "b": ..}, ..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeFile {
    pub dim: usize,
    pub halfspaces: Vec<HalfspaceRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceRecord {
    pub a: Vec<f64>,
    pub b: f64,
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| gaussian(rng));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn unit_square_normalization() {
        let sq = shapes::unit_square();
        let (n, t) = sq.normalize();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((t.scale - s).abs() < 1e-12);
        assert!((t.translation[0] + 0.5 * s).abs() < 1e-9);
        assert!((n.diameter() - 1.0).abs() < 1e-6);
        assert!(n.min_slack(&DVector::zeros(2)).1 > 0.0);
    }

    #[test]
    fn unit_diameter_square_is_fixed_point() {
        let h = 1.0 / (2.0 * 2f64.sqrt());
        let sq = shapes::axis_box(&[-h, -h], &[h, h]);
        let (_, t) = sq.normalize();
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.translation.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn triangle_diameter_is_hypotenuse() {
        let tri = shapes::corner_triangle();
        assert!((tri.diameter() - 2f64.sqrt()).abs() < 1e-12);
        let (_, t) = tri.normalize();
        assert!((t.scale - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn boundary_distance_examples() {
        let sq = shapes::unit_square();
        let d = |x: f64, y: f64| sq.exact_boundary_distance(&DVector::from_vec(vec![x, y])).unwrap();
        assert_eq!(d(0.5, 0.5), 0.5);
        assert!((d(0.2, 0.5) - 0.2).abs() < 1e-15);
        let tri = shapes::corner_triangle();
        let v = tri.exact_boundary_distance(&DVector::from_vec(vec![0.25, 0.25])).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn outside_point_rejected() {
        let sq = shapes::unit_square();
        let err = sq.exact_boundary_distance(&DVector::from_vec(vec![1.1, 0.5]));
        assert!(matches!(err, Err(Error::PointOutside { .. })));
    }

    #[test]
    fn unbounded_and_empty_rejected() {
        let strip = Polytope::from_raw(2, vec![(vec![0.0, 1.0], 1.0), (vec![0.0, -1.0], 1.0), (vec![1.0, 0.0], 1.0)]);
        assert!(matches!(strip, Err(Error::UnboundedPolytope)), "{strip:?}");
        let empty = Polytope::from_raw(
            1,
            vec![(vec![1.0], 0.0), (vec![-1.0], -1.0)],
        );
        assert!(matches!(empty, Err(Error::EmptyInterior)));
        let flat = Polytope::from_raw(1, vec![(vec![1.0], 0.0), (vec![-1.0], 0.0)]);
        assert!(matches!(flat, Err(Error::EmptyInterior)));
    }

    #[test]
    fn raw_normals_are_rescaled() {
        let p = Polytope::from_json_str(
            r#"{"dim":2,"halfspaces":[{"a":[-3,0],"b":0},{"a":[2,0],"b":2},{"a":[0,-1],"b":0},{"a":[0,5],"b":5}]}"#,
        )
        .unwrap();
        assert_eq!(p.halfspaces()[1].b, 1.0);
        assert_eq!(p.halfspaces()[3].b, 1.0);
        assert_eq!(p, shapes::unit_square());
    }

    #[test]
    fn approximate_diameter_close_to_exact() {
        // 4-d box: exact diameter is sqrt(4) = 2 for the unit cube
        let cube = shapes::axis_box(&[0.0; 4], &[1.0; 4]);
        let d = cube.diameter();
        assert!(d <= 2.0 + 1e-9 && d > 1.7, "{d}");
    }
}
