//! The lifted body in `R^{d+1}`: the hypograph of the boundary distance,
//! optionally cut by the ground plane `z >= 0`, and its vertical expansions.

use nalgebra::DVector;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::polytope::{Halfspace, Polytope};

/// Intersection of the lifted facet halfspaces `z <= b_j - a_j . x + delta`
/// (stored unit-normalized) and, when present, the ground `z >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedBody {
    base: Polytope,
    upper: Vec<Halfspace>,
    has_ground: bool,
    expansion: f64,
}

fn lifted_halfspace(h: &Halfspace, delta: f64) -> Halfspace {
    let d = h.a.len();
    let norm = (1.0 + h.a.norm_squared()).sqrt();
    let mut a = DVector::zeros(d + 1);
    a.rows_mut(0, d).copy_from(&h.a);
    a[d] = 1.0;
    Halfspace { a: a / norm, b: (h.b + delta) / norm }
}

impl LiftedBody {
    /// The lifted body with ground and no expansion. Expects a normalized base.
    pub fn lift(base: &Polytope) -> Self {
        Self {
            base: base.clone(),
            upper: base.halfspaces().iter().map(|h| lifted_halfspace(h, 0.0)).collect(),
            has_ground: true,
            expansion: 0.0,
        }
    }

    /// Raises every upper halfspace by `delta` and drops the ground.
    pub fn expand(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::NonPositiveDelta(delta));
        }
        if self.expansion != 0.0 || !self.has_ground {
            return Err(Error::InvalidArgument("only the unexpanded lifted body can be expanded".into()));
        }
        Ok(Self {
            base: self.base.clone(),
            upper: self.base.halfspaces().iter().map(|h| lifted_halfspace(h, delta)).collect(),
            has_ground: false,
            expansion: delta,
        })
    }

    pub fn base(&self) -> &Polytope {
        &self.base
    }

    pub fn upper(&self) -> &[Halfspace] {
        &self.upper
    }

    pub fn has_ground(&self) -> bool {
        self.has_ground
    }

    pub fn expansion(&self) -> f64 {
        self.expansion
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.dim() + 1
    }

    /// Ground halfspace `-z <= 0`.
    pub fn ground(&self) -> Halfspace {
        let mut a = DVector::zeros(self.ambient_dim());
        a[self.base.dim()] = -1.0;
        Halfspace { a, b: 0.0 }
    }

    /// All bounding halfspaces, ground last when present.
    pub fn halfspaces(&self) -> Vec<Halfspace> {
        let mut hs = self.upper.clone();
        if self.has_ground {
            hs.push(self.ground());
        }
        hs
    }

    /// Height of the upper envelope above `x`: `min_j (b_j + delta - a_j . x)`.
    pub fn envelope(&self, x: &[f64]) -> f64 {
        self.base
            .halfspaces()
            .iter()
            .map(|h| h.b + self.expansion - h.a.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, q: &DVector<f64>, tol: f64) -> bool {
        let d = self.base.dim();
        (!self.has_ground || q[d] >= -tol) && self.upper.iter().all(|h| h.slack(q) >= -tol)
    }

    /// Length of the upward vertical ray from `q` to the upper boundary.
    pub fn ray_up_distance(&self, q: &DVector<f64>) -> Result<f64> {
        let d = self.base.dim();
        if q.len() != d + 1 {
            return Err(Error::DimensionMismatch { expected: d + 1, got: q.len() });
        }
        let tol = Tolerances::default().geometric;
        if self.has_ground && q[d] < -tol {
            return Err(Error::PointOutside { slack: q[d] });
        }
        let ray = self.envelope(&q.as_slice()[..d]) - q[d];
        if ray < -tol {
            return Err(Error::PointOutside { slack: ray });
        }
        Ok(ray.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn normalized_square() -> Polytope {
        shapes::unit_square().normalize().0
    }

    #[test]
    fn lifted_facet_form() {
        let p = Polytope::from_raw(1, vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)]).unwrap();
        let l = LiftedBody::lift(&p);
        let h = &l.upper()[0];
        let s = 2f64.sqrt();
        // z <= 1 - x  <=>  (x + z)/sqrt2 <= 1/sqrt2
        assert!((h.a[0] - 1.0 / s).abs() < 1e-15 && (h.a[1] - 1.0 / s).abs() < 1e-15);
        assert!((h.b - 1.0 / s).abs() < 1e-15);
        assert!(l.has_ground());
        let g = l.ground();
        assert_eq!(g.a[1], -1.0);
        let e = l.expand(0.1).unwrap();
        assert!((e.upper()[0].b - 1.1 / s).abs() < 1e-15);
        assert!(!e.has_ground());
    }

    #[test]
    fn expand_rejects_nonpositive() {
        let l = LiftedBody::lift(&normalized_square());
        assert!(matches!(l.expand(0.0), Err(Error::NonPositiveDelta(_))));
        assert!(l.expand(0.1).unwrap().expand(0.1).is_err());
    }

    #[test]
    fn ray_up_matches_boundary_distance() {
        let sq = shapes::unit_square();
        let l = LiftedBody::lift(&sq);
        let q = DVector::from_vec(vec![0.5, 0.5, 0.0]);
        assert!((l.ray_up_distance(&q).unwrap() - 0.5).abs() < 1e-15);
        let n = normalized_square();
        let ln = LiftedBody::lift(&n);
        let c = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let base = n.exact_boundary_distance(&DVector::zeros(2)).unwrap();
        assert!((ln.ray_up_distance(&c).unwrap() - base).abs() < 1e-15);
        let le = ln.expand(0.1).unwrap();
        assert!((le.ray_up_distance(&c).unwrap() - base - 0.1).abs() < 1e-12);
        let top = DVector::from_vec(vec![0.0, 0.0, base]);
        assert_eq!(ln.ray_up_distance(&top).unwrap(), 0.0);
    }

    #[test]
    fn expanded_boundary_separation() {
        let n = normalized_square();
        let l = LiftedBody::lift(&n);
        let delta = 0.05;
        let e = l.expand(delta).unwrap();
        let bound = delta / 3f64.sqrt();
        // boundary points of the lifted body: top-surface and ground-rim samples
        for i in 0..200 {
            let t = i as f64 / 200.0 * std::f64::consts::TAU;
            let dir = DVector::from_vec(vec![t.cos(), t.sin()]);
            let r = n.ray_exit(&DVector::zeros(2), &dir);
            for frac in [0.0, 0.3, 0.9, 1.0] {
                let x = &dir * (r * frac);
                let z = l.envelope(x.as_slice());
                let q = DVector::from_vec(vec![x[0], x[1], z]);
                let slack = e.upper().iter().map(|h| h.slack(&q)).fold(f64::INFINITY, f64::min);
                assert!(slack >= bound - 1e-12, "{slack}");
            }
        }
    }
}
