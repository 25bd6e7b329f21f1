//! Seeded low-discrepancy samples of a polytope and of its lifted body.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::polytope::Polytope;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton sequence with a seeded Cranley-Patterson rotation.
#[derive(Clone, Debug)]
pub struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    /// `stream` decorrelates sequences drawn from the same seed.
    pub fn new(dim: usize, seed: u64, stream: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension too large");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        Self { shift, index: 1 }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.index;
        self.index += 1;
        Some(
            self.shift
                .iter()
                .zip(PRIMES)
                .map(|(s, p)| (radical_inverse(i, p) + s).fract())
                .collect(),
        )
    }
}

/// Points of the polytope, uniform in volume (box rejection).
pub fn sample_polytope(p: &Polytope, n: usize, seed: u64, stream: u64) -> Vec<DVector<f64>> {
    let (lo, hi) = p.bounding_box();
    let d = p.dim();
    let mut h = Halton::new(d, seed, stream);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u = h.next().unwrap();
        let x = DVector::from_fn(d, |i, _| lo[i] + u[i] * (hi[i] - lo[i]));
        if p.contains(&x, 0.0) {
            out.push(x);
        }
    }
    out
}

/// Points of the lifted body `{(x, z) : x in P, 0 <= z <= d(x)}`.
///
/// About 40% are spread uniformly in height, 30% lie on the top surface, and
/// 30% lie on the top surface above a thin collar along the boundary of `P`,
/// where the cover is finest.
pub fn sample_lifted(p: &Polytope, n: usize, seed: u64, stream: u64) -> Vec<DVector<f64>> {
    let (lo, hi) = p.bounding_box();
    let d = p.dim();
    let center = p.chebyshev_center().0;
    let mut h = Halton::new(d + 2, seed, stream);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u = h.next().unwrap();
        let mut x = DVector::from_fn(d, |i, _| lo[i] + u[i] * (hi[i] - lo[i]));
        if !p.contains(&x, 0.0) {
            continue;
        }
        let (height, mix) = (u[d], u[d + 1]);
        let z = if mix < 0.4 {
            height * p.min_slack(&x).1
        } else if mix < 0.7 {
            p.min_slack(&x).1
        } else {
            let dir = &x - &center;
            let len = dir.norm();
            if len < 1e-12 {
                continue;
            }
            let dir = dir / len;
            let reach = p.ray_exit(&center, &dir);
            x = &center + dir * (reach * (1.0 - 0.15 * height * height));
            p.min_slack(&x).1.max(0.0)
        };
        let mut q = DVector::zeros(d + 1);
        q.rows_mut(0, d).copy_from(&x);
        q[d] = z;
        out.push(q);
    }
    out
}

/// Points on the top surface `(x, d(x))` over uniformly spread `x`.
pub fn sample_top_surface(p: &Polytope, n: usize, seed: u64, stream: u64) -> Vec<DVector<f64>> {
    sample_polytope(p, n, seed, stream)
        .into_iter()
        .map(|x| {
            let d = x.len();
            let mut q = DVector::zeros(d + 1);
            q.rows_mut(0, d).copy_from(&x);
            q[d] = p.min_slack(&x).1;
            q
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn halton_is_seeded() {
        let a: Vec<_> = Halton::new(3, 7, 0).take(10).collect();
        let b: Vec<_> = Halton::new(3, 7, 0).take(10).collect();
        let c: Vec<_> = Halton::new(3, 7, 1).take(10).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().flatten().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn lifted_samples_lie_in_the_lifted_body() {
        let (p, _) = shapes::regular_polygon(5, 1.0).normalize();
        let pts = sample_lifted(&p, 2000, 3, 0);
        assert_eq!(pts.len(), 2000);
        for q in &pts {
            let x = q.rows(0, 2).into_owned();
            let env = p.min_slack(&x).1;
            assert!(env >= 0.0 && q[2] >= 0.0 && q[2] <= env + 1e-15);
        }
        let on_top = pts
            .iter()
            .filter(|q| (p.min_slack(&q.rows(0, 2).into_owned()).1 - q[2]).abs() < 1e-15)
            .count();
        assert!(on_top > 1000 && on_top < 1400, "{on_top}");
    }

    #[test]
    fn polytope_samples_are_uniformish() {
        let sq = shapes::unit_square();
        let pts = sample_polytope(&sq, 4000, 1, 0);
        let left = pts.iter().filter(|x| x[0] < 0.5).count();
        assert!((left as f64 / 4000.0 - 0.5).abs() < 0.01);
    }
}
