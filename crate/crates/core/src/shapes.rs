//! Ready-made polytopes for tests, demos and benchmarks.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::polytope::{random_unit, Halfspace, Polytope};

/// `[0, 1]^2`.
pub fn unit_square() -> Polytope {
    axis_box(&[0.0, 0.0], &[1.0, 1.0])
}

/// Axis-aligned box `lo <= x <= hi`.
pub fn axis_box(lo: &[f64], hi: &[f64]) -> Polytope {
    let dim = lo.len();
    let mut rows = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        let mut a = vec![0.0; dim];
        a[i] = -1.0;
        rows.push((a.clone(), -lo[i]));
        a[i] = 1.0;
        rows.push((a, hi[i]));
    }
    Polytope::from_raw(dim, rows).expect("box with lo < hi")
}

/// Triangle `x >= 0, y >= 0, x + y <= 1`.
pub fn corner_triangle() -> Polytope {
    Polytope::from_raw(
        2,
        vec![(vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0), (vec![1.0, 1.0], 1.0)],
    )
    .expect("valid triangle")
}

/// Regular `k`-gon centred at the origin with the given inradius.
pub fn regular_polygon(k: usize, inradius: f64) -> Polytope {
    let rows = (0..k)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / k as f64;
            (vec![t.cos(), t.sin()], inradius)
        })
        .collect();
    Polytope::from_raw(2, rows).expect("k >= 3")
}

/// Isosceles triangle with apex at the origin, opening angle `apex` along
/// `+x`, closed by the line `x = length`.
pub fn wedge(apex: f64, length: f64) -> Polytope {
    let (s, c) = (apex / 2.0).sin_cos();
    Polytope::from_raw(
        2,
        vec![(vec![-s, c], 0.0), (vec![-s, -c], 0.0), (vec![1.0, 0.0], length)],
    )
    .expect("valid wedge")
}

/// Random polytope with `n` facets tangent-ish to the unit sphere.
///
/// Offsets are drawn from `[0.6, 1.0]`; draws whose normals fail to
/// positively span the space are rejected and redrawn.
pub fn random_polytope(dim: usize, n: usize, seed: u64) -> Polytope {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let hs: Vec<Halfspace> = (0..n)
            .map(|_| Halfspace {
                a: random_unit(&mut rng, dim),
                b: rng.random_range(0.6..1.0),
            })
            .collect();
        if let Ok(p) = Polytope::new(dim, hs) {
            return p;
        }
    }
}

/// Point on the segment from `p` towards `q` at parameter `t`.
pub fn lerp(p: &DVector<f64>, q: &DVector<f64>, t: f64) -> DVector<f64> {
    p + (q - p) * t
}
