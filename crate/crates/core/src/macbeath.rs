//! Macbeath regions, their maximum-volume inscribed ellipsoids, and the
//! ellipsoid predicates used by the cover: membership, pairwise intersection,
//! vertical line hits, containment, and projection along the last axis.

use nalgebra::{DMatrix, DVector, SMatrix, SVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hrep::{self, LpOutcome};
use crate::polytope::Halfspace;

/// `{x : (x - c)^T M (x - c) <= 1}` with `M` symmetric positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    center: DVector<f64>,
    shape: DMatrix<f64>,
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let mut defect = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    defect
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>) -> Result<Self> {
        let d = center.len();
        if shape.nrows() != d || shape.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: shape.nrows() });
        }
        if shape.iter().any(|v| !v.is_finite()) || center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite ellipsoid data".into()));
        }
        let scale = shape.amax().max(1.0);
        if symmetry_defect(&shape) > 1e-12 * scale {
            return Err(Error::InvalidArgument("ellipsoid shape is not symmetric".into()));
        }
        if shape.clone().cholesky().is_none() {
            return Err(Error::InvalidArgument("ellipsoid shape is not positive definite".into()));
        }
        Ok(Self { center, shape })
    }

    /// Skips validation; used when reading stored structures, which are checked separately.
    pub fn from_parts_unchecked(center: DVector<f64>, shape: DMatrix<f64>) -> Self {
        Self { center, shape }
    }

    pub fn is_positive_definite(&self) -> bool {
        symmetry_defect(&self.shape) <= 1e-12 * self.shape.amax().max(1.0)
            && self.shape.clone().cholesky().is_some()
    }

    /// A ball of radius `r`.
    pub fn ball(center: DVector<f64>, r: f64) -> Self {
        let d = center.len();
        Self { center, shape: DMatrix::identity(d, d) / (r * r) }
    }

    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn axis_aligned(center: DVector<f64>, radii: &[f64]) -> Self {
        let diag = DVector::from_iterator(radii.len(), radii.iter().map(|r| 1.0 / (r * r)));
        Self { center, shape: DMatrix::from_diagonal(&diag) }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// `M^{-1}`; its square root maps the unit ball onto the ellipsoid.
    pub fn inverse_shape(&self) -> DMatrix<f64> {
        let inv = self
            .shape
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .unwrap_or_else(|| self.shape.clone().try_inverse().expect("singular ellipsoid shape"));
        (&inv + inv.transpose()) * 0.5
    }

    /// The quadratic form `f(x) = (x - c)^T M (x - c)`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.value_at(x.as_slice())
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        let n = self.center.len();
        let c = self.center.as_slice();
        let m = self.shape.as_slice();
        let mut total = 0.0;
        for i in 0..n {
            let wi = x[i] - c[i];
            let mut row = 0.0;
            for j in 0..n {
                row += m[i * n + j] * (x[j] - c[j]);
            }
            total += wi * row;
        }
        total
    }

    pub fn contains(&self, x: &DVector<f64>) -> (bool, f64) {
        let f = self.value(x);
        (f <= 1.0, f)
    }

    /// Radii multiply by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NonPositiveLambda(lambda));
        }
        Ok(Self { center: self.center.clone(), shape: &self.shape / (lambda * lambda) })
    }

    /// Semi-axis lengths in ascending order.
    pub fn radii(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.shape.clone());
        let mut r: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        r
    }

    pub fn min_radius(&self) -> f64 {
        self.radii()[0]
    }

    /// Half-widths of the axis-aligned bounding box.
    pub fn half_widths(&self) -> DVector<f64> {
        self.inverse_shape().diagonal().map(f64::sqrt)
    }

    /// Support value `max_{x in E} u . x`.
    pub fn support(&self, u: &DVector<f64>) -> f64 {
        self.center.dot(u) + u.dot(&(self.inverse_shape() * u)).sqrt()
    }

    /// Where the vertical line over `x` (last coordinate free) meets the ellipsoid.
    pub fn vertical_line_hit(&self, x: &[f64]) -> Option<(f64, f64)> {
        let d = self.dim() - 1;
        let m = &self.shape;
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..d {
            let wi = x[i] - self.center[i];
            b += m[(d, i)] * wi;
            for j in 0..d {
                a += wi * m[(i, j)] * (x[j] - self.center[j]);
            }
        }
        let mzz = m[(d, d)];
        let disc = b * b - mzz * (a - 1.0);
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        let cz = self.center[d];
        Some((cz + (-b - root) / mzz, cz + (-b + root) / mzz))
    }

    /// Shadow under dropping the last coordinate.
    pub fn project(&self) -> Ellipsoid {
        let d = self.dim() - 1;
        let m = &self.shape;
        let mzz = m[(d, d)];
        let mut shape = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                shape[(i, j)] = m[(i, j)] - m[(i, d)] * m[(d, j)] / mzz;
            }
        }
        let shape = (&shape + shape.transpose()) * 0.5;
        Ellipsoid { center: self.center.rows(0, d).into_owned(), shape }
    }

    /// `max f_self(y)` over `y` in `other`; at most 1 iff `other` lies inside `self`.
    pub fn max_value_over(&self, other: &Ellipsoid) -> f64 {
        let r = other.inverse_shape().cholesky().expect("positive definite").l();
        let w = &other.center - &self.center;
        let a = r.transpose() * &self.shape * &r;
        let g = r.transpose() * (&self.shape * &w);
        let c = w.dot(&(&self.shape * &w));
        max_quadratic_on_ball(&((&a + a.transpose()) * 0.5), &g, c)
    }
}

/// `max_{|u| <= 1} u^T A u + 2 g^T u + c` for positive semidefinite `A`.
fn max_quadratic_on_ball(a: &DMatrix<f64>, g: &DVector<f64>, c: f64) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let lam = eig.eigenvalues.clone();
    let gt = eig.eigenvectors.transpose() * g;
    let n = lam.len();
    let top = (0..n).fold(0, |k, i| if lam[i] > lam[k] { i } else { k });
    let lmax = lam[top];
    let gnorm = gt.norm();
    let value = |u: &DVector<f64>| {
        (0..n).map(|i| lam[i] * u[i] * u[i] + 2.0 * gt[i] * u[i]).sum::<f64>() + c
    };
    let norm_at = |nu: f64| -> f64 {
        (0..n)
            .filter(|&i| gt[i] != 0.0)
            .map(|i| (gt[i] / (nu - lam[i])).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let scale = lmax.abs().max(gnorm).max(1e-300);
    let top_mass: f64 = (0..n)
        .filter(|&i| lmax - lam[i] <= 1e-14 * scale)
        .map(|i| gt[i] * gt[i])
        .sum::<f64>()
        .sqrt();
    let hard = top_mass <= 1e-14 * scale;
    if hard {
        // components off the top eigenspace at nu = lmax, then fill the norm along it
        let mut u = DVector::zeros(n);
        let mut sq = 0.0;
        for i in 0..n {
            if (lmax - lam[i]) > 1e-14 * scale {
                u[i] = gt[i] / (lmax - lam[i]);
                sq += u[i] * u[i];
            }
        }
        if sq <= 1.0 {
            u[top] = (1.0 - sq).sqrt();
            return value(&u);
        }
    }
    let mut lo = lmax;
    let mut hi = lmax + gnorm + 1e-300;
    while norm_at(hi) > 1.0 {
        hi = lmax + 2.0 * (hi - lmax);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = DVector::from_iterator(n, (0..n).map(|i| if gt[i] == 0.0 { 0.0 } else { gt[i] / (hi - lam[i]) }));
    value(&u)
}

/// Exact intersection test. The minimum of `f_1` over `e2` equals the maximum of a
/// concave dual function along the regularization path, found by bisection on its
/// monotone derivative.
pub fn ellipsoids_intersect(e1: &Ellipsoid, e2: &Ellipsoid, tol: f64) -> bool {
    PreparedEllipsoid::new(e1.clone()).intersects(&PreparedEllipsoid::new(e2.clone()), tol)
}

/// `min f_1(y)` over `y` in `e2`. Evaluation stops early once the value is known to
/// exceed `cutoff`, returning a lower bound above it.
pub fn min_value_over(e1: &Ellipsoid, e2: &Ellipsoid, cutoff: f64) -> f64 {
    PreparedEllipsoid::new(e1.clone()).min_value_over(e2, cutoff, f64::NEG_INFINITY)
}


#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = M u` for a symmetric `M` stored contiguously.
#[inline(always)]
fn sym_mul(m: &[f64], u: &[f64], out: &mut [f64]) {
    let n = u.len();
    for i in 0..n {
        out[i] = dot(&m[i * n..(i + 1) * n], u);
    }
}

#[inline(always)]
fn quad(m: &[f64], u: &[f64]) -> f64 {
    let n = u.len();
    (0..n).map(|i| u[i] * dot(&m[i * n..(i + 1) * n], u)).sum()
}

/// Decides intersection from `[center, shape, inverse shape]` slices when a cheap
/// test settles it: center containment, separating directions, or boundary
/// points on the center segment.
fn screen_intersection(a: [&[f64]; 3], b: [&[f64]; 3], tol: f64) -> Option<bool> {
    // fixed sizes let the small loops unroll
    match a[0].len() {
        2 => screen_fixed::<2>(a, b, tol),
        3 => screen_fixed::<3>(a, b, tol),
        4 => screen_fixed::<4>(a, b, tol),
        _ => screen_any(a, b, tol),
    }
}

fn screen_fixed<const N: usize>(a: [&[f64]; 3], b: [&[f64]; 3], tol: f64) -> Option<bool> {
    let c1: &[f64; N] = a[0].try_into().ok()?;
    let c2: &[f64; N] = b[0].try_into().ok()?;
    let mut w = [0.0; N];
    for i in 0..N {
        w[i] = c2[i] - c1[i];
    }
    let mut m1w = [0.0; N];
    let mut m2w = [0.0; N];
    sym_mul(a[1], &w, &mut m1w);
    sym_mul(b[1], &w, &mut m2w);
    screen_tail(a, b, &w, &m1w, &m2w, tol)
}

fn screen_any(a: [&[f64]; 3], b: [&[f64]; 3], tol: f64) -> Option<bool> {
    let n = a[0].len();
    let w: Vec<f64> = (0..n).map(|i| b[0][i] - a[0][i]).collect();
    let mut m1w = vec![0.0; n];
    let mut m2w = vec![0.0; n];
    sym_mul(a[1], &w, &mut m1w);
    sym_mul(b[1], &w, &mut m2w);
    screen_tail(a, b, &w, &m1w, &m2w, tol)
}

#[inline(always)]
fn screen_tail(a: [&[f64]; 3], b: [&[f64]; 3], w: &[f64], m1w: &[f64], m2w: &[f64], tol: f64) -> Option<bool> {
    let f1 = dot(w, m1w);
    let f2 = dot(w, m2w);
    if f1 <= 1.0 + tol || f2 <= 1.0 + tol {
        return Some(true);
    }
    for u in [w, m1w, m2w] {
        let reach = quad(a[2], u).sqrt() + quad(b[2], u).sqrt();
        if dot(u, w) > reach * (1.0 + 1e-6) {
            return Some(false);
        }
    }
    // where the center segment leaves one ellipsoid, measured in the other
    let s1 = 1.0 / f1.sqrt() - 1.0;
    let s2 = 1.0 - 1.0 / f2.sqrt();
    if f2 * s1 * s1 <= 1.0 || f1 * s2 * s2 <= 1.0 {
        return Some(true);
    }
    None
}

/// Ellipsoids stored contiguously for fast pairwise intersection screening;
/// factorizations for the exact search are computed on first use.
#[derive(Clone, Debug)]
pub struct EllipsoidPack {
    dim: usize,
    data: Vec<f64>,
    ellipsoids: Vec<Ellipsoid>,
    prepared: Vec<std::cell::OnceCell<PreparedEllipsoid>>,
}

impl EllipsoidPack {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new(), ellipsoids: Vec::new(), prepared: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.ellipsoids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ellipsoids.is_empty()
    }

    /// Panics if the shape is not positive definite.
    pub fn push(&mut self, e: &Ellipsoid) -> usize {
        assert_eq!(e.dim(), self.dim);
        let inv = e.inverse_shape();
        self.data.extend_from_slice(e.center.as_slice());
        self.data.extend_from_slice(e.shape.as_slice());
        self.data.extend_from_slice(inv.as_slice());
        self.ellipsoids.push(e.clone());
        self.prepared.push(std::cell::OnceCell::new());
        self.ellipsoids.len() - 1
    }

    pub fn get(&self, i: usize) -> &Ellipsoid {
        &self.ellipsoids[i]
    }

    fn parts(&self, i: usize) -> [&[f64]; 3] {
        let n = self.dim;
        let slot = &self.data[i * (n + 2 * n * n)..(i + 1) * (n + 2 * n * n)];
        let (c, rest) = slot.split_at(n);
        let (m, inv) = rest.split_at(n * n);
        [c, m, inv]
    }

    fn prepared(&self, i: usize) -> &PreparedEllipsoid {
        self.prepared[i].get_or_init(|| PreparedEllipsoid::new(self.ellipsoids[i].clone()))
    }

    /// Intersection of member `i` with member `j` of `other`.
    pub fn intersects_with(&self, i: usize, other: &EllipsoidPack, j: usize, tol: f64) -> bool {
        screen_intersection(self.parts(i), other.parts(j), tol).unwrap_or_else(|| {
            let [ca, ma, _] = self.parts(i);
            let [cb, mb, _] = other.parts(j);
            let v = min_value_slices([ca, ma], [cb, mb], 1.0 + tol, 1.0 + tol)
                .unwrap_or_else(|| self.prepared(i).min_value_over(&other.ellipsoids[j], 1.0 + tol, 1.0 + tol));
            v <= 1.0 + tol
        })
    }

    pub fn intersects(&self, i: usize, j: usize, tol: f64) -> bool {
        self.intersects_with(i, self, j, tol)
    }
}

/// An ellipsoid with its factorizations cached for repeated predicates.
#[derive(Clone, Debug)]
pub struct PreparedEllipsoid {
    e: Ellipsoid,
    l: DMatrix<f64>,
    linv: DMatrix<f64>,
    inv_shape: DMatrix<f64>,
}

impl PreparedEllipsoid {
    /// Panics if the shape is not positive definite.
    pub fn new(e: Ellipsoid) -> Self {
        let l = e.shape.clone().cholesky().expect("positive definite shape").l();
        let linv = l.clone().try_inverse().expect("triangular factor invertible");
        let inv_shape = linv.transpose() * &linv;
        Self { e, l, linv, inv_shape }
    }

    pub fn ellipsoid(&self) -> &Ellipsoid {
        &self.e
    }

    pub fn inverse_shape(&self) -> &DMatrix<f64> {
        &self.inv_shape
    }

    /// Cheap sufficient tests first, then the exact dual search.
    pub fn intersects(&self, other: &PreparedEllipsoid, tol: f64) -> bool {
        let a = [self.e.center.as_slice(), self.e.shape.as_slice(), self.inv_shape.as_slice()];
        let b = [other.e.center.as_slice(), other.e.shape.as_slice(), other.inv_shape.as_slice()];
        screen_intersection(a, b, tol)
            .unwrap_or_else(|| self.min_value_over(&other.e, 1.0 + tol, 1.0 + tol) <= 1.0 + tol)
    }

    /// `min f_self` over `other`. Stops early with a value above `cutoff` once the
    /// minimum provably exceeds it, or with a value at most `accept` once the
    /// minimum provably lies below it.
    pub fn min_value_over(&self, other: &Ellipsoid, cutoff: f64, accept: f64) -> f64 {
        let n = self.e.dim();
        if (2..=4).contains(&n) {
            if let Some(v) = min_value_slices(
                [self.e.center.as_slice(), self.e.shape.as_slice()],
                [other.center.as_slice(), other.shape.as_slice()],
                cutoff,
                accept,
            ) {
                return v;
            }
        }
        let b = &self.linv * &other.shape * self.linv.transpose();
        let b = (&b + b.transpose()) * 0.5;
        let eig = SymmetricEigen::new(b);
        let e = eig.eigenvectors.transpose() * (self.l.transpose() * (&other.center - &self.e.center));
        dual_search(eig.eigenvalues.as_slice(), e.as_slice(), cutoff, accept)
    }
}

/// `min f_a` over ellipsoid `b`, from `[center, shape]` slices of dimension 2 to 4;
/// `None` for other dimensions or a shape without a Cholesky factor.
fn min_value_slices(a: [&[f64]; 2], b: [&[f64]; 2], cutoff: f64, accept: f64) -> Option<f64> {
    match a[0].len() {
        2 => min_value_2(a, b, cutoff, accept),
        3 => min_value_3(a, b, cutoff, accept),
        4 => min_value_4(a, b, cutoff, accept),
        _ => None,
    }
}

macro_rules! min_value_fixed {
    ($name:ident, $n:literal) => {
        fn $name(a: [&[f64]; 2], b: [&[f64]; 2], cutoff: f64, accept: f64) -> Option<f64> {
            let m1 = SMatrix::<f64, $n, $n>::from_column_slice(a[1]);
            let m2 = SMatrix::<f64, $n, $n>::from_column_slice(b[1]);
            let w = SVector::<f64, $n>::from_column_slice(b[0]) - SVector::<f64, $n>::from_column_slice(a[0]);
            let l = m1.cholesky()?.unpack();
            let linv = l.solve_lower_triangular(&SMatrix::<f64, $n, $n>::identity())?;
            let bm = linv * m2 * linv.transpose();
            let eig = (bm + bm.transpose()).scale(0.5).symmetric_eigen();
            let e = eig.eigenvectors.transpose() * (l.transpose() * w);
            Some(dual_search(eig.eigenvalues.as_slice(), e.as_slice(), cutoff, accept))
        }
    };
}

min_value_fixed!(min_value_2, 2);
min_value_fixed!(min_value_3, 3);
min_value_fixed!(min_value_4, 4);

/// Maximizes the concave dual `h(mu) = sum e_i^2 mu lam_i / (1 + mu lam_i) - mu`
/// by bisection on its derivative, with the early exits of `min_value_over`.
fn dual_search(lam: &[f64], e: &[f64], cutoff: f64, accept: f64) -> f64 {
    let n = lam.len();
    let h = |mu: f64| -> f64 { (0..n).map(|i| e[i] * e[i] * mu * lam[i] / (1.0 + mu * lam[i])).sum::<f64>() - mu };
    let dh = |mu: f64| -> f64 { (0..n).map(|i| e[i] * e[i] * lam[i] / (1.0 + mu * lam[i]).powi(2)).sum::<f64>() - 1.0 };
    if dh(0.0) <= 0.0 {
        // center of the first ellipsoid lies in the second
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while dh(hi) > 0.0 {
        let v = h(hi);
        if v > cutoff {
            return v;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    for _ in 0..200 {
        // h is increasing on [0, mu*] and concave
        let hl = h(lo);
        if hl > cutoff {
            return hl;
        }
        let bound = hl + dh(lo).max(0.0) * (hi - lo);
        if bound <= accept {
            return bound;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dh(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    h(lo).max(h(hi))
}

/// `x + lambda ((K - x) ∩ (x - K))` as symmetric slabs `|n_j . (y - x)| <= lambda s_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MacbeathRegion {
    center: DVector<f64>,
    lambda: f64,
    normals: Vec<DVector<f64>>,
    slacks: Vec<f64>,
}

impl MacbeathRegion {
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn normals(&self) -> &[DVector<f64>] {
        &self.normals
    }

    /// Slack of the center against each body constraint (unscaled by lambda).
    pub fn slacks(&self) -> &[f64] {
        &self.slacks
    }

    /// Both sides of every slab.
    pub fn halfspaces(&self) -> Vec<Halfspace> {
        let mut out = Vec::with_capacity(2 * self.normals.len());
        for (n, s) in self.normals.iter().zip(&self.slacks) {
            let c = n.dot(&self.center);
            out.push(Halfspace { a: n.clone(), b: c + self.lambda * s });
            out.push(Halfspace { a: -n, b: -c + self.lambda * s });
        }
        out
    }

    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        let w = y - &self.center;
        self.normals
            .iter()
            .zip(&self.slacks)
            .all(|(n, s)| n.dot(&w).abs() <= self.lambda * s + tol)
    }

    /// Same center, slabs scaled to `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveLambda(lambda));
        }
        Ok(Self { lambda, ..self.clone() })
    }

    /// Support value in direction `u`, or `None` if the region is unbounded that way.
    pub fn support(&self, u: &DVector<f64>) -> Option<f64> {
        let hs = self.halfspaces();
        let normals: Vec<_> = hs.iter().map(|h| h.a.clone()).collect();
        let offsets: Vec<_> = hs.iter().map(|h| h.b).collect();
        match hrep::support(&normals, &offsets, u) {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    /// True iff `other` lies inside `self` up to `tol`, by support comparison per slab.
    pub fn contains_region(&self, other: &MacbeathRegion, tol: f64) -> bool {
        self.halfspaces().iter().all(|h| match other.support(&h.a) {
            Some(v) => v <= h.b + tol,
            None => false,
        })
    }

    pub fn vertices(&self, tol: f64) -> Vec<DVector<f64>> {
        let hs = self.halfspaces();
        let normals: Vec<_> = hs.iter().map(|h| h.a.clone()).collect();
        let offsets: Vec<_> = hs.iter().map(|h| h.b).collect();
        hrep::vertices(&normals, &offsets, tol)
    }
}

/// Macbeath region of the body `{y : a_j . y <= b_j}` at `x`.
pub fn macbeath_region(body: &[Halfspace], x: &DVector<f64>, lambda: f64, tol: f64) -> Result<MacbeathRegion> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let mut slacks = Vec::with_capacity(body.len());
    for h in body {
        if h.a.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: h.a.len(), got: x.len() });
        }
        let s = h.slack(x);
        if !(s > tol) {
            return Err(Error::PointNotInterior { slack: s });
        }
        slacks.push(s);
    }
    Ok(MacbeathRegion {
        center: x.clone(),
        lambda,
        normals: body.iter().map(|h| h.a.clone()).collect(),
        slacks,
    })
}

/// Center-fixed maximum-volume ellipsoid inside the region.
pub fn inscribed_ellipsoid(region: &MacbeathRegion, rel_volume_tol: f64) -> Result<Ellipsoid> {
    let lam = region.lambda;
    for (i, s) in region.slacks.iter().enumerate() {
        if !(*s > 1e-14) {
            return Err(Error::DegenerateRegion { index: i, slack: *s });
        }
    }
    let g: Vec<DVector<f64>> = region
        .normals
        .iter()
        .zip(&region.slacks)
        .map(|(n, s)| n / (lam * s))
        .collect();
    let p = max_det_under_slabs(&g, rel_volume_tol)?;
    let shape = p.cholesky().ok_or_else(|| Error::SolverFailure("result not positive definite".into()))?.inverse();
    let shape = (&shape + shape.transpose()) * 0.5;
    Ok(Ellipsoid { center: region.center.clone(), shape })
}

/// In-place Cholesky factor (lower triangle) of a row-major `n x n` matrix.
/// Returns the log determinant, or `None` if the matrix is not positive definite.
fn cholesky_in_place(a: &mut [f64], n: usize) -> Option<f64> {
    let mut logdet = 0.0;
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > 0.0) {
            return None;
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        logdet += 2.0 * ljj.ln();
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    Some(logdet)
}

/// Solves `L L^T x = b` in place given the factor from `cholesky_in_place`.
fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Maximizes `log det P` subject to `g_j^T P g_j <= 1`.
///
/// Solved in coordinates where `sum g_j g_j^T` is the identity (the objective
/// only shifts by a constant), which keeps the Newton systems well conditioned
/// for points close to a facet.
fn max_det_under_slabs(g: &[DVector<f64>], rel_volume_tol: f64) -> Result<DMatrix<f64>> {
    let d = g[0].len();
    let gram = g.iter().fold(DMatrix::zeros(d, d), |acc, v| acc + v * v.transpose());
    let c = gram
        .cholesky()
        .ok_or_else(|| Error::SolverFailure("slab normals do not span the space".into()))?
        .l();
    let c_inv = c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SolverFailure("slab normals do not span the space".into()))?;
    let whitened: Vec<DVector<f64>> = g.iter().map(|v| &c_inv * v).collect();
    let x = max_det_whitened(&whitened, rel_volume_tol)?;
    let p = c_inv.transpose() * x * &c_inv;
    Ok((&p + p.transpose()) * 0.5)
}

/// Log-barrier Newton method over the coordinates of `P` in the symmetric basis.
fn max_det_whitened(g: &[DVector<f64>], rel_volume_tol: f64) -> Result<DMatrix<f64>> {
    let d = g[0].len();
    let mut basis = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            basis.push((i, j));
        }
    }
    let k = basis.len();
    let m = g.len();
    // constraints are linear in the basis coordinates of P
    let w: Vec<f64> = g
        .iter()
        .flat_map(|gj| basis.iter().map(move |&(i, j)| if i == j { gj[i] * gj[i] } else { 2.0 * gj[i] * gj[j] }))
        .collect();
    let fill = |p: &[f64], out: &mut [f64]| {
        for (a, &(i, j)) in basis.iter().enumerate() {
            out[i * d + j] = p[a];
            out[j * d + i] = p[a];
        }
    };
    let gmax = g.iter().map(|v| v.norm_squared()).fold(0.0, f64::max);
    let mut p: Vec<f64> = basis.iter().map(|&(i, j)| if i == j { 0.5 / gmax } else { 0.0 }).collect();

    let mut pm = vec![0.0; d * d];
    let mut q = vec![0.0; d * d];
    let mut col = vec![0.0; d];
    let mut grad = vec![0.0; k];
    let mut hess = vec![0.0; k * k];
    let mut step = vec![0.0; k];
    let mut cand = vec![0.0; k];
    let mut r = vec![0.0; m];
    let mut rs = vec![0.0; m];
    let logdet_at = |p: &[f64], buf: &mut [f64]| {
        fill(p, buf);
        cholesky_in_place(buf, d)
    };

    // gap in log det after an outer round is at most m / t
    let gap_target = 2.0 * (1.0 + rel_volume_tol).ln();
    let mut t = m as f64;
    let mu = 16.0;
    for _outer in 0..60 {
        for _newton in 0..200 {
            let logdet = logdet_at(&p, &mut pm)
                .ok_or_else(|| Error::SolverFailure("iterate left the positive definite cone".into()))?;
            for c in 0..d {
                col.iter_mut().for_each(|v| *v = 0.0);
                col[c] = 1.0;
                cholesky_solve(&pm, d, &mut col);
                for i in 0..d {
                    q[i * d + c] = col[i];
                }
            }
            let mut f0 = -t * logdet;
            for j in 0..m {
                r[j] = dot(&w[j * k..(j + 1) * k], &p);
                f0 -= (1.0 - r[j]).ln();
            }
            // tr(Q E_pq Q E_rs) = Q_sp Q_qr over the terms of each basis element
            for (a, &(i, j)) in basis.iter().enumerate() {
                grad[a] = -t * if i == j { q[i * d + i] } else { 2.0 * q[i * d + j] };
                for (b, &(u, v)) in basis.iter().enumerate().skip(a) {
                    let tr = match (i == j, u == v) {
                        (true, true) => q[u * d + i] * q[i * d + u],
                        (true, false) => 2.0 * q[v * d + i] * q[i * d + u],
                        (false, true) => 2.0 * q[u * d + i] * q[j * d + u],
                        (false, false) => {
                            2.0 * (q[v * d + i] * q[j * d + u] + q[u * d + i] * q[j * d + v])
                        }
                    };
                    hess[a * k + b] = t * tr;
                }
            }
            for j in 0..m {
                let wj = &w[j * k..(j + 1) * k];
                let inv = 1.0 / (1.0 - r[j]);
                for a in 0..k {
                    grad[a] += wj[a] * inv;
                    let wa = wj[a] * inv * inv;
                    for b in a..k {
                        hess[a * k + b] += wa * wj[b];
                    }
                }
            }
            for a in 0..k {
                for b in 0..a {
                    hess[a * k + b] = hess[b * k + a];
                }
            }
            cholesky_in_place(&mut hess, k)
                .ok_or_else(|| Error::SolverFailure("Newton system not positive definite".into()))?;
            for a in 0..k {
                step[a] = -grad[a];
            }
            cholesky_solve(&hess, k, &mut step);
            let decrement = -dot(&grad, &step);
            if decrement / 2.0 <= 1e-12 * t.max(1.0) {
                break;
            }
            for j in 0..m {
                rs[j] = dot(&w[j * k..(j + 1) * k], &step);
            }
            let mut s = 1.0;
            loop {
                for a in 0..k {
                    cand[a] = p[a] + s * step[a];
                }
                let accepted = (0..m).all(|j| r[j] + s * rs[j] < 1.0)
                    && logdet_at(&cand, &mut pm).is_some_and(|ld| {
                        let f1 = -t * ld - (0..m).map(|j| (1.0 - r[j] - s * rs[j]).ln()).sum::<f64>();
                        f1 <= f0 - 0.25 * s * decrement
                    });
                if accepted {
                    std::mem::swap(&mut p, &mut cand);
                    break;
                }
                s *= 0.5;
                if s < 1e-20 {
                    return Err(Error::SolverFailure("line search stalled".into()));
                }
            }
        }
        if m as f64 / t <= gap_target {
            fill(&p, &mut pm);
            return Ok(DMatrix::from_row_slice(d, d, &pm));
        }
        t *= mu;
    }
    Err(Error::SolverFailure("barrier method did not reach the target gap".into()))
}

/// Macbeath ellipsoid of the body at `x`, scaled to `lambda`.
pub fn macbeath_ellipsoid(body: &[Halfspace], x: &DVector<f64>, lambda: f64, rel_volume_tol: f64) -> Result<Ellipsoid> {
    let region = macbeath_region(body, x, 1.0, 0.0)?;
    inscribed_ellipsoid(&region, rel_volume_tol)?.scaled(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn region_at_square_center_is_square() {
        let sq = shapes::unit_square();
        let r = macbeath_region(sq.halfspaces(), &v(&[0.5, 0.5]), 1.0, 0.0).unwrap();
        let mut verts: Vec<Vec<f64>> = r.vertices(1e-12).iter().map(|p| p.iter().cloned().collect()).collect();
        verts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        assert_eq!(verts.len(), 4);
        for (p, e) in verts.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-12 && (p[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn region_off_center_is_slab_box() {
        let sq = shapes::unit_square();
        let r = macbeath_region(sq.halfspaces(), &v(&[0.25, 0.5]), 1.0, 0.0).unwrap();
        let e1 = v(&[1.0, 0.0]);
        let e2 = v(&[0.0, 1.0]);
        assert!((r.support(&e1).unwrap() - 0.5).abs() < 1e-12);
        assert!((r.support(&-&e1).unwrap() - 0.0).abs() < 1e-12);
        assert!((r.support(&e2).unwrap() - 1.0).abs() < 1e-12);
        assert!((r.support(&-&e2).unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn region_shrinks_to_center() {
        let sq = shapes::unit_square();
        let r = macbeath_region(sq.halfspaces(), &v(&[0.3, 0.6]), 1e-9, 0.0).unwrap();
        for p in r.vertices(1e-15) {
            assert!((p - v(&[0.3, 0.6])).norm() < 2e-9);
        }
    }

    #[test]
    fn region_rejects_boundary_center() {
        let sq = shapes::unit_square();
        assert!(matches!(
            macbeath_region(sq.halfspaces(), &v(&[0.0, 0.5]), 1.0, 0.0),
            Err(Error::PointNotInterior { .. })
        ));
    }

    #[test]
    fn inscribed_in_boxes() {
        let b = shapes::axis_box(&[-1.0, -1.0], &[1.0, 1.0]);
        let e = macbeath_ellipsoid(b.halfspaces(), &v(&[0.0, 0.0]), 1.0, 1e-6).unwrap();
        assert!((e.shape() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-5);
        let b = shapes::axis_box(&[-2.0, -1.0], &[2.0, 1.0]);
        let e = macbeath_ellipsoid(b.halfspaces(), &v(&[0.0, 0.0]), 1.0, 1e-6).unwrap();
        let r = e.radii();
        assert!((r[0] - 1.0).abs() < 1e-5 && (r[1] - 2.0).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn inscribed_in_hexagon_is_incircle() {
        let hex = shapes::regular_polygon(6, 0.7);
        let e = macbeath_ellipsoid(hex.halfspaces(), &v(&[0.0, 0.0]), 1.0, 1e-6).unwrap();
        for r in e.radii() {
            assert!((r - 0.7).abs() < 1e-5, "{r}");
        }
    }

    #[test]
    fn scaling_round_trip() {
        let disk = Ellipsoid::ball(v(&[0.0, 0.0]), 1.0);
        let big = disk.scaled(2.0).unwrap();
        assert!((big.radii()[0] - 2.0).abs() < 1e-15);
        assert_eq!(disk.scaled(1.0).unwrap(), disk);
        let back = disk.scaled(0.5).unwrap().scaled(2.0).unwrap();
        assert!((back.shape() - disk.shape()).amax() < 1e-12);
        assert!(matches!(disk.scaled(0.0), Err(Error::NonPositiveLambda(_))));
    }

    #[test]
    fn membership_values() {
        let e = Ellipsoid::axis_aligned(v(&[1.0, 1.0]), &[2.0, 0.5]);
        assert_eq!(e.contains(&v(&[1.0, 1.0])), (true, 0.0));
        let (inside, f) = e.contains(&v(&[3.0, 1.0]));
        assert!(inside && (f - 1.0).abs() < 1e-15);
        let (inside, f) = e.contains(&v(&[1.0, 2.0]));
        assert!(!inside && (f - 4.0).abs() < 1e-15);
    }

    #[test]
    fn disk_intersections() {
        let a = Ellipsoid::ball(v(&[0.0, 0.0]), 1.0);
        assert!(ellipsoids_intersect(&a, &Ellipsoid::ball(v(&[1.0, 0.0]), 1.0), 1e-9));
        assert!(!ellipsoids_intersect(&a, &Ellipsoid::ball(v(&[3.0, 0.0]), 1.0), 1e-9));
        assert!(ellipsoids_intersect(&a, &Ellipsoid::ball(v(&[2.0, 0.0]), 1.0), 1e-9));
        assert!(!ellipsoids_intersect(&a, &Ellipsoid::ball(v(&[2.0 + 1e-6, 0.0]), 1.0), 1e-9));
    }

    #[test]
    fn intersection_of_thin_ellipses() {
        // a long thin ellipse reaching across to a small disk
        let a = Ellipsoid::axis_aligned(v(&[0.0, 0.0]), &[5.0, 0.01]);
        let b = Ellipsoid::ball(v(&[5.5, 0.0]), 0.6);
        assert!(ellipsoids_intersect(&a, &b, 1e-9));
        assert!(ellipsoids_intersect(&b, &a, 1e-9));
        let c = Ellipsoid::ball(v(&[2.0, 0.5]), 0.45);
        assert!(!ellipsoids_intersect(&a, &c, 1e-9));
        assert!(!ellipsoids_intersect(&c, &a, 1e-9));
    }

    #[test]
    fn vertical_hits() {
        let ball = Ellipsoid::ball(v(&[0.0, 0.0, 0.0]), 1.0);
        let (lo, hi) = ball.vertical_line_hit(&[0.0, 0.0]).unwrap();
        assert!((lo + 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        assert!(ball.vertical_line_hit(&[2.0, 0.0]).is_none());
        let (lo, hi) = ball.vertical_line_hit(&[0.6, 0.0]).unwrap();
        assert!((lo + 0.8).abs() < 1e-15 && (hi - 0.8).abs() < 1e-15);
    }

    #[test]
    fn projections() {
        let e = Ellipsoid::axis_aligned(v(&[0.0, 0.0, 0.0]), &[1.0, 2.0, 3.0]);
        let r = e.project().radii();
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
        let s = Ellipsoid::ball(v(&[1.0, 2.0, 3.0]), 0.3).project();
        assert_eq!(s.center().as_slice(), &[1.0, 2.0]);
        assert!(s.radii().iter().all(|r| (r - 0.3).abs() < 1e-14));
    }

    #[test]
    fn projection_of_rotated_ellipse_matches_sampled_extent() {
        let (c, s) = (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let diag = DMatrix::from_diagonal(&v(&[1.0 / 4.0, 1.0]));
        let shape = &rot * diag * rot.transpose();
        let e = Ellipsoid::new(v(&[0.0, 0.0]), (&shape + shape.transpose()) * 0.5).unwrap();
        let shadow = e.project();
        let schur = shadow.radii()[0];
        // boundary points c + R diag(2, 1) (cos t, sin t)
        let mut sampled = 0.0f64;
        for i in 0..100_000 {
            let t = i as f64 / 100_000.0 * std::f64::consts::TAU;
            let p = &rot * v(&[2.0 * t.cos(), t.sin()]);
            sampled = sampled.max(p[0]);
        }
        assert!((schur - sampled).abs() < 1e-3, "{schur} vs {sampled}");
        assert!((schur - 2.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn containment_maximum() {
        let outer = Ellipsoid::ball(v(&[0.0, 0.0]), 2.0);
        let inner = Ellipsoid::ball(v(&[1.0, 0.0]), 0.5);
        // farthest point (1.5, 0): f = 2.25 / 4
        assert!((outer.max_value_over(&inner) - 0.5625).abs() < 1e-12);
        let shifted = Ellipsoid::axis_aligned(v(&[0.0, 0.0]), &[1.0, 3.0]);
        assert!((outer.max_value_over(&shifted) - 2.25).abs() < 1e-12);
    }

    #[test]
    fn intersect_is_symmetric_and_matches_min_value() {
        let a = Ellipsoid::axis_aligned(v(&[0.0, 0.0]), &[2.0, 1.0]);
        let b = Ellipsoid::ball(v(&[4.0, 0.0]), 1.0);
        // nearest point of b to a's center direction is (3, 0): f_a = 9/4
        assert!((min_value_over(&a, &b, f64::INFINITY) - 2.25).abs() < 1e-9);
    }
}
