//! Small-dimensional routines on raw H-representations `{x : a_j . x <= b_j}`:
//! linear programs (support values, Chebyshev centre, feasibility) and
//! brute-force vertex enumeration.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

/// Outcome of a linear program over an H-representation.
#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: DVector<f64> },
    Unbounded,
    Infeasible,
}

/// Free variables as differences of nonnegative pairs; the solver's own free
/// bounds lose unboundedness detection.
struct FreeVars(Vec<(minilp::Variable, minilp::Variable)>);

impl FreeVars {
    fn new(problem: &mut Problem, objective: &[f64]) -> Self {
        Self(
            objective
                .iter()
                .map(|&c| (problem.add_var(c, (0.0, f64::INFINITY)), problem.add_var(-c, (0.0, f64::INFINITY))))
                .collect(),
        )
    }

    fn row(&self, a: &DVector<f64>) -> Vec<(minilp::Variable, f64)> {
        self.0.iter().zip(a.iter()).flat_map(|(&(p, n), &c)| [(p, c), (n, -c)]).collect()
    }

    fn value(&self, sol: &minilp::Solution) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|&(p, n)| sol[p] - sol[n]))
    }
}

/// Maximizes `direction . x` over the H-representation.
pub fn support(normals: &[DVector<f64>], offsets: &[f64], direction: &DVector<f64>) -> LpOutcome {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars = FreeVars::new(&mut problem, direction.as_slice());
    for (a, &b) in normals.iter().zip(offsets) {
        problem.add_constraint(vars.row(a).as_slice(), ComparisonOp::Le, b);
    }
    match problem.solve() {
        Ok(sol) if sol.objective().is_finite() => LpOutcome::Optimal { value: sol.objective(), point: vars.value(&sol) },
        Ok(_) => LpOutcome::Unbounded,
        Err(minilp::Error::Unbounded) => LpOutcome::Unbounded,
        Err(minilp::Error::Infeasible) => LpOutcome::Infeasible,
    }
}

/// Centre and radius of the largest inscribed ball. `None` when infeasible.
/// An unbounded radius is reported as `f64::INFINITY`.
pub fn chebyshev_center(normals: &[DVector<f64>], offsets: &[f64]) -> Option<(DVector<f64>, f64)> {
    let dim = normals.first()?.len();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars = FreeVars::new(&mut problem, &vec![0.0; dim]);
    let radius = problem.add_var(1.0, (0.0, f64::INFINITY));
    for (a, &b) in normals.iter().zip(offsets) {
        let mut row = vars.row(a);
        row.push((radius, a.norm()));
        problem.add_constraint(row.as_slice(), ComparisonOp::Le, b);
    }
    match problem.solve() {
        Ok(sol) if sol[radius].is_finite() => Some((vars.value(&sol), sol[radius])),
        Ok(_) => Some((DVector::zeros(dim), f64::INFINITY)),
        Err(minilp::Error::Unbounded) => Some((DVector::zeros(dim), f64::INFINITY)),
        Err(minilp::Error::Infeasible) => None,
    }
}

/// True iff the intersection of the two H-representations is nonempty.
pub fn feasible(normals: &[DVector<f64>], offsets: &[f64]) -> bool {
    let Some(first) = normals.first() else {
        return true;
    };
    let zero = DVector::zeros(first.len());
    !matches!(support(normals, offsets, &zero), LpOutcome::Infeasible)
}

/// Enumerates vertices by solving every `dim`-subset of bounding hyperplanes.
///
/// Intended for small inputs (`C(n, dim)` linear solves). Near-duplicate
/// vertices (within `tol`) are merged.
pub fn vertices(normals: &[DVector<f64>], offsets: &[f64], tol: f64) -> Vec<DVector<f64>> {
    let n = normals.len();
    let Some(first) = normals.first() else {
        return Vec::new();
    };
    let dim = first.len();
    let mut out: Vec<DVector<f64>> = Vec::new();
    if n < dim {
        return out;
    }
    let mut idx: Vec<usize> = (0..dim).collect();
    let mut mat = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    loop {
        for (r, &j) in idx.iter().enumerate() {
            mat.row_mut(r).copy_from(&normals[j].transpose());
            rhs[r] = offsets[j];
        }
        if let Some(x) = mat.clone().lu().solve(&rhs) {
            let scale = 1.0 + x.amax();
            let ok = x.iter().all(|v| v.is_finite())
                && normals
                    .iter()
                    .zip(offsets)
                    .all(|(a, &b)| a.dot(&x) <= b + tol * scale);
            if ok && !out.iter().any(|v| (v - &x).amax() <= tol * scale) {
                out.push(x);
            }
        }
        // next combination
        let mut i = dim;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - dim + i {
                idx[i] += 1;
                for k in i + 1..dim {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> (Vec<DVector<f64>>, Vec<f64>) {
        (
            vec![
                DVector::from_vec(vec![-1.0, 0.0]),
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.0, -1.0]),
                DVector::from_vec(vec![0.0, 1.0]),
            ],
            vec![0.0, 1.0, 0.0, 1.0],
        )
    }

    #[test]
    fn square_support_and_center() {
        let (a, b) = unit_square();
        match support(&a, &b, &DVector::from_vec(vec![1.0, 1.0])) {
            LpOutcome::Optimal { value, .. } => assert!((value - 2.0).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        let (c, r) = chebyshev_center(&a, &b).unwrap();
        assert!((r - 0.5).abs() < 1e-9);
        assert!((c - DVector::from_vec(vec![0.5, 0.5])).amax() < 1e-9);
    }

    #[test]
    fn open_strip_is_unbounded() {
        let a = vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![0.0, -1.0])];
        let b = vec![1.0, 1.0];
        assert_eq!(support(&a, &b, &DVector::from_vec(vec![1.0, 0.0])), LpOutcome::Unbounded);
    }

    #[test]
    fn square_vertices() {
        let (a, b) = unit_square();
        let v = vertices(&a, &b, 1e-9);
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn infeasible_detected() {
        let a = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-1.0])];
        assert!(!feasible(&a, &[0.0, -1.0]));
        assert!(feasible(&a, &[1.0, 0.0]));
    }
}
