//! Partition-of-unity blending of per-patch linear distances.
//!
//! Each patch carries a quadratic `f_i(x) = (x - c_i)^T M_i (x - c_i)` and a
//! facet `v_i(x) = b_i - a_i . x`. Weights are `psi_i = mu(f_i)` with the
//! standard mollifier `mu`, normalized to `phi_i = psi_i / Psi`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cover::DagStructure;
use crate::error::{Error, Result};

/// `exp(-1 / (1 - s^2))` on `(-1, 1)`, zero elsewhere.
pub fn mollifier(sigma: f64) -> f64 {
    if sigma.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - sigma * sigma)).exp()
    }
}

/// `mu(s) s / (s^2 - 1)^2`, the factor tying weight gradients to shape gradients.
pub fn kappa(sigma: f64) -> Result<f64> {
    if !(sigma.abs() < 1.0) {
        return Err(Error::DomainError(sigma));
    }
    let q = sigma * sigma - 1.0;
    Ok(mollifier(sigma) * sigma / (q * q))
}

/// Projected top ellipsoid plus its representative facet.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    /// Level-0 node this patch was projected from.
    pub node: usize,
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    /// Index of the representative facet in the base polytope.
    pub rep: usize,
    pub a: DVector<f64>,
    pub b: f64,
}

impl Patch {
    pub fn f(&self, x: &DVector<f64>) -> f64 {
        let w = x - &self.center;
        w.dot(&(&self.shape * &w))
    }

    pub fn v(&self, x: &DVector<f64>) -> f64 {
        self.b - self.a.dot(x)
    }

    /// `M_i (x - c_i)`, half the gradient of `f_i`.
    pub fn shape_times_offset(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.shape * (x - &self.center)
    }

    /// Gradient of `psi_i = mu(f_i)`; zero outside the cutoff.
    pub fn psi_gradient(&self, x: &DVector<f64>, cutoff: f64) -> DVector<f64> {
        let f = self.f(x);
        if f >= 1.0 - cutoff {
            return DVector::zeros(x.len());
        }
        let q = f * f - 1.0;
        self.shape_times_offset(x) * (-4.0 * mollifier(f) * f / (q * q))
    }
}

/// Per-patch diagnostics of one evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Contribution {
    pub patch: usize,
    pub f: f64,
    pub psi: f64,
    pub phi: f64,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlendResult {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub psi_total: f64,
    pub contributions: Vec<Contribution>,
}

/// `(Psi, psi_i, phi_i)` over the given patches.
pub fn weights(patches: &[&Patch], x: &DVector<f64>, cutoff: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if patches.is_empty() {
        return Err(Error::EmptyPatchList);
    }
    let psi: Vec<f64> = patches
        .iter()
        .map(|p| {
            let f = p.f(x);
            if f >= 1.0 - cutoff {
                0.0
            } else {
                mollifier(f)
            }
        })
        .collect();
    let total: f64 = psi.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyPatchList);
    }
    let phi = psi.iter().map(|p| p / total).collect();
    Ok((total, psi, phi))
}

/// Value, closed-form gradient and diagnostics. `ids` label the patches.
pub fn blend(patches: &[&Patch], ids: &[usize], x: &DVector<f64>, cutoff: f64) -> Result<BlendResult> {
    let (total, psi, phi) = weights(patches, x, cutoff)?;
    let f: Vec<f64> = patches.iter().map(|p| p.f(x)).collect();
    let v: Vec<f64> = patches.iter().map(|p| p.v(x)).collect();
    let value: f64 = phi.iter().zip(&v).map(|(p, v)| p * v).sum();
    let mut gradient = DVector::zeros(x.len());
    for (i, p) in patches.iter().enumerate() {
        gradient -= &p.a * phi[i];
        if psi[i] > 0.0 {
            gradient -= p.shape_times_offset(x) * f_coefficient(total, v[i] - value, psi[i], f[i]);
        }
    }
    let contributions = (0..patches.len())
        .map(|i| Contribution { patch: ids[i], f: f[i], psi: psi[i], phi: phi[i], v: v[i] })
        .collect();
    Ok(BlendResult { value, gradient, psi_total: total, contributions })
}

/// `4 / Psi (v_i - d) psi_i f_i / (f_i^2 - 1)^2`.
fn f_coefficient(total: f64, residual: f64, psi: f64, f: f64) -> f64 {
    let q = f * f - 1.0;
    4.0 / total * residual * psi * f / (q * q)
}

/// The per-patch coefficient of the gradient correction term, from a finished blend.
pub fn f_values(result: &BlendResult) -> Vec<f64> {
    result
        .contributions
        .iter()
        .map(|c| if c.psi > 0.0 { f_coefficient(result.psi_total, c.v - result.value, c.psi, c.f) } else { 0.0 })
        .collect()
}

/// Gradients of the normalized weights `phi_i`.
pub fn phi_gradients(patches: &[&Patch], x: &DVector<f64>, cutoff: f64) -> Result<Vec<DVector<f64>>> {
    let (total, _, phi) = weights(patches, x, cutoff)?;
    let grads: Vec<DVector<f64>> = patches.iter().map(|p| p.psi_gradient(x, cutoff)).collect();
    let sum = grads.iter().fold(DVector::zeros(x.len()), |acc, g| acc + g);
    Ok(grads.iter().zip(&phi).map(|(g, p)| (g - &sum * *p) / total).collect())
}

/// Numerical Hessian with its relative symmetry defect before symmetrization.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianProbe {
    pub matrix: DMatrix<f64>,
    pub symmetry_defect: f64,
}

impl HessianProbe {
    /// Central differences of a gradient field.
    pub fn from_gradient(x: &DVector<f64>, h: f64, mut grad: impl FnMut(&DVector<f64>) -> Result<DVector<f64>>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("difference step must be positive".into()));
        }
        let d = x.len();
        let mut m = DMatrix::zeros(d, d);
        for k in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (grad(&xp)? - grad(&xm)?) / (2.0 * h);
            m.set_column(k, &col);
        }
        let norm = m.norm();
        let defect = if norm > 0.0 { (&m - m.transpose()).norm() / norm } else { 0.0 };
        Ok(Self { matrix: (&m + m.transpose()) * 0.5, symmetry_defect: defect })
    }

    pub fn spectral_norm(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Blended value and gradient at `q` (normalized coordinates).
pub fn eval(s: &DagStructure, q: &DVector<f64>) -> Result<BlendResult> {
    let ids = s.patches_at(q)?;
    let patches: Vec<&Patch> = ids.iter().map(|&i| &s.patches[i]).collect();
    blend(&patches, &ids, q, s.config.tolerances.mollifier_cutoff)
}

pub fn eval_gradient(s: &DagStructure, q: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(eval(s, q)?.gradient)
}

/// Central differences of the closed-form gradient.
pub fn eval_hessian_fd(s: &DagStructure, q: &DVector<f64>, h: f64) -> Result<HessianProbe> {
    HessianProbe::from_gradient(q, h, |x| eval_gradient(s, x))
}

/// Evaluation in the original coordinates of the input polytope: values scale
/// back by `1 / scale`, gradients are unchanged.
pub fn eval_original(s: &DagStructure, x: &DVector<f64>) -> Result<BlendResult> {
    let mut r = eval(s, &s.transform.apply(x))?;
    r.value = s.transform.length_to_original(r.value);
    for c in &mut r.contributions {
        c.v = s.transform.length_to_original(c.v);
    }
    Ok(r)
}

/// Hessian in original coordinates (normalized Hessian times `scale`).
pub fn eval_hessian_original(s: &DagStructure, x: &DVector<f64>, h: f64) -> Result<HessianProbe> {
    let mut probe = eval_hessian_fd(s, &s.transform.apply(x), h * s.transform.scale)?;
    probe.matrix *= s.transform.scale;
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(c: &[f64], r: f64, a: &[f64], b: f64) -> Patch {
        let d = c.len();
        Patch {
            node: 0,
            center: DVector::from_vec(c.to_vec()),
            shape: DMatrix::identity(d, d) / (r * r),
            rep: 0,
            a: DVector::from_vec(a.to_vec()),
            b,
        }
    }

    #[test]
    fn mollifier_values() {
        assert!((mollifier(0.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert!((mollifier(0.0) - 0.367879).abs() < 1e-6);
        assert_eq!(mollifier(1.0), 0.0);
        assert_eq!(mollifier(-1.0), 0.0);
        assert_eq!(mollifier(2.0), 0.0);
        let half = mollifier(0.5);
        assert!((half - (-4.0f64 / 3.0).exp()).abs() < 1e-16 && half > 0.26);
        assert!((half - 0.263597).abs() < 1e-6);
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(0.0).unwrap(), 0.0);
        assert_eq!(kappa(0.3).unwrap(), -kappa(-0.3).unwrap());
        assert!(matches!(kappa(1.0), Err(Error::DomainError(_))));
        assert!(matches!(kappa(-1.5), Err(Error::DomainError(_))));
    }

    #[test]
    fn single_patch_weights_and_gradient() {
        let p = patch(&[0.0, 0.0], 1.0, &[1.0, 0.0], 1.0);
        let x = DVector::from_vec(vec![0.0, 0.0]);
        let (total, psi, phi) = weights(&[&p], &x, 1e-8).unwrap();
        assert!((total - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(psi.len(), 1);
        assert_eq!(phi, vec![1.0]);
        let y = DVector::from_vec(vec![0.3, -0.2]);
        let r = blend(&[&p], &[0], &y, 1e-8).unwrap();
        assert_eq!(r.value, p.v(&y));
        assert_eq!(r.gradient, -&p.a);
        assert_eq!(f_values(&r), vec![0.0]);
    }

    #[test]
    fn identical_patches_split_evenly() {
        let p = patch(&[0.0, 0.0], 1.0, &[1.0, 0.0], 1.0);
        let q = patch(&[0.0, 0.0], 1.0, &[0.0, 1.0], 1.0);
        let x = DVector::from_vec(vec![0.1, 0.2]);
        let (_, _, phi) = weights(&[&p, &q], &x, 1e-8).unwrap();
        assert_eq!(phi, vec![0.5, 0.5]);
    }

    #[test]
    fn exit_weight_vanishes() {
        let p = patch(&[0.0, 0.0], 1.0, &[1.0, 0.0], 1.0);
        let q = patch(&[0.5, 0.0], 1.0, &[1.0, 0.0], 1.0);
        let x = DVector::from_vec(vec![(1.0f64 - 1e-12).sqrt(), 0.0]);
        let (_, psi, phi) = weights(&[&p, &q], &x, 1e-8).unwrap();
        assert_eq!(psi[0], 0.0);
        assert_eq!(phi[0], 0.0);
        assert_eq!(phi[1], 1.0);
    }

    #[test]
    fn empty_list_rejected() {
        let x = DVector::from_vec(vec![0.0, 0.0]);
        assert!(matches!(weights(&[], &x, 1e-8), Err(Error::EmptyPatchList)));
    }

    #[test]
    fn shared_representative_collapses() {
        let p = patch(&[0.0, 0.0], 1.0, &[0.6, 0.8], 2.0);
        let mut q = patch(&[0.4, 0.1], 0.7, &[0.6, 0.8], 2.0);
        q.rep = 0;
        let x = DVector::from_vec(vec![0.2, 0.05]);
        let r = blend(&[&p, &q], &[0, 1], &x, 1e-8).unwrap();
        assert!((r.value - p.v(&x)).abs() < 1e-15);
        assert!((&r.gradient + &p.a).amax() < 1e-15);
    }

    #[test]
    fn gradient_matches_differences() {
        let p = patch(&[0.0, 0.0], 1.0, &[1.0, 0.0], 1.0);
        let mut q = patch(&[0.6, 0.3], 0.8, &[0.0, 1.0], 0.9);
        q.shape[(0, 1)] = 0.4;
        q.shape[(1, 0)] = 0.4;
        let ps = [&p, &q];
        let val = |x: &DVector<f64>| blend(&ps, &[0, 1], x, 1e-8).unwrap().value;
        for x in [[0.3, 0.2], [0.5, 0.1], [0.2, 0.5]] {
            let x = DVector::from_vec(x.to_vec());
            let g = blend(&ps, &[0, 1], &x, 1e-8).unwrap().gradient;
            for k in 0..2 {
                let mut e = DVector::zeros(2);
                e[k] = 1e-6;
                let fd = (val(&(&x + &e)) - val(&(&x - &e))) / 2e-6;
                assert!((fd - g[k]).abs() < 1e-6, "{fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn phi_gradients_sum_to_zero() {
        let p = patch(&[0.0, 0.0], 1.0, &[1.0, 0.0], 1.0);
        let q = patch(&[0.6, 0.3], 0.8, &[0.0, 1.0], 0.9);
        let x = DVector::from_vec(vec![0.3, 0.2]);
        let g = phi_gradients(&[&p, &q], &x, 1e-8).unwrap();
        assert!((&g[0] + &g[1]).amax() < 1e-14);
    }

    #[test]
    fn affine_field_has_zero_hessian() {
        let a = DVector::from_vec(vec![0.6, 0.8]);
        let x = DVector::from_vec(vec![0.1, 0.2]);
        let h = HessianProbe::from_gradient(&x, 1e-4, |_| Ok(-&a)).unwrap();
        assert_eq!(h.matrix, DMatrix::zeros(2, 2));
        assert_eq!(h.spectral_norm(), 0.0);
    }
}
