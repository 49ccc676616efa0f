//! Discrete empirical interpolation with QDEIM point selection.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::linalg::inverse_spectral_norm;
use crate::models::Nonlinearity;
use crate::pod::{compute_pod, compute_pod_shared, ModeRule, PodBasis};
use crate::scalar::Real;

/// DEIM basis `Φ` of a nonlinear snapshot matrix.
pub fn compute_deim<T: Real>(s_nl: &DMatrix<T>, rule: ModeRule<T>) -> Result<PodBasis<T>> {
    compute_pod(s_nl, rule)
}

/// DEIM bases of several nonlinear terms sharing one `ñ`.
pub fn compute_deim_shared<T: Real>(mats: &[&DMatrix<T>], rule: ModeRule<T>) -> Result<Vec<PodBasis<T>>> {
    compute_pod_shared(mats, rule)
}

/// Interpolation rows from a column-pivoted Householder QR of `Φᵀ`.
pub fn qdeim_select<T: Real>(phi: &DMatrix<T>) -> Result<Vec<usize>> {
    let (n, k) = phi.shape();
    if k > n {
        return Err(Error::DimensionMismatch { expected: n, got: k });
    }
    let mut a = phi.transpose();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut first_max = T::zero();
    let mut v = vec![T::zero(); k];
    for j in 0..k {
        let mut best = j;
        let mut best_norm = -T::one();
        for c in j..n {
            let s = (j..k).fold(T::zero(), |acc, r| acc + a[(r, c)] * a[(r, c)]);
            if s > best_norm {
                best_norm = s;
                best = c;
            }
        }
        let best_norm = best_norm.sqrt();
        if j == 0 {
            first_max = best_norm;
        }
        if !(best_norm > first_max * T::default_epsilon() * T::count(n.max(k))) {
            return Err(Error::RankDeficient { column: j });
        }
        if best != j {
            a.swap_columns(j, best);
            perm.swap(j, best);
        }
        // Householder vector for a[j.., j].
        let x0 = a[(j, j)];
        let alpha = if x0 >= T::zero() { -best_norm } else { best_norm };
        for r in j..k {
            v[r] = a[(r, j)];
        }
        v[j] -= alpha;
        let vnorm2 = (j..k).fold(T::zero(), |acc, r| acc + v[r] * v[r]);
        if vnorm2 > T::zero() {
            for c in j..n {
                let dotp = (j..k).fold(T::zero(), |acc, r| acc + v[r] * a[(r, c)]);
                let f = (dotp + dotp) / vnorm2;
                for r in j..k {
                    let val = a[(r, c)] - f * v[r];
                    a[(r, c)] = val;
                }
            }
        }
    }
    Ok(perm[..k].to_vec())
}

/// `PᵀΦ`: the selected rows of `Φ`.
pub fn selected_rows<T: Real>(m: &DMatrix<T>, indices: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(indices.len(), m.ncols(), |i, j| m[(indices[i], j)])
}

/// Precomputed DEIM data for one nonlinear term.
#[derive(Clone, Debug)]
pub struct DeimOperator<T: Real> {
    phi: DMatrix<T>,
    indices: Vec<usize>,
    w: DMatrix<T>,
    projected: DMatrix<T>,
    inv_norm: T,
    complement_norm: T,
}

/// `W = Φ (PᵀΦ)⁻¹`, `VᵀW` and the constants of the energy-defect bound.
pub fn build_deim_operator<T: Real>(phi: &DMatrix<T>, indices: &[usize], v: &DMatrix<T>) -> Result<DeimOperator<T>> {
    check_len(phi.ncols(), indices.len())?;
    check_len(phi.nrows(), v.nrows())?;
    let mut seen = indices.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != indices.len() || seen.last().is_some_and(|&i| i >= phi.nrows()) {
        return Err(Error::InvalidParameter("DEIM indices must be distinct row indices".into()));
    }
    let pt_phi = selected_rows(phi, indices);
    let inv = pt_phi.clone().try_inverse().ok_or_else(|| Error::Singular("PᵀΦ".into()))?;
    let w = phi * inv;
    let projected = v.tr_mul(&w);
    let inv_norm = inverse_spectral_norm(&pt_phi);
    let complement_norm = if phi.ncols() < phi.nrows() { T::one() } else { T::zero() };
    Ok(DeimOperator { phi: phi.clone(), indices: indices.to_vec(), w, projected, inv_norm, complement_norm })
}

impl<T: Real> DeimOperator<T> {
    pub fn phi(&self) -> &DMatrix<T> {
        &self.phi
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ntilde(&self) -> usize {
        self.indices.len()
    }

    pub fn w(&self) -> &DMatrix<T> {
        &self.w
    }

    /// `VᵀW`.
    pub fn projected(&self) -> &DMatrix<T> {
        &self.projected
    }

    /// `‖(PᵀΦ)⁻¹‖₂`.
    pub fn inv_norm(&self) -> T {
        self.inv_norm
    }

    /// `‖I − ΦΦᵀ‖₂`: one unless `Φ` spans the whole space.
    pub fn complement_norm(&self) -> T {
        self.complement_norm
    }

    /// DEIM reconstruction `W Pᵀ y`.
    pub fn approximate(&self, y: &[T]) -> Result<Vec<T>> {
        check_len(self.phi.nrows(), y.len())?;
        let sampled = nalgebra::DVector::from_iterator(self.indices.len(), self.indices.iter().map(|&i| y[i]));
        Ok((&self.w * sampled).as_slice().to_vec())
    }
}

/// Rows of the POD bases at the interpolation points, so a pointwise
/// nonlinearity can be evaluated from reduced coefficients without ever
/// forming a length-`N` vector.
#[derive(Clone, Debug)]
pub struct SampledRows<T: Real> {
    indices: Vec<usize>,
    rows: Vec<DMatrix<T>>,
}

impl<T: Real> SampledRows<T> {
    pub fn new(bases: &[&DMatrix<T>], indices: &[usize]) -> Self {
        Self { indices: indices.to_vec(), rows: bases.iter().map(|v| selected_rows(v, indices)).collect() }
    }

    pub fn points(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Total reduced dimension across components.
    pub fn reduced_dim(&self) -> usize {
        self.rows.iter().map(|r| r.ncols()).sum()
    }

    /// Sampled lift `[Pᵀ V₁ α₁; Pᵀ V₂ α₂; …]`, component-blocked.
    pub fn lift_into(&self, alpha: &[T], out: &mut [T]) {
        let s = self.points();
        let mut offset = 0;
        for (c, r) in self.rows.iter().enumerate() {
            let a = &alpha[offset..offset + r.ncols()];
            let dst = &mut out[c * s..(c + 1) * s];
            for (i, d) in dst.iter_mut().enumerate() {
                let mut acc = T::zero();
                for (j, &aj) in a.iter().enumerate() {
                    acc += r[(i, j)] * aj;
                }
                *d = acc;
            }
            offset += r.ncols();
        }
    }

    /// Evaluates every nonlinear term at the sampled points from a sampled
    /// lift; output is component-blocked like the input.
    pub fn eval_into(&self, nl: &Nonlinearity<T>, lifted: &[T], out: &mut [T]) {
        let m = self.rows.len();
        let s = self.points();
        let mut vals = [T::zero(); 2];
        let mut res = [T::zero(); 2];
        for (p, &node) in self.indices.iter().enumerate() {
            for c in 0..m {
                vals[c] = lifted[c * s + p];
            }
            nl.eval_node(node, &vals[..m], &mut res[..m]);
            for c in 0..m {
                out[c * s + p] = res[c];
            }
        }
    }
}

/// `Pᵀ N_term(V α)` evaluated from basis rows only.
pub fn sampled_nonlinearity<T: Real>(
    nl: &Nonlinearity<T>,
    bases: &[&DMatrix<T>],
    indices: &[usize],
    term: usize,
    alpha: &[T],
) -> Result<Vec<T>> {
    let rows = SampledRows::new(bases, indices);
    check_len(rows.reduced_dim(), alpha.len())?;
    let m = bases.len();
    check_len(nl.components(), m)?;
    let s = indices.len();
    let mut lifted = vec![T::zero(); m * s];
    let mut out = vec![T::zero(); m * s];
    rows.lift_into(alpha, &mut lifted);
    rows.eval_into(nl, &lifted, &mut out);
    Ok(out[term * s..(term + 1) * s].to_vec())
}
