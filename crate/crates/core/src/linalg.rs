//! Dense helpers: thin SVD of snapshot matrices through a QR step,
//! re-orthonormalisation and spectral norms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Singular values of `S` plus what is needed to form leading left vectors.
///
/// Tall matrices (`rows ≥ cols`) are reduced to the `cols×cols` factor `R`
/// of a QR decomposition; the left vectors are then recovered as
/// `u_i = S v_i / σ_i`. Wide matrices go through `QR(Sᵀ)`, whose `Rᵀ`
/// shares the left singular vectors of `S`.
pub struct ThinSvd<T: Real> {
    sigma: Vec<T>,
    kind: Factors<T>,
    rows: usize,
}

enum Factors<T: Real> {
    /// Right singular vectors, columns ordered like `sigma`.
    Tall(DMatrix<T>),
    /// Left singular vectors directly.
    Wide(DMatrix<T>),
}

impl<T: Real> ThinSvd<T> {
    pub fn new(s: &DMatrix<T>) -> Result<Self> {
        let (rows, cols) = s.shape();
        if rows == 0 || cols == 0 || s.iter().all(|&x| x == T::zero()) {
            return Err(Error::ZeroMatrix);
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("snapshot matrix has non-finite entries".into()));
        }
        // The SVD is always taken of the lower-triangular factor `L = Rᵀ`
        // with left vectors requested; asking nalgebra for right vectors of
        // a rank-deficient upper-triangular `R` loses accuracy in `σ₁`.
        let tall = rows >= cols;
        let l = if tall { s.clone().qr().r().transpose() } else { s.transpose().qr().r().transpose() };
        let svd = l.svd(true, false);
        let u = svd.u.expect("requested left vectors");
        let (sigma, order) = sorted(svd.singular_values.as_slice());
        let u = DMatrix::from_fn(u.nrows(), order.len(), |i, k| u[(i, order[k])]);
        Ok(Self { sigma, kind: if tall { Factors::Tall(u) } else { Factors::Wide(u) }, rows })
    }

    /// All `min(rows, cols)` singular values, descending.
    pub fn singular_values(&self) -> &[T] {
        &self.sigma
    }

    /// Count of singular values above `σ₁ · max(rows, cols) · ε`.
    pub fn numerical_rank(&self, cols: usize) -> usize {
        let cut = self.sigma[0] * T::count(self.rows.max(cols)) * T::default_epsilon();
        self.sigma.iter().take_while(|&&x| x > cut).count()
    }

    /// Leading `k` left singular vectors, orthonormal to working precision.
    pub fn left_vectors(&self, s: &DMatrix<T>, k: usize) -> DMatrix<T> {
        let mut u = match &self.kind {
            Factors::Tall(v) => {
                let mut u = s * v.columns(0, k);
                for (j, mut col) in u.column_iter_mut().enumerate() {
                    col /= self.sigma[j];
                }
                u
            }
            Factors::Wide(u) => u.columns(0, k).into_owned(),
        };
        orthonormalize(&mut u);
        orthonormalize(&mut u);
        u
    }
}

fn sorted<T: Real>(values: &[T]) -> (Vec<T>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite singular values"));
    (order.iter().map(|&i| values[i]).collect(), order)
}

/// Modified Gram–Schmidt on the columns, in place.
pub fn orthonormalize<T: Real>(m: &mut DMatrix<T>) {
    let (rows, k) = m.shape();
    for j in 0..k {
        for i in 0..j {
            let mut proj = T::zero();
            for r in 0..rows {
                proj += m[(r, i)] * m[(r, j)];
            }
            for r in 0..rows {
                let v = m[(r, i)];
                m[(r, j)] -= proj * v;
            }
        }
        let mut c = m.column_mut(j);
        let nrm = c.norm();
        if nrm > T::zero() {
            c /= nrm;
        }
    }
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone().svd(false, false).singular_values.iter().fold(T::zero(), |a, &b| a.max(b))
}

/// `‖M⁻¹‖₂ = 1/σ_min` for a square matrix; infinite when singular.
pub fn inverse_spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    let sv = m.clone().svd(false, false).singular_values;
    let smin = sv.iter().fold(T::max_value().unwrap_or(T::one()), |a, &b| a.min(b));
    if smin > T::zero() {
        T::one() / smin
    } else {
        T::max_value().unwrap_or(T::one())
    }
}

/// `‖VᵀV − I‖_F`.
pub fn orthonormality_defect<T: Real>(v: &DMatrix<T>) -> T {
    let g = v.transpose() * v;
    (g - DMatrix::identity(v.ncols(), v.ncols())).norm()
}

pub fn to_dvector<T: Real>(v: &[T]) -> DVector<T> {
    DVector::from_column_slice(v)
}

/// Deterministic full-rank test data.
#[cfg(test)]
pub(crate) fn hashed(rows: usize, cols: usize, seed: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        let x = ((i * 131 + j * 977 + seed * 7919 + 1) as f64).sin() * 43758.5453;
        x - x.floor() - 0.5
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(rows: usize, cols: usize, rank: usize) -> DMatrix<f64> {
        hashed(rows, rank, 1) * hashed(rank, cols, 2)
    }

    #[test]
    fn matches_direct_svd_both_shapes() {
        for (r, c) in [(40, 15), (15, 40), (20, 20)] {
            let s = test_matrix(r, c, 6);
            let t = ThinSvd::new(&s).unwrap();
            let direct = s.clone().svd(false, false).singular_values;
            let mut d: Vec<f64> = direct.iter().copied().collect();
            d.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (a, b) in t.singular_values().iter().zip(&d) {
                assert!((a - b).abs() < 1e-12 * d[0]);
            }
            assert_eq!(t.numerical_rank(c), 6);
            let u = t.left_vectors(&s, 6);
            assert!(orthonormality_defect(&u) < 1e-13);
            let resid = &s - &u * (u.transpose() * &s);
            assert!(resid.norm() < 1e-12 * s.norm());
        }
    }

    #[test]
    fn transpose_has_same_singular_values() {
        let s = test_matrix(30, 12, 12);
        let a = ThinSvd::new(&s).unwrap();
        let b = ThinSvd::new(&s.transpose()).unwrap();
        for (x, y) in a.singular_values().iter().zip(b.singular_values()) {
            assert!((x - y).abs() < 1e-12 * a.singular_values()[0]);
        }
    }

    #[test]
    fn zero_matrix_is_rejected() {
        assert!(matches!(ThinSvd::new(&DMatrix::<f64>::zeros(5, 3)), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn norms() {
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.5]);
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-14);
        assert!((inverse_spectral_norm(&m) - 2.0).abs() < 1e-14);
    }
}
