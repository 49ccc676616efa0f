//! Proper orthogonal decomposition of snapshot matrices.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::linalg::ThinSvd;
use crate::operators::DiffOp;
use crate::scalar::Real;

/// How many modes to keep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeRule<T> {
    /// Keep every mode with `σ_i / σ_1 ≥ τ`.
    Tolerance(T),
    Fixed(usize),
}

impl<T: Real> ModeRule<T> {
    /// Mode count implied by a descending singular-value sequence.
    pub fn count(&self, sigma: &[T]) -> usize {
        match *self {
            ModeRule::Fixed(n) => n,
            ModeRule::Tolerance(tau) => {
                let s1 = sigma.first().copied().unwrap_or(T::zero());
                sigma.iter().take_while(|&&s| s >= tau * s1).count()
            }
        }
    }

    fn tolerance(&self) -> Option<T> {
        match *self {
            ModeRule::Tolerance(t) => Some(t),
            ModeRule::Fixed(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ModeRule::Fixed(0) => Err(Error::InvalidParameter("mode count must be positive".into())),
            ModeRule::Tolerance(t) if !(t > T::zero()) => {
                Err(Error::InvalidParameter("mode tolerance must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis<T: Real> {
    v: DMatrix<T>,
    sigma: Vec<T>,
    tol: Option<T>,
}

impl<T: Real> PodBasis<T> {
    /// Wraps an existing matrix with orthonormal columns.
    pub fn from_matrix(v: DMatrix<T>) -> Self {
        Self { v, sigma: Vec::new(), tol: None }
    }

    pub fn v(&self) -> &DMatrix<T> {
        &self.v
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.v
    }

    /// Full singular-value sequence of the snapshot matrix (empty when the
    /// basis was supplied directly).
    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.v.ncols()
    }

    pub fn rows(&self) -> usize {
        self.v.nrows()
    }

    pub fn tolerance(&self) -> Option<T> {
        self.tol
    }

    /// `α = Vᵀ z`.
    pub fn project(&self, z: &[T]) -> Result<Vec<T>> {
        check_len(self.rows(), z.len())?;
        Ok((self.v.tr_mul(&nalgebra::DVector::from_column_slice(z))).as_slice().to_vec())
    }

    /// `z = V α`.
    pub fn lift(&self, alpha: &[T]) -> Result<Vec<T>> {
        check_len(self.n(), alpha.len())?;
        Ok((&self.v * nalgebra::DVector::from_column_slice(alpha)).as_slice().to_vec())
    }

    /// `(σ_i / σ_1)` for decay plots, 1-based index.
    pub fn decay(&self) -> Vec<(usize, T)> {
        singular_value_decay(&self.sigma)
    }
}

pub fn singular_value_decay<T: Real>(sigma: &[T]) -> Vec<(usize, T)> {
    let s1 = sigma.first().copied().unwrap_or(T::one());
    sigma.iter().enumerate().map(|(i, &s)| (i + 1, s / s1)).collect()
}

/// POD basis of one snapshot matrix.
pub fn compute_pod<T: Real>(s: &DMatrix<T>, rule: ModeRule<T>) -> Result<PodBasis<T>> {
    Ok(compute_pod_shared(&[s], rule)?.pop().expect("one basis"))
}

/// Bases of several snapshot matrices sharing one mode count: the rule is
/// applied to each matrix and the largest count is used for all of them.
pub fn compute_pod_shared<T: Real>(mats: &[&DMatrix<T>], rule: ModeRule<T>) -> Result<Vec<PodBasis<T>>> {
    rule.validate()?;
    let svds = mats.iter().map(|s| ThinSvd::new(s)).collect::<Result<Vec<_>>>()?;
    let n = svds.iter().map(|svd| rule.count(svd.singular_values())).max().unwrap_or(0).max(1);
    let mut out = Vec::with_capacity(mats.len());
    for (s, svd) in mats.iter().zip(&svds) {
        let rank = svd.numerical_rank(s.ncols());
        let k = if n > rank {
            log::warn!("requested {n} modes but the snapshot matrix has numerical rank {rank}; clamping");
            rank
        } else {
            n
        };
        out.push(PodBasis { v: svd.left_vectors(s, k), sigma: svd.singular_values().to_vec(), tol: rule.tolerance() });
    }
    Ok(out)
}

/// `V_aᵀ D V_b` for a difference operator.
pub fn reduce_operator_between<T: Real>(a: &DMatrix<T>, op: &DiffOp<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_len(op.size(), a.nrows())?;
    check_len(op.size(), b.nrows())?;
    let mut dv = DMatrix::zeros(b.nrows(), b.ncols());
    for (src, mut dst) in b.column_iter().zip(dv.column_iter_mut()) {
        op.apply_unchecked(src.as_slice(), dst.as_mut_slice());
    }
    Ok(a.tr_mul(&dv))
}

/// `D̂ = Vᵀ D V`.
pub fn reduce_operator<T: Real>(basis: &PodBasis<T>, op: &DiffOp<T>) -> Result<DMatrix<T>> {
    reduce_operator_between(basis.v(), op, basis.v())
}

/// `V₁ᵀ V₂`.
pub fn cross_mass<T: Real>(a: &PodBasis<T>, b: &PodBasis<T>) -> Result<DMatrix<T>> {
    check_len(a.rows(), b.rows())?;
    Ok(a.v().tr_mul(b.v()))
}
