//! Scalar abstraction shared by every solver in the crate.

use nalgebra as na;
use num_traits as nt;

/// Floating-point scalar the solvers are generic over (`f32` or `f64`).
///
/// Everything numeric goes through `nalgebra::RealField`; the FFT bound lets
/// the circulant solvers plan transforms for the same type.
pub trait Real:
    Copy + Default + na::RealField + nt::FloatConst + nt::FromPrimitive + nt::ToPrimitive + rustfft::FftNum
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Converts a count.
    fn count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn mag(self) -> Self {
        na::ComplexField::abs(self)
    }
}

macro_rules! impl_real {
    ($f:ty) => {
        impl Real for $f {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $f
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Euclidean norm of a slice.
pub fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Euclidean distance between two slices of equal length.
pub fn dist2<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y)).sqrt()
}

/// Hyperbolic secant.
pub fn sech<T: Real>(x: T) -> T {
    T::one() / x.cosh()
}

/// Remainder in `[0, p)`.
pub fn pos_mod<T: Real>(x: T, p: T) -> T {
    let r = x % p;
    if r < T::zero() {
        r + p
    } else {
        r
    }
}
