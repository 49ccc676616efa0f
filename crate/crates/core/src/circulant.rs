//! Direct solver for periodic block systems `(C/Δt + A/2) x = r`.
//!
//! `C` couples components through constant scalar coefficients and every
//! block of `A` is a polynomial in the difference operators, so each block
//! is (block-)circulant and the whole matrix is diagonalised by the DFT.
//! The solve is one forward transform per component, an `m×m` complex
//! solve per Fourier mode and one inverse transform.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::operators::{Derivatives, DiffPolynomial};
use crate::scalar::Real;

/// Forward/inverse DFT over a 1D or 2D periodic grid (x index fastest).
pub struct Dft2<T: Real> {
    nx: usize,
    ny: usize,
    fx: Arc<dyn Fft<T>>,
    ix: Arc<dyn Fft<T>>,
    fy: Option<Arc<dyn Fft<T>>>,
    iy: Option<Arc<dyn Fft<T>>>,
}

impl<T: Real> Dft2<T> {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fx = planner.plan_fft_forward(nx);
        let ix = planner.plan_fft_inverse(nx);
        let (fy, iy) = if ny > 1 {
            (Some(planner.plan_fft_forward(ny)), Some(planner.plan_fft_inverse(ny)))
        } else {
            (None, None)
        };
        Self { nx, ny, fx, ix, fy, iy }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, buf: &mut [Complex<T>], column: &mut Vec<Complex<T>>) {
        self.run(buf, column, &self.fx, self.fy.as_ref());
    }

    /// Unnormalised inverse: `inverse(forward(x)) = N x`.
    pub fn inverse(&self, buf: &mut [Complex<T>], column: &mut Vec<Complex<T>>) {
        self.run(buf, column, &self.ix, self.iy.as_ref());
    }

    fn run(
        &self,
        buf: &mut [Complex<T>],
        column: &mut Vec<Complex<T>>,
        rows: &Arc<dyn Fft<T>>,
        cols: Option<&Arc<dyn Fft<T>>>,
    ) {
        rows.process(buf);
        if let Some(cols) = cols {
            let (nx, ny) = (self.nx, self.ny);
            column.resize(ny, Complex::new(T::zero(), T::zero()));
            for ix in 0..nx {
                for iy in 0..ny {
                    column[iy] = buf[iy * nx + ix];
                }
                cols.process(column);
                for iy in 0..ny {
                    buf[iy * nx + ix] = column[iy];
                }
            }
        }
    }
}

/// Prefactorised `(C/Δt + A/2)` for `m` components on a periodic grid.
pub struct CirculantSolver<T: Real> {
    m: usize,
    n: usize,
    dft: Dft2<T>,
    /// Per Fourier mode, the `m×m` inverse symbol (row-major), pre-scaled
    /// by `1/N` so no separate normalisation is needed.
    inv: Vec<Complex<T>>,
}

impl<T: Real> CirculantSolver<T> {
    /// `mass` is the row-major `m×m` coefficient matrix of `C`; `stiffness[i]`
    /// is the diagonal block `A_ii`.
    pub fn new(
        ops: &Derivatives<T>,
        nx: usize,
        ny: usize,
        mass: &[T],
        stiffness: &[DiffPolynomial<T>],
        dt: T,
    ) -> Result<Self> {
        let m = stiffness.len();
        check_len(m * m, mass.len())?;
        check_len(nx * ny, ops.size())?;
        if !(dt > T::zero()) && !(dt < T::zero()) {
            return Err(Error::InvalidParameter("time step must be non-zero".into()));
        }
        let n = nx * ny;
        let half = T::lit(0.5);
        let norm = T::one() / T::count(n);
        let mut inv = Vec::with_capacity(n * m * m);
        let mut block = vec![Complex::new(T::zero(), T::zero()); m * m];
        for ky in 0..ny {
            for kx in 0..nx {
                for i in 0..m {
                    for j in 0..m {
                        block[i * m + j] = Complex::new(mass[i * m + j] / dt, T::zero());
                    }
                    block[i * m + i] += stiffness[i].symbol(ops, kx, ky) * half;
                }
                let b = invert_small(&block, m)
                    .ok_or_else(|| Error::Singular(format!("Fourier mode ({kx}, {ky}) has a singular symbol")))?;
                inv.extend(b.into_iter().map(|z| z * norm));
            }
        }
        Ok(Self { m, n, dft: Dft2::new(nx, ny), inv })
    }

    pub fn components(&self) -> usize {
        self.m
    }

    /// Solves in place; `rhs` holds the `m` components back to back.
    pub fn solve(&self, rhs: &mut [T], scratch: &mut SolverScratch<T>) -> Result<()> {
        let (m, n) = (self.m, self.n);
        check_len(m * n, rhs.len())?;
        scratch.ensure(m * n);
        let spec = &mut scratch.spectrum;
        for (s, &r) in spec.iter_mut().zip(rhs.iter()) {
            *s = Complex::new(r, T::zero());
        }
        for c in 0..m {
            self.dft.forward(&mut spec[c * n..(c + 1) * n], &mut scratch.column);
        }
        let mut tmp = [Complex::new(T::zero(), T::zero()); 2];
        for k in 0..n {
            let b = &self.inv[k * m * m..(k + 1) * m * m];
            if m == 1 {
                spec[k] *= b[0];
            } else {
                for i in 0..m {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for j in 0..m {
                        acc += b[i * m + j] * spec[j * n + k];
                    }
                    tmp[i] = acc;
                }
                for i in 0..m {
                    spec[i * n + k] = tmp[i];
                }
            }
        }
        for c in 0..m {
            self.dft.inverse(&mut spec[c * n..(c + 1) * n], &mut scratch.column);
        }
        for (r, s) in rhs.iter_mut().zip(spec.iter()) {
            *r = s.re;
        }
        Ok(())
    }
}

#[derive(Default)]
pub struct SolverScratch<T: Real> {
    spectrum: Vec<Complex<T>>,
    column: Vec<Complex<T>>,
}

impl<T: Real> SolverScratch<T> {
    fn ensure(&mut self, len: usize) {
        if self.spectrum.len() != len {
            self.spectrum = vec![Complex::new(T::zero(), T::zero()); len];
        }
    }
}

fn invert_small<T: Real>(a: &[Complex<T>], m: usize) -> Option<Vec<Complex<T>>> {
    let tiny = T::default_epsilon() * T::lit(1e3);
    match m {
        1 => {
            if a[0].norm_sqr().sqrt() <= tiny {
                None
            } else {
                Some(vec![a[0].inv()])
            }
        }
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            let scale = a.iter().fold(T::zero(), |s, z| s.max(z.norm_sqr().sqrt()));
            if det.norm_sqr().sqrt() <= tiny * scale * scale {
                return None;
            }
            let d = det.inv();
            Some(vec![a[3] * d, -a[1] * d, -a[2] * d, a[0] * d])
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Grid, Monomial};

    fn apply_system(
        ops: &Derivatives<f64>,
        mass: &[f64],
        stiff: &[DiffPolynomial<f64>],
        dt: f64,
        x: &[f64],
    ) -> Vec<f64> {
        let m = stiff.len();
        let n = ops.size();
        let mut out = vec![0.0; m * n];
        let mut tmp = vec![0.0; n];
        for i in 0..m {
            stiff[i].apply(ops, &x[i * n..(i + 1) * n], &mut tmp).unwrap();
            for k in 0..n {
                out[i * n + k] = 0.5 * tmp[k];
                for j in 0..m {
                    out[i * n + k] += mass[i * m + j] / dt * x[j * n + k];
                }
            }
        }
        out
    }

    #[test]
    fn solves_kdv_type_operator() {
        let g = Grid::line(0.0, 20.0, 37).unwrap();
        let ops = Derivatives::for_grid(&g).unwrap();
        let stiff = vec![DiffPolynomial::term(1.0, 3, 0)];
        let s = CirculantSolver::new(&ops, 37, 1, &[1.0], &stiff, 0.01).unwrap();
        let x: Vec<f64> = (0..37).map(|j| ((j * 7 % 11) as f64).sin()).collect();
        let mut r = apply_system(&ops, &[1.0], &stiff, 0.01, &x);
        s.solve(&mut r, &mut SolverScratch::default()).unwrap();
        for (a, b) in r.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn solves_coupled_2d_operator() {
        let g = Grid::rect((-6.0, 6.0), (-6.0, 6.0), 8, 6).unwrap();
        let ops = Derivatives::for_grid(&g).unwrap();
        let lap =
            DiffPolynomial::new(vec![Monomial { coeff: -0.5, px: 2, py: 0 }, Monomial { coeff: -0.5, px: 0, py: 2 }]);
        let stiff = vec![lap.clone(), lap];
        let mass = [0.0, 1.0, -1.0, 0.0];
        let s = CirculantSolver::new(&ops, 8, 6, &mass, &stiff, 0.02).unwrap();
        let x: Vec<f64> = (0..96).map(|j| ((j * 13 % 17) as f64 * 0.3).cos()).collect();
        let mut r = apply_system(&ops, &mass, &stiff, 0.02, &x);
        s.solve(&mut r, &mut SolverScratch::default()).unwrap();
        for (a, b) in r.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_symbol_is_reported() {
        // A = D on an even grid: the Nyquist mode of D vanishes and C = 0.
        let g = Grid::line(0.0, 1.0, 8).unwrap();
        let ops = Derivatives::for_grid(&g).unwrap();
        let stiff = vec![DiffPolynomial::term(1.0, 1, 0)];
        assert!(matches!(CirculantSolver::new(&ops, 8, 1, &[0.0], &stiff, 0.1), Err(Error::Singular(_))));
    }
}
