//! Periodic centred-difference operators on uniform 1D and 2D grids.
//!
//! Operators are never stored densely: a [`DiffOp`] is the two-point stencil
//! `(v[j+1] - v[j-1]) / (2h)` along one axis, with periodic wrap. In 2D the
//! nodes use lexicographic ordering with the x index running fastest, so
//! `Dx = I_{Ny} ⊗ D_{Nx}/(2Δx)` and `Dy = D_{Ny}/(2Δy) ⊗ I_{Nx}`.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Uniform periodic grid. Node `j` sits at `x_L + j Δx`; node `N` coincides
/// with node `0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    x_bounds: (T, T),
    y_bounds: Option<(T, T)>,
    nx: usize,
    ny: usize,
    dx: T,
    dy: T,
}

impl<T: Real> Grid<T> {
    pub fn line(x_left: T, x_right: T, nx: usize) -> Result<Self> {
        let dx = spacing(x_left, x_right, nx)?;
        Ok(Self { x_bounds: (x_left, x_right), y_bounds: None, nx, ny: 1, dx, dy: T::one() })
    }

    pub fn rect(x: (T, T), y: (T, T), nx: usize, ny: usize) -> Result<Self> {
        let dx = spacing(x.0, x.1, nx)?;
        let dy = spacing(y.0, y.1, ny)?;
        Ok(Self { x_bounds: x, y_bounds: Some(y), nx, ny, dx, dy })
    }

    pub fn dims(&self) -> usize {
        if self.y_bounds.is_some() {
            2
        } else {
            1
        }
    }

    pub fn is_2d(&self) -> bool {
        self.y_bounds.is_some()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Total node count `N` (`Nx` or `Nx·Ny`).
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn dy(&self) -> T {
        self.dy
    }

    pub fn x_bounds(&self) -> (T, T) {
        self.x_bounds
    }

    pub fn y_bounds(&self) -> Option<(T, T)> {
        self.y_bounds
    }

    /// Quadrature weight of one node: `Δx` in 1D, `ΔxΔy` in 2D.
    pub fn cell_measure(&self) -> T {
        if self.is_2d() {
            self.dx * self.dy
        } else {
            self.dx
        }
    }

    /// Coordinates of node `j` (lexicographic, x fastest). `y` is zero in 1D.
    pub fn node(&self, j: usize) -> (T, T) {
        let (ix, iy) = (j % self.nx, j / self.nx);
        let x = self.x_bounds.0 + T::count(ix) * self.dx;
        let y = match self.y_bounds {
            Some((yl, _)) => yl + T::count(iy) * self.dy,
            None => T::zero(),
        };
        (x, y)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (T, T)> + '_ {
        (0..self.len()).map(move |j| self.node(j))
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(T, T) -> T) -> Vec<T> {
        self.nodes().map(|(x, y)| f(x, y)).collect()
    }
}

fn spacing<T: Real>(left: T, right: T, n: usize) -> Result<T> {
    if n < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 nodes per direction, got {n}")));
    }
    let h = (right - left) / T::count(n);
    if !(h > T::zero()) {
        return Err(Error::InvalidGrid(format!("domain bounds must satisfy left < right (mesh size {})", h.as_f64())));
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Skew-symmetric periodic centred difference along one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOp<T> {
    axis: Axis,
    nx: usize,
    ny: usize,
    /// `1 / (2h)`
    scale: T,
}

/// `N×N` operator `(1/(2Δx)) D_N` with the periodic corner entries.
pub fn build_centered_diff<T: Real>(n: usize, h: T) -> Result<DiffOp<T>> {
    if n < 3 {
        return Err(Error::InvalidGrid(format!("centred stencil overlaps itself for N = {n} < 3")));
    }
    if !(h > T::zero()) {
        return Err(Error::InvalidGrid(format!("mesh size must be positive, got {}", h.as_f64())));
    }
    Ok(DiffOp { axis: Axis::X, nx: n, ny: 1, scale: T::one() / (h + h) })
}

/// `(Dx, Dy)` on a 2D grid.
pub fn build_2d_diffs<T: Real>(grid: &Grid<T>) -> Result<(DiffOp<T>, DiffOp<T>)> {
    if !grid.is_2d() {
        return Err(Error::DimensionMismatch { expected: 2, got: grid.dims() });
    }
    let two = T::lit(2.0);
    let dx = DiffOp { axis: Axis::X, nx: grid.nx(), ny: grid.ny(), scale: T::one() / (two * grid.dx()) };
    let dy = DiffOp { axis: Axis::Y, nx: grid.nx(), ny: grid.ny(), scale: T::one() / (two * grid.dy()) };
    Ok((dx, dy))
}

impl<T: Real> DiffOp<T> {
    pub fn size(&self) -> usize {
        self.nx * self.ny
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Off-diagonal entry magnitude `1/(2h)`.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// `out = D v`.
    pub fn apply(&self, v: &[T], out: &mut [T]) -> Result<()> {
        check_len(self.size(), v.len())?;
        check_len(self.size(), out.len())?;
        self.apply_unchecked(v, out);
        Ok(())
    }

    pub fn apply_vec(&self, v: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.size()];
        self.apply(v, &mut out)?;
        Ok(out)
    }

    pub(crate) fn apply_unchecked(&self, v: &[T], out: &mut [T]) {
        let s = self.scale;
        match self.axis {
            Axis::X => {
                let n = self.nx;
                for (row_in, row_out) in v.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
                    row_out[0] = s * (row_in[1] - row_in[n - 1]);
                    for i in 1..n - 1 {
                        row_out[i] = s * (row_in[i + 1] - row_in[i - 1]);
                    }
                    row_out[n - 1] = s * (row_in[0] - row_in[n - 2]);
                }
            }
            Axis::Y => {
                let (nx, ny) = (self.nx, self.ny);
                for iy in 0..ny {
                    let up = if iy + 1 == ny { 0 } else { iy + 1 };
                    let down = if iy == 0 { ny - 1 } else { iy - 1 };
                    let (o, u, d) = (iy * nx, up * nx, down * nx);
                    for ix in 0..nx {
                        out[o + ix] = s * (v[u + ix] - v[d + ix]);
                    }
                }
            }
        }
    }

    /// Eigenvalue of the operator on the discrete Fourier mode `(kx, ky)`:
    /// `i sin(2πk/n) / h` along the operator's axis.
    pub fn symbol(&self, kx: usize, ky: usize) -> Complex<T> {
        let (k, n) = match self.axis {
            Axis::X => (kx, self.nx),
            Axis::Y => (ky, self.ny),
        };
        let theta = T::two_pi() * T::count(k) / T::count(n);
        Complex::new(T::zero(), (self.scale + self.scale) * theta.sin())
    }

    /// Dense copy, for small-size checks and reduced-operator assembly tests.
    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            self.apply_unchecked(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = T::zero();
        }
        m
    }
}

/// The first-derivative operators of a grid: `Dx`, plus `Dy` in 2D.
#[derive(Clone, Debug)]
pub struct Derivatives<T> {
    pub dx: DiffOp<T>,
    pub dy: Option<DiffOp<T>>,
}

impl<T: Real> Derivatives<T> {
    pub fn for_grid(grid: &Grid<T>) -> Result<Self> {
        if grid.is_2d() {
            let (dx, dy) = build_2d_diffs(grid)?;
            Ok(Self { dx, dy: Some(dy) })
        } else {
            Ok(Self { dx: build_centered_diff(grid.nx(), grid.dx())?, dy: None })
        }
    }

    pub fn size(&self) -> usize {
        self.dx.size()
    }

    pub fn get(&self, axis: Axis) -> &DiffOp<T> {
        match axis {
            Axis::X => &self.dx,
            Axis::Y => self.dy.as_ref().expect("Dy requested on a 1D grid"),
        }
    }
}

/// `coeff · Dx^px · Dy^py`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monomial<T> {
    pub coeff: T,
    pub px: u32,
    pub py: u32,
}

/// Linear combination of products of difference operators, e.g.
/// `Dx (Dx² + Dy²)` or `-μ (Dx² + Dy²)`. Applied on the full grid with the
/// sparse stencils, diagonalised by the DFT for the circulant solver, or
/// evaluated on reduced matrices (products of `D̂x`, `D̂y` in that order).
#[derive(Clone, Debug, PartialEq)]
pub struct DiffPolynomial<T> {
    terms: Vec<Monomial<T>>,
}

impl<T: Real> DiffPolynomial<T> {
    pub fn new(terms: Vec<Monomial<T>>) -> Self {
        Self { terms }
    }

    pub fn term(coeff: T, px: u32, py: u32) -> Self {
        Self::new(vec![Monomial { coeff, px, py }])
    }

    pub fn identity(coeff: T) -> Self {
        Self::term(coeff, 0, 0)
    }

    pub fn terms(&self) -> &[Monomial<T>] {
        &self.terms
    }

    pub fn uses_y(&self) -> bool {
        self.terms.iter().any(|m| m.py > 0)
    }

    /// `out = p(Dx, Dy) v`.
    pub fn apply(&self, ops: &Derivatives<T>, v: &[T], out: &mut [T]) -> Result<()> {
        check_len(ops.size(), v.len())?;
        check_len(ops.size(), out.len())?;
        let n = v.len();
        out.iter_mut().for_each(|o| *o = T::zero());
        let mut a = vec![T::zero(); n];
        let mut b = vec![T::zero(); n];
        for m in &self.terms {
            a.copy_from_slice(v);
            for _ in 0..m.py {
                ops.get(Axis::Y).apply_unchecked(&a, &mut b);
                std::mem::swap(&mut a, &mut b);
            }
            for _ in 0..m.px {
                ops.dx.apply_unchecked(&a, &mut b);
                std::mem::swap(&mut a, &mut b);
            }
            for (o, &x) in out.iter_mut().zip(&a) {
                *o += m.coeff * x;
            }
        }
        Ok(())
    }

    /// Eigenvalue on Fourier mode `(kx, ky)`.
    pub fn symbol(&self, ops: &Derivatives<T>, kx: usize, ky: usize) -> Complex<T> {
        let lx = ops.dx.symbol(kx, ky);
        let ly = ops.dy.as_ref().map(|d| d.symbol(kx, ky)).unwrap_or_else(|| Complex::new(T::zero(), T::zero()));
        self.terms
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, m| acc + lx.powu(m.px) * ly.powu(m.py) * m.coeff)
    }

    /// `Σ coeff · X^px · Y^py` for square matrices `X`, `Y` of equal size.
    pub fn evaluate_dense(&self, x: &DMatrix<T>, y: Option<&DMatrix<T>>) -> DMatrix<T> {
        let n = x.nrows();
        let mut acc = DMatrix::zeros(n, n);
        for m in &self.terms {
            let mut term = DMatrix::identity(n, n) * m.coeff;
            for _ in 0..m.px {
                term *= x;
            }
            if m.py > 0 {
                let y = y.expect("polynomial uses Dy but no reduced Dy was supplied");
                for _ in 0..m.py {
                    term *= y;
                }
            }
            acc += term;
        }
        acc
    }
}
