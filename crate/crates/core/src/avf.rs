//! Average-vector-field time stepping for `C δt ζ + A ζ̄ = B avg N`.
//!
//! The implicit equations are solved by fixed-point sweeps around a
//! prefactorised `(C/Δt + A/2)`; the segment average of the gradient is
//! computed by Gauss–Legendre quadrature, exact for polynomial gradients
//! of degree `≤ 2·points − 1`.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{check_len, Error, Result};
use crate::scalar::{norm2, Real};

/// Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidParameter("quadrature needs at least one point".into()));
        }
        let mut nodes = Vec::with_capacity(points);
        let mut weights = Vec::with_capacity(points);
        let n = points;
        for i in 0..n {
            // Newton on P_n from the Chebyshev-like initial guess, in f64.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes.push(T::lit(0.5 * (1.0 - x)));
            weights.push(T::lit(0.5 * w));
        }
        Ok(Self { nodes, weights })
    }

    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.points() - 1
    }

    /// `∫₀¹ g(ξ) dξ` for a scalar integrand.
    pub fn integrate(&self, mut g: impl FnMut(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).fold(T::zero(), |acc, (&x, &w)| acc + w * g(x))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Scratch buffers for [`avf_average`].
#[derive(Clone, Debug, Default)]
pub struct AverageScratch<T> {
    point: Vec<T>,
    value: Vec<T>,
}

/// `out = ∫₀¹ f((1−ξ) a + ξ b) dξ`. The output length is `out.len()`, which
/// may differ from the input length.
pub fn avf_average<T: Real>(
    mut f: impl FnMut(&[T], &mut [T]),
    a: &[T],
    b: &[T],
    quad: &GaussLegendre<T>,
    out: &mut [T],
    scratch: &mut AverageScratch<T>,
) -> Result<()> {
    check_len(a.len(), b.len())?;
    scratch.point.resize(a.len(), T::zero());
    scratch.value.resize(out.len(), T::zero());
    out.iter_mut().for_each(|o| *o = T::zero());
    for (&xi, &w) in quad.nodes.iter().zip(&quad.weights) {
        let one_m = T::one() - xi;
        for ((p, &x), &y) in scratch.point.iter_mut().zip(a).zip(b) {
            *p = one_m * x + xi * y;
        }
        f(&scratch.point, &mut scratch.value);
        for (o, &v) in out.iter_mut().zip(&scratch.value) {
            *o += w * v;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvfConfig<T> {
    pub dt: T,
    /// Fixed-point tolerance on the update norm, relative to `max(1, ‖ζ^k‖)`.
    pub tol: T,
    pub max_iters: usize,
    pub quad_points: usize,
    /// Start each solve from the linear extrapolation of the last two states.
    pub extrapolate: bool,
}

impl<T: Real> AvfConfig<T> {
    pub fn new(dt: T) -> Self {
        Self { dt, tol: T::lit(1e-12), max_iters: 100, quad_points: 2, extrapolate: true }
    }

    pub fn validate(&self, gradient_degree: usize) -> Result<()> {
        if !(self.dt > T::zero()) && !(self.dt < T::zero()) {
            return Err(Error::InvalidParameter("time step must be non-zero".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        let need = (gradient_degree + 2) / 2;
        if self.quad_points < need.max(1) {
            return Err(Error::InvalidParameter(format!(
                "{} quadrature points cannot integrate a degree-{} gradient exactly (need {})",
                self.quad_points, gradient_degree, need
            )));
        }
        Ok(())
    }
}

/// Solves with a prefactorised operator.
pub trait LinearSolve<T> {
    fn solve_in_place(&self, rhs: &mut [T]) -> Result<()>;
}

/// Dense LU, used for the reduced systems.
pub struct DenseLu<T: Real> {
    lu: LU<T, Dyn, Dyn>,
    n: usize,
}

impl<T: Real> DenseLu<T> {
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let n = m.nrows();
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("reduced step matrix".into()));
        }
        Ok(Self { lu, n })
    }
}

impl<T: Real> LinearSolve<T> for DenseLu<T> {
    fn solve_in_place(&self, rhs: &mut [T]) -> Result<()> {
        check_len(self.n, rhs.len())?;
        let mut b = DVector::from_column_slice(rhs);
        if !self.lu.solve_mut(&mut b) {
            return Err(Error::Singular("reduced step matrix".into()));
        }
        rhs.copy_from_slice(b.as_slice());
        Ok(())
    }
}

/// A system the AVF stepper can advance.
pub trait AvfSystem<T: Real> {
    type Factor;
    type Scratch;

    fn dim(&self) -> usize;

    /// Degree of the nonlinear gradient; `0` for linear systems.
    fn gradient_degree(&self) -> usize;

    fn factorize(&self, dt: T) -> Result<Self::Factor>;

    fn scratch(&self) -> Self::Scratch;

    /// `out = (C/Δt − A/2) z`.
    fn explicit_part(&self, dt: T, z: &[T], out: &mut [T], s: &mut Self::Scratch);

    /// `out = B · ∫₀¹ N((1−ξ)a + ξb) dξ`.
    fn nonlinear_forcing(
        &self,
        a: &[T],
        b: &[T],
        quad: &GaussLegendre<T>,
        out: &mut [T],
        s: &mut Self::Scratch,
    ) -> Result<()>;

    /// Solves `(C/Δt + A/2) x = rhs` in place.
    fn solve(&self, f: &Self::Factor, rhs: &mut [T], s: &mut Self::Scratch) -> Result<()>;
}

/// Factorisation and buffers for one simulation at a fixed `Δt`.
pub struct StepWorkspace<T: Real, S: AvfSystem<T>> {
    dt: T,
    factor: S::Factor,
    scratch: S::Scratch,
    quad: GaussLegendre<T>,
    explicit: Vec<T>,
    rhs: Vec<T>,
    forcing: Vec<T>,
    iterate: Vec<T>,
    previous: Option<Vec<T>>,
}

impl<T: Real, S: AvfSystem<T>> StepWorkspace<T, S> {
    pub fn new(sys: &S, cfg: &AvfConfig<T>) -> Result<Self> {
        cfg.validate(sys.gradient_degree())?;
        let n = sys.dim();
        Ok(Self {
            dt: cfg.dt,
            factor: sys.factorize(cfg.dt)?,
            scratch: sys.scratch(),
            quad: GaussLegendre::new(cfg.quad_points)?,
            explicit: vec![T::zero(); n],
            rhs: vec![T::zero(); n],
            forcing: vec![T::zero(); n],
            iterate: vec![T::zero(); n],
            previous: None,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Forgets the state history used for extrapolated initial guesses.
    pub fn reset_history(&mut self) {
        self.previous = None;
    }
}

/// Advances `zk` by one step into `out`; returns the number of sweeps.
pub fn avf_step_into<T: Real, S: AvfSystem<T>>(
    sys: &S,
    zk: &[T],
    out: &mut [T],
    cfg: &AvfConfig<T>,
    ws: &mut StepWorkspace<T, S>,
) -> Result<usize> {
    let n = sys.dim();
    check_len(n, zk.len())?;
    check_len(n, out.len())?;
    if cfg.dt != ws.dt {
        return Err(Error::InvalidParameter("workspace was factorised for a different time step".into()));
    }
    sys.explicit_part(cfg.dt, zk, &mut ws.explicit, &mut ws.scratch);

    if sys.gradient_degree() == 0 {
        out.copy_from_slice(&ws.explicit);
        sys.solve(&ws.factor, out, &mut ws.scratch)?;
        remember(ws, zk, cfg.extrapolate);
        return Ok(1);
    }

    match (&ws.previous, cfg.extrapolate) {
        (Some(prev), true) => {
            for ((x, &a), &p) in ws.iterate.iter_mut().zip(zk).zip(prev) {
                *x = a + a - p;
            }
        }
        _ => ws.iterate.copy_from_slice(zk),
    }

    let scale = norm2(zk).max(T::one());
    let mut residual = T::zero();
    for sweep in 1..=cfg.max_iters {
        sys.nonlinear_forcing(zk, &ws.iterate, &ws.quad, &mut ws.forcing, &mut ws.scratch)?;
        for ((r, &e), &f) in ws.rhs.iter_mut().zip(&ws.explicit).zip(&ws.forcing) {
            *r = e + f;
        }
        sys.solve(&ws.factor, &mut ws.rhs, &mut ws.scratch)?;
        residual = crate::scalar::dist2(&ws.rhs, &ws.iterate);
        std::mem::swap(&mut ws.rhs, &mut ws.iterate);
        if !residual.is_finite() {
            break;
        }
        if residual <= cfg.tol * scale {
            out.copy_from_slice(&ws.iterate);
            remember(ws, zk, cfg.extrapolate);
            return Ok(sweep);
        }
    }
    Err(Error::NotConverged { iterations: cfg.max_iters, residual: residual.as_f64() })
}

fn remember<T: Real, S: AvfSystem<T>>(ws: &mut StepWorkspace<T, S>, zk: &[T], on: bool) {
    if on {
        match &mut ws.previous {
            Some(p) => p.copy_from_slice(zk),
            None => ws.previous = Some(zk.to_vec()),
        }
    }
}

pub fn avf_step<T: Real, S: AvfSystem<T>>(
    sys: &S,
    zk: &[T],
    cfg: &AvfConfig<T>,
    ws: &mut StepWorkspace<T, S>,
) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); zk.len()];
    avf_step_into(sys, zk, &mut out, cfg, ws)?;
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub steps: usize,
    pub sweeps: usize,
    pub max_sweeps: usize,
}

/// Runs `steps` AVF steps from `z0`, calling `record` on every new state.
/// Returns sweep statistics; errors carry the failing step index.
pub fn integrate<T: Real, S: AvfSystem<T>>(
    sys: &S,
    z0: &[T],
    steps: usize,
    cfg: &AvfConfig<T>,
    ws: &mut StepWorkspace<T, S>,
    mut record: impl FnMut(usize, &[T]),
) -> Result<StepStats> {
    let mut cur = z0.to_vec();
    let mut next = vec![T::zero(); cur.len()];
    let mut stats = StepStats::default();
    for k in 0..steps {
        let sweeps = avf_step_into(sys, &cur, &mut next, cfg, ws)
            .map_err(|e| Error::StepFailed { step: k + 1, source: Box::new(e) })?;
        stats.steps += 1;
        stats.sweeps += sweeps;
        stats.max_sweeps = stats.max_sweeps.max(sweeps);
        std::mem::swap(&mut cur, &mut next);
        record(k + 1, &cur);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_two_point_nodes() {
        let q = GaussLegendre::<f64>::new(2).unwrap();
        let r = 0.5 / 3f64.sqrt();
        let mut nodes = q.nodes().to_vec();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((nodes[0] - (0.5 - r)).abs() < 1e-15);
        assert!((nodes[1] - (0.5 + r)).abs() < 1e-15);
        assert!(q.weights().iter().all(|&w| (w - 0.5).abs() < 1e-15));
    }

    #[test]
    fn gauss_legendre_exactness() {
        for p in 1..8 {
            let q = GaussLegendre::<f64>::new(p).unwrap();
            for d in 0..=q.exact_degree() {
                let v = q.integrate(|x| x.powi(d as i32));
                assert!((v - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "p={p} d={d}");
            }
        }
        assert!(GaussLegendre::<f64>::new(0).is_err());
    }

    #[test]
    fn linear_average_is_midpoint() {
        let q = GaussLegendre::new(2).unwrap();
        let a = [1.0_f64, -2.0, 3.0];
        let b = [0.5, 4.0, -1.0];
        let mut out = [0.0; 3];
        avf_average(|x, y| y.copy_from_slice(x), &a, &b, &q, &mut out, &mut Default::default()).unwrap();
        for i in 0..3 {
            assert!((out[i] - 0.5 * (a[i] + b[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_average_closed_form() {
        let q = GaussLegendre::new(2).unwrap();
        let eta = 6.0;
        let a = [0.3, -1.7, 2.2];
        let b = [1.1, 0.4, -0.9];
        let mut out = [0.0; 3];
        let f = |x: &[f64], y: &mut [f64]| {
            for (o, &v) in y.iter_mut().zip(x) {
                *o = eta * 0.5 * v * v;
            }
        };
        avf_average(f, &a, &b, &q, &mut out, &mut Default::default()).unwrap();
        for i in 0..3 {
            let exact = eta / 6.0 * (a[i] * a[i] + a[i] * b[i] + b[i] * b[i]);
            assert!((out[i] - exact).abs() < 1e-13 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn config_validation() {
        let mut c = AvfConfig::new(0.01_f64);
        assert!(c.validate(3).is_ok());
        c.quad_points = 1;
        assert!(c.validate(3).is_err());
        assert!(c.validate(1).is_ok());
        let c = AvfConfig::new(0.0_f64);
        assert!(c.validate(2).is_err());
    }

    /// `ζ' = J ζ` with `J = [[0,1],[-1,0]]` written as `C = I`, `A = -J`.
    struct Rotation;

    impl AvfSystem<f64> for Rotation {
        type Factor = DenseLu<f64>;
        type Scratch = ();

        fn dim(&self) -> usize {
            2
        }
        fn gradient_degree(&self) -> usize {
            0
        }
        fn factorize(&self, dt: f64) -> Result<DenseLu<f64>> {
            DenseLu::new(DMatrix::from_row_slice(2, 2, &[1.0 / dt, -0.5, 0.5, 1.0 / dt]))
        }
        fn scratch(&self) {}
        fn explicit_part(&self, dt: f64, z: &[f64], out: &mut [f64], _: &mut ()) {
            out[0] = z[0] / dt + 0.5 * z[1];
            out[1] = z[1] / dt - 0.5 * z[0];
        }
        fn nonlinear_forcing(
            &self,
            _: &[f64],
            _: &[f64],
            _: &GaussLegendre<f64>,
            out: &mut [f64],
            _: &mut (),
        ) -> Result<()> {
            out.iter_mut().for_each(|o| *o = 0.0);
            Ok(())
        }
        fn solve(&self, f: &DenseLu<f64>, rhs: &mut [f64], _: &mut ()) -> Result<()> {
            f.solve_in_place(rhs)
        }
    }

    #[test]
    fn linear_step_is_implicit_midpoint_and_norm_preserving() {
        let cfg = AvfConfig::new(0.1);
        let mut ws = StepWorkspace::new(&Rotation, &cfg).unwrap();
        let z = avf_step(&Rotation, &[1.0, 0.0], &cfg, &mut ws).unwrap();
        // Cayley transform of the rotation generator.
        let h = 0.05;
        let d = 1.0 + h * h;
        assert!((z[0] - (1.0 - h * h) / d).abs() < 1e-15);
        assert!((z[1] - (-2.0 * h) / d).abs() < 1e-15);
        assert!((z[0] * z[0] + z[1] * z[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_lu_rejects_singular() {
        assert!(DenseLu::new(DMatrix::<f64>::zeros(3, 3)).is_err());
        assert!(DenseLu::new(DMatrix::<f64>::zeros(2, 3)).is_err());
    }
}
