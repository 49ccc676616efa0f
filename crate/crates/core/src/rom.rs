//! Reduced-order systems in coefficient space: Galerkin projection (P-ROM)
//! and Galerkin projection with DEIM sampling of the nonlinearity (PD-ROM).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::avf::{
    avf_average, integrate, AverageScratch, AvfConfig, AvfSystem, DenseLu, GaussLegendre, LinearSolve, StepStats,
    StepWorkspace,
};
use crate::deim::{DeimOperator, SampledRows};
use crate::error::{check_len, Error, Result};
use crate::fom::{step_count, time_grid, EnergyTrace, Trajectory};
use crate::models::ModelSpec;
use crate::operators::{Axis, DiffPolynomial};
use crate::pod::{reduce_operator, PodBasis};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Fom,
    PRom,
    PdRom,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Fom, Variant::PRom, Variant::PdRom];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Fom => "FOM",
            Variant::PRom => "P-ROM",
            Variant::PdRom => "PD-ROM",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fom" => Ok(Variant::Fom),
            "p" | "prom" | "p-rom" => Ok(Variant::PRom),
            "pd" | "pdrom" | "pd-rom" => Ok(Variant::PdRom),
            _ => Err(Error::InvalidParameter(format!("unknown variant '{s}' (expected fom, p or pd)"))),
        }
    }
}

/// How the reduced nonlinear forcing is formed.
#[derive(Clone, Debug)]
enum NonlinearPath<T: Real> {
    /// `B̂_i = poly_B(D̂_i) V_iᵀ`, applied to `N(Vα)` on the full grid.
    Lifted { forcing: Vec<DMatrix<T>> },
    /// `B̂_i = poly_B(D̂_i) V_iᵀ W_i`, applied to `N` at the sampled rows of term `i`.
    Sampled { forcing: Vec<DMatrix<T>>, rows: Vec<SampledRows<T>>, inv_norms: Vec<T>, complement_norms: Vec<T> },
}

/// Reduced model ready for AVF stepping.
///
/// The bases are kept only for lifting and energy evaluation; the PD-ROM
/// stepping path touches nothing whose size depends on the grid.
#[derive(Clone, Debug)]
pub struct ReducedSystem<'a, T: Real> {
    model: &'a ModelSpec<T>,
    bases: Vec<DMatrix<T>>,
    offsets: Vec<usize>,
    dim: usize,
    /// `Ĉ`, blocks `c_ij V_iᵀ V_j`.
    mass: DMatrix<T>,
    /// Block-diagonal `Â`.
    stiffness: DMatrix<T>,
    /// Block-diagonal `Q̂`.
    energy_quadratic: DMatrix<T>,
    path: NonlinearPath<T>,
}

type ReducedDerivs<T> = (DMatrix<T>, Option<DMatrix<T>>);

fn reduced_derivatives<T: Real>(model: &ModelSpec<T>, basis: &PodBasis<T>) -> Result<ReducedDerivs<T>> {
    let dx = reduce_operator(basis, model.ops().get(Axis::X))?;
    let dy = match model.ops().dy {
        Some(ref d) => Some(reduce_operator(basis, d)?),
        None => None,
    };
    Ok((dx, dy))
}

fn poly_dense<T: Real>(p: &DiffPolynomial<T>, d: &ReducedDerivs<T>) -> DMatrix<T> {
    p.evaluate_dense(&d.0, d.1.as_ref())
}

fn block_diag<T: Real>(blocks: &[DMatrix<T>], offsets: &[usize], dim: usize) -> DMatrix<T> {
    let mut out = DMatrix::zeros(dim, dim);
    for (b, &o) in blocks.iter().zip(offsets) {
        out.view_mut((o, o), b.shape()).copy_from(b);
    }
    out
}

/// Assembles the P-ROM (`deim = None`) or PD-ROM of `model` in the given
/// bases, one basis per component. For the PD-ROM `deim[i]` interpolates
/// the `i`-th nonlinear term.
pub fn build_reduced_system<'a, T: Real>(
    model: &'a ModelSpec<T>,
    bases: &[PodBasis<T>],
    deim: Option<&[DeimOperator<T>]>,
) -> Result<ReducedSystem<'a, T>> {
    let m = model.components();
    let n_nodes = model.nodes();
    check_len(m, bases.len())?;
    for b in bases {
        check_len(n_nodes, b.rows())?;
        if b.n() == 0 {
            return Err(Error::InvalidParameter("reduced basis must have at least one mode".into()));
        }
    }
    let mut offsets = Vec::with_capacity(m);
    let mut dim = 0;
    for b in bases {
        offsets.push(dim);
        dim += b.n();
    }
    let lin = model.linear();
    let derivs = bases.iter().map(|b| reduced_derivatives(model, b)).collect::<Result<Vec<_>>>()?;

    let mut mass = DMatrix::zeros(dim, dim);
    for i in 0..m {
        for j in 0..m {
            let c = lin.mass_coeff(i, j);
            if c != T::zero() {
                let block = bases[i].v().tr_mul(bases[j].v()) * c;
                mass.view_mut((offsets[i], offsets[j]), block.shape()).copy_from(&block);
            }
        }
    }
    let stiff: Vec<_> = (0..m).map(|i| poly_dense(&lin.stiffness[i], &derivs[i])).collect();
    let quad: Vec<_> = (0..m).map(|i| poly_dense(&lin.energy_quadratic[i], &derivs[i])).collect();
    let forcing_poly: Vec<_> = (0..m).map(|i| poly_dense(&lin.forcing[i], &derivs[i])).collect();

    let path = match deim {
        None => {
            NonlinearPath::Lifted { forcing: (0..m).map(|i| &forcing_poly[i] * bases[i].v().transpose()).collect() }
        }
        Some(ops) => {
            check_len(m, ops.len())?;
            let vs: Vec<&DMatrix<T>> = bases.iter().map(|b| b.v()).collect();
            let mut forcing = Vec::with_capacity(m);
            let mut rows = Vec::with_capacity(m);
            for (i, op) in ops.iter().enumerate() {
                check_len(n_nodes, op.w().nrows())?;
                forcing.push(&forcing_poly[i] * bases[i].v().tr_mul(op.w()));
                rows.push(SampledRows::new(&vs, op.indices()));
            }
            NonlinearPath::Sampled {
                forcing,
                rows,
                inv_norms: ops.iter().map(DeimOperator::inv_norm).collect(),
                complement_norms: ops.iter().map(DeimOperator::complement_norm).collect(),
            }
        }
    };

    Ok(ReducedSystem {
        model,
        bases: bases.iter().map(|b| b.v().clone()).collect(),
        stiffness: block_diag(&stiff, &offsets, dim),
        energy_quadratic: block_diag(&quad, &offsets, dim),
        offsets,
        dim,
        mass,
        path,
    })
}

impl<'a, T: Real> ReducedSystem<'a, T> {
    pub fn model(&self) -> &'a ModelSpec<T> {
        self.model
    }

    pub fn variant(&self) -> Variant {
        match self.path {
            NonlinearPath::Lifted { .. } => Variant::PRom,
            NonlinearPath::Sampled { .. } => Variant::PdRom,
        }
    }

    /// Modes per component.
    pub fn modes(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }

    /// Largest interpolation-point count over the nonlinear terms (0 for P-ROM).
    pub fn ntilde(&self) -> usize {
        match &self.path {
            NonlinearPath::Lifted { .. } => 0,
            NonlinearPath::Sampled { rows, .. } => rows.iter().map(SampledRows::points).max().unwrap_or(0),
        }
    }

    pub fn bases(&self) -> &[DMatrix<T>] {
        &self.bases
    }

    pub fn mass(&self) -> &DMatrix<T> {
        &self.mass
    }

    pub fn stiffness(&self) -> &DMatrix<T> {
        &self.stiffness
    }

    /// Entries of every array read while stepping. For the PD-ROM this does
    /// not depend on the grid size.
    pub fn online_footprint(&self) -> usize {
        let lin = 2 * self.dim * self.dim;
        match &self.path {
            NonlinearPath::Lifted { forcing } => {
                lin + forcing.iter().map(|f| f.len()).sum::<usize>() + self.bases.iter().map(|b| b.len()).sum::<usize>()
            }
            NonlinearPath::Sampled { forcing, rows, .. } => {
                lin + forcing.iter().map(|f| f.len()).sum::<usize>()
                    + rows.iter().map(|r| r.points() * r.reduced_dim()).sum::<usize>()
            }
        }
    }

    fn component<'b>(&self, alpha: &'b [T], i: usize) -> &'b [T] {
        &alpha[self.offsets[i]..self.offsets[i] + self.bases[i].ncols()]
    }

    /// `α = Vᵀ z`, component by component.
    pub fn project(&self, z: &[T]) -> Result<Vec<T>> {
        check_len(self.model.state_len(), z.len())?;
        let n = self.model.nodes();
        let mut out = Vec::with_capacity(self.dim);
        for (i, v) in self.bases.iter().enumerate() {
            let zi = DVector::from_column_slice(&z[i * n..(i + 1) * n]);
            out.extend(v.tr_mul(&zi).iter().copied());
        }
        Ok(out)
    }

    /// `z = V α`, component by component.
    pub fn lift(&self, alpha: &[T]) -> Result<Vec<T>> {
        check_len(self.dim, alpha.len())?;
        let mut out = vec![T::zero(); self.model.state_len()];
        self.lift_into(alpha, &mut out);
        Ok(out)
    }

    fn lift_into(&self, alpha: &[T], out: &mut [T]) {
        let n = self.model.nodes();
        for (i, v) in self.bases.iter().enumerate() {
            let a = DVector::from_column_slice(self.component(alpha, i));
            let z = v * a;
            out[i * n..(i + 1) * n].copy_from_slice(z.as_slice());
        }
    }

    /// Structure-consistent reduced energy
    /// `sign · |cell| · (Σ_j Pot((Vα)_j) + ½ Σ_i α_iᵀ Q̂_i α_i)` with `Q̂_i`
    /// built from the reduced derivatives. This is the quantity the P-ROM
    /// conserves to solver tolerance.
    pub fn reduced_energy(&self, alpha: &[T]) -> Result<T> {
        let z = self.lift(alpha)?;
        let a = DVector::from_column_slice(alpha);
        let quad = a.dot(&(&self.energy_quadratic * &a));
        let pot = self.model.nonlinearity().potential_sum(&z);
        Ok(self.model.energy_sign() * self.model.grid().cell_measure() * (pot + T::lit(0.5) * quad))
    }

    /// The model's discrete energy of the lifted state `Vα`.
    pub fn lifted_energy(&self, alpha: &[T]) -> Result<T> {
        self.model.discrete_energy(&self.lift(alpha)?)
    }
}

pub struct RomScratch<T: Real> {
    a: Vec<T>,
    b: Vec<T>,
    avg: Vec<T>,
    average: AverageScratch<T>,
}

impl<T: Real> AvfSystem<T> for ReducedSystem<'_, T> {
    type Factor = DenseLu<T>;
    type Scratch = RomScratch<T>;

    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient_degree(&self) -> usize {
        self.model.nonlinearity().degree()
    }

    fn factorize(&self, dt: T) -> Result<DenseLu<T>> {
        let half = T::lit(0.5);
        DenseLu::new(&self.mass / dt + &self.stiffness * half)
    }

    fn scratch(&self) -> RomScratch<T> {
        RomScratch { a: Vec::new(), b: Vec::new(), avg: Vec::new(), average: AverageScratch::default() }
    }

    fn explicit_part(&self, dt: T, z: &[T], out: &mut [T], _: &mut RomScratch<T>) {
        let a = DVector::from_column_slice(z);
        let r = &self.mass * &a / dt - &self.stiffness * &a * T::lit(0.5);
        out.copy_from_slice(r.as_slice());
    }

    fn nonlinear_forcing(
        &self,
        a: &[T],
        b: &[T],
        quad: &GaussLegendre<T>,
        out: &mut [T],
        s: &mut RomScratch<T>,
    ) -> Result<()> {
        let nl = self.model.nonlinearity();
        match &self.path {
            NonlinearPath::Lifted { forcing } => {
                let len = self.model.state_len();
                let n = self.model.nodes();
                s.a.resize(len, T::zero());
                s.b.resize(len, T::zero());
                s.avg.resize(len, T::zero());
                self.lift_into(a, &mut s.a);
                self.lift_into(b, &mut s.b);
                avf_average(
                    |x, y| nl.eval(x, y).expect("lengths fixed at construction"),
                    &s.a,
                    &s.b,
                    quad,
                    &mut s.avg,
                    &mut s.average,
                )?;
                for (i, f) in forcing.iter().enumerate() {
                    let avg = DVector::from_column_slice(&s.avg[i * n..(i + 1) * n]);
                    let r = f * avg;
                    out[self.offsets[i]..self.offsets[i] + f.nrows()].copy_from_slice(r.as_slice());
                }
            }
            NonlinearPath::Sampled { forcing, rows, .. } => {
                for (i, (f, r)) in forcing.iter().zip(rows).enumerate() {
                    let len = self.bases.len() * r.points();
                    s.a.resize(len, T::zero());
                    s.b.resize(len, T::zero());
                    s.avg.resize(len, T::zero());
                    r.lift_into(a, &mut s.a);
                    r.lift_into(b, &mut s.b);
                    avf_average(|x, y| r.eval_into(nl, x, y), &s.a, &s.b, quad, &mut s.avg, &mut s.average)?;
                    let p = r.points();
                    let avg = DVector::from_column_slice(&s.avg[i * p..(i + 1) * p]);
                    let res = f * avg;
                    out[self.offsets[i]..self.offsets[i] + f.nrows()].copy_from_slice(res.as_slice());
                }
            }
        }
        Ok(())
    }

    fn solve(&self, f: &DenseLu<T>, rhs: &mut [T], _: &mut RomScratch<T>) -> Result<()> {
        f.solve_in_place(rhs)
    }
}

/// Output of a reduced run. Energies are evaluated after the timed loop.
#[derive(Clone, Debug)]
pub struct RomRun<T> {
    pub variant: Variant,
    /// Coefficient trajectory `α^0..α^{N_t}`.
    pub coefficients: Trajectory<T>,
    /// Structure-consistent reduced energy per step.
    pub energy: EnergyTrace<T>,
    /// Model energy of the lifted states per step.
    pub lifted_energy: EnergyTrace<T>,
    /// Seconds spent in the stepping loop.
    pub wall_clock: f64,
}

/// Reduced run from `α⁰ = Vᵀ z⁰`.
pub fn run_rom<T: Real>(sys: &ReducedSystem<'_, T>, cfg: &AvfConfig<T>, t_final: T) -> Result<RomRun<T>> {
    run_rom_from(sys, &sys.project(&sys.model.initial_state())?, cfg, t_final)
}

/// Reduced run from given coefficients.
pub fn run_rom_from<T: Real>(
    sys: &ReducedSystem<'_, T>,
    alpha0: &[T],
    cfg: &AvfConfig<T>,
    t_final: T,
) -> Result<RomRun<T>> {
    check_len(sys.dim, alpha0.len())?;
    let steps = step_count(cfg.dt, t_final)?;
    let mut ws = StepWorkspace::new(sys, cfg)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(alpha0.to_vec());
    let start = Instant::now();
    let stats = integrate(sys, alpha0, steps, cfg, &mut ws, |_, a| states.push(a.to_vec()))?;
    let wall_clock = start.elapsed().as_secs_f64();
    log::debug!(
        "{} {}: {} steps, {} sweeps (max {}), {:.3}s",
        sys.model.name(),
        sys.variant(),
        stats.steps,
        stats.sweeps,
        stats.max_sweeps,
        wall_clock
    );
    let times = time_grid(cfg.dt, steps);
    let energy = EnergyTrace::from_states(&times, &states, |a| sys.reduced_energy(a))?;
    let lifted_energy = EnergyTrace::from_states(&times, &states, |a| sys.lifted_energy(a))?;
    Ok(RomRun {
        variant: sys.variant(),
        coefficients: Trajectory { model: sys.model.name().to_string(), times, states, wall_clock, stats },
        energy,
        lifted_energy,
        wall_clock,
    })
}

/// Stepping-loop wall clock without storing states.
pub fn time_rom<T: Real>(sys: &ReducedSystem<'_, T>, cfg: &AvfConfig<T>, t_final: T) -> Result<(f64, StepStats)> {
    let steps = step_count(cfg.dt, t_final)?;
    let alpha0 = sys.project(&sys.model.initial_state())?;
    let mut ws = StepWorkspace::new(sys, cfg)?;
    let start = Instant::now();
    let stats = integrate(sys, &alpha0, steps, cfg, &mut ws, |_, _| {})?;
    Ok((start.elapsed().as_secs_f64(), stats))
}

/// Lifted full-order trajectory `Vα^k`.
pub fn lift_trajectory<T: Real>(sys: &ReducedSystem<'_, T>, coeffs: &Trajectory<T>) -> Result<Trajectory<T>> {
    let states = coeffs.states.iter().map(|a| sys.lift(a)).collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        model: coeffs.model.clone(),
        times: coeffs.times.clone(),
        states,
        wall_clock: coeffs.wall_clock,
        stats: coeffs.stats.clone(),
    })
}

/// One step of the energy-defect check for a PD-ROM.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefectRecord<T> {
    pub step: usize,
    /// `|ε̂^{k+1} − ε̂^k| / Δt`.
    pub measured: T,
    /// `max_i ‖(P_iᵀΦ_i)⁻¹‖₂`.
    pub inv_norm: T,
    /// `max_i ‖I − Φ_iΦ_iᵀ‖₂`.
    pub complement_norm: T,
    /// `Σ_j |Pot_j(Vα^{k+1}) − Pot_j(Vα^k)| / Δt`.
    pub potential_rate: T,
    /// `|cell| · inv_norm · complement_norm · potential_rate`.
    pub bound: T,
}

impl<T: Real> DefectRecord<T> {
    pub fn holds(&self) -> bool {
        self.measured <= self.bound
    }
}

/// Per-step energy defect of a PD-ROM run against its a-priori bound.
pub fn energy_defect_bound<T: Real>(
    sys: &ReducedSystem<'_, T>,
    run: &RomRun<T>,
    dt: T,
) -> Result<Vec<DefectRecord<T>>> {
    let (inv_norm, complement_norm) = match &sys.path {
        NonlinearPath::Sampled { inv_norms, complement_norms, .. } => (
            inv_norms.iter().fold(T::zero(), |a, &b| a.max(b)),
            complement_norms.iter().fold(T::zero(), |a, &b| a.max(b)),
        ),
        NonlinearPath::Lifted { .. } => {
            return Err(Error::InvalidParameter("energy-defect bound applies to the PD-ROM only".into()))
        }
    };
    let nl = sys.model.nonlinearity();
    let m = sys.model.components();
    let n = sys.model.nodes();
    let cell = sys.model.grid().cell_measure();
    let pots = |z: &[T]| -> Vec<T> {
        let mut vals = [T::zero(); 2];
        (0..n)
            .map(|j| {
                for c in 0..m {
                    vals[c] = z[c * n + j];
                }
                nl.potential_node(j, &vals[..m])
            })
            .collect()
    };
    let states = &run.coefficients.states;
    let mut prev = pots(&sys.lift(&states[0])?);
    let mut out = Vec::with_capacity(states.len().saturating_sub(1));
    for (k, state) in states.iter().enumerate().skip(1) {
        let cur = pots(&sys.lift(state)?);
        let rate = cur.iter().zip(&prev).fold(T::zero(), |acc, (a, b)| acc + (*a - *b).abs()) / dt;
        let measured = (run.energy.values[k] - run.energy.values[k - 1]).abs() / dt;
        out.push(DefectRecord {
            step: k,
            measured,
            inv_norm,
            complement_norm,
            potential_rate: rate,
            bound: cell * inv_norm * complement_norm * rate,
        });
        prev = cur;
    }
    Ok(out)
}
