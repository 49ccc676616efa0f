//! Full-order simulation: grid-level AVF system, trajectories and snapshots.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::avf::{
    avf_average, integrate, AverageScratch, AvfConfig, AvfSystem, GaussLegendre, StepStats, StepWorkspace,
};
use crate::circulant::{CirculantSolver, SolverScratch};
use crate::error::{check_len, Error, Result};
use crate::models::ModelSpec;
use crate::scalar::Real;

/// The eliminated system of a model on its full grid.
pub struct FomSystem<'a, T: Real> {
    model: &'a ModelSpec<T>,
}

pub struct FomScratch<T: Real> {
    solver: SolverScratch<T>,
    avg: Vec<T>,
    tmp: Vec<T>,
    average: AverageScratch<T>,
}

impl<'a, T: Real> FomSystem<'a, T> {
    pub fn new(model: &'a ModelSpec<T>) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &ModelSpec<T> {
        self.model
    }
}

impl<T: Real> AvfSystem<T> for FomSystem<'_, T> {
    type Factor = CirculantSolver<T>;
    type Scratch = FomScratch<T>;

    fn dim(&self) -> usize {
        self.model.state_len()
    }

    fn gradient_degree(&self) -> usize {
        self.model.nonlinearity().degree()
    }

    fn factorize(&self, dt: T) -> Result<CirculantSolver<T>> {
        let g = self.model.grid();
        let lin = self.model.linear();
        CirculantSolver::new(self.model.ops(), g.nx(), g.ny(), &lin.mass, &lin.stiffness, dt)
    }

    fn scratch(&self) -> FomScratch<T> {
        let len = self.model.state_len();
        FomScratch {
            solver: SolverScratch::default(),
            avg: vec![T::zero(); len],
            tmp: vec![T::zero(); self.model.nodes()],
            average: AverageScratch::default(),
        }
    }

    fn explicit_part(&self, dt: T, z: &[T], out: &mut [T], s: &mut FomScratch<T>) {
        let lin = self.model.linear();
        let (m, n) = (self.model.components(), self.model.nodes());
        let half = T::lit(0.5);
        for i in 0..m {
            lin.stiffness[i]
                .apply(self.model.ops(), &z[i * n..(i + 1) * n], &mut s.tmp)
                .expect("state length checked by the stepper");
            let row = &mut out[i * n..(i + 1) * n];
            for (o, &a) in row.iter_mut().zip(&s.tmp) {
                *o = -half * a;
            }
            for j in 0..m {
                let c = lin.mass_coeff(i, j) / dt;
                if c != T::zero() {
                    for (o, &zj) in row.iter_mut().zip(&z[j * n..(j + 1) * n]) {
                        *o += c * zj;
                    }
                }
            }
        }
    }

    fn nonlinear_forcing(
        &self,
        a: &[T],
        b: &[T],
        quad: &GaussLegendre<T>,
        out: &mut [T],
        s: &mut FomScratch<T>,
    ) -> Result<()> {
        let nl = self.model.nonlinearity();
        avf_average(
            |x, y| nl.eval(x, y).expect("lengths fixed at construction"),
            a,
            b,
            quad,
            &mut s.avg,
            &mut s.average,
        )?;
        let n = self.model.nodes();
        for (i, bpoly) in self.model.linear().forcing.iter().enumerate() {
            bpoly.apply(self.model.ops(), &s.avg[i * n..(i + 1) * n], &mut out[i * n..(i + 1) * n])?;
        }
        Ok(())
    }

    fn solve(&self, f: &CirculantSolver<T>, rhs: &mut [T], s: &mut FomScratch<T>) -> Result<()> {
        f.solve(rhs, &mut s.solver)
    }
}

/// States at `t_0..t_{N_t}`, components back to back within each state.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub model: String,
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    /// Seconds spent in the stepping loop.
    pub wall_clock: f64,
    pub stats: StepStats,
}

impl<T: Real> Trajectory<T> {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn final_state(&self) -> &[T] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// All states as columns.
    pub fn matrix(&self) -> DMatrix<T> {
        let rows = self.states.first().map_or(0, Vec::len);
        DMatrix::from_fn(rows, self.states.len(), |i, k| self.states[k][i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTrace<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> EnergyTrace<T> {
    pub fn from_states(times: &[T], states: &[Vec<T>], energy: impl Fn(&[T]) -> Result<T>) -> Result<Self> {
        let values = states.iter().map(|s| energy(s)).collect::<Result<Vec<_>>>()?;
        Ok(Self { times: times.to_vec(), values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Number of steps `N_t` with `N_t Δt = T`.
pub fn step_count<T: Real>(dt: T, t_final: T) -> Result<usize> {
    if t_final < T::zero() || !(dt > T::zero()) {
        return Err(Error::InvalidParameter("final time must be non-negative and the time step positive".into()));
    }
    let ratio = (t_final / dt).as_f64();
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-8 * ratio.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "final time {} is not an integer multiple of the time step {}",
            t_final.as_f64(),
            dt.as_f64()
        )));
    }
    Ok(steps as usize)
}

pub fn time_grid<T: Real>(dt: T, steps: usize) -> Vec<T> {
    (0..=steps).map(|k| T::count(k) * dt).collect()
}

/// Full-order run from the exact initial data.
pub fn run_fom<T: Real>(
    model: &ModelSpec<T>,
    cfg: &AvfConfig<T>,
    t_final: T,
) -> Result<(Trajectory<T>, EnergyTrace<T>)> {
    let steps = step_count(cfg.dt, t_final)?;
    let sys = FomSystem::new(model);
    let mut ws = StepWorkspace::new(&sys, cfg)?;
    let z0 = model.initial_state();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(z0.clone());
    let start = Instant::now();
    let stats = integrate(&sys, &z0, steps, cfg, &mut ws, |_, z| states.push(z.to_vec()))?;
    let wall_clock = start.elapsed().as_secs_f64();
    log::debug!(
        "{}: {} steps, {} sweeps (max {}), {:.3}s",
        model.name(),
        stats.steps,
        stats.sweeps,
        stats.max_sweeps,
        wall_clock
    );
    let times = time_grid(cfg.dt, steps);
    let energy = EnergyTrace::from_states(&times, &states, |s| model.discrete_energy(s))?;
    Ok((Trajectory { model: model.name().to_string(), times, states, wall_clock, stats }, energy))
}

/// Stepping-loop wall clock without storing states.
pub fn time_fom<T: Real>(model: &ModelSpec<T>, cfg: &AvfConfig<T>, t_final: T) -> Result<f64> {
    let steps = step_count(cfg.dt, t_final)?;
    let sys = FomSystem::new(model);
    let mut ws = StepWorkspace::new(&sys, cfg)?;
    let z0 = model.initial_state();
    let start = Instant::now();
    integrate(&sys, &z0, steps, cfg, &mut ws, |_, _| {})?;
    Ok(start.elapsed().as_secs_f64())
}

/// Column-major snapshot data plus a description of its column blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix<T: Real> {
    pub data: DMatrix<T>,
    pub provenance: Vec<String>,
}

impl<T: Real> SnapshotMatrix<T> {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }
}

fn check_trajectory<T: Real>(traj: &Trajectory<T>, model: &ModelSpec<T>) -> Result<usize> {
    if traj.states.len() < 2 {
        return Err(Error::EmptyTrajectory);
    }
    for s in &traj.states {
        check_len(model.state_len(), s.len())?;
    }
    Ok(traj.states.len() - 1)
}

/// Derivative-augmented snapshot matrix of every component, from the
/// states at `t_1..t_{N_t}`: `[z | γDz]` in 1D KdV, `[z | Dz]` for NLS and
/// `[z | Dx z | Dy z]` in 2D.
pub fn assemble_snapshots<T: Real>(traj: &Trajectory<T>, model: &ModelSpec<T>) -> Result<Vec<SnapshotMatrix<T>>> {
    let nt = check_trajectory(traj, model)?;
    let n = model.nodes();
    let transforms = model.snapshot_transforms();
    let blocks = transforms.len();
    let labels = ["z", "Dx z", "Dy z"];
    let mut out = Vec::with_capacity(model.components());
    for (c, cname) in model.kind().component_names().iter().enumerate() {
        let mut data = DMatrix::zeros(n, blocks * nt);
        for (b, tr) in transforms.iter().enumerate() {
            for k in 0..nt {
                let z = &traj.states[k + 1][c * n..(c + 1) * n];
                let mut col = data.column_mut(b * nt + k);
                tr.apply(model.ops(), z, col.as_mut_slice())?;
            }
        }
        let provenance =
            (0..blocks).map(|b| format!("{}: {} at t_1..t_{}", cname, labels[b].replace('z', cname), nt)).collect();
        out.push(SnapshotMatrix { data, provenance });
    }
    Ok(out)
}

/// Nonlinear-term snapshots `[N(z^1) … N(z^{N_t})]`, one matrix per term.
pub fn collect_nonlinear_snapshots<T: Real>(
    traj: &Trajectory<T>,
    model: &ModelSpec<T>,
) -> Result<Vec<SnapshotMatrix<T>>> {
    let nt = check_trajectory(traj, model)?;
    let (m, n) = (model.components(), model.nodes());
    let mut mats: Vec<DMatrix<T>> = (0..m).map(|_| DMatrix::zeros(n, nt)).collect();
    let mut buf = vec![T::zero(); model.state_len()];
    for k in 0..nt {
        model.nonlinearity().eval(&traj.states[k + 1], &mut buf)?;
        for (c, mat) in mats.iter_mut().enumerate() {
            mat.column_mut(k).copy_from_slice(&buf[c * n..(c + 1) * n]);
        }
    }
    Ok(mats
        .into_iter()
        .zip(model.kind().term_names())
        .map(|(data, name)| SnapshotMatrix { data, provenance: vec![format!("{name} at t_1..t_{nt}")] })
        .collect())
}
