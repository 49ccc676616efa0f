//! Reference cases and the offline/online pipeline behind the results table.

use std::time::Instant;

use crate::avf::AvfConfig;
use crate::deim::{build_deim_operator, compute_deim_shared, qdeim_select, DeimOperator};
use crate::diagnostics::{e_energy, e_energy_against, e_shape, e_sol, e_sol_modulus, ErrorReport};
use crate::error::{Error, Result};
use crate::fom::{
    assemble_snapshots, collect_nonlinear_snapshots, run_fom, step_count, time_fom, EnergyTrace, SnapshotMatrix,
    Trajectory,
};
use crate::models::{build_model, ModelKind, ModelParams, ModelSpec};
use crate::pod::{compute_pod_shared, ModeRule, PodBasis};
use crate::rom::{build_reduced_system, lift_trajectory, run_rom, time_rom, ReducedSystem, RomRun, Variant};
use crate::scalar::Real;

/// Everything that defines one benchmark run.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseConfig<T> {
    pub params: ModelParams<T>,
    pub nx: usize,
    /// Ignored for 1D models.
    pub ny: usize,
    pub avf: AvfConfig<T>,
    pub t_final: T,
    pub pod: ModeRule<T>,
    pub deim: ModeRule<T>,
}

/// Mode counts `(n, ñ)` of the reference runs.
pub fn reference_modes(kind: ModelKind) -> (usize, usize) {
    match kind {
        ModelKind::Kdv => (40, 45),
        ModelKind::Nls1d => (25, 45),
        ModelKind::Zk => (15, 25),
        ModelKind::Nls2d => (10, 20),
    }
}

/// Tolerances of the singular-value rule in the reference runs.
pub fn reference_tolerances<T: Real>() -> (T, T) {
    (T::lit(1e-3), T::lit(1e-5))
}

impl<T: Real> CaseConfig<T> {
    /// Reference grid, time step, horizon and mode counts.
    pub fn reference(kind: ModelKind) -> Self {
        let (nx, t_final) = match kind {
            ModelKind::Kdv => (1000, 10.0),
            ModelKind::Nls1d => (1000, 5.0),
            ModelKind::Zk => (100, 5.0),
            ModelKind::Nls2d => (100, 10.0),
        };
        let (n, nt) = reference_modes(kind);
        Self {
            params: ModelParams::reference(kind),
            nx,
            ny: if kind.is_2d() { nx } else { 1 },
            avf: AvfConfig::new(T::lit(0.01)),
            t_final: T::lit(t_final),
            pod: ModeRule::Fixed(n),
            deim: ModeRule::Fixed(nt),
        }
    }

    /// Half the resolution in space and time for the 2D cases.
    pub fn halved(kind: ModelKind) -> Self {
        let mut c = Self::reference(kind);
        if kind.is_2d() {
            c.nx = 50;
            c.ny = 50;
            c.avf.dt = T::lit(0.02);
        }
        c
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn model(&self) -> Result<ModelSpec<T>> {
        let ny = if self.kind().is_2d() { self.ny } else { 1 };
        build_model(self.params, self.params.reference_grid(self.nx, ny)?)
    }

    pub fn steps(&self) -> Result<usize> {
        step_count(self.avf.dt, self.t_final)
    }
}

/// Bases and interpolation data built from one full-order trajectory.
#[derive(Clone, Debug)]
pub struct Offline<T: Real> {
    pub snapshots: Vec<SnapshotMatrix<T>>,
    pub bases: Vec<PodBasis<T>>,
    pub nonlinear_bases: Vec<PodBasis<T>>,
    pub deim: Vec<DeimOperator<T>>,
    pub seconds: f64,
}

impl<T: Real> Offline<T> {
    pub fn n(&self) -> usize {
        self.bases.iter().map(PodBasis::n).max().unwrap_or(0)
    }

    pub fn ntilde(&self) -> usize {
        self.deim.iter().map(DeimOperator::ntilde).max().unwrap_or(0)
    }

    pub fn prom<'a>(&self, model: &'a ModelSpec<T>) -> Result<ReducedSystem<'a, T>> {
        build_reduced_system(model, &self.bases, None)
    }

    pub fn pdrom<'a>(&self, model: &'a ModelSpec<T>) -> Result<ReducedSystem<'a, T>> {
        build_reduced_system(model, &self.bases, Some(&self.deim))
    }
}

/// DEIM operators for each nonlinear term, paired with the matching basis.
pub fn build_deim_set<T: Real>(nl_bases: &[PodBasis<T>], bases: &[PodBasis<T>]) -> Result<Vec<DeimOperator<T>>> {
    nl_bases
        .iter()
        .zip(bases)
        .map(|(phi, v)| {
            let idx = qdeim_select(phi.v())?;
            build_deim_operator(phi.v(), &idx, v.v())
        })
        .collect()
}

/// POD bases, DEIM bases and interpolation points from a trajectory.
pub fn offline_stage<T: Real>(
    model: &ModelSpec<T>,
    traj: &Trajectory<T>,
    pod: ModeRule<T>,
    deim: ModeRule<T>,
) -> Result<Offline<T>> {
    let start = Instant::now();
    let snapshots = assemble_snapshots(traj, model)?;
    let mats: Vec<_> = snapshots.iter().map(|s| &s.data).collect();
    let bases = compute_pod_shared(&mats, pod)?;
    let nl = collect_nonlinear_snapshots(traj, model)?;
    let nl_mats: Vec<_> = nl.iter().map(|s| &s.data).collect();
    let nonlinear_bases = compute_deim_shared(&nl_mats, deim)?;
    let deim = build_deim_set(&nonlinear_bases, &bases)?;
    Ok(Offline { snapshots, bases, nonlinear_bases, deim, seconds: start.elapsed().as_secs_f64() })
}

/// Metrics of one variant of one case.
#[derive(Clone, Debug)]
pub struct VariantResult<T> {
    pub variant: Variant,
    pub trajectory: Trajectory<T>,
    /// Model energy of the (lifted) states.
    pub energy: EnergyTrace<T>,
    /// Structure-consistent reduced energy (ROMs only).
    pub reduced_energy: Option<EnergyTrace<T>>,
    /// Reported solution error (modulus for two-component models).
    pub e_sol: T,
    /// Error of the stacked component matrix.
    pub e_sol_stacked: T,
    pub e_shape: T,
    /// `max_k |ε^k − ε_h^0| / |ε_h^0|` with `ε_h^0` the full-order energy of
    /// the exact initial data, so a reduced run also pays for projecting
    /// the initial condition.
    pub e_energy: T,
    /// Drift against the run's own first value.
    pub e_energy_self: T,
    /// Median stepping-loop wall clock.
    pub wall_clock: f64,
}

#[derive(Clone, Debug)]
pub struct CaseResult<T: Real> {
    pub config: CaseConfig<T>,
    pub model: ModelSpec<T>,
    pub offline: Offline<T>,
    pub fom: VariantResult<T>,
    pub prom: VariantResult<T>,
    pub pdrom: VariantResult<T>,
}

impl<T: Real> CaseResult<T> {
    pub fn variant(&self, v: Variant) -> &VariantResult<T> {
        match v {
            Variant::Fom => &self.fom,
            Variant::PRom => &self.prom,
            Variant::PdRom => &self.pdrom,
        }
    }

    pub fn reports(&self) -> Vec<ErrorReport> {
        let fom_time = self.fom.wall_clock;
        Variant::ALL
            .iter()
            .map(|&v| {
                let r = self.variant(v);
                let (n, nt) = match v {
                    Variant::Fom => (0, 0),
                    Variant::PRom => (self.offline.n(), 0),
                    Variant::PdRom => (self.offline.n(), self.offline.ntilde()),
                };
                ErrorReport {
                    model: self.model.name().to_string(),
                    variant: v,
                    n,
                    ntilde: nt,
                    e_sol: r.e_sol.as_f64(),
                    e_shape: Some(r.e_shape.as_f64()),
                    e_energy: r.e_energy.as_f64(),
                    wall_clock: r.wall_clock,
                    speedup: if r.wall_clock > 0.0 { fom_time / r.wall_clock } else { f64::INFINITY },
                }
            })
            .collect()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k == 0 {
        0.0
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Solution metrics of a trajectory against the exact solution.
pub fn solution_metrics<T: Real>(model: &ModelSpec<T>, traj: &Trajectory<T>) -> Result<(T, T, T)> {
    let exact: Vec<Vec<T>> = traj.times.iter().map(|&t| model.exact_state(t)).collect();
    let stacked = e_sol(&traj.states, &exact)?;
    let reported =
        if model.components() > 1 { e_sol_modulus(&traj.states, &exact, model.components())? } else { stacked };
    let last = exact.last().ok_or(Error::EmptyTrajectory)?;
    let (shape, _) = e_shape(traj.final_state(), |k| exact[k].clone(), traj.steps(), last)?;
    Ok((reported, stacked, shape))
}

fn rom_result<T: Real>(
    model: &ModelSpec<T>,
    sys: &ReducedSystem<'_, T>,
    run: RomRun<T>,
    cfg: &CaseConfig<T>,
    reps: usize,
) -> Result<VariantResult<T>> {
    let lifted = lift_trajectory(sys, &run.coefficients)?;
    let (e_sol, e_sol_stacked, e_shape) = solution_metrics(model, &lifted)?;
    let mut times = vec![run.wall_clock];
    for _ in 1..reps {
        times.push(time_rom(sys, &cfg.avf, cfg.t_final)?.0);
    }
    let e0 = model.discrete_energy(&model.initial_state())?;
    Ok(VariantResult {
        variant: run.variant,
        e_energy: e_energy_against(&run.lifted_energy, e0)?,
        e_energy_self: e_energy(&run.lifted_energy)?,
        trajectory: lifted,
        energy: run.lifted_energy,
        reduced_energy: Some(run.energy),
        e_sol,
        e_sol_stacked,
        e_shape,
        wall_clock: median(times),
    })
}

/// Full pipeline: FOM, offline stage, P-ROM and PD-ROM, each stepping loop
/// timed `reps` times (median reported).
pub fn run_case<T: Real>(cfg: &CaseConfig<T>, reps: usize) -> Result<CaseResult<T>> {
    let reps = reps.max(1);
    let model = cfg.model()?;
    let (traj, energy) = run_fom(&model, &cfg.avf, cfg.t_final)?;
    let mut times = vec![traj.wall_clock];
    for _ in 1..reps {
        times.push(time_fom(&model, &cfg.avf, cfg.t_final)?);
    }
    let (e_sol_fom, stacked, shape) = solution_metrics(&model, &traj)?;
    let offline = offline_stage(&model, &traj, cfg.pod, cfg.deim)?;
    log::info!("{}: n = {}, ñ = {}, offline {:.2}s", model.name(), offline.n(), offline.ntilde(), offline.seconds);
    let fom_drift = e_energy(&energy)?;
    let fom = VariantResult {
        variant: Variant::Fom,
        e_energy: fom_drift,
        e_energy_self: fom_drift,
        trajectory: traj,
        energy,
        reduced_energy: None,
        e_sol: e_sol_fom,
        e_sol_stacked: stacked,
        e_shape: shape,
        wall_clock: median(times),
    };
    let (prom, pdrom) = {
        let p = offline.prom(&model)?;
        let p_run = run_rom(&p, &cfg.avf, cfg.t_final)?;
        let prom = rom_result(&model, &p, p_run, cfg, reps)?;
        let pd = offline.pdrom(&model)?;
        let pd_run = run_rom(&pd, &cfg.avf, cfg.t_final)?;
        (prom, rom_result(&model, &pd, pd_run, cfg, reps)?)
    };
    Ok(CaseResult { config: cfg.clone(), model, offline, fom, prom, pdrom })
}
