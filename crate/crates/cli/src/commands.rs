use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use msrom_core::deim::{build_deim_operator, compute_deim_shared, qdeim_select, DeimOperator};
use msrom_core::diagnostics::{
    e_energy, e_energy_against, sci, write_decay_csv, write_energy_csv, write_profile_csv, write_report_csv,
};
use msrom_core::experiment::{run_case, solution_metrics, CaseConfig, CaseResult};
use msrom_core::fom::{assemble_snapshots, collect_nonlinear_snapshots, run_fom, Trajectory};
use msrom_core::io::{read_msrm, write_msrm};
use msrom_core::pod::{compute_pod_shared, PodBasis};
use msrom_core::rom::{build_reduced_system, lift_trajectory, run_rom, Variant};
use msrom_core::{ModelKind, ModelSpec};
use nalgebra::DMatrix;

use crate::config::{RunArgs, RunConfig};
use crate::CliError;

type Res = Result<(), CliError>;

const METRICS_HEADER: &str = "model,variant,n,ntilde,e_sol,e_shape,e_energy,wall_clock_s";

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out)?;
    Ok(cfg.out.clone())
}

fn read_input(path: &Path) -> Result<DMatrix<f64>, CliError> {
    if !path.exists() {
        return Err(CliError::Missing(format!("missing file {}", path.display())));
    }
    read_msrm(path).map_err(|e| match e {
        msrom_core::Error::BadMagic => CliError::Missing(format!("{}: bad magic", path.display())),
        e => e.into(),
    })
}

#[allow(clippy::too_many_arguments)]
fn metrics_row(
    w: &mut impl Write,
    model: &str,
    variant: Variant,
    n: usize,
    nt: usize,
    e_sol: f64,
    e_shape: f64,
    e_energy: f64,
    secs: f64,
) -> Res {
    writeln!(w, "{METRICS_HEADER}")?;
    writeln!(w, "{model},{variant},{n},{nt},{},{},{},{}", sci(e_sol), sci(e_shape), sci(e_energy), sci(secs))?;
    Ok(())
}

fn print_metrics(label: &str, e_sol: f64, e_shape: f64, e_energy: f64, secs: f64) {
    println!("{label}: E_sol = {e_sol:.6e}, E_shape = {e_shape:.6e}, E_energy = {e_energy:.6e}, stepping {secs:.3}s");
}

/// Final numeric and exact states, component by component.
fn write_profile(path: &Path, model: &ModelSpec<f64>, traj: &Trajectory<f64>) -> Res {
    let nodes: Vec<(f64, f64)> = model.grid().nodes().collect();
    let t = *traj.times.last().unwrap_or(&0.0);
    let exact = model.exact_state(t);
    let numeric = traj.final_state();
    let n = model.nodes();
    let names = model.kind().component_names();
    let labels: Vec<(String, String)> = names.iter().map(|c| (c.to_string(), format!("{c}_exact"))).collect();
    let mut fields: Vec<(&str, &[f64])> = Vec::new();
    for (i, (num, ex)) in labels.iter().enumerate() {
        fields.push((num, &numeric[i * n..(i + 1) * n]));
        fields.push((ex, &exact[i * n..(i + 1) * n]));
    }
    let moduli;
    if names.len() > 1 {
        let m = msrom_core::diagnostics::modulus(numeric, names.len());
        let me = msrom_core::diagnostics::modulus(&exact, names.len());
        moduli = (m, me);
        fields.push(("modulus", &moduli.0));
        fields.push(("modulus_exact", &moduli.1));
    }
    write_profile_csv(create(path)?, &nodes, model.grid().is_2d(), &fields)?;
    Ok(())
}

pub fn fom(args: RunArgs) -> Res {
    let cfg = RunConfig::resolve(args)?;
    let model = cfg.model()?;
    let dir = out_dir(&cfg)?;
    log::debug!("seed {} (runs are deterministic)", cfg.seed);
    let (traj, energy) = run_fom(&model, cfg.avf(), cfg.case.t_final)?;
    let (e_sol, _, e_shape) = solution_metrics(&model, &traj)?;
    let drift = e_energy(&energy)?;
    write_msrm(dir.join("trajectory.msrm"), &traj.matrix())?;
    if traj.steps() > 0 {
        let kind = model.kind();
        for (s, c) in assemble_snapshots(&traj, &model)?.iter().zip(kind.component_names()) {
            write_msrm(dir.join(format!("snapshots_{c}.msrm")), &s.data)?;
        }
        for (s, t) in collect_nonlinear_snapshots(&traj, &model)?.iter().zip(kind.term_names()) {
            write_msrm(dir.join(format!("nonlinear_{t}.msrm")), &s.data)?;
        }
    } else {
        log::warn!("no time steps taken; snapshot files not written");
    }
    write_energy_csv(create(&dir.join("energy.csv"))?, &energy)?;
    write_profile(&dir.join("profile.csv"), &model, &traj)?;
    metrics_row(
        &mut create(&dir.join("metrics.csv"))?,
        model.name(),
        Variant::Fom,
        0,
        0,
        e_sol,
        e_shape,
        drift,
        traj.wall_clock,
    )?;
    println!(
        "{}: N = {}, {} steps, {} fixed-point sweeps",
        model.name(),
        model.nodes(),
        traj.steps(),
        traj.stats.sweeps
    );
    print_metrics("FOM", e_sol, e_shape, drift, traj.wall_clock);
    Ok(())
}

pub fn reduce(args: RunArgs, input: Option<PathBuf>) -> Res {
    let cfg = RunConfig::resolve(args)?;
    let kind = cfg.kind();
    let dir = out_dir(&cfg)?;
    let input = input.unwrap_or_else(|| dir.clone());
    let snaps = kind
        .component_names()
        .iter()
        .map(|c| read_input(&input.join(format!("snapshots_{c}.msrm"))))
        .collect::<Result<Vec<_>, _>>()?;
    let nl = kind
        .term_names()
        .iter()
        .map(|t| read_input(&input.join(format!("nonlinear_{t}.msrm"))))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<_> = snaps.iter().collect();
    let bases = compute_pod_shared(&refs, cfg.case.pod)?;
    let nl_refs: Vec<_> = nl.iter().collect();
    let phis = compute_deim_shared(&nl_refs, cfg.case.deim)?;
    for (b, c) in bases.iter().zip(kind.component_names()) {
        write_msrm(dir.join(format!("basis_{c}.msrm")), b.v())?;
        write_decay_csv(create(&dir.join(format!("decay_{c}.csv")))?, b.sigma())?;
        println!("component {c}: n = {}", b.n());
    }
    for (phi, t) in phis.iter().zip(kind.term_names()) {
        let idx = qdeim_select(phi.v())?;
        let col = DMatrix::from_iterator(idx.len(), 1, idx.iter().map(|&i| i as f64));
        write_msrm(dir.join(format!("deim_basis_{t}.msrm")), phi.v())?;
        write_msrm(dir.join(format!("deim_points_{t}.msrm")), &col)?;
        write_decay_csv(create(&dir.join(format!("deim_decay_{t}.csv")))?, phi.sigma())?;
        println!("term {t}: ñ = {}", phi.n());
    }
    Ok(())
}

fn load_deim(dir: &Path, kind: ModelKind, bases: &[PodBasis<f64>]) -> Result<Vec<DeimOperator<f64>>, CliError> {
    kind.term_names()
        .iter()
        .zip(bases)
        .map(|(t, v)| {
            let phi = read_input(&dir.join(format!("deim_basis_{t}.msrm")))?;
            let pts = read_input(&dir.join(format!("deim_points_{t}.msrm")))?;
            let idx = pts
                .iter()
                .map(|&x| {
                    if x >= 0.0 && x.fract() == 0.0 && (x as usize) < phi.nrows() {
                        Ok(x as usize)
                    } else {
                        Err(CliError::Core(msrom_core::Error::DimensionMismatch {
                            expected: phi.nrows(),
                            got: x as usize,
                        }))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(build_deim_operator(&phi, &idx, v.v())?)
        })
        .collect()
}

pub fn rom(args: RunArgs, bases_dir: Option<PathBuf>, variant: Variant) -> Res {
    let cfg = RunConfig::resolve(args)?;
    let model = cfg.model()?;
    let kind = model.kind();
    let dir = out_dir(&cfg)?;
    let src = bases_dir.unwrap_or_else(|| dir.clone());
    let bases = kind
        .component_names()
        .iter()
        .map(|c| read_input(&src.join(format!("basis_{c}.msrm"))).map(PodBasis::from_matrix))
        .collect::<Result<Vec<_>, _>>()?;
    let deim = match variant {
        Variant::PdRom => Some(load_deim(&src, kind, &bases)?),
        _ => None,
    };
    let sys = build_reduced_system(&model, &bases, deim.as_deref())?;
    let run = run_rom(&sys, cfg.avf(), cfg.case.t_final)?;
    let lifted = lift_trajectory(&sys, &run.coefficients)?;
    let (e_sol, _, e_shape) = solution_metrics(&model, &lifted)?;
    let e0 = model.discrete_energy(&model.initial_state())?;
    let drift = e_energy_against(&run.lifted_energy, e0)?;
    let reduced_drift = e_energy(&run.energy)?;
    let tag = match variant {
        Variant::PdRom => "pdrom",
        _ => "prom",
    };
    write_msrm(dir.join(format!("coefficients_{tag}.msrm")), &run.coefficients.matrix())?;
    write_energy_csv(create(&dir.join(format!("energy_{tag}.csv")))?, &run.lifted_energy)?;
    write_energy_csv(create(&dir.join(format!("reduced_energy_{tag}.csv")))?, &run.energy)?;
    write_profile(&dir.join(format!("profile_{tag}.csv")), &model, &lifted)?;
    let n = sys.modes().into_iter().max().unwrap_or(0);
    metrics_row(
        &mut create(&dir.join(format!("metrics_{tag}.csv")))?,
        model.name(),
        variant,
        n,
        sys.ntilde(),
        e_sol,
        e_shape,
        drift,
        run.wall_clock,
    )?;
    println!("{}: n = {n}, ñ = {}, {} steps", model.name(), sys.ntilde(), run.coefficients.steps());
    print_metrics(variant.label(), e_sol, e_shape, drift, run.wall_clock);
    println!("reduced energy drift = {reduced_drift:.6e}");
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// model name or "all"
    #[arg(long, default_value = "all", value_parser = parse_bench_model)]
    pub model: BenchModel,
    /// restrict the CSV to one variant (fom, p, pd)
    #[arg(long, value_parser = |s: &str| s.parse::<Variant>().map_err(|e| e.to_string()))]
    pub variant: Option<Variant>,
    /// timing repetitions of each stepping loop (median reported)
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// 2D cases at half resolution in space and time
    #[arg(long)]
    pub halved: bool,
    /// run the model cases on separate threads
    #[arg(long)]
    pub parallel: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Debug)]
pub enum BenchModel {
    All,
    One(ModelKind),
}

fn parse_bench_model(s: &str) -> Result<BenchModel, String> {
    if s.eq_ignore_ascii_case("all") {
        Ok(BenchModel::All)
    } else {
        crate::config::parse_model(s).map(BenchModel::One)
    }
}

fn bench_case(kind: ModelKind, halved: bool, reps: usize) -> msrom_core::Result<CaseResult<f64>> {
    let cfg = if halved { CaseConfig::halved(kind) } else { CaseConfig::reference(kind) };
    run_case(&cfg, reps)
}

pub fn bench(args: BenchArgs) -> Res {
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let kinds: Vec<ModelKind> = match args.model {
        BenchModel::All => ModelKind::ALL.to_vec(),
        BenchModel::One(k) => vec![k],
    };
    let results: Vec<CaseResult<f64>> = if args.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> =
                kinds.iter().map(|&k| s.spawn(move || bench_case(k, args.halved, args.reps))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bench thread panicked"))
                .collect::<msrom_core::Result<Vec<_>>>()
        })?
    } else {
        kinds
            .iter()
            .map(|&k| {
                let r = bench_case(k, args.halved, args.reps);
                if let Ok(r) = &r {
                    eprintln!("{}: done (offline {:.2}s)", k, r.offline.seconds);
                }
                r
            })
            .collect::<msrom_core::Result<Vec<_>>>()?
    };
    fs::create_dir_all(&args.out)?;
    let rows: Vec<_> =
        results.iter().flat_map(CaseResult::reports).filter(|r| args.variant.is_none_or(|v| v == r.variant)).collect();
    let path = args.out.join("bench.csv");
    write_report_csv(create(&path)?, &rows)?;
    let mut off = create(&args.out.join("offline.csv"))?;
    writeln!(off, "model,n,ntilde,offline_s")?;
    for r in &results {
        writeln!(off, "{},{},{},{}", r.model.name(), r.offline.n(), r.offline.ntilde(), sci(r.offline.seconds))?;
    }
    off.flush()?;
    for r in &rows {
        println!(
            "{:6} {:7} E_sol {:.3e}  E_energy {:.3e}  {:.4}s  speedup {:.1}",
            r.model, r.variant, r.e_sol, r.e_energy, r.wall_clock, r.speedup
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
