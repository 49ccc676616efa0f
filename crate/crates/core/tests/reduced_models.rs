use msrom_core::deim::compute_deim;
use msrom_core::diagnostics::{e_energy, e_sol};
use msrom_core::experiment::{build_deim_set, CaseConfig};
use msrom_core::fom::{assemble_snapshots, collect_nonlinear_snapshots, run_fom};
use msrom_core::models::{build_model, ModelKind, ModelParams};
use msrom_core::pod::{compute_pod, ModeRule, PodBasis};
use msrom_core::rom::{build_reduced_system, energy_defect_bound, lift_trajectory, run_rom};
use msrom_core::AvfConfig64;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

/// Raising the interpolation size at a fixed small basis tightens the
/// bound and never breaks it.
#[test]
fn defect_bound_tightens_with_more_points() {
    let cfg = CaseConfig::<f64>::reference(ModelKind::Kdv);
    let model = cfg.model().unwrap();
    let (traj, _) = run_fom(&model, &cfg.avf, cfg.t_final).unwrap();
    let snaps = assemble_snapshots(&traj, &model).unwrap();
    let basis = compute_pod(&snaps[0].data, ModeRule::Fixed(5)).unwrap();
    let nl = collect_nonlinear_snapshots(&traj, &model).unwrap();
    let phi = compute_deim(&nl[0].data, ModeRule::Fixed(45)).unwrap();
    let p_sys = build_reduced_system(&model, std::slice::from_ref(&basis), None).unwrap();
    let p_lift = lift_trajectory(&p_sys, &run_rom(&p_sys, &cfg.avf, cfg.t_final).unwrap().coefficients).unwrap();

    let mut last_bound = f64::INFINITY;
    let mut errors = Vec::new();
    for nt in [5, 15, 25, 45] {
        let phi_k = PodBasis::from_matrix(phi.v().columns(0, nt).into_owned());
        let deim = build_deim_set(&[phi_k], std::slice::from_ref(&basis)).unwrap();
        assert!(deim[0].inv_norm() < 1e3, "ñ = {nt}: {}", deim[0].inv_norm());
        let sys = build_reduced_system(&model, std::slice::from_ref(&basis), Some(&deim)).unwrap();
        let run = run_rom(&sys, &cfg.avf, cfg.t_final).unwrap();
        let recs = energy_defect_bound(&sys, &run, cfg.avf.dt).unwrap();
        assert!(recs.iter().all(|r| r.holds()), "ñ = {nt}");
        let bound = median(recs.iter().map(|r| r.bound).collect());
        assert!(bound < last_bound, "ñ = {nt}: {bound} after {last_bound}");
        last_bound = bound;
        let lift = lift_trajectory(&sys, &run.coefficients).unwrap();
        errors.push(e_sol(&lift.states, &p_lift.states).unwrap());
    }
    // With all 45 points the hyper-reduced run tracks the Galerkin one closely.
    assert!(errors[3] < 1e-2 && errors[3] < errors[0], "{errors:?}");
}

#[test]
fn single_precision_pipeline_runs() {
    let p = ModelParams::<f32>::reference(ModelKind::Kdv);
    let model = build_model(p, p.reference_grid(100, 1).unwrap()).unwrap();
    let mut cfg = msrom_core::avf::AvfConfig::<f32>::new(0.02);
    cfg.tol = 1e-6;
    let (traj, energy) = run_fom(&model, &cfg, 1.0).unwrap();
    assert_eq!(traj.steps(), 50);
    assert!(e_energy(&energy).unwrap() < 1e-4);
    let snaps = assemble_snapshots(&traj, &model).unwrap();
    let basis = compute_pod(&snaps[0].data, ModeRule::Fixed(10)).unwrap();
    let sys = build_reduced_system(&model, &[basis], None).unwrap();
    let run = run_rom(&sys, &cfg, 1.0).unwrap();
    assert!(e_energy(&run.energy).unwrap() < 1e-4);
}

#[test]
fn prom_energy_flat_for_every_model_at_small_size() {
    for kind in msrom_core::ModelKind::ALL {
        let p = ModelParams::<f64>::reference(kind);
        let (nx, ny) = if kind.is_2d() { (24, 24) } else { (128, 1) };
        let model = build_model(p, p.reference_grid(nx, ny).unwrap()).unwrap();
        let cfg = AvfConfig64::new(0.01);
        let (traj, _) = run_fom(&model, &cfg, 0.5).unwrap();
        let snaps = assemble_snapshots(&traj, &model).unwrap();
        let bases: Vec<_> = snaps.iter().map(|s| compute_pod(&s.data, ModeRule::Fixed(6)).unwrap()).collect();
        let sys = build_reduced_system(&model, &bases, None).unwrap();
        let run = run_rom(&sys, &cfg, 0.5).unwrap();
        let drift = e_energy(&run.energy).unwrap();
        assert!(drift < 1e-10, "{kind}: {drift}");
    }
}
