use leo_ris::beamforming::*;
use leo_ris::channel::StatisticalCsi;
use leo_ris::conic::max_eigpair;
use leo_ris::rate::{approx_min_rate, effective_mean, power_matrix, BeamformerSet, PhaseConfig};
use leo_ris::synthetic::{SyntheticParams, SyntheticScene};
use nalgebra::Vector3;

fn csi(params: SyntheticParams, seed: u64) -> StatisticalCsi {
    SyntheticScene::generate(params, seed).csi_at(&Vector3::new(0.0, 0.0, 100.0)).unwrap()
}

#[test]
fn bisection_brackets_a_threshold() {
    let threshold = 0.3712;
    let (t, best, trace) = bisect(0.0, 4.0, 1e-3, |t| {
        let ok = t <= threshold;
        (ok.then_some(t), BisectionStep { t, feasible: ok, inner_iterations: 1, rank_residual: 0.0, sinr_ratio: 1.0 })
    });
    assert!(t <= threshold && threshold - t <= 1e-3);
    assert_eq!(best, Some(t));
    assert!(trace.steps.len() <= trace.step_bound(1e-3));
    let (t, best, trace) = bisect(1.0, 1.0005, 1e-3, |_| -> (Option<()>, _) { unreachable!() });
    assert_eq!((t, best, trace.steps.len()), (1.0, None, 0));
}

#[test]
fn mrt_spends_each_budget() {
    let c = csi(SyntheticParams::default(), 4);
    let phases = PhaseConfig::zeros(c.ris_elements());
    let beams = mrt_beamformer(&c, &phases, &[1.0, 2.0]);
    assert!((beams.sat_power(0) - 1.0).abs() < 1e-9);
    assert!((beams.sat_power(1) - 2.0).abs() < 1e-9);
}

#[test]
fn single_user_reaches_the_eigenvalue_bound() {
    let params = SyntheticParams { sats: 1, users: 1, ..SyntheticParams::default() };
    for seed in [1, 2] {
        let c = csi(params.clone(), seed);
        let phases = PhaseConfig::zeros(c.ris_elements());
        let mean = effective_mean(&c, &phases.coefficients(), 0);
        let (lam, _) = max_eigpair(&power_matrix(&c, &mean, 0));
        let bound = (1.0 + 1.5 * lam / c.noise_power[0]).log2();
        let init = BeamformerSet::zeros(1, c.antennas_per_sat, 1);
        let d = design_beamforming(&c, &phases, &[1.5], 0.0, &init, &DesignSettings::default());
        assert_eq!(d.status, DesignStatus::Improved);
        assert!((d.achieved - bound).abs() < 2e-3, "seed {seed}: {} vs {bound}", d.achieved);
        assert!(d.beams.power_excess(&[1.5]) < 1e-6);
    }
}

#[test]
fn design_respects_budgets_and_certifies_its_rate() {
    let c = csi(SyntheticParams::default(), 6);
    let phases = PhaseConfig::zeros(c.ris_elements());
    let budgets = [1.0, 1.0];
    let mrt = mrt_beamformer(&c, &phases, &budgets);
    let start = approx_min_rate(&c, &mrt, &phases).0;
    let settings = DesignSettings::default();
    let d = design_beamforming(&c, &phases, &budgets, start, &mrt, &settings);
    assert!(d.t_max >= d.t && d.t >= start);
    assert!(d.achieved >= d.t - 1e-6);
    assert!(d.beams.power_excess(&budgets) < 1e-6);
    assert!(d.trace.steps.len() <= d.trace.step_bound(settings.accuracy));
    assert!(d.achieved >= start - 1e-9);
}

#[test]
fn targets_above_the_bound_are_rejected() {
    let c = csi(SyntheticParams::default(), 7);
    let phases = PhaseConfig::zeros(c.ris_elements());
    let t_max = beamforming_tmax(&c, &phases, &[1.0, 1.0]);
    let warm = mrt_beamformer(&c, &phases, &[1.0, 1.0]).beams;
    assert!(solve_beam_target(&c, &phases, &[1.0, 1.0], t_max + 0.5, &warm, &DesignSettings::default()).is_err());
    let ok = solve_beam_target(&c, &phases, &[1.0, 1.0], 0.2, &warm, &DesignSettings::default()).unwrap();
    assert!(ok.relative_residual() <= 1e-6);
    let beams = ok.recover(c.antennas_per_sat);
    assert!(approx_min_rate(&c, &beams, &phases).0 >= 0.2 - 1e-6);
}
