use leo_ris::beamforming::{mrt_beamformer, DesignSettings};
use leo_ris::rate::{approx_rates, PhaseConfig};
use leo_ris::synthetic::{SyntheticParams, SyntheticScene};
use leo_ris::trajectory::*;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn hover_power_is_blade_plus_induced() {
    let m = UavModel::default();
    assert!((propulsion_power(0.0, &m) - (m.blade_power + m.induced_power)).abs() < 1e-12);
    let e = slot_energy(&Vector3::zeros(), &Vector3::new(3.0, 4.0, 0.0), &m);
    assert!((e - m.slot * propulsion_power(5.0, &m)).abs() < 1e-12);
}

#[test]
fn slot_energy_bound_covers_every_speed() {
    for vmax in [1.0, 5.0, 10.0, 30.0] {
        let m = UavModel { max_speed: vmax, ..UavModel::default() };
        let bound = m.max_slot_energy();
        for i in 0..=1000 {
            let v = vmax * i as f64 / 1000.0;
            assert!(m.slot * propulsion_power(v, &m) <= bound);
        }
    }
}

#[test]
fn energy_guard_limits_distance_from_home() {
    let m = UavModel { energy_budget: 1000.0, ..UavModel::default() };
    let cost = propulsion_power(m.max_speed, &m) / m.max_speed;
    let edge = 1000.0 / cost;
    assert!(energy_guard(&Vector3::new(edge * 0.99, 0.0, 0.0), 0.0, &m));
    assert!(!energy_guard(&Vector3::new(edge * 1.01, 0.0, 0.0), 0.0, &m));
}

#[test]
fn recast_coefficients_predict_rates_elsewhere() {
    let scene = SyntheticScene::generate(SyntheticParams::default(), 4);
    let here = Vector3::new(30.0, 0.0, 100.0);
    let there = Vector3::new(45.0, 12.0, 100.0);
    let csi = scene.csi_at(&here).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let phases = PhaseConfig::random(&mut rng, csi.ris_elements());
    let beams = mrt_beamformer(&csi, &phases, &[1.0, 1.0]);
    let coeffs = recast_coefficients(&csi, &beams, &phases);
    let moved = approx_rates(&scene.csi_at(&there).unwrap(), &beams, &phases);
    for (k, user) in scene.users.iter().enumerate() {
        let predicted = coeffs.rate(k, (there - user).norm());
        assert!((predicted - moved[k]).abs() < 1e-9, "user {k}");
    }
}

#[test]
fn steps_are_admissible_and_meet_their_targets() {
    let model = UavModel::default();
    let start = Vector3::new(0.0, 0.0, model.altitude);
    let mut found = 0;
    for seed in 0..6 {
        let scene = SyntheticScene::generate(SyntheticParams::default(), seed);
        let csi = scene.csi_at(&start).unwrap();
        let phases = PhaseConfig::zeros(csi.ris_elements());
        let beams = mrt_beamformer(&csi, &phases, &[1.0, 1.0]);
        let geom = StepGeometry { anchor: start, previous: start, users: scene.users.clone(), consumed: 0.0 };
        let t0 = approx_rates(&csi, &beams, &phases).into_iter().fold(f64::INFINITY, f64::min);
        let d = design_trajectory_step(&csi, &beams, &phases, &geom, t0, &DesignSettings::default(), &model);
        assert!(d.t_max >= d.t && d.t >= t0);
        let Some(step) = d.step else { continue };
        found += 1;
        assert!(step_admissible(&step, 0.0, &model));
        assert!(step.exact_margin >= -1e-7);
        assert!((step.position - start).norm() <= model.step_length() + 1e-9);
        let coeffs = recast_coefficients(&csi, &beams, &phases);
        let reached = (0..scene.users.len())
            .map(|k| coeffs.rate(k, (step.position - scene.users[k]).norm()))
            .fold(f64::INFINITY, f64::min);
        assert!(reached >= d.t - 1e-6, "seed {seed}");
        for k in 0..scene.users.len() {
            assert!(step.c_lower[k] <= 1.0 / (step.position - scene.users[k]).norm() + 1e-9);
        }
    }
    assert!(found > 0);
}

#[test]
fn stationary_uav_keeps_its_position() {
    let scene = SyntheticScene::generate(SyntheticParams::default(), 8);
    let model = UavModel { max_speed: 0.0, ..UavModel::default() };
    let start = Vector3::new(0.0, 0.0, model.altitude);
    let csi = scene.csi_at(&start).unwrap();
    let phases = PhaseConfig::zeros(csi.ris_elements());
    let beams = mrt_beamformer(&csi, &phases, &[1.0, 1.0]);
    let geom = StepGeometry { anchor: start, previous: start, users: scene.users.clone(), consumed: 0.0 };
    let coeffs = recast_coefficients(&csi, &beams, &phases);
    let step = solve_position_target(&coeffs, &geom, 0.01, &model).unwrap();
    assert_eq!(step.position, start);
}
