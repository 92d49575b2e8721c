use leo_ris::ao::{CsiBuilder, FrameModel};
use leo_ris::channel::*;
use leo_ris::geometry::LinkAngles;
use leo_ris::harness::{PhysicalFrame, ScenarioConfig};
use leo_ris::rate::PhaseConfig;
use leo_ris::C64;
use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn physical_slot() -> leo_ris::ao::PhysicalSlot {
    let mut cfg = ScenarioConfig::reference();
    cfg.array.sat_cols = 2;
    cfg.array.sat_rows = 2;
    cfg.array.ris_cols = 4;
    cfg.array.ris_rows = 2;
    cfg.ue.count = 2;
    cfg.ue.positions_m = vec![[50.0, 60.0], [200.0, 120.0]];
    PhysicalFrame::from_config(&cfg).unwrap().slot(0).unwrap()
}

/// Ascending series for J_n.
fn bessel(n: i32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(n) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..60 {
        term *= -(x * x / 4.0) / (m as f64 * (m + n) as f64);
        sum += term;
    }
    sum
}

#[test]
fn gain_matches_series_oracle() {
    let three_db = 0.4f64.to_radians();
    for eps_deg in [0.05, 0.2, 0.4, 0.7, 1.3] {
        let eps = f64::to_radians(eps_deg);
        let u = 2.071 * eps.sin() / three_db.sin();
        let oracle = 100.0 * (bessel(1, u) / (2.0 * u) + 36.0 * bessel(3, u) / u).powi(3);
        let g = antenna_gain(eps, three_db, 100.0);
        assert!((g - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{eps_deg}: {g} vs {oracle}");
    }
}

#[test]
fn steering_vectors_have_unit_norm() {
    let g = ArrayGeometry::half_wavelength(4, 3, 0.01);
    for (az, el) in [(0.0, 1.2), (-2.0, 0.3), (3.0, 0.0)] {
        let a = upa_response(&g, &LinkAngles { azimuth: az, elevation: el }, 0.01);
        assert_eq!(a.len(), 12);
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }
    let broadside = upa_response(&g, &LinkAngles { azimuth: 0.7, elevation: std::f64::consts::FRAC_PI_2 }, 0.01);
    for z in broadside.iter() {
        assert!((z - broadside[0]).norm() < 1e-9);
    }
}

#[test]
fn lognormal_rain_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 40_000;
    let (mean, std) = (-2.6, 1.63f64.sqrt());
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let r = rain_attenuation(&mut rng, mean, std);
            (20.0 * r.norm().log10()).ln()
        })
        .collect();
    let m = logs.iter().sum::<f64>() / n as f64;
    let v = logs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((m - mean).abs() < 4.0 * std / (n as f64).sqrt(), "{m}");
    assert!((v - std * std).abs() < 0.05, "{v}");
}

#[test]
fn normal_db_rain_uses_the_draw_directly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = rain_draw(RainModel::NormalDb, &mut rng, -3.0, 0.0);
    assert!((r.norm() - 10f64.powf(-3.0 / 20.0)).abs() < 1e-12);
}

#[test]
fn reference_link_budget() {
    let p = LinkBudgetParams::reference();
    assert!(p.validate().is_ok());
    assert!((p.noise_power() - 1.035e-13).abs() < 1e-17);
    assert!((p.wavelength() - 0.0099933).abs() < 1e-6);
    assert!((10.0 * p.ue_gain.log10() - 34.0 - 10.0 * 300f64.log10()).abs() < 1e-9);
    assert!(LinkBudgetParams { bandwidth: 0.0, ..p }.validate().is_err());
    assert!(LinkBudgetParams { three_db_angle: 2.0, ..p }.validate().is_err());
}

#[test]
fn statistical_csi_is_consistent() {
    let slot = physical_slot();
    let csi = slot.csi_at(&Vector3::new(0.0, 0.0, 100.0)).unwrap();
    csi.validate().unwrap();
    assert_eq!(csi.dim(), 4 * slot.scene.satellites.len());
    assert_eq!(csi.ris_elements(), 8);
    assert_eq!(csi.num_ues(), 2);
    let kd = slot.params.rician_direct;
    for k in 0..2 {
        for i in 0..csi.dim() {
            let ratio = csi.antennas_per_sat as f64 * csi.direct_mean[k][i].norm_sqr() / csi.direct_nlos[k][i].powi(2);
            assert!((ratio - kd).abs() < 1e-9 * kd);
        }
        let d = (Vector3::new(0.0, 0.0, 100.0) - slot.scene.ues[k]).norm();
        assert!((csi.ris_ue_distance[k] - d).abs() < 1e-9);
    }
    let bare = csi.without_ris();
    assert!(bare.sat_ris_mean.iter().all(|z| z.norm() == 0.0));
    assert_eq!(bare.direct_mean, csi.direct_mean);
}

#[test]
fn rain_shape_must_match_scene() {
    let slot = physical_slot();
    let bad = RainDraws::clear(slot.scene.satellites.len() + 1, 2);
    let err = build_statistical_csi(&slot.scene, &slot.params, &Vector3::new(0.0, 0.0, 100.0), &bad);
    assert!(matches!(err, Err(ChannelError::Dimension(_))));
}

#[test]
fn samples_have_the_stated_mean_and_compose() {
    let slot = physical_slot();
    let csi = slot.csi_at(&Vector3::new(10.0, 20.0, 100.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phases = PhaseConfig::random(&mut rng, csi.ris_elements());
    let n = 20_000;
    let mut acc = DVector::<C64>::zeros(csi.dim());
    for _ in 0..n {
        let ch = sample_channel(&csi, &phases, &mut rng);
        for (a, b) in ch.recompose().iter().zip(&ch.equivalent) {
            assert!((a - b).norm() <= 1e-12 * b.norm());
        }
        acc += &ch.direct[0];
    }
    acc /= C64::from(n as f64);
    for i in 0..csi.dim() {
        let tol = 5.0 * csi.direct_nlos[0][i] / (n as f64).sqrt();
        assert!((acc[i] - csi.direct_mean[0][i]).norm() < tol);
    }
}

#[test]
fn compose_applies_conjugate_phases() {
    let h = DVector::from_element(1, C64::new(0.0, 0.0));
    let g_mat = nalgebra::DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    let g = DVector::from_element(1, C64::new(1.0, 0.0));
    let c = PhaseConfig::new(DVector::from_element(1, 0.5)).coefficients();
    let f = InstantChannel::compose(&h, &g_mat, &g, &c);
    assert!((f[0] - C64::from_polar(1.0, -0.5)).norm() < 1e-12);
}
