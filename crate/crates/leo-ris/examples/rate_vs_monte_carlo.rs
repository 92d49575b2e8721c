//! Closed-form approximate rate against a Monte-Carlo ergodic estimate.

use leo_ris::beamforming::mrt_beamformer;
use leo_ris::rate::{rate_report, PhaseConfig};
use leo_ris::synthetic::{SyntheticParams, SyntheticScene};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let samples = 20_000;
    for seed in 0..4 {
        let scene = SyntheticScene::generate(SyntheticParams::default(), seed);
        let csi = scene.csi_at(&Vector3::new(0.0, 0.0, 100.0)).expect("valid scene");
        let phases = PhaseConfig::random(&mut ChaCha8Rng::seed_from_u64(seed), csi.ris_elements());
        let beams = mrt_beamformer(&csi, &phases, &[1.0, 1.0]);
        let report = rate_report(&csi, &beams, &phases, Some((samples, seed)));
        for (k, (a, mc)) in report.approx.iter().zip(report.monte_carlo.unwrap()).enumerate() {
            println!("scene {seed} user {k}: approx {a:.4}  mc {:.4} +- {:.4}", mc.mean, mc.std_error);
        }
    }
}
