//! Surface phase design for fixed beams, starting from random phases.

use leo_ris::beamforming::{mrt_beamformer, DesignSettings};
use leo_ris::phase::design_phase;
use leo_ris::rate::{approx_min_rate, PhaseConfig};
use leo_ris::synthetic::{SyntheticParams, SyntheticScene};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let scene = SyntheticScene::generate(SyntheticParams::default(), 5);
    let csi = scene.csi_at(&Vector3::new(0.0, 0.0, 100.0)).expect("valid scene");
    let start = PhaseConfig::random(&mut ChaCha8Rng::seed_from_u64(5), csi.ris_elements());
    let beams = mrt_beamformer(&csi, &start, &[1.0, 1.0]);
    let before = approx_min_rate(&csi, &beams, &start).0;
    let design = design_phase(&csi, &beams, &start, before, &DesignSettings::default());
    println!("min rate {before:.4} -> {:.4} (bound {:.4}, {:?})", design.achieved, design.t_max, design.status);
    let degrees: Vec<String> = design.phases.theta.iter().map(|t| format!("{:.0}", t.to_degrees())).collect();
    println!("phases (deg): {}", degrees.join(" "));
}
