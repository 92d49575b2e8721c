//! Statistical CSI of one physical slot and a few fading draws around it.

use leo_ris::ao::{CsiBuilder, FrameModel};
use leo_ris::channel::sample_channel;
use leo_ris::harness::{PhysicalFrame, ScenarioConfig};
use leo_ris::rate::PhaseConfig;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut cfg = ScenarioConfig::reference();
    cfg.array.sat_cols = 2;
    cfg.array.sat_rows = 2;
    cfg.ue.count = 2;
    let frame = PhysicalFrame::from_config(&cfg).expect("reference scenario is valid");
    let slot = frame.slot(0).expect("slot 0 exists");
    let csi = slot.csi_at(&Vector3::new(0.0, 0.0, cfg.uav.altitude)).expect("valid geometry");
    println!("group {:?}, {} antennas, {} surface elements", frame.members, csi.dim(), csi.ris_elements());
    for k in 0..csi.num_ues() {
        println!(
            "user {k}: |direct mean| {:.3e}, direct scatter {:.3e}, surface distance {:.1} m",
            csi.direct_mean[k].norm(),
            csi.direct_nlos[k][0],
            csi.ris_ue_distance[k]
        );
    }
    let phases = PhaseConfig::zeros(csi.ris_elements());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for draw in 0..3 {
        let ch = sample_channel(&csi, &phases, &mut rng);
        let norms: Vec<String> = ch.equivalent.iter().map(|f| format!("{:.3e}", f.norm())).collect();
        println!("draw {draw}: |f_k| = {}", norms.join(", "));
    }
}
