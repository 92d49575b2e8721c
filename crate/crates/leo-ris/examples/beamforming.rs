//! Max-min beamforming for fixed surface phases, compared with MRT.

use leo_ris::beamforming::{design_beamforming, mrt_beamformer, DesignSettings};
use leo_ris::rate::{approx_rates, PhaseConfig};
use leo_ris::synthetic::{SyntheticParams, SyntheticScene};
use nalgebra::Vector3;

fn main() {
    let scene = SyntheticScene::generate(SyntheticParams::default(), 3);
    let csi = scene.csi_at(&Vector3::new(0.0, 0.0, 100.0)).expect("valid scene");
    let phases = PhaseConfig::zeros(csi.ris_elements());
    let budgets = [1.0, 1.0];
    let mrt = mrt_beamformer(&csi, &phases, &budgets);
    println!("mrt rates      {:.4?}", approx_rates(&csi, &mrt, &phases));

    let settings = DesignSettings::default();
    let design = design_beamforming(&csi, &phases, &budgets, 0.0, &mrt, &settings);
    println!("designed rates {:.4?}", approx_rates(&csi, &design.beams, &phases));
    println!(
        "t = {:.4} (bound {:.4}), {} probes of at most {}, {:?}",
        design.t,
        design.t_max,
        design.trace.steps.len(),
        design.trace.step_bound(settings.accuracy),
        design.status
    );
    for s in 0..csi.num_sats {
        println!("satellite {s}: power {:.4} of {}", design.beams.sat_power(s), budgets[s]);
    }
}
