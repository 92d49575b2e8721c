//! A few successive UAV position updates with beams and phases held fixed.

use leo_ris::beamforming::{mrt_beamformer, DesignSettings};
use leo_ris::rate::PhaseConfig;
use leo_ris::synthetic::{SyntheticParams, SyntheticScene};
use leo_ris::trajectory::{design_trajectory_step, slot_energy, StepGeometry, UavModel};
use nalgebra::Vector3;

fn main() {
    let scene = SyntheticScene::generate(SyntheticParams::default(), 0);
    let uav = UavModel::default();
    let mut q = Vector3::new(0.0, 0.0, uav.altitude);
    let csi = scene.csi_at(&q).expect("valid scene");
    let phases = PhaseConfig::zeros(csi.ris_elements());
    let beams = mrt_beamformer(&csi, &phases, &[1.0, 1.0]);
    let mut t = 0.0;
    let mut energy = 0.0;
    for slot in 0..8 {
        let csi = scene.csi_at(&q).expect("valid scene");
        let geom = StepGeometry { anchor: q, previous: q, users: scene.users.clone(), consumed: energy };
        let d = design_trajectory_step(&csi, &beams, &phases, &geom, t, &DesignSettings::default(), &uav);
        energy += slot_energy(&q, &d.position, &uav);
        q = d.position;
        t = t.max(d.t);
        println!("slot {slot}: q = ({:6.2}, {:6.2})  t = {:.4}  energy {:.0} J  {:?}", q.x, q.y, d.t, energy, d.status);
    }
}
