//! Walker-Delta shell aligned over the service region, the serving group
//! under each selection strategy, and the link geometry to the region center.

use leo_ris::geometry::*;
use nalgebra::Vector3;

fn main() {
    let region = GroundRegion::from_ecef(Vector3::new(-2.6610e6, 4.5050e6, -1.7249e6)).expect("non-zero point");
    let spec = ConstellationSpec::starlink_shell();
    let shell = Constellation::aligned_over(spec, &region);
    let states = shell.states_at(0.0);
    println!("{} satellites, period {:.1} min", states.len(), spec.period() / 60.0);

    for strategy in [GroupStrategy::ScenarioGroup, GroupStrategy::MaxElevation, GroupStrategy::MaxAccessTime] {
        let group = match visible_group(&states, &region.center, spec.min_elevation, strategy, 3) {
            Ok(g) => g,
            Err(e) => {
                println!("{strategy:?}: {e}");
                continue;
            }
        };
        println!("{strategy:?}:");
        for &i in &group.members {
            let s = &states[i];
            let angles = link_angles(&s.position, &region.center, &LocalFrame::satellite(s)).expect("distinct points");
            println!(
                "  plane {:>2} slot {:>2}  elevation {:5.1} deg  access {:5.0} s  doppler {:+8.1} kHz",
                s.plane_index,
                s.slot_index,
                elevation(&s.position, &region.center).to_degrees(),
                remaining_access(s, &region.center, spec.min_elevation),
                doppler_shift(s, &angles, 30e9) / 1e3,
            );
        }
    }
}
