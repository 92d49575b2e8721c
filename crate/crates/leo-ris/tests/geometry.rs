use leo_ris::geometry::*;
use nalgebra::Vector3;
use std::f64::consts::PI;

fn region() -> GroundRegion {
    GroundRegion::from_ecef(Vector3::new(-2.6610e6, 4.5050e6, -1.7249e6)).unwrap()
}

#[test]
fn walker_delta_has_full_population_on_one_shell() {
    let spec = ConstellationSpec::starlink_shell();
    let states = build_walker_delta(&spec, 0.0);
    assert_eq!(states.len(), 792);
    let a = spec.semi_major_axis();
    for s in &states {
        assert!((s.position.norm() - a).abs() < 1e-6);
        assert!(s.position.dot(&s.velocity).abs() / (a * s.velocity.norm()) < 1e-12);
    }
}

#[test]
fn orbit_normals_share_the_inclination() {
    let spec = ConstellationSpec::starlink_shell();
    for s in build_walker_delta(&spec, 123.0) {
        let h = s.position.cross(&s.velocity).normalize();
        assert!((h.z.acos() - spec.inclination).abs() < 1e-9);
    }
}

#[test]
fn propagation_matches_the_closed_form_orbit() {
    let spec = ConstellationSpec::starlink_shell();
    let c = Constellation::new(spec);
    for dt in [1.0, 37.5, 600.0, spec.period()] {
        let moved = propagate(&c.state(3, 5, 0.0), dt);
        let exact = c.state(3, 5, dt);
        assert!((moved.position - exact.position).norm() < 1e-4, "dt {dt}");
        assert!((moved.velocity - exact.velocity).norm() < 1e-7, "dt {dt}");
    }
}

#[test]
fn period_of_550_km_shell() {
    let p = ConstellationSpec::starlink_shell().period();
    assert!((p / 60.0 - 95.6).abs() < 0.1, "{p}");
}

#[test]
fn region_frame_is_orthonormal_and_round_trips() {
    let r = region();
    assert!((r.center.norm() - EARTH_RADIUS).abs() < 1e-6);
    let f = r.frame();
    assert!(f.x.dot(&f.y).abs() < 1e-12 && f.x.dot(&f.normal).abs() < 1e-12);
    assert!((f.x.cross(&f.y) - f.normal).norm() < 1e-12);
    let p = Vector3::new(120.0, -40.0, 100.0);
    assert!((r.ecef_to_enu(&r.enu_to_ecef(&p)) - p).norm() < 1e-6);
    assert!(GroundRegion::from_ecef(Vector3::zeros()).is_err());
}

#[test]
fn aligned_constellation_straddles_the_zenith() {
    let r = region();
    let c = Constellation::aligned_over(ConstellationSpec::starlink_shell(), &r);
    let (a, b) = (c.state(0, 0, 0.0), c.state(0, 1, 0.0));
    let mid = (a.position + b.position).normalize();
    assert!((mid - r.up).norm() < 1e-9);
    let (ea, eb) = (elevation(&a.position, &r.center), elevation(&b.position, &r.center));
    assert!((ea - eb).abs() < 1e-9);
}

#[test]
fn elevation_of_zenith_and_horizon() {
    let g = Vector3::new(EARTH_RADIUS, 0.0, 0.0);
    assert!((elevation(&Vector3::new(EARTH_RADIUS + 5e5, 0.0, 0.0), &g) - PI / 2.0).abs() < 1e-12);
    assert!(elevation(&Vector3::new(EARTH_RADIUS, 1e6, 0.0), &g).abs() < 1e-12);
}

#[test]
fn boresight_direction_has_zero_azimuth() {
    let frame = LocalFrame { x: Vector3::x(), y: Vector3::y(), normal: Vector3::z() };
    let a = link_angles(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 10.0), &frame).unwrap();
    assert_eq!(a.azimuth, 0.0);
    assert!((a.elevation - PI / 2.0).abs() < 1e-12);
    let b = link_angles(&Vector3::zeros(), &Vector3::new(10.0, 0.0, 0.0), &frame).unwrap();
    assert!((b.azimuth - PI / 2.0).abs() < 1e-12 && b.elevation.abs() < 1e-12);
    assert_eq!(
        link_angles(&Vector3::zeros(), &Vector3::new(0.1, 0.0, 0.0), &frame),
        Err(GeometryError::DegenerateDirection)
    );
}

#[test]
fn doppler_is_bounded_by_orbital_speed() {
    let spec = ConstellationSpec::starlink_shell();
    let s = build_walker_delta(&spec, 0.0)[0];
    let f = doppler_shift(&s, &LinkAngles { azimuth: PI / 2.0, elevation: 0.0 }, 30e9);
    assert!((f - 30e9 * s.velocity.norm() / SPEED_OF_LIGHT).abs() < 1e-3);
    assert!(doppler_shift(&s, &LinkAngles { azimuth: 0.3, elevation: PI / 2.0 }, 30e9).abs() < 1e-3);
}

#[test]
fn groups_are_visible_and_sized() {
    let r = region();
    let spec = ConstellationSpec::starlink_shell();
    let states = Constellation::aligned_over(spec, &r).states_at(0.0);
    let g = visible_group(&states, &r.center, spec.min_elevation, GroupStrategy::ScenarioGroup, 2).unwrap();
    assert_eq!(g.members.len(), 2);
    for strategy in [GroupStrategy::MaxElevation, GroupStrategy::MaxAccessTime] {
        let g = visible_group(&states, &r.center, spec.min_elevation, strategy, 2).unwrap();
        assert_eq!(g.members.len(), 1);
    }
    let g = visible_group(&states, &r.center, spec.min_elevation, GroupStrategy::MaxElevation, 1).unwrap();
    let best = states.iter().map(|s| elevation(&s.position, &r.center)).fold(f64::MIN, f64::max);
    assert_eq!(elevation(&states[g.members[0]].position, &r.center), best);
    for &m in &g.members {
        assert!(elevation(&states[m].position, &r.center) >= spec.min_elevation);
    }
}

#[test]
fn no_group_when_nothing_is_visible() {
    let spec = ConstellationSpec { num_planes: 1, sats_per_plane: 1, phase_factor: 0, ..ConstellationSpec::starlink_shell() };
    let states = build_walker_delta(&spec, 0.0);
    let far = Vector3::new(-EARTH_RADIUS, 0.0, 0.0);
    assert!(visible_group(&states, &far, spec.min_elevation, GroupStrategy::MaxElevation, 1).is_err());
}

#[test]
fn remaining_access_is_capped_and_monotone() {
    let r = region();
    let spec = ConstellationSpec::starlink_shell();
    let states = Constellation::aligned_over(spec, &r).states_at(0.0);
    let g = visible_group(&states, &r.center, spec.min_elevation, GroupStrategy::MaxElevation, 1).unwrap();
    let s = states[g.members[0]];
    let now = remaining_access(&s, &r.center, spec.min_elevation);
    let later = remaining_access(&propagate(&s, 30.0), &r.center, spec.min_elevation);
    assert!(now > 0.0 && now <= 600.0);
    assert!(later <= now);
}

#[test]
fn invalid_specs_are_rejected() {
    let base = ConstellationSpec::starlink_shell();
    assert!(base.validate().is_ok());
    assert!(ConstellationSpec { num_planes: 0, ..base }.validate().is_err());
    assert!(ConstellationSpec { orbital_altitude: -1.0, ..base }.validate().is_err());
}

#[test]
fn scheduling_prefers_urgent_uncorrelated_users() {
    use leo_ris::C64;
    use nalgebra::DVector;
    let ch = |a: f64, b: f64| DVector::from_vec(vec![C64::new(a, 0.0), C64::new(b, 0.0)]);
    let users = vec![
        UeDemand { total_demand: 1.0, remaining_demand: 1.0, channel: ch(1.0, 0.0) },
        UeDemand { total_demand: 1.0, remaining_demand: 0.9, channel: ch(1.0, 0.01) },
        UeDemand { total_demand: 1.0, remaining_demand: 0.5, channel: ch(0.0, 1.0) },
    ];
    let picked = schedule_users(&users, 2).unwrap();
    assert_eq!(picked.len(), 2);
    assert_eq!(picked[0], 0);
    assert_eq!(picked[1], 2);
    let done: Vec<UeDemand> = users.iter().map(|u| UeDemand { remaining_demand: 0.0, ..u.clone() }).collect();
    assert_eq!(schedule_users(&done, 2), Err(GeometryError::ZeroDemand));
}
