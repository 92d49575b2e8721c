//! Constellation geometry: Walker-Delta generation, circular propagation,
//! visibility and group selection, local-frame link angles, Doppler and
//! demand-driven user scheduling.
//!
//! Earth is a non-rotating sphere, so ECEF and inertial coordinates coincide
//! over a frame.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::C64;

pub const EARTH_RADIUS: f64 = 6.371e6;
pub const EARTH_MU: f64 = 3.986e14;
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Step and horizon for the remaining-visibility search.
const ACCESS_STEP: f64 = 1.0;
const ACCESS_HORIZON: f64 = 600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid constellation: {0}")]
    InvalidSpec(String),
    #[error("no satellite above the minimum elevation")]
    NoVisibleSatellite,
    #[error("no visible group matches the {size}-satellite pattern")]
    PatternUnavailable { size: usize },
    #[error("source and target closer than 1 m")]
    DegenerateDirection,
    #[error("point at the Earth center has no local frame")]
    DegenerateRegion,
    #[error("every user has zero remaining demand")]
    ZeroDemand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub orbital_altitude: f64,
    pub num_planes: usize,
    pub sats_per_plane: usize,
    pub inclination: f64,
    pub phase_factor: usize,
    pub min_elevation: f64,
}

impl ConstellationSpec {
    /// 36 planes of 22 satellites at 550 km, 53 degrees, F = 1.
    pub fn starlink_shell() -> Self {
        Self {
            orbital_altitude: 550e3,
            num_planes: 36,
            sats_per_plane: 22,
            inclination: 53f64.to_radians(),
            phase_factor: 1,
            min_elevation: 10f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidSpec(m.to_string()));
        if self.num_planes == 0 || self.sats_per_plane == 0 {
            return bad("num_planes and sats_per_plane must be at least 1");
        }
        if !(self.inclination > 0.0 && self.inclination <= PI / 2.0) {
            return bad("inclination must lie in (0, pi/2]");
        }
        if self.phase_factor >= self.num_planes {
            return bad("phase_factor must be below num_planes");
        }
        if !(self.orbital_altitude > 0.0) || !self.min_elevation.is_finite() {
            return bad("altitude must be positive and min_elevation finite");
        }
        Ok(())
    }

    pub fn semi_major_axis(&self) -> f64 {
        EARTH_RADIUS + self.orbital_altitude
    }

    pub fn mean_motion(&self) -> f64 {
        (EARTH_MU / self.semi_major_axis().powi(3)).sqrt()
    }

    pub fn period(&self) -> f64 {
        TAU / self.mean_motion()
    }

    pub fn total(&self) -> usize {
        self.num_planes * self.sats_per_plane
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub plane_index: usize,
    pub slot_index: usize,
}

/// A Walker-Delta pattern with a global rotation applied on top of the
/// nominal RAAN and in-plane phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constellation {
    pub spec: ConstellationSpec,
    pub raan_offset: f64,
    pub anomaly_offset: f64,
}

impl Constellation {
    pub fn new(spec: ConstellationSpec) -> Self {
        Self { spec, raan_offset: 0.0, anomaly_offset: 0.0 }
    }

    /// Rotates the pattern so that satellites (0, 0) and (0, 1) straddle the
    /// zenith of `region` at t = 0.
    pub fn aligned_over(spec: ConstellationSpec, region: &GroundRegion) -> Self {
        let c = region.center;
        let lat = (c.z / c.norm()).asin();
        let lon = c.y.atan2(c.x);
        let i = spec.inclination;
        let u = (lat.sin() / i.sin()).clamp(-1.0, 1.0).asin();
        let raan = lon - (u.sin() * i.cos()).atan2(u.cos());
        Self {
            spec,
            raan_offset: raan,
            anomaly_offset: u - PI / spec.sats_per_plane as f64,
        }
    }

    pub fn state(&self, plane: usize, slot: usize, t: f64) -> SatelliteState {
        let s = &self.spec;
        let n_tot = (s.num_planes * s.sats_per_plane) as f64;
        let raan = self.raan_offset + TAU * plane as f64 / s.num_planes as f64;
        let u = self.anomaly_offset
            + TAU * slot as f64 / s.sats_per_plane as f64
            + TAU * (s.phase_factor * plane) as f64 / n_tot
            + s.mean_motion() * t;
        let a = s.semi_major_axis();
        let speed = a * s.mean_motion();
        let (so, co) = raan.sin_cos();
        let (su, cu) = u.sin_cos();
        let (si, ci) = s.inclination.sin_cos();
        let position = a * Vector3::new(co * cu - so * su * ci, so * cu + co * su * ci, su * si);
        let velocity =
            speed * Vector3::new(-co * su - so * cu * ci, -so * su + co * cu * ci, cu * si);
        SatelliteState { position, velocity, plane_index: plane, slot_index: slot }
    }

    /// All satellites at time `t`, plane-major order.
    pub fn states_at(&self, t: f64) -> Vec<SatelliteState> {
        let s = &self.spec;
        (0..s.num_planes)
            .flat_map(|p| (0..s.sats_per_plane).map(move |j| (p, j)))
            .map(|(p, j)| self.state(p, j, t))
            .collect()
    }
}

pub fn build_walker_delta(spec: &ConstellationSpec, epoch: f64) -> Vec<SatelliteState> {
    Constellation::new(*spec).states_at(epoch)
}

/// Rotates a circular-orbit state within its plane by `dt` seconds.
pub fn propagate(state: &SatelliteState, dt: f64) -> SatelliteState {
    let r = state.position.norm();
    let speed = state.velocity.norm();
    let angle = (EARTH_MU / r.powi(3)).sqrt() * dt;
    let rhat = state.position / r;
    let vhat = state.velocity / speed;
    let (s, c) = angle.sin_cos();
    SatelliteState {
        position: r * (c * rhat + s * vhat),
        velocity: speed * (c * vhat - s * rhat),
        ..*state
    }
}

/// Orthonormal local frame. `normal` is the array boresight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl LocalFrame {
    /// Satellite array frame: boresight at nadir, rows along the velocity.
    pub fn satellite(state: &SatelliteState) -> Self {
        let normal = -state.position.normalize();
        let y = state.velocity.normalize();
        let x = y.cross(&normal);
        Self { x, y, normal }
    }
}

/// The service area: a point on the sphere with its east-north-up frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundRegion {
    pub center: Vector3<f64>,
    pub east: Vector3<f64>,
    pub north: Vector3<f64>,
    pub up: Vector3<f64>,
}

impl GroundRegion {
    /// Builds the region from any ECEF point, projected radially to the sphere.
    pub fn from_ecef(point: Vector3<f64>) -> Result<Self, GeometryError> {
        let norm = point.norm();
        if norm < 1.0 {
            return Err(GeometryError::DegenerateRegion);
        }
        let up = point / norm;
        let lat = up.z.asin();
        let lon = up.y.atan2(up.x);
        let east = Vector3::new(-lon.sin(), lon.cos(), 0.0);
        let north = Vector3::new(-lat.sin() * lon.cos(), -lat.sin() * lon.sin(), lat.cos());
        Ok(Self { center: up * EARTH_RADIUS, east, north, up })
    }

    pub fn enu_to_ecef(&self, enu: &Vector3<f64>) -> Vector3<f64> {
        self.center + enu.x * self.east + enu.y * self.north + enu.z * self.up
    }

    pub fn ecef_to_enu(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let d = p - self.center;
        Vector3::new(d.dot(&self.east), d.dot(&self.north), d.dot(&self.up))
    }

    /// Frame of a horizontal surface: x east, y north, boresight up.
    pub fn frame(&self) -> LocalFrame {
        LocalFrame { x: self.east, y: self.north, normal: self.up }
    }
}

/// Elevation of `sat` seen from `ground` on the sphere, in radians.
pub fn elevation(sat: &Vector3<f64>, ground: &Vector3<f64>) -> f64 {
    let los = sat - ground;
    let up = ground.normalize();
    (los.dot(&up) / los.norm()).clamp(-1.0, 1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAngles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl LinkAngles {
    /// Direction cosines along the frame x and y axes.
    pub fn direction_cosines(&self) -> (f64, f64) {
        let c = self.elevation.cos();
        (c * self.azimuth.sin(), c * self.azimuth.cos())
    }
}

/// Azimuth and elevation of the `source -> target` direction in `frame`.
///
/// Elevation is measured from the array plane toward the boresight axis and
/// azimuth from the frame y axis toward x, so a boresight direction has
/// elevation pi/2 and azimuth 0.
pub fn link_angles(
    source: &Vector3<f64>,
    target: &Vector3<f64>,
    frame: &LocalFrame,
) -> Result<LinkAngles, GeometryError> {
    let d = target - source;
    let dist = d.norm();
    if dist < 1.0 {
        return Err(GeometryError::DegenerateDirection);
    }
    let d = d / dist;
    let (dx, dy, dz) = (d.dot(&frame.x), d.dot(&frame.y), d.dot(&frame.normal));
    let elevation = dz.abs().atan2(dx.hypot(dy));
    let mut azimuth = if dx == 0.0 && dy == 0.0 { 0.0 } else { dx.atan2(dy) };
    if azimuth >= PI {
        azimuth -= TAU;
    }
    Ok(LinkAngles { azimuth, elevation })
}

pub fn doppler_shift(sat: &SatelliteState, angles: &LinkAngles, carrier: f64) -> f64 {
    carrier * sat.velocity.norm() * angles.azimuth.sin() * angles.elevation.cos() / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupStrategy {
    ScenarioGroup,
    MaxElevation,
    MaxAccessTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSelection {
    pub strategy: GroupStrategy,
    /// Indices into the state list passed to [`visible_group`].
    pub members: Vec<usize>,
}

fn adjacent(a: usize, b: usize, n: usize) -> bool {
    n > 1 && ((a + 1) % n == b || (b + 1) % n == a)
}

/// Seconds until `state` drops below `min_elevation`, capped at the horizon.
pub fn remaining_access(state: &SatelliteState, ground: &Vector3<f64>, min_elevation: f64) -> f64 {
    let mut t = 0.0;
    while t < ACCESS_HORIZON {
        let next = propagate(state, t + ACCESS_STEP);
        if elevation(&next.position, ground) < min_elevation {
            break;
        }
        t += ACCESS_STEP;
    }
    t
}

pub fn visible_group(
    states: &[SatelliteState],
    region_center: &Vector3<f64>,
    min_elevation: f64,
    strategy: GroupStrategy,
    size: usize,
) -> Result<GroupSelection, GeometryError> {
    let elev: Vec<f64> = states.iter().map(|s| elevation(&s.position, region_center)).collect();
    let visible: Vec<usize> = (0..states.len()).filter(|&i| elev[i] >= min_elevation).collect();
    if visible.is_empty() {
        return Err(GeometryError::NoVisibleSatellite);
    }
    let best_by = |key: &dyn Fn(usize) -> f64| {
        let mut best = visible[0];
        for &i in &visible[1..] {
            if key(i) > key(best) {
                best = i;
            }
        }
        best
    };
    let members = match strategy {
        GroupStrategy::MaxElevation => vec![best_by(&|i| elev[i])],
        GroupStrategy::MaxAccessTime => {
            let access: Vec<f64> = states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    if elev[i] >= min_elevation {
                        remaining_access(s, region_center, min_elevation)
                    } else {
                        0.0
                    }
                })
                .collect();
            // elevation breaks ties between satellites that outlast the horizon
            vec![best_by(&|i| access[i] + 1e-6 * elev[i])]
        }
        GroupStrategy::ScenarioGroup => scenario_members(states, &elev, &visible, size)?,
    };
    Ok(GroupSelection { strategy, members })
}

fn scenario_members(
    states: &[SatelliteState],
    elev: &[f64],
    visible: &[usize],
    size: usize,
) -> Result<Vec<usize>, GeometryError> {
    let planes = states.iter().map(|s| s.plane_index).max().unwrap_or(0) + 1;
    let slots = states.iter().map(|s| s.slot_index).max().unwrap_or(0) + 1;
    let same_pair = |a: usize, b: usize| {
        states[a].plane_index == states[b].plane_index
            && adjacent(states[a].slot_index, states[b].slot_index, slots)
    };
    let near_plane = |a: usize, b: usize| adjacent(states[a].plane_index, states[b].plane_index, planes);

    let mut pairs = Vec::new();
    for (x, &a) in visible.iter().enumerate() {
        for &b in &visible[x + 1..] {
            if same_pair(a, b) {
                pairs.push((a, b));
            }
        }
    }

    let mut candidates: Vec<Vec<usize>> = Vec::new();
    match size {
        0 => return Err(GeometryError::PatternUnavailable { size }),
        1 => candidates.extend(visible.iter().map(|&i| vec![i])),
        2 => {
            for (x, &a) in visible.iter().enumerate() {
                for &b in &visible[x + 1..] {
                    if same_pair(a, b) || near_plane(a, b) {
                        candidates.push(vec![a, b]);
                    }
                }
            }
        }
        3 => {
            for &(a, b) in &pairs {
                for &c in visible {
                    if c != a && c != b && near_plane(a, c) {
                        candidates.push(vec![a, b, c]);
                    }
                }
            }
        }
        4 => {
            for (x, &(a, b)) in pairs.iter().enumerate() {
                for &(c, d) in &pairs[x + 1..] {
                    if near_plane(a, c) {
                        candidates.push(vec![a, b, c, d]);
                    }
                }
            }
        }
        _ => {
            let mut order = visible.to_vec();
            order.sort_by(|&a, &b| elev[b].total_cmp(&elev[a]).then(a.cmp(&b)));
            if order.len() < size {
                return Err(GeometryError::PatternUnavailable { size });
            }
            order.truncate(size);
            order.sort_unstable();
            return Ok(order);
        }
    }
    let mean = |g: &[usize]| g.iter().map(|&i| elev[i]).sum::<f64>() / g.len() as f64;
    let mut best: Option<Vec<usize>> = None;
    for mut g in candidates {
        g.sort_unstable();
        let better = match &best {
            None => true,
            Some(b) => mean(&g) > mean(b) || (mean(&g) == mean(b) && g < *b),
        };
        if better {
            best = Some(g);
        }
    }
    best.ok_or(GeometryError::PatternUnavailable { size })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeDemand {
    pub total_demand: f64,
    pub remaining_demand: f64,
    pub channel: DVector<C64>,
}

impl UeDemand {
    fn urgency(&self) -> f64 {
        if self.total_demand > 0.0 {
            self.remaining_demand / self.total_demand
        } else {
            0.0
        }
    }
}

/// Greedy demand-weighted, correlation-penalized user selection.
pub fn schedule_users(demands: &[UeDemand], k_max: usize) -> Result<Vec<usize>, GeometryError> {
    if demands.iter().all(|d| d.urgency() == 0.0) {
        return Err(GeometryError::ZeroDemand);
    }
    let norms: Vec<f64> = demands.iter().map(|d| d.channel.norm()).collect();
    let argmax = |pool: &[usize], key: &dyn Fn(usize) -> f64| {
        let mut best = pool[0];
        for &i in &pool[1..] {
            if key(i) > key(best) {
                best = i;
            }
        }
        best
    };
    let mut pool: Vec<usize> = (0..demands.len()).collect();
    let mut chosen = Vec::new();
    let count = k_max.min(demands.len());
    while chosen.len() < count {
        let pick = if chosen.is_empty() {
            argmax(&pool, &|i| demands[i].urgency() * norms[i])
        } else {
            argmax(&pool, &|m| {
                let overlap: f64 = chosen
                    .iter()
                    .map(|&j: &usize| {
                        demands[j].channel.dotc(&demands[m].channel).norm() / (norms[j] * norms[m])
                    })
                    .sum();
                demands[m].urgency() * (1.0 - overlap)
            })
        };
        pool.retain(|&i| i != pick);
        chosen.push(pick);
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbital_speed_matches_vis_viva() {
        let spec = ConstellationSpec::starlink_shell();
        let s = build_walker_delta(&spec, 0.0);
        let v = s[0].velocity.norm();
        assert!((v - (EARTH_MU / 6.921e6f64).sqrt()).abs() < 1e-6);
        assert!((v - 7590.0).abs() < 10.0);
    }

    #[test]
    fn single_satellite_sits_at_raan_zero() {
        let spec = ConstellationSpec { num_planes: 1, sats_per_plane: 1, phase_factor: 0, ..ConstellationSpec::starlink_shell() };
        let s = build_walker_delta(&spec, 0.0);
        assert_eq!(s.len(), 1);
        let a = spec.semi_major_axis();
        assert!((s[0].position - Vector3::new(a, 0.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn azimuth_wraps_into_half_open_range() {
        let frame = LocalFrame { x: Vector3::x(), y: Vector3::y(), normal: Vector3::z() };
        let a = link_angles(&Vector3::zeros(), &Vector3::new(0.0, -10.0, 1.0), &frame).unwrap();
        assert_eq!(a.azimuth, -PI);
    }
}
