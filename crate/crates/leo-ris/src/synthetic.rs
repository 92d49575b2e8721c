//! Abstract scenes with direct and surface links of comparable strength.
//!
//! The physical link budget leaves the cascaded link many orders of magnitude
//! below the direct one, which hides every surface and trajectory effect. These
//! scenes keep the same statistical structure (Rician means, scatter scales,
//! `1/d` surface-to-user fading with planar-array steering) with free gains.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::ao::FrameModel;
use crate::channel::{upa_response, ArrayGeometry, ChannelError, StatisticalCsi};
use crate::geometry::LinkAngles;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub sats: usize,
    pub antennas_per_sat: usize,
    pub ris_cols: usize,
    pub ris_rows: usize,
    pub users: usize,
    /// Per-antenna amplitude of the direct link.
    pub direct_gain: f64,
    /// Per-entry amplitude of the satellite-to-surface link.
    pub sat_ris_gain: f64,
    /// Surface-to-user amplitude at 1 m.
    pub ris_ue_gain: f64,
    pub rician_direct: f64,
    pub rician_sat_ris: f64,
    pub rician_ris_ue: f64,
    pub noise_power: f64,
    /// Users are placed uniformly in `[x_min, x_max, y_min, y_max]` (east, north; m).
    pub user_region: [f64; 4],
    pub wavelength: f64,
    /// Surface-to-user steering is computed from this point instead of the
    /// actual surface position, so only the distances follow the UAV.
    pub steering_origin: Option<[f64; 3]>,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            sats: 2,
            antennas_per_sat: 4,
            ris_cols: 4,
            ris_rows: 4,
            users: 3,
            direct_gain: 0.3,
            sat_ris_gain: 1.0,
            ris_ue_gain: 3.0,
            rician_direct: 10.0,
            rician_sat_ris: 30.0,
            rician_ris_ue: 30.0,
            noise_power: 0.3,
            user_region: [55.0, 105.0, -25.0, 25.0],
            wavelength: 0.01,
            steering_origin: Some([0.0, 0.0, 100.0]),
        }
    }
}

/// One synthetic slot: fixed link directions, moving surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub params: SyntheticParams,
    pub users: Vec<Vector3<f64>>,
    pub ris_array: ArrayGeometry,
    /// Unit-modulus direct-link phases per user.
    direct_phase: Vec<DVector<C64>>,
    /// Unit-modulus satellite-to-surface phases, `M_r x N_t S`.
    sat_ris_phase: DMatrix<C64>,
}

fn unit_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, rng.random::<f64>() * TAU)
}

impl SyntheticScene {
    pub fn generate(params: SyntheticParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = params.sats * params.antennas_per_sat;
        let ris_array = ArrayGeometry::half_wavelength(params.ris_cols, params.ris_rows, params.wavelength);
        let mr = ris_array.len();
        let users = (0..params.users)
            .map(|_| {
                let [x0, x1, y0, y1] = params.user_region;
                let x = x0 + rng.random::<f64>() * (x1 - x0);
                let y = y0 + rng.random::<f64>() * (y1 - y0);
                Vector3::new(x, y, 0.0)
            })
            .collect();
        let direct_phase = (0..params.users).map(|_| DVector::from_fn(n, |_, _| unit_phase(&mut rng))).collect();
        // Each satellite illuminates the surface as a plane wave: rank one per block.
        let mut sat_ris_phase = DMatrix::zeros(mr, n);
        for s in 0..params.sats {
            let rx = DVector::from_fn(mr, |_, _| unit_phase(&mut rng));
            let tx = DVector::from_fn(params.antennas_per_sat, |_, _| unit_phase(&mut rng));
            sat_ris_phase
                .columns_range_mut(s * params.antennas_per_sat..(s + 1) * params.antennas_per_sat)
                .copy_from(&(&rx * tx.adjoint()));
        }
        Self { params, users, ris_array, direct_phase, sat_ris_phase }
    }

    /// Replaces the user positions (e.g. for mobility or hand-placed layouts).
    pub fn with_users(mut self, users: Vec<Vector3<f64>>) -> Self {
        assert_eq!(users.len(), self.params.users, "user count is fixed by the scene");
        self.users = users;
        self
    }

    pub fn csi_at(&self, uav: &Vector3<f64>) -> Result<StatisticalCsi, ChannelError> {
        let p = &self.params;
        let n = p.sats * p.antennas_per_sat;
        let mr = self.ris_array.len();
        let los = |kappa: f64| (kappa / (kappa + 1.0)).sqrt();
        let scatter = |kappa: f64| (1.0 / (kappa + 1.0)).sqrt();
        let direct_mean = self.direct_phase.iter().map(|h| h * C64::from(p.direct_gain * los(p.rician_direct))).collect();
        let direct_nlos = vec![DVector::from_element(n, p.direct_gain * scatter(p.rician_direct)); p.users];
        let sat_ris_mean = &self.sat_ris_phase * C64::from(p.sat_ris_gain * los(p.rician_sat_ris));
        let g_scatter = p.sat_ris_gain * scatter(p.rician_sat_ris);

        let mut ris_ue_mean = Vec::with_capacity(p.users);
        let mut ris_ue_fading = Vec::with_capacity(p.users);
        let mut ris_ue_distance = Vec::with_capacity(p.users);
        let mut cascade_nlos = Vec::with_capacity(p.users);
        for ue in &self.users {
            let d = (ue - uav).norm();
            if d < 1.0 {
                return Err(ChannelError::InvalidParams(format!("surface within {d:.3} m of a user")));
            }
            let rel = ue - self.params.steering_origin.map_or(*uav, Vector3::from);
            let angles = LinkAngles {
                azimuth: rel.x.atan2(rel.y),
                elevation: rel.z.abs().atan2(rel.x.hypot(rel.y)),
            };
            // Unit-modulus entries: the steering vector scaled back by sqrt(M_r).
            let steer = upa_response(&self.ris_array, &angles, p.wavelength) * C64::from((mr as f64).sqrt());
            let f = p.ris_ue_gain / d;
            ris_ue_mean.push(steer * C64::from(f * los(p.rician_ris_ue)));
            ris_ue_fading.push(f);
            ris_ue_distance.push(d);
            cascade_nlos.push(DVector::from_element(n, f * (mr as f64).sqrt() * g_scatter));
        }
        Ok(StatisticalCsi {
            antennas_per_sat: p.antennas_per_sat,
            num_sats: p.sats,
            direct_mean,
            ris_ue_mean,
            sat_ris_mean,
            cascade_nlos,
            direct_nlos,
            ris_ue_fading,
            ris_ue_rician: vec![p.rician_ris_ue; p.users],
            sat_ris_nlos: DVector::from_element(n, g_scatter),
            ris_ue_distance,
            noise_power: vec![p.noise_power; p.users],
        })
    }
}

/// A frame over a synthetic scene with optionally moving users.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub scene: SyntheticScene,
    pub slots: usize,
    pub slot_duration: f64,
    pub budgets: Vec<f64>,
    /// Per-user velocity (m/s); empty for static users.
    pub user_velocity: Vec<Vector3<f64>>,
}

impl SyntheticFrame {
    pub fn new(scene: SyntheticScene, slots: usize, slot_duration: f64) -> Self {
        let budgets = vec![1.0; scene.params.sats];
        Self { scene, slots, slot_duration, budgets, user_velocity: Vec::new() }
    }
}

impl FrameModel for SyntheticFrame {
    type Slot = SyntheticScene;

    fn slots(&self) -> usize {
        self.slots
    }

    fn slot(&self, n: usize) -> Result<SyntheticScene, ChannelError> {
        if self.user_velocity.is_empty() {
            return Ok(self.scene.clone());
        }
        let t = n as f64 * self.slot_duration;
        let users = self.scene.users.iter().zip(&self.user_velocity).map(|(u, v)| u + v * t).collect();
        Ok(self.scene.clone().with_users(users))
    }

    fn budgets(&self) -> Vec<f64> {
        self.budgets.clone()
    }

    fn ris_elements(&self) -> usize {
        self.scene.ris_array.len()
    }
}
