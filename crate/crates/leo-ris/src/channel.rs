//! Link models for the direct satellite-user link, the satellite-surface link
//! and the surface-user link, their mean/scatter decomposition, and sampling
//! of instantaneous realizations.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::geometry::{
    link_angles, GeometryError, GroundRegion, LinkAngles, LocalFrame, SatelliteState, SPEED_OF_LIGHT,
};
use crate::rate::PhaseConfig;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(#[from] GeometryError),
    #[error("invalid link budget: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Uniform planar array; `cols` elements along the frame x axis, `rows` along y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub cols: usize,
    pub rows: usize,
    pub spacing_x: f64,
    pub spacing_y: f64,
}

impl ArrayGeometry {
    pub fn half_wavelength(cols: usize, rows: usize, wavelength: f64) -> Self {
        Self { cols, rows, spacing_x: wavelength / 2.0, spacing_y: wavelength / 2.0 }
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `a_x(az, el) ⊗ a_y(el)`; element `ix * rows + iy`.
pub fn upa_response(geom: &ArrayGeometry, angles: &LinkAngles, wavelength: f64) -> DVector<C64> {
    let k = TAU / wavelength;
    let step_x = -k * geom.spacing_x * angles.azimuth.sin() * angles.elevation.cos();
    let step_y = -k * geom.spacing_y * angles.elevation.cos();
    let scale = 1.0 / (geom.len() as f64).sqrt();
    DVector::from_fn(geom.len(), |i, _| {
        let (ix, iy) = (i / geom.rows, i % geom.rows);
        C64::from_polar(scale, step_x * ix as f64 + step_y * iy as f64)
    })
}

/// Spot-beam gain `b_max (J1(u)/2u + 36 J3(u)/u)^3`, `u = 2.071 sin(eps)/sin(eps_3dB)`.
pub fn antenna_gain(off_axis: f64, three_db: f64, b_max: f64) -> f64 {
    let u = 2.071 * off_axis.sin() / three_db.sin();
    let base = if u.abs() < 1e-6 {
        // J1(u)/2u -> 1/4 - u^2/32, J3(u)/u -> u^2/48
        0.25 - u * u / 32.0 + 36.0 * u * u / 48.0
    } else {
        libm::j1(u) / (2.0 * u) + 36.0 * libm::jn(3, u) / u
    };
    b_max * base.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RainModel {
    /// `ln(xi_dB)` Gaussian.
    #[default]
    LognormalDb,
    /// `xi_dB` Gaussian.
    NormalDb,
}

/// Rain coefficient `sqrt(xi) e^{-j rho}` with `ln(xi_dB) ~ N(mean_db, std_db^2)`.
pub fn rain_attenuation<R: Rng + ?Sized>(rng: &mut R, mean_db: f64, std_db: f64) -> C64 {
    rain_draw(RainModel::LognormalDb, rng, mean_db, std_db)
}

pub fn rain_draw<R: Rng + ?Sized>(model: RainModel, rng: &mut R, mean_db: f64, std_db: f64) -> C64 {
    let z: f64 = if std_db > 0.0 {
        Normal::new(mean_db, std_db).expect("finite rain parameters").sample(rng)
    } else {
        mean_db
    };
    let xi_db = match model {
        RainModel::LognormalDb => z.exp(),
        RainModel::NormalDb => z,
    };
    let phase = rng.random::<f64>() * TAU;
    C64::from_polar(10f64.powf(xi_db / 20.0), -phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetParams {
    pub carrier_frequency: f64,
    pub bandwidth: f64,
    pub ue_gain: f64,
    pub boltzmann: f64,
    pub noise_temperature: f64,
    pub rain_mean_db: f64,
    pub rain_std_db: f64,
    pub rain_model: RainModel,
    pub sat_gain_max: f64,
    pub three_db_angle: f64,
    pub rician_direct: f64,
    pub rician_sat_ris: f64,
    pub rician_ris_ue: f64,
}

impl LinkBudgetParams {
    /// 30 GHz, 25 MHz, G/T = 34 dB/K at 300 K, 20 dBi, rain N(-2.6, 1.63), 0.4 degree beams.
    pub fn reference() -> Self {
        let temperature = 300.0;
        Self {
            carrier_frequency: 30e9,
            bandwidth: 25e6,
            ue_gain: 10f64.powf((34.0 + 10.0 * f64::log10(temperature)) / 10.0),
            boltzmann: 1.38e-23,
            noise_temperature: temperature,
            rain_mean_db: -2.6,
            rain_std_db: 1.63f64.sqrt(),
            rain_model: RainModel::LognormalDb,
            sat_gain_max: 100.0,
            three_db_angle: 0.4f64.to_radians(),
            rician_direct: 30.0,
            rician_sat_ris: 30.0,
            rician_ris_ue: 10.0,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn noise_power(&self) -> f64 {
        self.boltzmann * self.bandwidth * self.noise_temperature
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let positive = [
            ("carrier_frequency", self.carrier_frequency),
            ("bandwidth", self.bandwidth),
            ("ue_gain", self.ue_gain),
            ("boltzmann", self.boltzmann),
            ("noise_temperature", self.noise_temperature),
            ("sat_gain_max", self.sat_gain_max),
            ("rician_direct", self.rician_direct),
            ("rician_sat_ris", self.rician_sat_ris),
            ("rician_ris_ue", self.rician_ris_ue),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ChannelError::InvalidParams(format!("{name} must be positive")));
            }
        }
        if !(self.rain_std_db >= 0.0) {
            return Err(ChannelError::InvalidParams("rain_std_db must be non-negative".into()));
        }
        if !(self.three_db_angle > 0.0 && self.three_db_angle < PI / 2.0) {
            return Err(ChannelError::InvalidParams("three_db_angle must lie in (0, pi/2)".into()));
        }
        Ok(())
    }
}

/// Per-slot rain coefficients: `direct[s][k]` and `sat_ris[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RainDraws {
    pub direct: Vec<Vec<C64>>,
    pub sat_ris: Vec<C64>,
}

impl RainDraws {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, params: &LinkBudgetParams, sats: usize, ues: usize) -> Self {
        let mut one = || rain_draw(params.rain_model, rng, params.rain_mean_db, params.rain_std_db);
        let direct = (0..sats).map(|_| (0..ues).map(|_| one()).collect()).collect();
        let sat_ris = (0..sats).map(|_| one()).collect();
        Self { direct, sat_ris }
    }

    /// Clear sky: every coefficient is 1.
    pub fn clear(sats: usize, ues: usize) -> Self {
        Self { direct: vec![vec![C64::new(1.0, 0.0); ues]; sats], sat_ris: vec![C64::new(1.0, 0.0); sats] }
    }
}

/// Geometry of one slot: the serving group, the beam aim point and the users.
#[derive(Debug, Clone)]
pub struct LinkScene {
    pub satellites: Vec<SatelliteState>,
    /// ECEF point every satellite beam is steered at.
    pub beam_center: Vector3<f64>,
    /// User positions in the region's east-north-up frame.
    pub ues: Vec<Vector3<f64>>,
    pub region: GroundRegion,
    pub sat_array: ArrayGeometry,
    pub ris_array: ArrayGeometry,
}

/// Deterministic channel statistics of one slot.
///
/// Vectors over the stacked satellite antennas have length `antennas_per_sat * num_sats`,
/// satellite-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalCsi {
    pub antennas_per_sat: usize,
    pub num_sats: usize,
    /// Direct-link mean per user.
    pub direct_mean: Vec<DVector<C64>>,
    /// Surface-to-user mean per user (length `M_r`).
    pub ris_ue_mean: Vec<DVector<C64>>,
    /// Satellite-to-surface mean, `M_r x N_t S`.
    pub sat_ris_mean: DMatrix<C64>,
    /// Scatter scale of the cascaded link per user.
    pub cascade_nlos: Vec<DVector<f64>>,
    /// Scatter scale of the direct link per user.
    pub direct_nlos: Vec<DVector<f64>>,
    /// Surface-to-user large-scale amplitude per user.
    pub ris_ue_fading: Vec<f64>,
    pub ris_ue_rician: Vec<f64>,
    /// Scatter scale of each satellite-to-surface column.
    pub sat_ris_nlos: DVector<f64>,
    pub ris_ue_distance: Vec<f64>,
    pub noise_power: Vec<f64>,
}

impl StatisticalCsi {
    pub fn num_ues(&self) -> usize {
        self.direct_mean.len()
    }

    pub fn dim(&self) -> usize {
        self.antennas_per_sat * self.num_sats
    }

    pub fn ris_elements(&self) -> usize {
        self.sat_ris_mean.nrows()
    }

    /// `F_k^2 / (nu_k + 1)`.
    pub fn cascade_mean_scatter(&self, k: usize) -> f64 {
        self.ris_ue_fading[k].powi(2) / (self.ris_ue_rician[k] + 1.0)
    }

    /// Same statistics with the surface removed.
    pub fn without_ris(&self) -> Self {
        let mut out = self.clone();
        out.sat_ris_mean.fill(C64::new(0.0, 0.0));
        out.sat_ris_nlos.fill(0.0);
        for k in 0..out.num_ues() {
            out.ris_ue_mean[k].fill(C64::new(0.0, 0.0));
            out.cascade_nlos[k].fill(0.0);
            out.ris_ue_fading[k] = 0.0;
        }
        out
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let n = self.dim();
        let m = self.ris_elements();
        let k = self.num_ues();
        let dims_ok = self.sat_ris_mean.ncols() == n
            && self.sat_ris_nlos.len() == n
            && self.direct_mean.iter().all(|v| v.len() == n)
            && self.direct_nlos.iter().all(|v| v.len() == n)
            && self.cascade_nlos.iter().all(|v| v.len() == n)
            && self.ris_ue_mean.iter().all(|v| v.len() == m)
            && [self.ris_ue_mean.len(), self.cascade_nlos.len(), self.direct_nlos.len()]
                .iter()
                .all(|&l| l == k)
            && [self.ris_ue_fading.len(), self.ris_ue_rician.len(), self.noise_power.len(), self.ris_ue_distance.len()]
                .iter()
                .all(|&l| l == k);
        if !dims_ok {
            return Err(ChannelError::Dimension("inconsistent statistical CSI".into()));
        }
        let finite = self.sat_ris_mean.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.direct_mean.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite());
        let scales_ok = self
            .cascade_nlos
            .iter()
            .chain(self.direct_nlos.iter())
            .flatten()
            .chain(self.sat_ris_nlos.iter())
            .all(|&x| x >= 0.0);
        if !finite || !scales_ok || self.noise_power.iter().any(|&s| !(s > 0.0)) {
            return Err(ChannelError::InvalidParams("non-finite or negative CSI entries".into()));
        }
        Ok(())
    }
}

fn off_axis(sat: &Vector3<f64>, aim: &Vector3<f64>, target: &Vector3<f64>) -> f64 {
    let b = (aim - sat).normalize();
    let d = (target - sat).normalize();
    b.cross(&d).norm().atan2(b.dot(&d))
}

/// Assembles the slot statistics for a surface at `uav` (east-north-up, m).
pub fn build_statistical_csi(
    scene: &LinkScene,
    params: &LinkBudgetParams,
    uav: &Vector3<f64>,
    rain: &RainDraws,
) -> Result<StatisticalCsi, ChannelError> {
    let lambda = params.wavelength();
    let nt = scene.sat_array.len();
    let s_count = scene.satellites.len();
    let k_count = scene.ues.len();
    let mr = scene.ris_array.len();
    let n = nt * s_count;
    if rain.direct.len() != s_count
        || rain.sat_ris.len() != s_count
        || rain.direct.iter().any(|r| r.len() != k_count)
    {
        return Err(ChannelError::Dimension("rain draws do not match the scene".into()));
    }
    let gain = |eps: f64| antenna_gain(eps, params.three_db_angle, params.sat_gain_max).max(0.0);
    let ris_frame = scene.region.frame();
    let uav_ecef = scene.region.enu_to_ecef(uav);
    let ue_ecef: Vec<Vector3<f64>> = scene.ues.iter().map(|u| scene.region.enu_to_ecef(u)).collect();
    let kd = params.rician_direct;
    let kr = params.rician_sat_ris;
    let nu = params.rician_ris_ue;

    let mut direct_mean = vec![DVector::zeros(n); k_count];
    let mut direct_nlos = vec![DVector::zeros(n); k_count];
    let mut sat_ris_mean = DMatrix::zeros(mr, n);
    let mut sat_ris_nlos = DVector::zeros(n);
    let mut sat_ris_amp = vec![0.0; s_count];

    for (s, sat) in scene.satellites.iter().enumerate() {
        let frame = LocalFrame::satellite(sat);
        let block = s * nt..(s + 1) * nt;
        for k in 0..k_count {
            let d = (ue_ecef[k] - sat.position).norm();
            let angles = link_angles(&sat.position, &ue_ecef[k], &frame)?;
            let los = upa_response(&scene.sat_array, &angles, lambda);
            let eps = off_axis(&sat.position, &scene.beam_center, &ue_ecef[k]);
            let large = rain.direct[s][k]
                * (lambda / (4.0 * PI * d) * (params.ue_gain * gain(eps)).sqrt());
            direct_mean[k].rows_range_mut(block.clone()).copy_from(&(los * (large * (kd / (kd + 1.0)).sqrt())));
            direct_nlos[k].rows_range_mut(block.clone()).fill(large.norm() / (kd + 1.0).sqrt());
        }
        let d_r = (uav_ecef - sat.position).norm();
        let departure = link_angles(&sat.position, &uav_ecef, &frame)?;
        let arrival = link_angles(&uav_ecef, &sat.position, &ris_frame)?;
        let tx = upa_response(&scene.sat_array, &departure, lambda);
        let rx = upa_response(&scene.ris_array, &arrival, lambda);
        let eps = off_axis(&sat.position, &scene.beam_center, &uav_ecef);
        let large = rain.sat_ris[s] * (lambda / (4.0 * PI * d_r) * gain(eps).sqrt());
        let los = &rx * tx.adjoint();
        sat_ris_mean.columns_range_mut(block.clone()).copy_from(&(los * (large * (kr / (kr + 1.0)).sqrt())));
        sat_ris_nlos.rows_range_mut(block).fill(large.norm() / (kr + 1.0).sqrt());
        sat_ris_amp[s] = large.norm();
    }

    let mut ris_ue_mean = Vec::with_capacity(k_count);
    let mut ris_ue_fading = Vec::with_capacity(k_count);
    let mut ris_ue_distance = Vec::with_capacity(k_count);
    let mut cascade_nlos = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let d = (uav - scene.ues[k]).norm();
        let angles = link_angles(&uav_ecef, &ue_ecef[k], &ris_frame)?;
        let f = lambda * params.ue_gain.sqrt() / (4.0 * PI * d);
        let los = upa_response(&scene.ris_array, &angles, lambda);
        ris_ue_mean.push(los * C64::from(f * (nu / (nu + 1.0)).sqrt()));
        ris_ue_fading.push(f);
        ris_ue_distance.push(d);
        let mut a = DVector::zeros(n);
        for s in 0..s_count {
            a.rows_range_mut(s * nt..(s + 1) * nt)
                .fill(f * (mr as f64 * sat_ris_amp[s].powi(2) / (kr + 1.0)).sqrt());
        }
        cascade_nlos.push(a);
    }

    Ok(StatisticalCsi {
        antennas_per_sat: nt,
        num_sats: s_count,
        direct_mean,
        ris_ue_mean,
        sat_ris_mean,
        cascade_nlos,
        direct_nlos,
        ris_ue_fading,
        ris_ue_rician: vec![nu; k_count],
        sat_ris_nlos,
        ris_ue_distance,
        noise_power: vec![params.noise_power(); k_count],
    })
}

/// One fading realization.
#[derive(Debug, Clone, PartialEq)]
pub struct InstantChannel {
    /// Equivalent channel `f_k = h_k + G^H Θ^H g_k` per user.
    pub equivalent: Vec<DVector<C64>>,
    pub direct: Vec<DVector<C64>>,
    pub sat_ris: DMatrix<C64>,
    pub ris_ue: Vec<DVector<C64>>,
    pub phases: PhaseConfig,
}

impl InstantChannel {
    pub fn compose(
        direct: &DVector<C64>,
        sat_ris: &DMatrix<C64>,
        ris_ue: &DVector<C64>,
        coeffs: &DVector<C64>,
    ) -> DVector<C64> {
        // Θ^H g = conj(e^{jθ}) ⊙ g
        let weighted = DVector::from_fn(ris_ue.len(), |m, _| coeffs[m].conj() * ris_ue[m]);
        direct + sat_ris.ad_mul(&weighted)
    }

    /// Rebuilds the equivalent channels from the stored components.
    pub fn recompose(&self) -> Vec<DVector<C64>> {
        let c = self.phases.coefficients();
        self.direct
            .iter()
            .zip(&self.ris_ue)
            .map(|(h, g)| Self::compose(h, &self.sat_ris, g, &c))
            .collect()
    }
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_channel<R: Rng + ?Sized>(csi: &StatisticalCsi, phases: &PhaseConfig, rng: &mut R) -> InstantChannel {
    let n = csi.dim();
    let m = csi.ris_elements();
    let sat_ris = DMatrix::from_fn(m, n, |r, c| {
        csi.sat_ris_mean[(r, c)] + complex_gaussian(rng) * csi.sat_ris_nlos[c]
    });
    let mut direct = Vec::with_capacity(csi.num_ues());
    let mut ris_ue = Vec::with_capacity(csi.num_ues());
    for k in 0..csi.num_ues() {
        direct.push(DVector::from_fn(n, |i, _| {
            csi.direct_mean[k][i] + complex_gaussian(rng) * csi.direct_nlos[k][i]
        }));
        let scale = csi.ris_ue_fading[k] / (csi.ris_ue_rician[k] + 1.0).sqrt();
        ris_ue.push(DVector::from_fn(m, |i, _| csi.ris_ue_mean[k][i] + complex_gaussian(rng) * scale));
    }
    let coeffs = phases.coefficients();
    let equivalent = direct
        .iter()
        .zip(&ris_ue)
        .map(|(h, g)| InstantChannel::compose(h, &sat_ris, g, &coeffs))
        .collect();
    InstantChannel { equivalent, direct, sat_ris, ris_ue, phases: phases.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_wavelength_endfire_pair() {
        let lambda = 0.01;
        let g = ArrayGeometry { cols: 2, rows: 1, spacing_x: lambda / 2.0, spacing_y: lambda / 2.0 };
        let a = upa_response(&g, &LinkAngles { azimuth: PI / 2.0, elevation: 0.0 }, lambda);
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - C64::new(s, 0.0)).norm() < 1e-12);
        assert!((a[1] - C64::new(-s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn on_axis_gain_is_one_sixty_fourth() {
        assert!((antenna_gain(0.0, 0.01, 64.0) - 1.0).abs() < 1e-12);
        assert!((antenna_gain(1e-9, 0.01, 64.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_rain_is_one_db() {
        let mut rng = rand::rng();
        let r = rain_attenuation(&mut rng, 0.0, 0.0);
        assert!((r.norm() - 10f64.powf(1.0 / 20.0)).abs() < 1e-12);
    }
}
