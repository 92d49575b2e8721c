//! Scenario configuration, experiment presets and CSV/JSON output.
//!
//! Configs are flat dotted-key TOML (`constellation.num_planes = 36`). Angles
//! are in degrees, powers in dBm, frequencies in GHz/MHz; conversion to the
//! SI values used by the library happens in the `*_spec`/`*_params` methods.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ao::{run_frame, AoSettings, FrameModel, FrameResult, Mode, PhysicalSlot};
use crate::beamforming::{mrt_beamformer, DesignSettings};
use crate::channel::{ArrayGeometry, ChannelError, LinkBudgetParams, LinkScene, RainDraws, RainModel};
use crate::conic::SolverSettings;
use crate::geometry::{visible_group, Constellation, ConstellationSpec, GroundRegion, GroupStrategy};
use crate::rate::{mc_ergodic_rates, rate_report, PhaseConfig};
use crate::synthetic::{SyntheticFrame, SyntheticParams, SyntheticScene};
use crate::trajectory::UavModel;

const RAIN_STREAM: u64 = 1 << 32;
const LAYOUT_STREAM: u64 = 1 << 33;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("manifest records hash {recorded} but its config hashes to {computed}")]
    HashMismatch { recorded: String, computed: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. }
            | HarnessError::Validation { .. }
            | HarnessError::UnknownPreset(_)
            | HarnessError::HashMismatch { .. } => 1,
            HarnessError::Io { .. } | HarnessError::Runtime(_) => 2,
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Validation { field: field.to_string(), message: message.into() }
}

fn io_error(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Constellation geometry and the full link budget.
    Physical,
    /// Free-gain scene from [`crate::synthetic`].
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RainRedraw {
    PerSlot,
    PerFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSection {
    pub id: String,
    pub kind: SceneKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSection {
    pub altitude_km: f64,
    pub num_planes: usize,
    pub sats_per_plane: usize,
    pub inclination_deg: f64,
    pub phase_factor: usize,
    pub min_elevation_deg: f64,
    /// Seconds after the alignment instant at which slot 0 starts.
    pub epoch_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSection {
    pub strategy: GroupStrategy,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSection {
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub g_over_t_db: f64,
    pub noise_temperature_k: f64,
    pub boltzmann: f64,
    pub rain_mean_db: f64,
    pub rain_var_db: f64,
    pub rain_model: RainModel,
    pub sat_gain_dbi: f64,
    pub three_db_deg: f64,
    pub rician_direct: f64,
    pub rician_sat_ris: f64,
    pub rician_ris_ue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArraySection {
    pub sat_cols: usize,
    pub sat_rows: usize,
    pub ris_cols: usize,
    pub ris_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeSection {
    pub count: usize,
    /// `[x_min, x_max, y_min, y_max]` in the region frame (m).
    pub region_m: [f64; 4],
    /// Explicit start positions; empty means uniform in `region_m`.
    pub positions_m: Vec<[f64; 2]>,
    /// Common ground velocity (east, north; m/s).
    pub velocity_mps: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSection {
    pub duration_s: f64,
    pub slots: usize,
    pub slot_s: f64,
    pub rain_redraw: RainRedraw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub bisection_accuracy: f64,
    pub max_inner: usize,
    pub rank_tol: f64,
    pub conic_tol: f64,
    pub conic_max_iterations: usize,
    pub ao_threshold: f64,
    pub ao_max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    pub mode: Mode,
    pub mc_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSection {
    pub direct_gain: f64,
    pub sat_ris_gain: f64,
    pub ris_ue_gain: f64,
    pub rician_direct: f64,
    pub rician_sat_ris: f64,
    pub rician_ris_ue: f64,
    pub noise_power: f64,
    pub wavelength_m: f64,
    pub power_budget: f64,
    /// Surface steering taken from the hover point instead of the UAV.
    pub frozen_steering: bool,
}

/// Every tunable of a run, in config units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub constellation: ConstellationSection,
    pub region_center_ecef_m: [f64; 3],
    pub group: GroupSection,
    pub link: LinkSection,
    pub array: ArraySection,
    pub sat_power_dbm: f64,
    pub ue: UeSection,
    pub uav: UavModel,
    pub frame: FrameSection,
    pub solver: SolverSection,
    pub run: RunSection,
    pub synthetic: SyntheticSection,
}

fn encode<T: Serialize>(v: &T) -> toml::Value {
    toml::Value::try_from(v).expect("config values are plain data")
}

fn decode<T: DeserializeOwned>(key: &str, value: &toml::Value) -> Result<T, HarnessError> {
    value.clone().try_into().map_err(|e: toml::de::Error| invalid(key, e.message().to_string()))
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+;)*) => {
        impl ScenarioConfig {
            /// Accepted keys, in serialization order.
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            pub fn set(&mut self, key: &str, value: &toml::Value) -> Result<(), HarnessError> {
                match key {
                    $($key => self.$($field).+ = decode(key, value)?,)*
                    _ => return Err(invalid(key, "unknown key")),
                }
                Ok(())
            }

            pub fn to_pairs(&self) -> Vec<(&'static str, toml::Value)> {
                vec![$(($key, encode(&self.$($field).+))),*]
            }
        }
    };
}

config_keys! {
    "scenario.id" => scenario.id;
    "scenario.kind" => scenario.kind;
    "constellation.altitude_km" => constellation.altitude_km;
    "constellation.num_planes" => constellation.num_planes;
    "constellation.sats_per_plane" => constellation.sats_per_plane;
    "constellation.inclination_deg" => constellation.inclination_deg;
    "constellation.phase_factor" => constellation.phase_factor;
    "constellation.min_elevation_deg" => constellation.min_elevation_deg;
    "constellation.epoch_s" => constellation.epoch_s;
    "region.center_ecef_m" => region_center_ecef_m;
    "group.strategy" => group.strategy;
    "group.size" => group.size;
    "link.carrier_ghz" => link.carrier_ghz;
    "link.bandwidth_mhz" => link.bandwidth_mhz;
    "link.g_over_t_db" => link.g_over_t_db;
    "link.noise_temperature_k" => link.noise_temperature_k;
    "link.boltzmann" => link.boltzmann;
    "link.rain_mean_db" => link.rain_mean_db;
    "link.rain_var_db" => link.rain_var_db;
    "link.rain_model" => link.rain_model;
    "link.sat_gain_dbi" => link.sat_gain_dbi;
    "link.three_db_deg" => link.three_db_deg;
    "link.rician_direct" => link.rician_direct;
    "link.rician_sat_ris" => link.rician_sat_ris;
    "link.rician_ris_ue" => link.rician_ris_ue;
    "array.sat_cols" => array.sat_cols;
    "array.sat_rows" => array.sat_rows;
    "array.ris_cols" => array.ris_cols;
    "array.ris_rows" => array.ris_rows;
    "power.sat_dbm" => sat_power_dbm;
    "ue.count" => ue.count;
    "ue.region_m" => ue.region_m;
    "ue.positions_m" => ue.positions_m;
    "ue.velocity_mps" => ue.velocity_mps;
    "uav.altitude_m" => uav.altitude;
    "uav.max_speed_mps" => uav.max_speed;
    "uav.max_range_m" => uav.max_range;
    "uav.blade_power_w" => uav.blade_power;
    "uav.induced_power_w" => uav.induced_power;
    "uav.induced_velocity_mps" => uav.induced_velocity;
    "uav.rotor_speed_rps" => uav.rotor_speed;
    "uav.rotor_radius_m" => uav.rotor_radius;
    "uav.fuselage_drag" => uav.fuselage_drag;
    "uav.rotor_solidity" => uav.rotor_solidity;
    "uav.disc_area_m2" => uav.disc_area;
    "uav.air_density" => uav.air_density;
    "uav.energy_budget_j" => uav.energy_budget;
    "frame.duration_s" => frame.duration_s;
    "frame.slots" => frame.slots;
    "frame.slot_s" => frame.slot_s;
    "frame.rain_redraw" => frame.rain_redraw;
    "solver.bisection_accuracy" => solver.bisection_accuracy;
    "solver.max_inner" => solver.max_inner;
    "solver.rank_tol" => solver.rank_tol;
    "solver.conic_tol" => solver.conic_tol;
    "solver.conic_max_iterations" => solver.conic_max_iterations;
    "solver.ao_threshold" => solver.ao_threshold;
    "solver.ao_max_iterations" => solver.ao_max_iterations;
    "run.seed" => run.seed;
    "run.mode" => run.mode;
    "run.mc_samples" => run.mc_samples;
    "synthetic.direct_gain" => synthetic.direct_gain;
    "synthetic.sat_ris_gain" => synthetic.sat_ris_gain;
    "synthetic.ris_ue_gain" => synthetic.ris_ue_gain;
    "synthetic.rician_direct" => synthetic.rician_direct;
    "synthetic.rician_sat_ris" => synthetic.rician_sat_ris;
    "synthetic.rician_ris_ue" => synthetic.rician_ris_ue;
    "synthetic.noise_power" => synthetic.noise_power;
    "synthetic.wavelength_m" => synthetic.wavelength_m;
    "synthetic.power_budget" => synthetic.power_budget;
    "synthetic.frozen_steering" => synthetic.frozen_steering;
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            _ => out.push((key, v.clone())),
        }
    }
}

/// Parses config text into dotted key/value pairs (tables are flattened).
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, toml::Value)>, HarnessError> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| HarnessError::Parse { path: origin.to_string(), message: e.to_string() })?;
    let mut out = Vec::new();
    flatten("", &table, &mut out);
    Ok(out)
}

impl ScenarioConfig {
    /// Full-size scenario: 36x22 shell, S = 3, 4x4 satellite arrays, 10x10
    /// surface, K = 6, 60 one-second slots.
    pub fn reference() -> Self {
        let synthetic = SyntheticParams::default();
        Self {
            scenario: ScenarioSection { id: "reference".into(), kind: SceneKind::Physical },
            constellation: ConstellationSection {
                altitude_km: 550.0,
                num_planes: 36,
                sats_per_plane: 22,
                inclination_deg: 53.0,
                phase_factor: 1,
                min_elevation_deg: 10.0,
                epoch_s: 0.0,
            },
            region_center_ecef_m: [-2.6610e6, 4.5050e6, -1.7249e6],
            group: GroupSection { strategy: GroupStrategy::ScenarioGroup, size: 3 },
            link: LinkSection {
                carrier_ghz: 30.0,
                bandwidth_mhz: 25.0,
                g_over_t_db: 34.0,
                noise_temperature_k: 300.0,
                boltzmann: 1.38e-23,
                rain_mean_db: -2.6,
                rain_var_db: 1.63,
                rain_model: RainModel::LognormalDb,
                sat_gain_dbi: 20.0,
                three_db_deg: 0.4,
                rician_direct: 30.0,
                rician_sat_ris: 30.0,
                rician_ris_ue: 10.0,
            },
            array: ArraySection { sat_cols: 4, sat_rows: 4, ris_cols: 10, ris_rows: 10 },
            sat_power_dbm: 40.0,
            ue: UeSection {
                count: 6,
                region_m: [0.0, 300.0, 0.0, 300.0],
                positions_m: Vec::new(),
                velocity_mps: [0.0, 0.0],
            },
            uav: UavModel::default(),
            frame: FrameSection { duration_s: 60.0, slots: 60, slot_s: 1.0, rain_redraw: RainRedraw::PerSlot },
            solver: SolverSection {
                bisection_accuracy: 1e-3,
                max_inner: 15,
                rank_tol: 1e-6,
                conic_tol: 1e-8,
                conic_max_iterations: 200,
                ao_threshold: 1e-3,
                ao_max_iterations: 10,
            },
            run: RunSection { seed: 1, mode: Mode::FullAo, mc_samples: 10_000 },
            synthetic: SyntheticSection {
                direct_gain: synthetic.direct_gain,
                sat_ris_gain: synthetic.sat_ris_gain,
                ris_ue_gain: synthetic.ris_ue_gain,
                rician_direct: synthetic.rician_direct,
                rician_sat_ris: synthetic.rician_sat_ris,
                rician_ris_ue: synthetic.rician_ris_ue,
                noise_power: synthetic.noise_power,
                wavelength_m: synthetic.wavelength,
                power_budget: 1.0,
                frozen_steering: true,
            },
        }
    }

    /// Desk-scale scenario: synthetic scene, S = 2, 2x2 arrays, 4x4 surface,
    /// K = 3, 10 slots.
    pub fn desk() -> Self {
        let mut cfg = Self::reference();
        cfg.scenario = ScenarioSection { id: "desk".into(), kind: SceneKind::Synthetic };
        cfg.group.size = 2;
        cfg.array = ArraySection { sat_cols: 2, sat_rows: 2, ris_cols: 4, ris_rows: 4 };
        cfg.ue.count = 3;
        cfg.ue.region_m = SyntheticParams::default().user_region;
        cfg.frame = FrameSection { duration_s: 10.0, slots: 10, slot_s: 1.0, rain_redraw: RainRedraw::PerSlot };
        cfg
    }

    pub fn from_pairs(mut base: Self, pairs: &[(String, toml::Value)]) -> Result<Self, HarnessError> {
        for (k, v) in pairs {
            base.set(k, v)?;
        }
        base.validate()?;
        Ok(base)
    }

    pub fn from_toml_str(text: &str, base: Self) -> Result<Self, HarnessError> {
        Self::from_pairs(base, &parse_pairs(text, "<string>")?)
    }

    /// One `key = value` line per key, in [`Self::KEYS`] order.
    pub fn to_toml_string(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`Self::to_toml_string`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn antennas_per_sat(&self) -> usize {
        self.array.sat_cols * self.array.sat_rows
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive, got {v}")))
            }
        };
        let nonzero = |field: &str, v: usize| if v > 0 { Ok(()) } else { Err(invalid(field, "must be at least 1")) };
        if self.scenario.id.is_empty() {
            return Err(invalid("scenario.id", "must not be empty"));
        }
        if self.scenario.kind == SceneKind::Physical {
            self.constellation_spec().validate().map_err(|e| invalid("constellation", e.to_string()))?;
            self.link_params().validate().map_err(|e| invalid("link", e.to_string()))?;
            GroundRegion::from_ecef(Vector3::from(self.region_center_ecef_m))
                .map_err(|e| invalid("region.center_ecef_m", e.to_string()))?;
        }
        nonzero("group.size", self.group.size)?;
        nonzero("array.sat_cols", self.array.sat_cols)?;
        nonzero("array.sat_rows", self.array.sat_rows)?;
        nonzero("array.ris_cols", self.array.ris_cols)?;
        nonzero("array.ris_rows", self.array.ris_rows)?;
        nonzero("ue.count", self.ue.count)?;
        let streams = self.antennas_per_sat() * self.group.size;
        if self.ue.count > streams {
            return Err(invalid(
                "ue.count",
                format!("{} users exceed the {streams} satellite antennas of the group", self.ue.count),
            ));
        }
        let [x0, x1, y0, y1] = self.ue.region_m;
        if !(x0 < x1 && y0 < y1) {
            return Err(invalid("ue.region_m", "expected [x_min, x_max, y_min, y_max] with min < max"));
        }
        if !self.ue.positions_m.is_empty() && self.ue.positions_m.len() != self.ue.count {
            return Err(invalid("ue.positions_m", "length must equal ue.count"));
        }
        positive("uav.altitude_m", self.uav.altitude)?;
        positive("uav.max_speed_mps", self.uav.max_speed)?;
        positive("uav.max_range_m", self.uav.max_range)?;
        positive("uav.energy_budget_j", self.uav.energy_budget)?;
        if self.uav.altitude >= self.uav.max_range {
            return Err(invalid("uav.max_range_m", "must exceed the flight altitude"));
        }
        nonzero("frame.slots", self.frame.slots)?;
        positive("frame.slot_s", self.frame.slot_s)?;
        positive("frame.duration_s", self.frame.duration_s)?;
        let span = self.frame.slot_s * self.frame.slots as f64;
        if (span - self.frame.duration_s).abs() > 1e-9 * self.frame.duration_s {
            return Err(invalid("frame.slot_s", format!("slot_s * slots = {span} differs from duration_s")));
        }
        positive("solver.bisection_accuracy", self.solver.bisection_accuracy)?;
        positive("solver.rank_tol", self.solver.rank_tol)?;
        positive("solver.conic_tol", self.solver.conic_tol)?;
        positive("solver.ao_threshold", self.solver.ao_threshold)?;
        nonzero("solver.max_inner", self.solver.max_inner)?;
        nonzero("solver.conic_max_iterations", self.solver.conic_max_iterations)?;
        nonzero("solver.ao_max_iterations", self.solver.ao_max_iterations)?;
        if self.run.mc_samples < 2 {
            return Err(invalid("run.mc_samples", "need at least 2 samples"));
        }
        if self.scenario.kind == SceneKind::Synthetic {
            positive("synthetic.sat_ris_gain", self.synthetic.sat_ris_gain)?;
            positive("synthetic.ris_ue_gain", self.synthetic.ris_ue_gain)?;
            positive("synthetic.noise_power", self.synthetic.noise_power)?;
            positive("synthetic.wavelength_m", self.synthetic.wavelength_m)?;
            positive("synthetic.power_budget", self.synthetic.power_budget)?;
            if !(self.synthetic.direct_gain >= 0.0) {
                return Err(invalid("synthetic.direct_gain", "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn constellation_spec(&self) -> ConstellationSpec {
        let c = &self.constellation;
        ConstellationSpec {
            orbital_altitude: c.altitude_km * 1e3,
            num_planes: c.num_planes,
            sats_per_plane: c.sats_per_plane,
            inclination: c.inclination_deg.to_radians(),
            phase_factor: c.phase_factor,
            min_elevation: c.min_elevation_deg.to_radians(),
        }
    }

    pub fn link_params(&self) -> LinkBudgetParams {
        let l = &self.link;
        LinkBudgetParams {
            carrier_frequency: l.carrier_ghz * 1e9,
            bandwidth: l.bandwidth_mhz * 1e6,
            ue_gain: 10f64.powf((l.g_over_t_db + 10.0 * l.noise_temperature_k.log10()) / 10.0),
            boltzmann: l.boltzmann,
            noise_temperature: l.noise_temperature_k,
            rain_mean_db: l.rain_mean_db,
            rain_std_db: l.rain_var_db.sqrt(),
            rain_model: l.rain_model,
            sat_gain_max: 10f64.powf(l.sat_gain_dbi / 10.0),
            three_db_angle: l.three_db_deg.to_radians(),
            rician_direct: l.rician_direct,
            rician_sat_ris: l.rician_sat_ris,
            rician_ris_ue: l.rician_ris_ue,
        }
    }

    pub fn uav_model(&self) -> UavModel {
        UavModel { slot: self.frame.slot_s, ..self.uav }
    }

    pub fn ao_settings(&self) -> AoSettings {
        let s = &self.solver;
        AoSettings {
            design: DesignSettings {
                accuracy: s.bisection_accuracy,
                max_inner: s.max_inner,
                rank_tol: s.rank_tol,
                solver: SolverSettings { tolerance: s.conic_tol, max_iterations: s.conic_max_iterations },
            },
            threshold: s.ao_threshold,
            max_outer: s.ao_max_iterations,
        }
    }

    pub fn synthetic_params(&self) -> SyntheticParams {
        let s = &self.synthetic;
        SyntheticParams {
            sats: self.group.size,
            antennas_per_sat: self.antennas_per_sat(),
            ris_cols: self.array.ris_cols,
            ris_rows: self.array.ris_rows,
            users: self.ue.count,
            direct_gain: s.direct_gain,
            sat_ris_gain: s.sat_ris_gain,
            ris_ue_gain: s.ris_ue_gain,
            rician_direct: s.rician_direct,
            rician_sat_ris: s.rician_sat_ris,
            rician_ris_ue: s.rician_ris_ue,
            noise_power: s.noise_power,
            user_region: self.ue.region_m,
            wavelength: s.wavelength_m,
            steering_origin: s.frozen_steering.then_some([0.0, 0.0, self.uav.altitude]),
        }
    }

    /// Per-satellite transmit budgets in the units of the scene.
    pub fn budgets(&self) -> Vec<f64> {
        let p = match self.scenario.kind {
            SceneKind::Physical => 10f64.powf(self.sat_power_dbm / 10.0) * 1e-3,
            SceneKind::Synthetic => self.synthetic.power_budget,
        };
        vec![p; self.group.size]
    }

    fn explicit_users(&self) -> Option<Vec<Vector3<f64>>> {
        (!self.ue.positions_m.is_empty())
            .then(|| self.ue.positions_m.iter().map(|p| Vector3::new(p[0], p[1], 0.0)).collect())
    }

    fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.ue.velocity_mps[0], self.ue.velocity_mps[1], 0.0)
    }
}

/// Reads a config file on top of `base` (the reference scenario when loading plain files).
pub fn load_scenario(path: &Path, base: ScenarioConfig) -> Result<ScenarioConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let pairs = parse_pairs(&text, &path.display().to_string())?;
    ScenarioConfig::from_pairs(base, &pairs)
}

/// A frame over constellation geometry with the serving group fixed at the
/// first slot.
#[derive(Debug, Clone)]
pub struct PhysicalFrame {
    pub constellation: Constellation,
    pub region: GroundRegion,
    /// Plane-major indices of the serving satellites.
    pub members: Vec<usize>,
    pub sat_array: ArrayGeometry,
    pub ris_array: ArrayGeometry,
    pub params: LinkBudgetParams,
    pub users: Vec<Vector3<f64>>,
    pub user_velocity: Vector3<f64>,
    pub epoch: f64,
    pub slots: usize,
    pub slot_duration: f64,
    pub budgets: Vec<f64>,
    pub seed: u64,
    pub rain_redraw: RainRedraw,
}

impl PhysicalFrame {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        let spec = cfg.constellation_spec();
        let region = GroundRegion::from_ecef(Vector3::from(cfg.region_center_ecef_m))
            .map_err(|e| invalid("region.center_ecef_m", e.to_string()))?;
        let constellation = Constellation::aligned_over(spec, &region);
        let epoch = cfg.constellation.epoch_s;
        let states = constellation.states_at(epoch);
        let group = visible_group(&states, &region.center, spec.min_elevation, cfg.group.strategy, cfg.group.size)
            .map_err(|e| HarnessError::Runtime(format!("group selection: {e}")))?;
        let streams = cfg.antennas_per_sat() * group.members.len();
        if cfg.ue.count > streams {
            return Err(invalid(
                "ue.count",
                format!("{} users exceed the {streams} antennas of the selected group", cfg.ue.count),
            ));
        }
        let params = cfg.link_params();
        let lambda = params.wavelength();
        let users = cfg.explicit_users().unwrap_or_else(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
            rng.set_stream(LAYOUT_STREAM);
            let [x0, x1, y0, y1] = cfg.ue.region_m;
            (0..cfg.ue.count)
                .map(|_| {
                    let x = x0 + rng.random::<f64>() * (x1 - x0);
                    let y = y0 + rng.random::<f64>() * (y1 - y0);
                    Vector3::new(x, y, 0.0)
                })
                .collect()
        });
        Ok(Self {
            constellation,
            region,
            budgets: vec![cfg.budgets()[0]; group.members.len()],
            members: group.members,
            sat_array: ArrayGeometry::half_wavelength(cfg.array.sat_cols, cfg.array.sat_rows, lambda),
            ris_array: ArrayGeometry::half_wavelength(cfg.array.ris_cols, cfg.array.ris_rows, lambda),
            params,
            users,
            user_velocity: cfg.velocity(),
            epoch,
            slots: cfg.frame.slots,
            slot_duration: cfg.frame.slot_s,
            seed: cfg.run.seed,
            rain_redraw: cfg.frame.rain_redraw,
        })
    }
}

impl FrameModel for PhysicalFrame {
    type Slot = PhysicalSlot;

    fn slots(&self) -> usize {
        self.slots
    }

    fn slot(&self, n: usize) -> Result<PhysicalSlot, ChannelError> {
        let t = n as f64 * self.slot_duration;
        let states = self.constellation.states_at(self.epoch + t);
        let satellites = self.members.iter().map(|&i| states[i]).collect::<Vec<_>>();
        let ues: Vec<Vector3<f64>> = self.users.iter().map(|u| u + self.user_velocity * t).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(match self.rain_redraw {
            RainRedraw::PerSlot => RAIN_STREAM + n as u64,
            RainRedraw::PerFrame => RAIN_STREAM,
        });
        let rain = RainDraws::draw(&mut rng, &self.params, satellites.len(), ues.len());
        let scene = LinkScene {
            satellites,
            beam_center: self.region.center,
            ues,
            region: self.region,
            sat_array: self.sat_array,
            ris_array: self.ris_array,
        };
        Ok(PhysicalSlot { scene, params: self.params, rain })
    }

    fn budgets(&self) -> Vec<f64> {
        self.budgets.clone()
    }

    fn ris_elements(&self) -> usize {
        self.ris_array.len()
    }
}

/// The frame model a config describes.
#[derive(Debug, Clone)]
pub enum Scenario {
    Physical(PhysicalFrame),
    Synthetic(SyntheticFrame),
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        match cfg.scenario.kind {
            SceneKind::Physical => PhysicalFrame::from_config(cfg).map(Scenario::Physical),
            SceneKind::Synthetic => {
                let mut scene = SyntheticScene::generate(cfg.synthetic_params(), cfg.run.seed);
                if let Some(users) = cfg.explicit_users() {
                    scene = scene.with_users(users);
                }
                let mut frame = SyntheticFrame::new(scene, cfg.frame.slots, cfg.frame.slot_s);
                frame.budgets = cfg.budgets();
                if cfg.ue.velocity_mps != [0.0, 0.0] {
                    frame.user_velocity = vec![cfg.velocity(); cfg.ue.count];
                }
                Ok(Scenario::Synthetic(frame))
            }
        }
    }

    pub fn run(&self, mode: Mode, settings: &AoSettings, uav: &UavModel, seed: u64) -> FrameResult {
        match self {
            Scenario::Physical(f) => run_frame(f, mode, settings, uav, seed),
            Scenario::Synthetic(f) => run_frame(f, mode, settings, uav, seed),
        }
    }
}

/// Runs one frame of `cfg` in `mode`.
pub fn run_scenario(cfg: &ScenarioConfig, mode: Mode) -> Result<FrameResult, HarnessError> {
    let scenario = Scenario::from_config(cfg)?;
    Ok(scenario.run(mode, &cfg.ao_settings(), &cfg.uav_model(), cfg.run.seed))
}

pub const PRESETS: [&str; 7] = [
    "convergence",
    "schemes_vs_time",
    "trajectory_plot",
    "speed_altitude_sweep",
    "ris_elements_sweep",
    "connection_strategies",
    "constellation_density",
];

/// One point of a sweep: its label, its config and the arms it runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub key: String,
    pub config: ScenarioConfig,
    pub modes: Vec<Mode>,
}

fn point(key: impl Into<String>, config: ScenarioConfig, modes: Vec<Mode>) -> SweepPoint {
    SweepPoint { key: key.into(), config, modes }
}

/// Expands `preset` over `base`; `"single"` runs `base` in its own mode.
pub fn preset_points(preset: &str, base: &ScenarioConfig) -> Result<Vec<SweepPoint>, HarnessError> {
    let full = vec![Mode::FullAo];
    let physical = |mut c: ScenarioConfig| {
        c.scenario.kind = SceneKind::Physical;
        c
    };
    let points = match preset {
        "single" => vec![point(base.run.mode.name(), base.clone(), vec![base.run.mode])],
        "convergence" => [2, 3, 4]
            .into_iter()
            .map(|s| {
                let mut c = base.clone();
                c.group.size = s;
                c.frame.slots = 1;
                c.frame.duration_s = c.frame.slot_s;
                point(format!("S={s}"), c, full.clone())
            })
            .collect(),
        "schemes_vs_time" => Mode::ALL.into_iter().map(|m| point(m.name(), base.clone(), vec![m])).collect(),
        "trajectory_plot" => [5.0, 10.0]
            .into_iter()
            .map(|v| {
                let mut c = base.clone();
                c.ue.count = 2;
                c.ue.positions_m = vec![[0.0, 300.0], [0.0, 280.0]];
                c.ue.velocity_mps = [5.0, 0.0];
                c.uav.max_speed = v;
                point(format!("vmax={v}"), c, vec![Mode::FullAo, Mode::RandomRis])
            })
            .collect(),
        "speed_altitude_sweep" => {
            let mut pts = Vec::new();
            for h in [50.0, 100.0, 150.0] {
                for v in [1.0, 5.0, 10.0] {
                    let mut c = base.clone();
                    c.uav.altitude = h;
                    c.uav.max_speed = v;
                    pts.push(point(format!("altitude={h};vmax={v}"), c, full.clone()));
                }
            }
            pts
        }
        "ris_elements_sweep" => [(2, 2), (4, 2), (4, 4), (8, 4)]
            .into_iter()
            .map(|(cols, rows)| {
                let mut c = base.clone();
                c.array.ris_cols = cols;
                c.array.ris_rows = rows;
                point(format!("M_r={}", cols * rows), c, full.clone())
            })
            .collect(),
        "connection_strategies" => [GroupStrategy::ScenarioGroup, GroupStrategy::MaxElevation, GroupStrategy::MaxAccessTime]
            .into_iter()
            .map(|s| {
                let mut c = physical(base.clone());
                c.group.strategy = s;
                let name = encode(&s).as_str().unwrap_or_default().to_string();
                point(format!("strategy={name}"), c, full.clone())
            })
            .collect(),
        "constellation_density" => [11, 22, 33]
            .into_iter()
            .map(|n| {
                let mut c = physical(base.clone());
                c.constellation.sats_per_plane = n;
                point(format!("sats_per_plane={n}"), c, full.clone())
            })
            .collect(),
        other => return Err(HarnessError::UnknownPreset(other.to_string())),
    };
    for p in &points {
        p.config.validate().map_err(|e| match e {
            HarnessError::Validation { field, message } => {
                invalid(&field, format!("{message} (sweep point {})", p.key))
            }
            e => e,
        })?;
    }
    Ok(points)
}

/// One CSV cell group; `slot` is empty for per-point aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario_id: String,
    pub slot: Option<usize>,
    pub key: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// Some slots failed; their rows are missing.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub key: String,
    pub status: PointStatus,
    pub message: Option<String>,
    pub wall_seconds: f64,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub preset: String,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    /// Base config in flat TOML; hashes to `config_hash`.
    pub config: String,
    pub points: Vec<PointReport>,
}

impl ExperimentReport {
    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.points.iter().flat_map(|p| p.rows.iter())
    }
}

pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

fn frame_rows(scenario_id: &str, key: &str, frame: &FrameResult, seed: u64, rows: &mut Vec<Row>) -> Vec<String> {
    let mut row = |slot: Option<usize>, metric: String, value: f64| {
        if value.is_finite() {
            rows.push(Row { scenario_id: scenario_id.to_string(), slot, key: key.to_string(), metric, value, seed });
        }
    };
    let mut failures = Vec::new();
    for s in &frame.slots {
        if let Some(e) = &s.error {
            failures.push(format!("slot {}: {e}", s.slot));
            continue;
        }
        if scenario_id == "convergence" {
            if let Some(sol) = &s.solution {
                for (i, t) in sol.t_trace.iter().enumerate() {
                    row(Some(s.slot), format!("t;iteration={i}"), *t);
                }
                row(Some(s.slot), "converged".into(), if sol.converged { 1.0 } else { 0.0 });
            }
        }
        if let Some(r) = &s.report {
            row(Some(s.slot), "min_rate".into(), r.min_rate);
            for (k, rate) in r.approx.iter().enumerate() {
                row(Some(s.slot), format!("rate_ue{k}"), *rate);
            }
        }
        row(Some(s.slot), "x".into(), s.position.x);
        row(Some(s.slot), "y".into(), s.position.y);
        row(Some(s.slot), "energy_j".into(), s.energy);
    }
    let served: Vec<f64> = frame.min_rates().into_iter().filter(|r| r.is_finite()).collect();
    if !served.is_empty() {
        row(None, "mean_min_rate".into(), served.iter().sum::<f64>() / served.len() as f64);
    }
    failures
}

fn run_point(preset: &str, p: &SweepPoint) -> PointReport {
    let start = Instant::now();
    let seed = p.config.run.seed;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let outcome = Scenario::from_config(&p.config).map(|scenario| {
        let settings = p.config.ao_settings();
        let uav = p.config.uav_model();
        for &mode in &p.modes {
            let frame = scenario.run(mode, &settings, &uav, seed);
            let key = if p.modes.len() > 1 { format!("{};mode={}", p.key, mode.name()) } else { p.key.clone() };
            failures.extend(frame_rows(preset, &key, &frame, seed, &mut rows));
        }
    });
    let (status, message) = match outcome {
        Err(e) => (PointStatus::Failed, Some(e.to_string())),
        Ok(()) if failures.is_empty() => (PointStatus::Ok, None),
        Ok(()) => (PointStatus::Partial, Some(failures.join("; "))),
    };
    PointReport { key: p.key.clone(), status, message, wall_seconds: start.elapsed().as_secs_f64(), rows }
}

/// Runs every point of `preset` over `base`, up to `jobs` at a time
/// (0 uses every core). Results are ordered as the points.
pub fn run_experiment(preset: &str, base: &ScenarioConfig, jobs: usize) -> Result<ExperimentReport, HarnessError> {
    let points = preset_points(preset, base)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Runtime(format!("thread pool: {e}")))?;
    let reports = pool.install(|| points.par_iter().map(|p| run_point(preset, p)).collect());
    Ok(ExperimentReport {
        preset: preset.to_string(),
        seed: base.run.seed,
        config_hash: base.hash(),
        version: version(),
        config: base.to_toml_string(),
        points: reports,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

pub fn csv_bytes<'a>(rows: impl IntoIterator<Item = &'a Row>) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["scenario_id", "slot", "key", "metric", "value", "seed"])
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| HarnessError::Runtime(e.to_string()))
}

/// Writes `<preset>.csv` under `out_dir`.
pub fn emit_csv(report: &ExperimentReport, out_dir: &Path) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let path = out_dir.join(format!("{}.csv", report.preset));
    write_atomic(&path, &csv_bytes(report.rows())?)?;
    Ok(path)
}

/// Writes `manifest.json` (the full report) under `out_dir`.
pub fn write_manifest(report: &ExperimentReport, out_dir: &Path) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_vec_pretty(report).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    write_atomic(&path, &json)?;
    Ok(path)
}

/// Loads a manifest and checks that its config still hashes to the recorded value.
pub fn read_manifest(path: &Path) -> Result<ExperimentReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let report: ExperimentReport = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Parse { path: path.display().to_string(), message: e.to_string() })?;
    let computed = hex::encode(Sha256::digest(report.config.as_bytes()));
    if computed != report.config_hash {
        return Err(HarnessError::HashMismatch { recorded: report.config_hash.clone(), computed });
    }
    Ok(report)
}

/// Closed-form against Monte-Carlo rate for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McCheckRow {
    pub ue: usize,
    pub approx: f64,
    pub mc_mean: f64,
    pub mc_std_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares the closed-form rate with a Monte-Carlo estimate on slot 0 of
/// `cfg`, with matched-filter beams and seeded random phases.
pub fn mc_check(cfg: &ScenarioConfig) -> Result<Vec<McCheckRow>, HarnessError> {
    let scenario = Scenario::from_config(cfg)?;
    let uav = Vector3::new(0.0, 0.0, cfg.uav.altitude);
    let csi = match &scenario {
        Scenario::Physical(f) => f.slot(0).and_then(|s| crate::ao::CsiBuilder::csi_at(&s, &uav)),
        Scenario::Synthetic(f) => f.scene.csi_at(&uav),
    }
    .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let phases = PhaseConfig::random(&mut rng, csi.ris_elements());
    let beams = mrt_beamformer(&csi, &phases, &cfg.budgets());
    let approx = rate_report(&csi, &beams, &phases, None).approx;
    let mc = mc_ergodic_rates(&csi, &beams, &phases, cfg.run.mc_samples, cfg.run.seed);
    Ok(approx
        .iter()
        .zip(&mc)
        .enumerate()
        .map(|(ue, (a, m))| {
            let tolerance = (3.0 * m.std_error).max(0.1);
            McCheckRow {
                ue,
                approx: *a,
                mc_mean: m.mean,
                mc_std_error: m.std_error,
                tolerance,
                pass: (a - m.mean).abs() <= tolerance,
            }
        })
        .collect())
}
