//! Alternating optimization of beamforming, surface phases and UAV position
//! within a slot, and the frame loop that carries the solution across slots.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{design_beamforming, mrt_beamformer, DesignSettings, DesignStatus};
use crate::channel::{build_statistical_csi, ChannelError, LinkBudgetParams, LinkScene, RainDraws, StatisticalCsi};
use crate::phase::design_phase;
use crate::rate::{approx_min_rate, effective_mean, rate_report, BeamformerSet, PhaseConfig, RateReport};
use crate::synthetic::SyntheticScene;
use crate::trajectory::{design_trajectory_step, slot_energy, StepGeometry, UavModel};
use crate::C64;

/// Rebuilds slot statistics for a surface position (east-north-up, m).
pub trait CsiBuilder {
    fn csi_at(&self, uav: &Vector3<f64>) -> Result<StatisticalCsi, ChannelError>;
    fn users(&self) -> Vec<Vector3<f64>>;
}

/// A physical slot: geometry, link budget and frozen rain draws.
#[derive(Debug, Clone)]
pub struct PhysicalSlot {
    pub scene: LinkScene,
    pub params: LinkBudgetParams,
    pub rain: RainDraws,
}

impl CsiBuilder for PhysicalSlot {
    fn csi_at(&self, uav: &Vector3<f64>) -> Result<StatisticalCsi, ChannelError> {
        build_statistical_csi(&self.scene, &self.params, uav, &self.rain)
    }

    fn users(&self) -> Vec<Vector3<f64>> {
        self.scene.ues.clone()
    }
}

impl CsiBuilder for SyntheticScene {
    fn csi_at(&self, uav: &Vector3<f64>) -> Result<StatisticalCsi, ChannelError> {
        SyntheticScene::csi_at(self, uav)
    }

    fn users(&self) -> Vec<Vector3<f64>> {
        self.users.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FullAo,
    DelayedUpdate,
    FixedUav,
    RandomRis,
    NoRis,
    TwoStageStub,
}

impl Mode {
    pub const ALL: [Mode; 6] =
        [Mode::FullAo, Mode::DelayedUpdate, Mode::FixedUav, Mode::RandomRis, Mode::NoRis, Mode::TwoStageStub];

    pub fn name(self) -> &'static str {
        match self {
            Mode::FullAo => "full_ao",
            Mode::DelayedUpdate => "delayed_update",
            Mode::FixedUav => "fixed_uav",
            Mode::RandomRis => "random_ris",
            Mode::NoRis => "no_ris",
            Mode::TwoStageStub => "two_stage_stub",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    fn designs_phases(self) -> bool {
        matches!(self, Mode::FullAo | Mode::DelayedUpdate | Mode::FixedUav)
    }

    fn moves_uav(self) -> bool {
        matches!(self, Mode::FullAo | Mode::DelayedUpdate | Mode::RandomRis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoSettings {
    pub design: DesignSettings,
    /// Stop when an outer iteration gains no more than this (bits/s/Hz).
    pub threshold: f64,
    pub max_outer: usize,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self { design: DesignSettings::default(), threshold: 1e-3, max_outer: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Beamforming,
    Phase,
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub iteration: usize,
    pub block: Block,
    pub status: DesignStatus,
    pub accepted: bool,
    pub before: f64,
    pub after: f64,
    pub t_max: f64,
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotInit {
    pub beams: Option<BeamformerSet>,
    pub phases: PhaseConfig,
    /// End of the previous slot.
    pub position: Vector3<f64>,
}

impl SlotInit {
    /// Hover point above the charging station with zero phases.
    pub fn initial(elements: usize, model: &UavModel) -> Self {
        Self { beams: None, phases: PhaseConfig::zeros(elements), position: Vector3::new(0.0, 0.0, model.altitude) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotSolution {
    pub beams: BeamformerSet,
    pub phases: PhaseConfig,
    pub position: Vector3<f64>,
    /// Objective before the first and after every outer iteration.
    pub t_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub blocks: Vec<BlockRecord>,
    pub csi: StatisticalCsi,
}

impl SlotSolution {
    pub fn rate(&self) -> f64 {
        *self.t_trace.last().expect("trace starts with the initial objective")
    }
}

fn starting_beams(csi: &StatisticalCsi, phases: &PhaseConfig, budgets: &[f64], prior: Option<&BeamformerSet>) -> BeamformerSet {
    let mrt = mrt_beamformer(csi, phases, budgets);
    match prior {
        Some(p) if p.power_excess(budgets) <= 1e-6 && p.beams.len() == mrt.beams.len() => {
            if approx_min_rate(csi, p, phases).0 >= approx_min_rate(csi, &mrt, phases).0 {
                p.clone()
            } else {
                mrt
            }
        }
        _ => mrt,
    }
}

/// Runs the block updates of one slot until the gain per outer iteration
/// drops to the threshold.
///
/// `fixed_phases` pins the phases (used by the random-surface arm).
#[allow(clippy::too_many_arguments)]
pub fn optimize_slot<B: CsiBuilder + ?Sized>(
    builder: &B,
    budgets: &[f64],
    init: &SlotInit,
    mode: Mode,
    settings: &AoSettings,
    uav: &UavModel,
    consumed: f64,
    fixed_phases: Option<&PhaseConfig>,
) -> Result<SlotSolution, ChannelError> {
    let strip = |c: StatisticalCsi| if mode == Mode::NoRis { c.without_ris() } else { c };
    let mut position = init.position;
    let mut csi = strip(builder.csi_at(&position)?);
    if budgets.len() != csi.num_sats {
        return Err(ChannelError::Dimension(format!("{} budgets for {} satellites", budgets.len(), csi.num_sats)));
    }
    let mut phases = fixed_phases.cloned().unwrap_or_else(|| init.phases.clone());
    if mode == Mode::TwoStageStub {
        return Ok(two_stage(csi, budgets, position, phases));
    }
    let mut beams = starting_beams(&csi, &phases, budgets, init.beams.as_ref());
    let mut f = approx_min_rate(&csi, &beams, &phases).0;
    let mut t_trace = vec![f];
    let mut blocks = Vec::new();
    let users = builder.users();
    let mut converged = false;
    let mut iterations = 0;

    for l in 1..=settings.max_outer {
        iterations = l;
        let start = f;

        let bf = design_beamforming(&csi, &phases, budgets, f, &beams, &settings.design);
        let accepted = bf.status == DesignStatus::Improved && bf.achieved >= f;
        blocks.push(BlockRecord {
            iteration: l,
            block: Block::Beamforming,
            status: bf.status,
            accepted,
            before: f,
            after: if accepted { bf.achieved } else { f },
            t_max: bf.t_max,
            probes: bf.trace.steps.len(),
        });
        if accepted {
            beams = bf.beams;
            f = bf.achieved;
        }

        if mode.designs_phases() {
            let ph = design_phase(&csi, &beams, &phases, f, &settings.design);
            let accepted = ph.status == DesignStatus::Improved && ph.achieved >= f;
            blocks.push(BlockRecord {
                iteration: l,
                block: Block::Phase,
                status: ph.status,
                accepted,
                before: f,
                after: if accepted { ph.achieved } else { f },
                t_max: ph.t_max,
                probes: ph.trace.steps.len(),
            });
            if accepted {
                phases = ph.phases;
                f = ph.achieved;
            }
        }

        if mode.moves_uav() {
            let geom = StepGeometry { anchor: init.position, previous: position, users: users.clone(), consumed };
            let tr = design_trajectory_step(&csi, &beams, &phases, &geom, f, &settings.design, uav);
            let before = f;
            let mut accepted = false;
            if tr.status == DesignStatus::Improved && tr.position != position {
                let rebuilt = strip(builder.csi_at(&tr.position)?);
                let rate = approx_min_rate(&rebuilt, &beams, &phases).0;
                if rate >= f {
                    accepted = true;
                    position = tr.position;
                    csi = rebuilt;
                    f = rate;
                }
            }
            blocks.push(BlockRecord {
                iteration: l,
                block: Block::Trajectory,
                status: tr.status,
                accepted,
                before,
                after: f,
                t_max: tr.t_max,
                probes: tr.trace.steps.len(),
            });
        }

        t_trace.push(f);
        if f - start <= settings.threshold {
            converged = true;
            break;
        }
    }

    Ok(SlotSolution { beams, phases, position, t_trace, iterations, converged, blocks, csi })
}

/// Greedy decorrelating phases followed by regularized zero forcing.
fn two_stage(csi: StatisticalCsi, budgets: &[f64], position: Vector3<f64>, start: PhaseConfig) -> SlotSolution {
    let k_count = csi.num_ues();
    let levels = 8;
    let mut phases = start;
    let correlation = |p: &PhaseConfig| {
        let c = p.coefficients();
        let e: Vec<DVector<C64>> = (0..k_count).map(|k| effective_mean(&csi, &c, k)).collect();
        let mut total = 0.0;
        for i in 0..k_count {
            for j in i + 1..k_count {
                total += e[i].dotc(&e[j]).norm() / (e[i].norm() * e[j].norm()).max(1e-300);
            }
        }
        total
    };
    for _ in 0..2 {
        for m in 0..phases.theta.len() {
            let mut best = (correlation(&phases), phases.theta[m]);
            for q in 0..levels {
                let mut trial = phases.clone();
                trial.theta[m] = std::f64::consts::TAU * q as f64 / levels as f64;
                let c = correlation(&trial);
                if c < best.0 {
                    best = (c, trial.theta[m]);
                }
            }
            phases.theta[m] = best.1;
        }
    }
    let c = phases.coefficients();
    let n = csi.dim();
    let h = DMatrix::from_fn(k_count, n, |k, i| effective_mean(&csi, &c, k)[i].conj());
    let total: f64 = budgets.iter().sum();
    let reg = k_count as f64 * csi.noise_power[0] / total;
    let gram = &h * h.adjoint() + DMatrix::identity(k_count, k_count) * C64::from(reg);
    let w = h.adjoint() * gram.try_inverse().unwrap_or_else(|| DMatrix::identity(k_count, k_count));
    let mut beams = BeamformerSet {
        beams: (0..k_count).map(|k| w.column(k).into_owned()).collect(),
        antennas_per_sat: csi.antennas_per_sat,
    };
    let worst = (0..csi.num_sats).map(|s| beams.sat_power(s) / budgets[s]).fold(0.0, f64::max);
    if worst > 0.0 {
        let scale = C64::from((1.0 / worst).sqrt() * (1.0 - 1e-12));
        beams.beams.iter_mut().for_each(|v| *v *= scale);
    }
    let f = approx_min_rate(&csi, &beams, &phases).0;
    SlotSolution {
        beams,
        phases,
        position,
        t_trace: vec![f],
        iterations: 0,
        converged: true,
        blocks: Vec::new(),
        csi,
    }
}

/// Source of per-slot channel builders for a frame.
pub trait FrameModel {
    type Slot: CsiBuilder;
    fn slots(&self) -> usize;
    fn slot(&self, n: usize) -> Result<Self::Slot, ChannelError>;
    fn budgets(&self) -> Vec<f64>;
    fn ris_elements(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot: usize,
    pub solution: Option<SlotSolution>,
    /// Rates of the configuration actually served in this slot.
    pub report: Option<RateReport>,
    pub position: Vector3<f64>,
    /// Energy consumed up to the end of this slot.
    pub energy: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub mode: Mode,
    pub slots: Vec<SlotOutcome>,
}

impl FrameResult {
    pub fn min_rates(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.report.as_ref().map_or(f64::NAN, |r| r.min_rate)).collect()
    }

    pub fn trajectory(&self) -> Vec<Vector3<f64>> {
        self.slots.iter().map(|s| s.position).collect()
    }
}

/// Runs every slot in order, warm-starting each from the previous one.
///
/// Random surface phases are drawn from `seed` per slot, so arms that share a
/// frame model and seed see identical channels.
pub fn run_frame<M: FrameModel>(model: &M, mode: Mode, settings: &AoSettings, uav: &UavModel, seed: u64) -> FrameResult {
    let budgets = model.budgets();
    let mut init = SlotInit::initial(model.ris_elements(), uav);
    let mut energy = 0.0;
    let mut previous: Option<SlotSolution> = None;
    let mut slots = Vec::with_capacity(model.slots());
    for n in 0..model.slots() {
        let random = (mode == Mode::RandomRis).then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + n as u64);
            PhaseConfig::random(&mut rng, model.ris_elements())
        });
        let outcome = model.slot(n).and_then(|builder| {
            let sol = optimize_slot(&builder, &budgets, &init, mode, settings, uav, energy, random.as_ref())?;
            let served = match (&previous, mode) {
                (Some(prev), Mode::DelayedUpdate) => {
                    let stale = builder.csi_at(&prev.position)?;
                    rate_report(&stale, &prev.beams, &prev.phases, None)
                }
                _ => rate_report(&sol.csi, &sol.beams, &sol.phases, None),
            };
            Ok((sol, served))
        });
        match outcome {
            Ok((sol, served)) => {
                energy += slot_energy(&init.position, &sol.position, uav);
                init = SlotInit { beams: Some(sol.beams.clone()), phases: sol.phases.clone(), position: sol.position };
                slots.push(SlotOutcome {
                    slot: n,
                    position: sol.position,
                    report: Some(served),
                    solution: Some(sol.clone()),
                    energy,
                    error: None,
                });
                previous = Some(sol);
            }
            Err(e) => {
                energy += slot_energy(&init.position, &init.position, uav);
                slots.push(SlotOutcome {
                    slot: n,
                    solution: None,
                    report: None,
                    position: init.position,
                    energy,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    FrameResult { mode, slots }
}
