//! Per-slot UAV position design and the rotary-wing energy model.
//!
//! The rate depends on the UAV position only through `c_k = 1/‖q - q_k‖`
//! (angles frozen at the previous position). Each user gets a lower and an
//! upper bracket on `c_k`, both kept convex, and the step is a second-order
//! cone feasibility problem at a fixed rate target.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::beamforming::{bisect, BisectionStep, BisectionTrace, DesignSettings, DesignStatus, TRIVIAL_RATE};
use crate::channel::StatisticalCsi;
use crate::rate::{BeamformerSet, PhaseConfig};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavModel {
    /// Flight altitude (m).
    pub altitude: f64,
    pub max_speed: f64,
    /// Flight radius from the charging station (m, 3D).
    pub max_range: f64,
    /// Slot duration (s).
    pub slot: f64,
    pub blade_power: f64,
    pub induced_power: f64,
    pub induced_velocity: f64,
    pub rotor_speed: f64,
    pub rotor_radius: f64,
    pub fuselage_drag: f64,
    pub rotor_solidity: f64,
    pub disc_area: f64,
    pub air_density: f64,
    pub energy_budget: f64,
}

impl Default for UavModel {
    fn default() -> Self {
        Self {
            altitude: 100.0,
            max_speed: 5.0,
            max_range: 200.0,
            slot: 1.0,
            blade_power: 79.86,
            induced_power: 88.63,
            induced_velocity: 4.03,
            rotor_speed: 300.0,
            rotor_radius: 0.4,
            fuselage_drag: 0.6,
            rotor_solidity: 0.05,
            disc_area: 0.503,
            air_density: 1.225,
            energy_budget: 1e5,
        }
    }
}

impl UavModel {
    /// Largest distance per slot.
    pub fn step_length(&self) -> f64 {
        self.slot * self.max_speed
    }

    /// Upper bound on the energy of one slot at any admissible speed.
    pub fn max_slot_energy(&self) -> f64 {
        let samples = 256;
        let peak = (0..=samples)
            .map(|i| propulsion_power(self.max_speed * i as f64 / samples as f64, self))
            .fold(0.0, f64::max);
        // The induced term is decreasing and the others increasing, so the
        // sampled maximum is within one grid cell of the true one.
        let cell = self.max_speed / samples as f64;
        self.slot * (peak + self.power_slope_bound() * cell)
    }

    fn power_slope_bound(&self) -> f64 {
        let v = self.max_speed;
        6.0 * self.blade_power * v / (self.rotor_speed * self.rotor_radius).powi(2)
            + 1.5 * self.fuselage_drag * self.air_density * self.rotor_solidity * self.disc_area * v * v
    }
}

/// Rotary-wing propulsion power at horizontal speed `v`.
pub fn propulsion_power(v: f64, model: &UavModel) -> f64 {
    let tip = (model.rotor_speed * model.rotor_radius).powi(2);
    let v0 = model.induced_velocity;
    let blade = model.blade_power * (1.0 + 3.0 * v * v / tip);
    let induced = model.induced_power
        * ((1.0 + v.powi(4) / (4.0 * v0.powi(4))).sqrt() - v * v / (2.0 * v0 * v0)).sqrt();
    let parasitic = 0.5 * model.fuselage_drag * model.air_density * model.rotor_solidity * model.disc_area * v.powi(3);
    blade + induced + parasitic
}

/// Whether the UAV at `q` can still fly home at full speed.
pub fn energy_guard(q: &Vector3<f64>, consumed: f64, model: &UavModel) -> bool {
    q.norm() / model.max_speed * propulsion_power(model.max_speed, model) + consumed <= model.energy_budget
}

/// Energy of flying from `from` to `to` in one slot.
pub fn slot_energy(from: &Vector3<f64>, to: &Vector3<f64>, model: &UavModel) -> f64 {
    model.slot * propulsion_power((to - from).norm() / model.slot, model)
}

/// Distance-free coefficients of the received power, indexed `[k][l]`.
///
/// Power from beam `l` at user `k` is `constant + linear c + quadratic c^2` with `c = 1/d_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecastCoefficients {
    pub constant: Vec<Vec<f64>>,
    pub linear: Vec<Vec<f64>>,
    pub quadratic: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
}

impl RecastCoefficients {
    pub fn power(&self, k: usize, l: usize, c: f64) -> f64 {
        self.constant[k][l] + self.linear[k][l] * c + self.quadratic[k][l] * c * c
    }

    fn interference(&self, k: usize, c: f64) -> f64 {
        (0..self.constant.len()).filter(|&l| l != k).map(|l| self.power(k, l, c)).sum()
    }

    /// `S_k/γ - I_k - σ²` at distances `d`, with its scale for relative checks.
    pub fn margin(&self, k: usize, distance: f64, gamma: f64) -> (f64, f64) {
        let c = 1.0 / distance;
        let signal = self.power(k, k, c) / gamma;
        let other = self.interference(k, c) + self.noise[k];
        (signal - other, signal.abs() + other.abs())
    }

    pub fn rate(&self, k: usize, distance: f64) -> f64 {
        let c = 1.0 / distance;
        (1.0 + self.power(k, k, c) / (self.interference(k, c) + self.noise[k])).log2()
    }
}

pub fn recast_coefficients(csi: &StatisticalCsi, beams: &BeamformerSet, phases: &PhaseConfig) -> RecastCoefficients {
    let k_count = csi.num_ues();
    let coeffs = phases.coefficients();
    let projected: Vec<DVector<C64>> = beams.beams.iter().map(|v| &csi.sat_ris_mean * v).collect();
    let mut out = RecastCoefficients {
        constant: vec![vec![0.0; beams.beams.len()]; k_count],
        linear: vec![vec![0.0; beams.beams.len()]; k_count],
        quadratic: vec![vec![0.0; beams.beams.len()]; k_count],
        noise: csi.noise_power.clone(),
    };
    for k in 0..k_count {
        let d = csi.ris_ue_distance[k];
        let g = &csi.ris_ue_mean[k];
        let scatter = d * d * csi.cascade_mean_scatter(k);
        for (l, (v, gv)) in beams.beams.iter().zip(&projected).enumerate() {
            let direct = csi.direct_mean[k].dotc(v);
            let along: C64 = (0..g.len()).map(|m| g[m].conj() * coeffs[m] * gv[m]).sum::<C64>() * d;
            let (r, w) = (&csi.direct_nlos[k], &csi.cascade_nlos[k]);
            let direct_nlos: f64 = v.iter().zip(r.iter()).map(|(x, b)| x.norm_sqr() * b * b).sum();
            let cascade_nlos: f64 = v.iter().zip(w.iter()).map(|(x, a)| x.norm_sqr() * a * a).sum::<f64>() * d * d;
            out.constant[k][l] = direct_nlos + direct.norm_sqr();
            out.linear[k][l] = 2.0 * (along * direct.conj()).re;
            out.quadratic[k][l] = along.norm_sqr() + scatter * gv.norm_squared() + cascade_nlos;
        }
    }
    out
}

/// Geometry of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGeometry {
    /// Position at the end of the previous slot; motion is measured from here.
    pub anchor: Vector3<f64>,
    /// Current iterate, where the distances are linearized.
    pub previous: Vector3<f64>,
    pub users: Vec<Vector3<f64>>,
    /// Energy consumed before this slot.
    pub consumed: f64,
}

impl StepGeometry {
    pub fn distances(&self, q: &Vector3<f64>) -> Vec<f64> {
        self.users.iter().map(|u| (q - u).norm()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub previous: Vector3<f64>,
    pub position: Vector3<f64>,
    /// Lower and upper brackets on `1/d_k`.
    pub c_lower: Vec<f64>,
    pub c_upper: Vec<f64>,
    pub interference_cap: Vec<f64>,
    pub c_previous: Vec<f64>,
    /// Worst exact margin relative to its scale.
    pub exact_margin: f64,
}

/// Bound on the rate over the positions reachable in one step.
///
/// Returns `(used, literal)`: the bound used for bisection and the
/// expression with the `V_max/d` factor, recorded for comparison.
pub fn trajectory_tmax(
    csi: &StatisticalCsi,
    beams: &BeamformerSet,
    phases: &PhaseConfig,
    coeffs: &RecastCoefficients,
    geom: &StepGeometry,
    model: &UavModel,
) -> (f64, f64) {
    let k_count = coeffs.noise.len();
    let mut used = f64::INFINITY;
    let mut literal = f64::INFINITY;
    let c = phases.coefficients();
    for k in 0..k_count {
        let u = &geom.users[k];
        let dxy = Vector2::new(geom.anchor.x - u.x, geom.anchor.y - u.y).norm();
        let d_min = ((dxy - model.step_length()).max(0.0).powi(2) + (model.altitude - u.z).powi(2)).sqrt().max(1e-3);
        let cmax = 1.0 / d_min;
        let signal = coeffs.constant[k][k] + coeffs.linear[k][k].abs() * cmax + coeffs.quadratic[k][k] * cmax * cmax;
        let (a, b, c0): (f64, f64, f64) = (0..k_count).filter(|&l| l != k).fold((0.0, 0.0, 0.0), |acc, l| {
            (acc.0 + coeffs.quadratic[k][l], acc.1 + coeffs.linear[k][l], acc.2 + coeffs.constant[k][l])
        });
        let floor = if b >= 0.0 || a <= 0.0 { c0 } else { c0 - b * b / (4.0 * a) };
        used = used.min((1.0 + signal / (floor.max(0.0) + coeffs.noise[k])).log2());

        let v = &beams.beams[k];
        let g = &csi.ris_ue_mean[k];
        let gv = &csi.sat_ris_mean * v;
        let cascade: C64 = (0..g.len()).map(|m| g[m].conj() * c[m] * gv[m]).sum();
        let ratio = model.max_speed / csi.ris_ue_distance[k];
        let nlos: f64 = v
            .iter()
            .zip(csi.cascade_nlos[k].iter().zip(csi.direct_nlos[k].iter()))
            .map(|(x, (aa, bb))| x.norm_sqr() * (aa * aa + bb * bb))
            .sum();
        let y = (csi.direct_mean[k].dotc(v).norm() + ratio * cascade.norm()).powi(2)
            + csi.cascade_mean_scatter(k) * gv.norm_squared()
            + nlos;
        let j: f64 = (0..k_count)
            .filter(|&l| l != k)
            .map(|l| {
                let vl = &beams.beams[l];
                let gvl = &csi.sat_ris_mean * vl;
                csi.cascade_mean_scatter(k) * gvl.norm_squared()
                    + vl.iter()
                        .zip(csi.cascade_nlos[k].iter().zip(csi.direct_nlos[k].iter()))
                        .map(|(x, (aa, bb))| x.norm_sqr() * (aa * aa + bb * bb))
                        .sum::<f64>()
            })
            .sum();
        literal = literal.min((1.0 + y / (j + coeffs.noise[k])).log2());
    }
    (used, literal)
}

struct ConeBuilder {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

/// One affine row `a·x + c`; the cone constrains `b - A x = a·x + c`.
type Affine = (Vec<(usize, f64)>, f64);

impl ConeBuilder {
    fn new() -> Self {
        Self { rows: Vec::new(), cols: Vec::new(), vals: Vec::new(), b: Vec::new(), cones: Vec::new() }
    }

    fn push_row(&mut self, (terms, constant): Affine) {
        let r = self.b.len();
        for (j, v) in terms {
            if v != 0.0 {
                self.rows.push(r);
                self.cols.push(j);
                self.vals.push(-v);
            }
        }
        self.b.push(constant);
    }

    /// `expr >= 0`.
    fn nonneg(&mut self, expr: Affine) {
        self.push_row(expr);
        self.cones.push(SupportedConeT::NonnegativeConeT(1));
    }

    /// `head >= ‖tail‖`.
    fn soc(&mut self, head: Affine, tail: Vec<Affine>) {
        let dim = tail.len() + 1;
        self.push_row(head);
        tail.into_iter().for_each(|t| self.push_row(t));
        self.cones.push(SupportedConeT::SecondOrderConeT(dim));
    }

    /// `x^2 <= y` as `‖(2x, y - 1)‖ <= y + 1`.
    fn square_below(&mut self, x: Affine, y: Affine) {
        let scaled = (x.0.iter().map(|&(j, v)| (j, 2.0 * v)).collect(), 2.0 * x.1);
        self.soc((y.0.clone(), y.1 + 1.0), vec![scaled, (y.0, y.1 - 1.0)]);
    }
}

/// Exact margins at `q`: worst relative slack of the rate constraint.
pub fn exact_margin(coeffs: &RecastCoefficients, geom: &StepGeometry, q: &Vector3<f64>, t: f64) -> f64 {
    if t <= TRIVIAL_RATE {
        return 0.0;
    }
    let gamma = t.exp2() - 1.0;
    geom.distances(q)
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let (m, s) = coeffs.margin(k, d, gamma);
            m / s.max(1e-300)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Convex feasibility step at rate target `t`.
pub fn solve_position_target(
    coeffs: &RecastCoefficients,
    geom: &StepGeometry,
    t: f64,
    model: &UavModel,
) -> Option<TrajectoryStep> {
    let k_count = coeffs.noise.len();
    let q0 = geom.previous;
    let c_pre: Vec<f64> = geom.distances(&q0).iter().map(|d| 1.0 / d).collect();
    if t <= TRIVIAL_RATE || model.step_length() <= 0.0 {
        let ok = t <= TRIVIAL_RATE || exact_margin(coeffs, geom, &q0, t) >= -1e-7;
        return ok.then(|| TrajectoryStep {
            previous: geom.anchor,
            position: q0,
            c_lower: c_pre.clone(),
            c_upper: c_pre.clone(),
            interference_cap: vec![0.0; k_count],
            c_previous: c_pre,
            exact_margin: exact_margin(coeffs, geom, &q0, t),
        });
    }
    let gamma = t.exp2() - 1.0;
    // Variables: horizontal offset from q0 in units of the step length,
    // then per user the two brackets on 1/d (relative to c_pre) and the interference cap over noise.
    let step = model.step_length();
    let (lo, hi, bt) = (|k: usize| 2 + k, |k: usize| 2 + k_count + k, |k: usize| 2 + 2 * k_count + k);
    let n = 2 + 3 * k_count;
    let mut cb = ConeBuilder::new();

    // Per-slot motion.
    // Limits are tightened slightly so solver round-off never crosses them.
    let shrink = 1.0 - 1e-6;
    let lag = (q0 - geom.anchor) / step;
    cb.soc((vec![], shrink), vec![(vec![(0, 1.0)], lag.x), (vec![(1, 1.0)], lag.y)]);
    // Flight radius and the conservative return-energy guard share the form ‖q‖ <= ρ.
    let return_cost = propulsion_power(model.max_speed, model) / model.max_speed;
    let energy_radius = (model.energy_budget - geom.consumed - model.max_slot_energy()) / return_cost;
    let radius = model.max_range.min(energy_radius);
    if radius < model.altitude {
        return None;
    }
    cb.soc(
        (vec![], shrink * radius / step),
        vec![
            (vec![(0, 1.0)], q0.x / step),
            (vec![(1, 1.0)], q0.y / step),
            (vec![], model.altitude / step),
        ],
    );

    for k in 0..k_count {
        let u = &geom.users[k];
        let cp = c_pre[k];
        let s = 1.0 / coeffs.noise[k];
        // c_lo <= 1/d: c_pre² d² <= 3 - 2 c_lo/c_pre.
        let dx = (vec![(0, cp * step)], cp * (q0.x - u.x));
        let dy = (vec![(1, cp * step)], cp * (q0.y - u.y));
        let dz = cp * (model.altitude - u.z);
        let y = (vec![(lo(k), -2.0)], 3.0 - dz * dz);
        let (two_x, two_y) = (
            (dx.0.iter().map(|&(j, v)| (j, 2.0 * v)).collect::<Vec<_>>(), 2.0 * dx.1),
            (dy.0.iter().map(|&(j, v)| (j, 2.0 * v)).collect::<Vec<_>>(), 2.0 * dy.1),
        );
        cb.soc((y.0.clone(), y.1 + 1.0), vec![two_x, two_y, (y.0.clone(), y.1 - 1.0)]);
        // c_hi >= 1/d via the tangent of d at q0: c_hi/c_pre · c_pre ℓ(q) >= 1.
        let rel = q0 - u;
        let ell = (vec![(0, cp * cp * rel.x * step), (1, cp * cp * rel.y * step)], 1.0);
        let mut sum = ell.0.clone();
        sum.push((hi(k), 1.0));
        let mut diff: Vec<(usize, f64)> = ell.0.iter().map(|&(j, v)| (j, -v)).collect();
        diff.push((hi(k), 1.0));
        cb.soc((sum, ell.1), vec![(vec![], 2.0), (diff, -ell.1)]);
        cb.nonneg((vec![(lo(k), 1.0)], 0.0));

        // Interference at both ends of the bracket stays below the cap.
        let (a, b, c0) = (0..k_count).filter(|&l| l != k).fold((0.0, 0.0, 0.0), |acc, l| {
            (acc.0 + coeffs.quadratic[k][l], acc.1 + coeffs.linear[k][l], acc.2 + coeffs.constant[k][l])
        });
        let (a, b, c0) = (a * cp * cp * s, b * cp * s, c0 * s + 1.0);
        for var in [lo(k), hi(k)] {
            let y = (vec![(bt(k), 1.0), (var, -b)], -c0);
            cb.square_below((vec![(var, a.sqrt())], 0.0), y);
        }
        // Signal tangent at c_pre, bracketed on the side where it grows.
        let s_pre = coeffs.power(k, k, cp) * s;
        let slope = (coeffs.linear[k][k] * cp + 2.0 * coeffs.quadratic[k][k] * cp * cp) * s;
        let var = if slope >= 0.0 { lo(k) } else { hi(k) };
        cb.nonneg((vec![(var, slope), (bt(k), -gamma)], s_pre - slope));
    }

    let m = cb.b.len();
    let a_mat = CscMatrix::new_from_triplets(m, n, cb.rows, cb.cols, cb.vals);
    let p_mat = CscMatrix::zeros((n, n));
    let settings = DefaultSettings { verbose: false, ..DefaultSettings::default() };
    let mut solver = DefaultSolver::new(&p_mat, &vec![0.0; n], &a_mat, &cb.b, &cb.cones, settings).ok()?;
    solver.solve();
    if !matches!(solver.solution.status, SolverStatus::Solved) {
        return None;
    }
    let x = &solver.solution.x;
    let position = Vector3::new(q0.x + step * x[0], q0.y + step * x[1], model.altitude);
    let margin = exact_margin(coeffs, geom, &position, t);
    Some(TrajectoryStep {
        previous: geom.anchor,
        position,
        c_lower: (0..k_count).map(|k| x[lo(k)] * c_pre[k]).collect(),
        c_upper: (0..k_count).map(|k| x[hi(k)] * c_pre[k]).collect(),
        interference_cap: (0..k_count).map(|k| x[bt(k)] * coeffs.noise[k]).collect(),
        c_previous: c_pre,
        exact_margin: margin,
    })
}

/// Whether a step respects motion, range and energy limits.
pub fn step_admissible(step: &TrajectoryStep, consumed: f64, model: &UavModel) -> bool {
    let moved = (step.position - step.previous).norm();
    let energy = consumed + slot_energy(&step.previous, &step.position, model);
    moved <= model.step_length()
        && step.position.norm() <= model.max_range
        && step.position.z == model.altitude
        && energy_guard(&step.position, energy, model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDesign {
    pub position: Vector3<f64>,
    pub t: f64,
    pub t_max: f64,
    /// The bound with the `V_max/d` factor, kept for comparison.
    pub t_max_literal: f64,
    pub status: DesignStatus,
    pub step: Option<TrajectoryStep>,
    /// Accepted steps, one per feasible probe.
    pub accepted: Vec<TrajectoryStep>,
    pub trace: BisectionTrace,
}

pub fn design_trajectory_step(
    csi: &StatisticalCsi,
    beams: &BeamformerSet,
    phases: &PhaseConfig,
    geom: &StepGeometry,
    t_min: f64,
    settings: &DesignSettings,
    model: &UavModel,
) -> TrajectoryDesign {
    let coeffs = recast_coefficients(csi, beams, phases);
    let (t_max, t_max_literal) = trajectory_tmax(csi, beams, phases, &coeffs, geom, model);
    let mut accepted = Vec::new();
    let (t, best, trace) = bisect(t_min, t_max.max(t_min), settings.accuracy, |t| {
        let step = solve_position_target(&coeffs, geom, t, model)
            .filter(|s| s.exact_margin >= -1e-7 && step_admissible(s, geom.consumed, model));
        let record = BisectionStep {
            t,
            feasible: step.is_some(),
            inner_iterations: 1,
            rank_residual: 0.0,
            sinr_ratio: step.as_ref().map_or(f64::NAN, |s| 1.0 + s.exact_margin),
        };
        if let Some(s) = &step {
            accepted.push(s.clone());
        }
        (step, record)
    });
    let status = match (&best, trace.steps.is_empty()) {
        (Some(_), _) => DesignStatus::Improved,
        (None, true) => DesignStatus::Skipped,
        (None, false) => DesignStatus::NoFeasiblePoint,
    };
    let position = best.as_ref().map_or(geom.previous, |s| s.position);
    TrajectoryDesign { position, t, t_max, t_max_literal, status, step: best, accepted, trace }
}
