//! Satellite beamforming: bisection on the common rate target with a lifted
//! feasibility SDP per target, driven to rank one by an eigenvector penalty.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::StatisticalCsi;
use crate::conic::{max_eigpair, Coefficient, Relation, SdpProblem, SolveStatus, SolverSettings};
use crate::rate::{approx_min_rate, effective_mean, expected_power, power_matrix, BeamformerSet, PhaseConfig};
use crate::C64;

/// Targets at or below this are feasible with zero beams.
pub const TRIVIAL_RATE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSettings {
    /// Bisection accuracy in bits/s/Hz.
    pub accuracy: f64,
    /// Penalty iterations per target.
    pub max_inner: usize,
    /// Relative rank-one threshold on `tr - λ_max`.
    pub rank_tol: f64,
    pub solver: SolverSettings,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self { accuracy: 1e-3, max_inner: 15, rank_tol: 1e-6, solver: SolverSettings::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Infeasible {
    Solver(SolveStatus),
    Stalled,
    InnerLimit,
}

/// One probed target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub t: f64,
    pub feasible: bool,
    pub inner_iterations: usize,
    /// Largest `(tr - λ_max) / tr` over the lifted variables.
    pub rank_residual: f64,
    /// Worst ratio of the recovered SINR to the target SINR.
    pub sinr_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BisectionTrace {
    pub t_lower: f64,
    pub t_upper: f64,
    pub steps: Vec<BisectionStep>,
}

impl BisectionTrace {
    /// `ceil(log2((t_upper - t_lower)/accuracy)) + 1`, the allowed probe count.
    pub fn step_bound(&self, accuracy: f64) -> usize {
        let span = self.t_upper - self.t_lower;
        if span <= accuracy {
            return 1;
        }
        (span / accuracy).log2().ceil() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignStatus {
    Improved,
    NoFeasiblePoint,
    /// The search interval was already below the accuracy.
    Skipped,
}

/// Bisection over `(lo, hi)`; `probe(t)` returns the payload when feasible.
pub fn bisect<T>(
    lo: f64,
    hi: f64,
    accuracy: f64,
    mut probe: impl FnMut(f64) -> (Option<T>, BisectionStep),
) -> (f64, Option<T>, BisectionTrace) {
    let mut trace = BisectionTrace { t_lower: lo, t_upper: hi, steps: Vec::new() };
    let (mut lo, mut hi) = (lo, hi);
    let mut best = None;
    while hi - lo > accuracy {
        let t = 0.5 * (lo + hi);
        let (payload, step) = probe(t);
        trace.steps.push(step);
        match payload {
            Some(p) => {
                lo = t;
                best = Some(p);
            }
            None => hi = t,
        }
    }
    (lo, best, trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedBeamformer {
    pub matrices: Vec<DMatrix<C64>>,
    /// `tr{V_k} - λ_max{V_k}` per user.
    pub residuals: Vec<f64>,
    pub inner_iterations: usize,
}

impl LiftedBeamformer {
    pub fn relative_residual(&self) -> f64 {
        self.matrices
            .iter()
            .zip(&self.residuals)
            .map(|(v, r)| r / trace(v).max(1e-12))
            .fold(0.0, f64::max)
    }

    /// `v_k = sqrt(λ_max) u_k`.
    pub fn recover(&self, antennas_per_sat: usize) -> BeamformerSet {
        let beams = self
            .matrices
            .iter()
            .map(|v| {
                let (lam, u) = max_eigpair(v);
                u * C64::from(lam.max(0.0).sqrt())
            })
            .collect();
        BeamformerSet { beams, antennas_per_sat }
    }
}

pub(crate) fn trace(x: &DMatrix<C64>) -> f64 {
    x.diagonal().iter().map(|z| z.re).sum()
}

pub(crate) fn unit_or_first(v: &DVector<C64>) -> DVector<C64> {
    let n = v.norm();
    if n > 0.0 {
        v / C64::from(n)
    } else {
        let mut e = DVector::zeros(v.len());
        e[0] = C64::from(1.0);
        e
    }
}

/// Expected-power matrix of every user under the given phases.
pub fn power_matrices(csi: &StatisticalCsi, phases: &PhaseConfig) -> Vec<DMatrix<C64>> {
    let c = phases.coefficients();
    (0..csi.num_ues()).map(|k| power_matrix(csi, &effective_mean(csi, &c, k), k)).collect()
}

/// `min_k log2(1 + P λ_max(F_k)/σ_k²)` with `F_k` the expected-power matrix and `P` the total power of the group.
pub fn beamforming_tmax(csi: &StatisticalCsi, phases: &PhaseConfig, budgets: &[f64]) -> f64 {
    let total: f64 = budgets.iter().sum();
    power_matrices(csi, phases)
        .iter()
        .enumerate()
        .map(|(k, f)| (1.0 + total * max_eigpair(f).0.max(0.0) / csi.noise_power[k]).log2())
        .fold(f64::INFINITY, f64::min)
}

/// Mean-channel MRT with each satellite's budget split equally among users.
pub fn mrt_beamformer(csi: &StatisticalCsi, phases: &PhaseConfig, budgets: &[f64]) -> BeamformerSet {
    let c = phases.coefficients();
    let nt = csi.antennas_per_sat;
    let k_count = csi.num_ues();
    let beams = (0..k_count)
        .map(|k| {
            let e = effective_mean(csi, &c, k);
            let mut v = DVector::zeros(csi.dim());
            for s in 0..csi.num_sats {
                let block = e.rows_range(s * nt..(s + 1) * nt);
                let n = block.norm();
                let amp = (budgets[s] / k_count as f64).sqrt();
                let dir = if n > 0.0 {
                    block / C64::from(n)
                } else {
                    DVector::from_element(nt, C64::from(1.0 / (nt as f64).sqrt()))
                };
                v.rows_range_mut(s * nt..(s + 1) * nt).copy_from(&(dir * C64::from(amp)));
            }
            v
        })
        .collect();
    BeamformerSet { beams, antennas_per_sat: nt }
}

/// Worst recovered-SINR-to-target ratio.
fn sinr_ratio(csi: &StatisticalCsi, phases: &PhaseConfig, beams: &BeamformerSet, gamma: f64) -> f64 {
    let c = phases.coefficients();
    (0..csi.num_ues())
        .map(|k| {
            let e = effective_mean(csi, &c, k);
            let mut interference = csi.noise_power[k];
            let mut signal = 0.0;
            for (l, v) in beams.beams.iter().enumerate() {
                let p = expected_power(csi, &e, k, v);
                if l == k {
                    signal = p;
                } else {
                    interference += p;
                }
            }
            signal / interference / gamma
        })
        .fold(f64::INFINITY, f64::min)
}

/// Feasibility of rate target `t` via the penalized lifted problem.
///
/// `warm` seeds the penalty directions (one vector per user).
pub fn solve_beam_target(
    csi: &StatisticalCsi,
    phases: &PhaseConfig,
    budgets: &[f64],
    t: f64,
    warm: &[DVector<C64>],
    settings: &DesignSettings,
) -> Result<LiftedBeamformer, Infeasible> {
    let n = csi.dim();
    let k_count = csi.num_ues();
    if t <= TRIVIAL_RATE {
        return Ok(LiftedBeamformer {
            matrices: vec![DMatrix::zeros(n, n); k_count],
            residuals: vec![0.0; k_count],
            inner_iterations: 0,
        });
    }
    let gamma = t.exp2() - 1.0;
    let p_ref = budgets.iter().cloned().fold(0.0, f64::max);
    let fk: Vec<DMatrix<C64>> = power_matrices(csi, phases)
        .into_iter()
        .enumerate()
        .map(|(k, f)| f * C64::from(p_ref / csi.noise_power[k]))
        .collect();

    let mut base = SdpProblem::new();
    let vars: Vec<usize> = (0..k_count).map(|_| base.add_variable(n)).collect();
    for k in 0..k_count {
        let terms = vars
            .iter()
            .enumerate()
            .map(|(l, &v)| {
                let w = if l == k { 1.0 / gamma } else { -1.0 };
                (v, Coefficient::Dense(&fk[k] * C64::from(w)))
            })
            .collect();
        base.add_constraint(terms, Relation::Ge, 1.0);
    }
    let nt = csi.antennas_per_sat;
    for (s, &p) in budgets.iter().enumerate() {
        let diag: Vec<(usize, f64)> = (s * nt..(s + 1) * nt).map(|i| (i, 1.0)).collect();
        let terms = vars.iter().map(|&v| (v, Coefficient::Diagonal(diag.clone()))).collect();
        base.add_constraint(terms, Relation::Le, p / p_ref);
    }

    let mut dirs: Vec<DVector<C64>> = warm.iter().map(unit_or_first).collect();
    let mut last_penalty = f64::INFINITY;
    for inner in 1..=settings.max_inner {
        let mut prob = base.clone();
        prob.set_objective(
            vars.iter()
                .zip(&dirs)
                .map(|(&v, u)| (v, Coefficient::Dense(DMatrix::identity(n, n) - u * u.adjoint())))
                .collect(),
        );
        let out = prob.solve(&settings.solver);
        if out.status != SolveStatus::Optimal {
            return Err(Infeasible::Solver(out.status));
        }
        let matrices: Vec<DMatrix<C64>> = out.values.iter().map(|w| w * C64::from(p_ref)).collect();
        let mut residuals = Vec::with_capacity(k_count);
        let mut done = true;
        for (k, v) in matrices.iter().enumerate() {
            let (lam, u) = max_eigpair(v);
            let tr = trace(v);
            residuals.push(tr - lam);
            done &= tr - lam <= settings.rank_tol * tr.max(1e-12);
            dirs[k] = u;
        }
        if done {
            return Ok(LiftedBeamformer { matrices, residuals, inner_iterations: inner });
        }
        let penalty: f64 = residuals.iter().sum();
        if inner > 2 && last_penalty - penalty <= 1e-4 * last_penalty {
            return Err(Infeasible::Stalled);
        }
        last_penalty = penalty;
    }
    Err(Infeasible::InnerLimit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingDesign {
    pub beams: BeamformerSet,
    /// Certified lower end of the final bisection interval.
    pub t: f64,
    /// `approx_min_rate` of the returned beams.
    pub achieved: f64,
    pub t_max: f64,
    pub status: DesignStatus,
    pub lifted: Option<LiftedBeamformer>,
    pub trace: BisectionTrace,
}

pub fn design_beamforming(
    csi: &StatisticalCsi,
    phases: &PhaseConfig,
    budgets: &[f64],
    t_min: f64,
    init: &BeamformerSet,
    settings: &DesignSettings,
) -> BeamformingDesign {
    let t_max = beamforming_tmax(csi, phases, budgets);
    let mut warm = init.beams.clone();
    let (t, best, trace) = bisect(t_min, t_max, settings.accuracy, |t| {
        match solve_beam_target(csi, phases, budgets, t, &warm, settings) {
            Ok(lifted) => {
                let beams = lifted.recover(csi.antennas_per_sat);
                let gamma = t.exp2() - 1.0;
                let step = BisectionStep {
                    t,
                    feasible: true,
                    inner_iterations: lifted.inner_iterations,
                    rank_residual: lifted.relative_residual(),
                    sinr_ratio: sinr_ratio(csi, phases, &beams, gamma),
                };
                warm = beams.beams.clone();
                (Some((beams, lifted)), step)
            }
            Err(_) => (
                None,
                BisectionStep { t, feasible: false, inner_iterations: 0, rank_residual: f64::NAN, sinr_ratio: f64::NAN },
            ),
        }
    });
    let status = match (&best, trace.steps.is_empty()) {
        (Some(_), _) => DesignStatus::Improved,
        (None, true) => DesignStatus::Skipped,
        (None, false) => DesignStatus::NoFeasiblePoint,
    };
    let (beams, lifted) = match best {
        Some((b, l)) => (b, Some(l)),
        None => (init.clone(), None),
    };
    let achieved = approx_min_rate(csi, &beams, phases).0;
    BeamformingDesign { beams, t, achieved, t_max, status, lifted, trace }
}
