//! Surface phase design: the unit-modulus vector `[φ, 1]` is lifted to a
//! unit-diagonal PSD matrix and driven back to rank one inside a bisection.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::beamforming::{bisect, unit_or_first, BisectionStep, BisectionTrace, DesignSettings, DesignStatus, Infeasible, TRIVIAL_RATE};
use crate::channel::StatisticalCsi;
use crate::conic::{max_eigpair, Coefficient, Relation, SdpProblem, SolveStatus};
use crate::rate::{approx_min_rate, BeamformerSet, PhaseConfig};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("lifted vector has a vanishing reference entry ({0:e})")]
    DegenerateLift(f64),
}

/// Per-pair quadratic data of the received power in `[φ, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBlocks {
    /// `conj(bar_g_k) ⊙ (bar_G v_l)`, indexed `[k][l]`.
    pub cascade: Vec<Vec<DVector<C64>>>,
    /// `bar_h_k^H v_l`.
    pub direct: Vec<Vec<C64>>,
    /// Phase-independent power.
    pub fixed_power: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
}

impl PhaseBlocks {
    pub fn num_users(&self) -> usize {
        self.direct.len()
    }

    pub fn elements(&self) -> usize {
        self.cascade.first().and_then(|r| r.first()).map_or(0, |b| b.len())
    }

    /// `[[b b^H, b q*], [q b^H, 0]]` with `b` the cascade and `q` the direct term.
    pub fn lifted_power(&self, k: usize, l: usize) -> DMatrix<C64> {
        let b = &self.cascade[k][l];
        let m = b.len();
        let p = b * self.direct[k][l].conj();
        let mut x = DMatrix::zeros(m + 1, m + 1);
        x.view_mut((0, 0), (m, m)).copy_from(&(b * b.adjoint()));
        for i in 0..m {
            x[(i, m)] = p[i];
            x[(m, i)] = p[i].conj();
        }
        x
    }

    /// `[φ, 1] M [φ, 1]^H` plus the fixed power: received power from beam `l` at user `k`.
    pub fn power(&self, k: usize, l: usize, coeffs: &DVector<C64>) -> f64 {
        let along: C64 = coeffs.iter().zip(self.cascade[k][l].iter()).map(|(c, b)| c * b).sum();
        (self.direct[k][l] + along).norm_sqr() - self.direct[k][l].norm_sqr() + self.fixed_power[k][l]
    }
}

pub fn build_phase_blocks(csi: &StatisticalCsi, beams: &BeamformerSet) -> PhaseBlocks {
    let k_count = csi.num_ues();
    let mut cascade = Vec::with_capacity(k_count);
    let mut direct = Vec::with_capacity(k_count);
    let mut fixed_power = Vec::with_capacity(k_count);
    let projected: Vec<DVector<C64>> = beams.beams.iter().map(|v| &csi.sat_ris_mean * v).collect();
    for k in 0..k_count {
        let g = &csi.ris_ue_mean[k];
        let scatter = csi.cascade_mean_scatter(k);
        let mut bk = Vec::with_capacity(beams.beams.len());
        let mut qk = Vec::with_capacity(beams.beams.len());
        let mut pk = Vec::with_capacity(beams.beams.len());
        for (v, gv) in beams.beams.iter().zip(&projected) {
            bk.push(DVector::from_fn(g.len(), |m, _| g[m].conj() * gv[m]));
            let qkl = csi.direct_mean[k].dotc(v);
            let nlos: f64 = v
                .iter()
                .zip(csi.cascade_nlos[k].iter().zip(csi.direct_nlos[k].iter()))
                .map(|(x, (a, bb))| x.norm_sqr() * (a * a + bb * bb))
                .sum();
            pk.push(qkl.norm_sqr() + scatter * gv.norm_squared() + nlos);
            qk.push(qkl);
        }
        cascade.push(bk);
        direct.push(qk);
        fixed_power.push(pk);
    }
    PhaseBlocks { cascade, direct, fixed_power, noise: csi.noise_power.clone() }
}

/// Triangle-inequality bound on the rate over all unit-modulus phases.
pub fn phase_tmax(blocks: &PhaseBlocks) -> f64 {
    let k_count = blocks.num_users();
    (0..k_count)
        .map(|k| {
            let coherent = blocks.direct[k][k].norm() + blocks.cascade[k][k].iter().map(|z| z.norm()).sum::<f64>();
            let signal = coherent.powi(2) - blocks.direct[k][k].norm_sqr() + blocks.fixed_power[k][k];
            let interference: f64 =
                (0..k_count).filter(|&l| l != k).map(|l| blocks.fixed_power[k][l] - blocks.direct[k][l].norm_sqr()).sum();
            (1.0 + signal / (interference + blocks.noise[k])).log2()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPhase {
    pub lift: DMatrix<C64>,
    /// Trace minus largest eigenvalue of the lift.
    pub residual: f64,
    pub inner_iterations: usize,
}

impl LiftedPhase {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.lift.nrows().max(1) as f64
    }

    /// Row vector `r` with `lift ≈ r^H r`.
    pub fn row(&self) -> DVector<C64> {
        let (lam, u) = max_eigpair(&self.lift);
        (u * C64::from(lam.max(0.0).sqrt())).map(|z| z.conj())
    }
}

/// Unit column `conj(φ̄)/|φ̄|` used as the penalty direction.
pub fn lift_direction(phases: &PhaseConfig) -> DVector<C64> {
    let m = phases.theta.len();
    let mut w = DVector::from_element(m + 1, C64::from(1.0));
    for (i, c) in phases.coefficients().iter().enumerate() {
        w[i] = c.conj();
    }
    unit_or_first(&w)
}

/// Fixes the gauge so the last entry is real positive and reads the angles.
pub fn recover_phases(row: &DVector<C64>) -> Result<PhaseConfig, PhaseError> {
    let m = row.len() - 1;
    let last = row[m];
    if last.norm() < 1e-9 {
        return Err(PhaseError::DegenerateLift(last.norm()));
    }
    let gauge = last.conj() / last.norm();
    Ok(PhaseConfig::new(DVector::from_fn(m, |i, _| (row[i] * gauge).arg())))
}

fn worst_sinr_ratio(blocks: &PhaseBlocks, phases: &PhaseConfig, gamma: f64) -> f64 {
    let c = phases.coefficients();
    (0..blocks.num_users())
        .map(|k| {
            let mut interference = blocks.noise[k];
            for l in (0..blocks.num_users()).filter(|&l| l != k) {
                interference += blocks.power(k, l, &c);
            }
            blocks.power(k, k, &c) / interference / gamma
        })
        .fold(f64::INFINITY, f64::min)
}

/// Feasibility of rate target `t` over lifted phases; `warm` is the penalty direction.
pub fn solve_phase_target(
    blocks: &PhaseBlocks,
    t: f64,
    warm: &DVector<C64>,
    settings: &DesignSettings,
) -> Result<LiftedPhase, Infeasible> {
    let m = blocks.elements();
    let k_count = blocks.num_users();
    if t <= TRIVIAL_RATE {
        let lift = warm * warm.adjoint() * C64::from((m + 1) as f64);
        return Ok(LiftedPhase { lift, residual: 0.0, inner_iterations: 0 });
    }
    let gamma = t.exp2() - 1.0;
    let mut base = SdpProblem::new();
    let x = base.add_variable(m + 1);
    for i in 0..=m {
        base.add_constraint(vec![(x, Coefficient::Diagonal(vec![(i, 1.0)]))], Relation::Eq, 1.0);
    }
    for k in 0..k_count {
        let scale = 1.0 / blocks.noise[k];
        let mut coeff = blocks.lifted_power(k, k) * C64::from(scale / gamma);
        let mut rhs = 1.0 - blocks.fixed_power[k][k] * scale / gamma;
        for l in (0..k_count).filter(|&l| l != k) {
            coeff -= blocks.lifted_power(k, l) * C64::from(scale);
            rhs += blocks.fixed_power[k][l] * scale;
        }
        base.add_constraint(vec![(x, Coefficient::Dense(coeff))], Relation::Ge, rhs);
    }

    let n = m + 1;
    let mut dir = unit_or_first(warm);
    let mut last = f64::INFINITY;
    for inner in 1..=settings.max_inner {
        let mut prob = base.clone();
        prob.set_objective(vec![(x, Coefficient::Dense(DMatrix::identity(n, n) - &dir * dir.adjoint()))]);
        let out = prob.solve(&settings.solver);
        if out.status != SolveStatus::Optimal {
            return Err(Infeasible::Solver(out.status));
        }
        let lift = out.values.into_iter().next().expect("one variable");
        let (lam, u) = max_eigpair(&lift);
        let tr: f64 = lift.diagonal().iter().map(|z| z.re).sum();
        let residual = tr - lam;
        if residual <= settings.rank_tol * tr.max(1e-12) {
            return Ok(LiftedPhase { lift, residual, inner_iterations: inner });
        }
        if inner > 2 && last - residual <= 1e-4 * last {
            return Err(Infeasible::Stalled);
        }
        last = residual;
        dir = u;
    }
    Err(Infeasible::InnerLimit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDesign {
    pub phases: PhaseConfig,
    pub t: f64,
    pub achieved: f64,
    pub t_max: f64,
    /// `t - achieved` when positive: rate lost in the rank-one projection.
    pub projection_slack: f64,
    pub status: DesignStatus,
    pub lifted: Option<LiftedPhase>,
    pub trace: BisectionTrace,
}

pub fn design_phase(
    csi: &StatisticalCsi,
    beams: &BeamformerSet,
    current: &PhaseConfig,
    t_min: f64,
    settings: &DesignSettings,
) -> PhaseDesign {
    let blocks = build_phase_blocks(csi, beams);
    let t_max = phase_tmax(&blocks);
    let mut warm = lift_direction(current);
    let (t, best, trace) = bisect(t_min, t_max, settings.accuracy, |t| {
        let failed = BisectionStep { t, feasible: false, inner_iterations: 0, rank_residual: f64::NAN, sinr_ratio: f64::NAN };
        let Ok(lifted) = solve_phase_target(&blocks, t, &warm, settings) else {
            return (None, failed);
        };
        let Ok(phases) = recover_phases(&lifted.row()) else {
            return (None, failed);
        };
        let step = BisectionStep {
            t,
            feasible: true,
            inner_iterations: lifted.inner_iterations,
            rank_residual: lifted.relative_residual(),
            sinr_ratio: worst_sinr_ratio(&blocks, &phases, t.exp2() - 1.0),
        };
        warm = lift_direction(&phases);
        (Some((phases, lifted)), step)
    });
    let status = match (&best, trace.steps.is_empty()) {
        (Some(_), _) => DesignStatus::Improved,
        (None, true) => DesignStatus::Skipped,
        (None, false) => DesignStatus::NoFeasiblePoint,
    };
    let (phases, lifted) = match best {
        Some((p, l)) => (p, Some(l)),
        None => (current.clone(), None),
    };
    let achieved = approx_min_rate(csi, beams, &phases).0;
    let projection_slack = if lifted.is_some() { (t - achieved).max(0.0) } else { 0.0 };
    PhaseDesign { phases, t, achieved, t_max, projection_slack, status, lifted, trace }
}
