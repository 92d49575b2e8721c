//! Closed-form approximate SINR and rate, plus a Monte-Carlo ergodic-rate
//! estimate used to validate it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::channel::{sample_channel, StatisticalCsi};
use crate::C64;

/// Samples per Monte-Carlo block; each block owns a ChaCha stream.
const MC_BLOCK: usize = 500;

/// Per-user beamformers over the stacked satellite antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub beams: Vec<DVector<C64>>,
    pub antennas_per_sat: usize,
}

impl BeamformerSet {
    pub fn zeros(users: usize, antennas_per_sat: usize, sats: usize) -> Self {
        Self { beams: vec![DVector::zeros(antennas_per_sat * sats); users], antennas_per_sat }
    }

    pub fn num_users(&self) -> usize {
        self.beams.len()
    }

    pub fn num_sats(&self) -> usize {
        self.beams.first().map_or(0, |b| b.len() / self.antennas_per_sat)
    }

    /// Transmit power of satellite `s` summed over all beams.
    pub fn sat_power(&self, s: usize) -> f64 {
        let r = s * self.antennas_per_sat..(s + 1) * self.antennas_per_sat;
        self.beams.iter().map(|v| v.rows_range(r.clone()).norm_squared()).sum()
    }

    /// Largest relative excess over the per-satellite budgets (0 when within).
    pub fn power_excess(&self, budgets: &[f64]) -> f64 {
        budgets
            .iter()
            .enumerate()
            .map(|(s, &p)| ((self.sat_power(s) - p) / p).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Surface phase shifts in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub theta: DVector<f64>,
}

impl PhaseConfig {
    pub fn new(theta: DVector<f64>) -> Self {
        Self { theta: theta.map(|t| t.rem_euclid(TAU)) }
    }

    pub fn zeros(elements: usize) -> Self {
        Self { theta: DVector::zeros(elements) }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, elements: usize) -> Self {
        Self { theta: DVector::from_fn(elements, |_, _| rng.random::<f64>() * TAU) }
    }

    /// Diagonal of `Θ`.
    pub fn coefficients(&self) -> DVector<C64> {
        self.theta.map(|t| C64::from_polar(1.0, t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrTerms {
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl SinrTerms {
    pub fn sinr(&self) -> f64 {
        self.signal / (self.interference + self.noise)
    }
}

/// `bar_h_k + bar_G^H Θ^H bar_g_k`, so that `e^H v` is the mean received amplitude.
pub fn effective_mean(csi: &StatisticalCsi, coeffs: &DVector<C64>, k: usize) -> DVector<C64> {
    let g = &csi.ris_ue_mean[k];
    let weighted = DVector::from_fn(g.len(), |m, _| coeffs[m].conj() * g[m]);
    &csi.direct_mean[k] + csi.sat_ris_mean.ad_mul(&weighted)
}

/// Expected received power at user `k` from beam `v`.
pub fn expected_power(csi: &StatisticalCsi, mean: &DVector<C64>, k: usize, v: &DVector<C64>) -> f64 {
    let coherent = mean.dotc(v).norm_sqr();
    let scatter = csi.cascade_mean_scatter(k) * (&csi.sat_ris_mean * v).norm_squared();
    let cascade: f64 = v.iter().zip(csi.cascade_nlos[k].iter()).map(|(x, a)| x.norm_sqr() * a * a).sum();
    let direct: f64 = v.iter().zip(csi.direct_nlos[k].iter()).map(|(x, b)| x.norm_sqr() * b * b).sum();
    coherent + scatter + cascade + direct
}

/// Expected-power matrix `F_k` with `v^H F_k v` equal to [`expected_power`].
pub fn power_matrix(csi: &StatisticalCsi, mean: &DVector<C64>, k: usize) -> DMatrix<C64> {
    let mut f = mean * mean.adjoint();
    f += csi.sat_ris_mean.ad_mul(&csi.sat_ris_mean) * C64::from(csi.cascade_mean_scatter(k));
    for i in 0..csi.dim() {
        f[(i, i)] += C64::from(csi.cascade_nlos[k][i].powi(2) + csi.direct_nlos[k][i].powi(2));
    }
    f
}

pub fn sinr_terms(csi: &StatisticalCsi, beams: &BeamformerSet, phases: &PhaseConfig, k: usize) -> SinrTerms {
    let mean = effective_mean(csi, &phases.coefficients(), k);
    let mut terms = SinrTerms { signal: 0.0, interference: 0.0, noise: csi.noise_power[k] };
    for (l, v) in beams.beams.iter().enumerate() {
        let p = expected_power(csi, &mean, k, v);
        if l == k {
            terms.signal = p;
        } else {
            terms.interference += p;
        }
    }
    terms
}

pub fn approx_sinr(csi: &StatisticalCsi, beams: &BeamformerSet, phases: &PhaseConfig, k: usize) -> f64 {
    sinr_terms(csi, beams, phases, k).sinr()
}

pub fn approx_rates(csi: &StatisticalCsi, beams: &BeamformerSet, phases: &PhaseConfig) -> Vec<f64> {
    (0..csi.num_ues()).map(|k| (1.0 + approx_sinr(csi, beams, phases, k)).log2()).collect()
}

/// Minimum approximate rate and the first user attaining it.
pub fn approx_min_rate(csi: &StatisticalCsi, beams: &BeamformerSet, phases: &PhaseConfig) -> (f64, usize) {
    min_with_index(&approx_rates(csi, beams, phases))
}

pub(crate) fn min_with_index(values: &[f64]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, &r) in values.iter().enumerate() {
        if r < best.0 {
            best = (r, i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

fn instantaneous_rates(
    csi: &StatisticalCsi,
    beams: &BeamformerSet,
    phases: &PhaseConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let ch = sample_channel(csi, phases, rng);
    (0..csi.num_ues())
        .map(|k| {
            let f = &ch.equivalent[k];
            let mut signal = 0.0;
            let mut other = csi.noise_power[k];
            for (l, v) in beams.beams.iter().enumerate() {
                let p = f.dotc(v).norm_sqr();
                if l == k {
                    signal = p;
                } else {
                    other += p;
                }
            }
            (1.0 + signal / other).log2()
        })
        .collect()
}

/// Monte-Carlo ergodic rate of every user from common samples.
///
/// Samples are drawn in fixed blocks, each from its own stream of `seed`, and
/// reduced in block order, so the result does not depend on thread count.
pub fn mc_ergodic_rates(
    csi: &StatisticalCsi,
    beams: &BeamformerSet,
    phases: &PhaseConfig,
    samples: usize,
    seed: u64,
) -> Vec<McEstimate> {
    let users = csi.num_ues();
    let blocks = samples.div_ceil(MC_BLOCK);
    // Per block: count, then Welford mean and sum of squared deviations per user.
    let partial: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut mean = vec![0.0; users];
            let mut m2 = vec![0.0; users];
            for i in 0..count {
                for (k, r) in instantaneous_rates(csi, beams, phases, &mut rng).into_iter().enumerate() {
                    let delta = r - mean[k];
                    mean[k] += delta / (i + 1) as f64;
                    m2[k] += delta * (r - mean[k]);
                }
            }
            (count as f64, mean, m2)
        })
        .collect();
    (0..users)
        .map(|k| {
            let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
            for (nb, mb, sb) in &partial {
                let total = n + nb;
                let delta = mb[k] - mean;
                mean += delta * nb / total;
                m2 += sb[k] + delta * delta * n * nb / total;
                n = total;
            }
            let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
            McEstimate { mean, std_error: (var / n).sqrt() }
        })
        .collect()
}

pub fn mc_ergodic_rate(
    csi: &StatisticalCsi,
    beams: &BeamformerSet,
    phases: &PhaseConfig,
    k: usize,
    samples: usize,
    seed: u64,
) -> McEstimate {
    mc_ergodic_rates(csi, beams, phases, samples, seed)[k]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub approx: Vec<f64>,
    pub monte_carlo: Option<Vec<McEstimate>>,
    pub min_rate: f64,
    pub argmin: usize,
    pub terms: Vec<SinrTerms>,
}

/// Approximate rates and SINR terms, plus MC estimates when `mc = Some((samples, seed))`.
pub fn rate_report(
    csi: &StatisticalCsi,
    beams: &BeamformerSet,
    phases: &PhaseConfig,
    mc: Option<(usize, u64)>,
) -> RateReport {
    let terms: Vec<SinrTerms> = (0..csi.num_ues()).map(|k| sinr_terms(csi, beams, phases, k)).collect();
    let approx: Vec<f64> = terms.iter().map(|t| (1.0 + t.sinr()).log2()).collect();
    let (min_rate, argmin) = min_with_index(&approx);
    let monte_carlo = mc.map(|(n, seed)| mc_ergodic_rates(csi, beams, phases, n, seed));
    RateReport { approx, monte_carlo, min_rate, argmin, terms }
}
