//! Observed runs and incoherent ensembles.

use rayon::prelude::*;

use crate::error::Result;
use crate::model::ModelConfig;
use crate::observables::{moments, project_eta, EtaDistribution, Moments, ObservableSeries, LEAK_THRESHOLD};
use crate::packet::{boundary_leak, WavePacket};
use crate::propagate::{evolve_static_gauge_with, evolve_td_gauge_with, PropagationStats};

/// Propagation scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// RK4 in the time-dependent gauge with step `dt`.
    TimeDependent { dt: f64 },
    /// Chebyshev expansion of the static Landau-y propagator.
    Static { slice_dt: f64, tol: f64 },
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Static { slice_dt: 1.0, tol: 1e-14 }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub series: ObservableSeries,
    /// Raw moments per sample, kept for ensemble averaging.
    pub moments: Vec<Moments>,
    /// `|ψ(η)|²` at every sample time, if requested.
    pub eta: Vec<EtaDistribution>,
    pub final_state: WavePacket,
    pub stats: PropagationStats,
}

impl RunRecord {
    /// Leak never exceeded [`LEAK_THRESHOLD`].
    pub fn valid(&self) -> bool {
        self.series.max_leak() < LEAK_THRESHOLD
    }
}

/// Evolves `psi0` and records moments (and `|ψ(η)|²` when `eta_bin` is set)
/// at `times`. Moments and leaks are gauge invariant, so the scheme's gauge
/// does not matter.
pub fn evolve_observed(
    psi0: &WavePacket,
    times: &[f64],
    scheme: Scheme,
    config: &ModelConfig,
    eta_bin: Option<f64>,
) -> Result<RunRecord> {
    let mut series = ObservableSeries::default();
    let mut ms = Vec::with_capacity(times.len());
    let mut eta = Vec::new();
    let mut last = None;
    let mut observe = |p: &WavePacket| -> Result<()> {
        let m = moments(p, config);
        series.push(p.time, &m, boundary_leak(p, 0.1));
        ms.push(m);
        if let Some(bw) = eta_bin {
            eta.push(project_eta(p, config, bw)?);
        }
        last = Some(p.clone());
        Ok(())
    };
    let stats = match scheme {
        Scheme::TimeDependent { dt } => evolve_td_gauge_with(psi0, times, dt, config, &mut observe)?,
        Scheme::Static { slice_dt, tol } => evolve_static_gauge_with(psi0, times, slice_dt, config, tol, &mut observe)?,
    };
    Ok(RunRecord { series, moments: ms, eta, final_state: last.unwrap_or_else(|| psi0.clone()), stats })
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// Moments of the averaged probability distribution.
    pub series: ObservableSeries,
    pub eta: Vec<EtaDistribution>,
    /// Mean site probabilities at the last sample time.
    pub final_probabilities: Vec<f64>,
    pub realizations: usize,
    /// Largest norm drift and leak over all realizations.
    pub max_norm_drift: f64,
    pub max_leak: f64,
    /// Largest leak over the realizations at each sample time.
    pub leak_envelope: Vec<f64>,
}

impl EnsembleResult {
    pub fn valid(&self) -> bool {
        self.max_leak < LEAK_THRESHOLD
    }
}

/// Runs every member of `family` and averages probabilities and moments.
/// Members are evolved in parallel; averaging follows the input order.
pub fn ensemble_evolve(
    family: &[WavePacket],
    times: &[f64],
    scheme: Scheme,
    config: &ModelConfig,
    eta_bin: Option<f64>,
) -> Result<EnsembleResult> {
    let runs: Vec<RunRecord> = family
        .par_iter()
        .map(|p| evolve_observed(p, times, scheme, config, eta_bin))
        .collect::<Result<_>>()?;
    let n = runs.len().max(1);
    let samples = runs.first().map_or(0, |r| r.series.len());
    let mut series = ObservableSeries::default();
    for k in 0..samples {
        let per: Vec<Moments> = runs.iter().map(|r| r.moments[k]).collect();
        let leak = runs.iter().map(|r| r.series.leak[k]).sum::<f64>() / n as f64;
        series.push(runs[0].series.times[k], &Moments::average(&per), leak);
    }
    let eta = (0..runs.first().map_or(0, |r| r.eta.len()))
        .map(|k| {
            let items: Vec<EtaDistribution> = runs.iter().map(|r| r.eta[k].clone()).collect();
            EtaDistribution::average(&items).expect("non-empty ensemble")
        })
        .collect();
    let mut final_probabilities = vec![0.0; runs.first().map_or(0, |r| r.final_state.amps.len())];
    for r in &runs {
        for (a, z) in final_probabilities.iter_mut().zip(&r.final_state.amps) {
            *a += z.norm_sqr() / n as f64;
        }
    }
    Ok(EnsembleResult {
        series,
        eta,
        final_probabilities,
        realizations: runs.len(),
        max_norm_drift: runs.iter().map(|r| r.stats.max_norm_drift).fold(0.0, f64::max),
        max_leak: runs.iter().map(|r| r.series.max_leak()).fold(0.0, f64::max),
        leak_envelope: (0..samples).map(|k| runs.iter().map(|r| r.series.leak[k]).fold(0.0, f64::max)).collect(),
    })
}

/// Incoherent Gaussian family: realizations `0..count` of `seed`.
pub fn incoherent_family(
    strip: std::sync::Arc<crate::strip::StripLattice>,
    cx: f64,
    cy: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<WavePacket>> {
    (0..count as u64)
        .map(|r| crate::packet::gaussian_packet_realization(strip.clone(), cx, cy, Some((seed, r))))
        .collect()
}

/// `n + 1` equally spaced times on `[0, t_end]`.
pub fn sample_times(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n.max(1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strip::StripLattice;
    use std::sync::Arc;

    #[test]
    fn single_member_ensemble_equals_single_run() {
        let c = ModelConfig::rational(0.5, 1, 1, 0.1);
        let strip = Arc::new(StripLattice::new(1.0, 12, 10));
        let fam = incoherent_family(strip, 0.5, 0.5, 3, 1).unwrap();
        let times = sample_times(3.0, 6);
        let run = evolve_observed(&fam[0], &times, Scheme::default(), &c, Some(0.5)).unwrap();
        let ens = ensemble_evolve(&fam, &times, Scheme::default(), &c, Some(0.5)).unwrap();
        for k in 0..times.len() {
            assert!((run.series.m2_eta[k] - ens.series.m2_eta[k]).abs() < 1e-14);
            assert!((run.series.sigma[k] - ens.series.sigma[k]).abs() < 1e-12);
        }
        assert_eq!(run.eta, ens.eta);
        assert_eq!(run.series.leak, ens.leak_envelope);
    }

    #[test]
    fn ensembles_are_deterministic() {
        let c = ModelConfig::irrational(0.5, 0.3, 0.1);
        let strip = Arc::new(StripLattice::new(0.3, 10, 8));
        let times = sample_times(2.0, 4);
        let run = || {
            let fam = incoherent_family(strip.clone(), 0.3, 0.3, 11, 3).unwrap();
            ensemble_evolve(&fam, &times, Scheme::TimeDependent { dt: 0.01 }, &c, None).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.series, b.series);
        assert_eq!(a.final_probabilities, b.final_probabilities);
    }
}
