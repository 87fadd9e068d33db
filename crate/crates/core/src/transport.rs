//! Transporting states: diabatic continuation of straight spectral lines and
//! their assembly into localized packets on the original lattice.
//!
//! The rotated-frame fiber obeys `H(κ + Δ)` restricted to `p + 1` equals
//! `H(κ) + F·d` on `p`, with `Δ = 2παd`. A straight line of slope `v*` is
//! mapped onto itself, so following it over one cell `[κ0, κ0 + Δ]` fixes it
//! on the whole κ axis: `b_p(κ + nΔ) = e^{inφ} b_{p−n}(κ)`.

use std::f64::consts::TAU;
use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bands::{band_structure, uniform_grid, SpectrumResult};
use crate::error::{Error, Result};
use crate::gauge::gauge_phase;
use crate::lattice::{from_extended, on_sublattice, ExtendedIndex, SiteIndex};
use crate::model::{Gauge, ModelConfig};
use crate::observables::linear_fit;
use crate::packet::{PacketGauge, WavePacket};
use crate::strip::StripLattice;

/// Overlap below which the continuation switches to a projection onto the
/// eigenvectors sharing the previous vector.
pub const DIABATIC_OVERLAP: f64 = 0.9;
/// Overlap below which a line is declared lost.
pub const LOST_OVERLAP: f64 = 0.5;
/// Smallest overlap entering the projected continuation.
const PROJECTION_CUTOFF: f64 = 0.05;
/// Smallest overlap of a near-degenerate partner entering the projection.
const PARTNER_CUTOFF: f64 = 1e-4;
/// Envelope weights below this are dropped.
pub const ENVELOPE_CUTOFF: f64 = 1e-14;

/// Self-similarity of a line under the covariance shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariantCell {
    /// `Δ = 2παd`
    pub shift: f64,
    /// `φ` in `b(κ0 + Δ) = e^{iφ} S b(κ0)`
    pub phase: f64,
    /// `|⟨S b(κ0)|b(κ0 + Δ)⟩|`
    pub closure: f64,
}

#[derive(Debug, Clone)]
pub struct DiabaticLine {
    pub kappa_samples: Vec<f64>,
    pub energies: Vec<f64>,
    /// Column `j` is `b(κ_j)` on the window rows `p_min..=p_max`.
    pub vectors: DMatrix<Complex64>,
    pub window: (i64, i64),
    /// Least-squares `dE/dκ`.
    pub slope: f64,
    /// Smallest successive overlap met while following.
    pub min_overlap: f64,
    /// Set when the line was followed over one covariance cell; the samples
    /// then cover `[κ0, κ0 + Δ)` uniformly.
    pub cell: Option<CovariantCell>,
}

impl DiabaticLine {
    /// Largest second difference `‖b_{j+1} − 2b_j + b_{j−1}‖` along the
    /// samples, across the cell joint when the line is covariant. Isolated
    /// spikes mark crossings sampled close to their centre.
    pub fn roughness(&self) -> f64 {
        let n = self.kappa_samples.len() as i64;
        let rows = self.vectors.nrows();
        let col = |j: i64| -> Vec<Complex64> {
            let (shift, jj) = match self.cell {
                Some(_) => (j.div_euclid(n), j.rem_euclid(n) as usize),
                None => (0, j.clamp(0, n - 1) as usize),
            };
            let ph = self.cell.map_or(Complex64::new(1.0, 0.0), |c| Complex64::from_polar(1.0, shift as f64 * c.phase));
            (0..rows as i64)
                .map(|i| {
                    let src = i - shift;
                    if (0..rows as i64).contains(&src) {
                        self.vectors[(src as usize, jj)] * ph
                    } else {
                        Complex64::default()
                    }
                })
                .collect()
        };
        let range = if self.cell.is_some() { 0..n } else { 1..n - 1 };
        range
            .map(|j| {
                let (a, b, c) = (col(j - 1), col(j), col(j + 1));
                (0..rows).map(|i| (a[i] - b[i] * 2.0 + c[i]).norm_sqr()).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Mean `p` of sample `j`.
    pub fn centre(&self, j: usize) -> f64 {
        self.vectors
            .column(j)
            .iter()
            .enumerate()
            .map(|(i, z)| (self.window.0 + i as i64) as f64 * z.norm_sqr())
            .sum()
    }
}

struct Step {
    energy: f64,
    vector: Vec<Complex64>,
    overlap: f64,
}

/// One continuation step. `near` is the energy range within which a partner
/// with non-negligible overlap signals an avoided crossing sampled close to
/// its centre; such partners enter the projection even when the best
/// overlap is high.
fn continue_line(prev: &[Complex64], values: &[f64], vectors: &DMatrix<Complex64>, kappa: f64, near: f64) -> Result<Step> {
    let ov: Vec<Complex64> = (0..values.len())
        .map(|j| vectors.column(j).iter().zip(prev).map(|(e, b)| e.conj() * b).sum())
        .collect();
    let (best, best_abs) = ov
        .iter()
        .enumerate()
        .map(|(j, z)| (j, z.norm()))
        .fold((usize::MAX, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    if best == usize::MAX {
        return Err(Error::LineLost { kappa, overlap: 0.0 });
    }
    let e_best = values[best];
    let partner = |j: usize| j != best && ov[j].norm() > PARTNER_CUTOFF && (values[j] - e_best).abs() < near;
    let mixed = best_abs < DIABATIC_OVERLAP;
    if !mixed && !(0..values.len()).any(partner) {
        let c = ov[best] / best_abs;
        return Ok(Step { energy: e_best, vector: vectors.column(best).iter().map(|z| z * c).collect(), overlap: best_abs });
    }
    // the crossing is resolved on the grid: keep the diabatic state as the
    // projection of the previous vector on the eigenvectors it overlaps
    let mut v = vec![Complex64::default(); prev.len()];
    let (mut w, mut e) = (0.0, 0.0);
    for (j, z) in ov.iter().enumerate() {
        if j == best || partner(j) || (mixed && z.norm() > PROJECTION_CUTOFF) {
            for (a, b) in v.iter_mut().zip(vectors.column(j).iter()) {
                *a += b * z;
            }
            w += z.norm_sqr();
            e += z.norm_sqr() * values[j];
        }
    }
    let overlap = w.sqrt();
    if overlap < LOST_OVERLAP {
        return Err(Error::LineLost { kappa, overlap: overlap.max(best_abs) });
    }
    v.iter_mut().for_each(|z| *z /= overlap);
    Ok(Step { energy: e / w, vector: v, overlap })
}

/// Bound on `|dE/dκ|` of any fiber band: `d (q Jx + r Jy)`.
fn max_band_slope(config: &ModelConfig) -> f64 {
    match config.rq() {
        Ok((r, q)) => config.scales().d.unwrap_or(1.0) * (q as f64 * config.jx + r as f64 * config.jy),
        Err(_) => config.jx + config.jy,
    }
}

fn follow_from(
    spectrum: &SpectrumResult,
    order: &[(usize, f64)],
    start: Vec<Complex64>,
    energy: f64,
    config: &ModelConfig,
) -> Result<DiabaticLine> {
    let v_max = max_band_slope(config);
    let vecs = spectrum.eigenvectors.as_ref().ok_or(Error::MissingEigenvectors)?;
    let (_, k0) = order[0];
    let size = start.len();
    let mut cur = start;
    let mut kappas = vec![k0];
    let mut energies = vec![energy];
    let mut cols = vec![cur.clone()];
    let mut min_overlap = 1.0f64;
    let mut k_prev = k0;
    for &(i, k) in &order[1..] {
        let near = 4.0 * v_max * (k - k_prev).abs();
        k_prev = k;
        let step = continue_line(&cur, &spectrum.energies[i], &vecs[i], k, near)?;
        min_overlap = min_overlap.min(step.overlap);
        cur = step.vector;
        kappas.push(k);
        energies.push(step.energy);
        cols.push(cur.clone());
    }
    let slope = if kappas.len() > 1 { linear_fit(&kappas, &energies)?.0 } else { 0.0 };
    Ok(DiabaticLine {
        vectors: DMatrix::from_fn(size, cols.len(), |r, c| cols[c][r]),
        kappa_samples: kappas,
        energies,
        window: spectrum.window,
        slope,
        min_overlap,
        cell: None,
    })
}

fn follow_indices(spectrum: &SpectrumResult, order: &[(usize, f64)], band: usize, config: &ModelConfig) -> Result<DiabaticLine> {
    let vecs = spectrum.eigenvectors.as_ref().ok_or(Error::MissingEigenvectors)?;
    let i0 = order[0].0;
    let row0 = &spectrum.energies[i0];
    if band >= row0.len() {
        return Err(Error::InvalidArgument(format!("band {band} not among the {} retained states", row0.len())));
    }
    let start = vecs[i0].column(band).iter().copied().collect();
    follow_from(spectrum, order, start, row0[band], config)
}

/// Follows band `band` (index among the retained states at the grid point
/// nearest `kappa0`) to the end of the grid by maximal eigenvector overlap.
/// When the grid spans one operator period the walk wraps around and ends
/// back at `kappa0 + period`.
pub fn follow_line(spectrum: &SpectrumResult, kappa0: f64, band: usize, config: &ModelConfig) -> Result<DiabaticLine> {
    let g = &spectrum.kappa_grid;
    if g.is_empty() {
        return Err(Error::GridMismatch("empty grid".into()));
    }
    let i0 = (0..g.len()).min_by(|&a, &b| (g[a] - kappa0).abs().total_cmp(&(g[b] - kappa0).abs())).unwrap();
    let mut order: Vec<(usize, f64)> = (i0..g.len()).map(|i| (i, g[i])).collect();
    if let Some(p) = spectrum.period {
        order.extend((0..=i0).map(|i| (i, g[i] + p)));
    }
    follow_indices(spectrum, &order, band, config)
}

/// Seed for [`follow_line_covariant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineSeed {
    /// Index among the retained states at `κ0`.
    Band(usize),
    /// Best-closing line with slope within 20% of `v*`.
    Auto,
}

/// Default half-width of the Stark window around the line.
pub fn default_half_window(config: &ModelConfig) -> Result<i64> {
    let (_, q) = config.rq()?;
    let d = config.scales().d.unwrap_or(1.0);
    if !(config.field > 0.0) {
        return Err(Error::DivisionByZero("line continuation at zero field"));
    }
    Ok((4.0 * (config.jx + config.jy) / (config.field * d)).ceil() as i64 + 12 * q + 12)
}

fn shifted_overlap(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // ⟨S a|b⟩ with (S a)_i = a_{i−1}
    (1..a.len()).map(|i| a[i - 1].conj() * b[i]).sum()
}

/// Follows a line over one covariance cell `[κ0, κ0 + Δ]` with `n_sub`
/// steps on the window `±half_window` around `p = 0`.
pub fn follow_line_covariant(
    config: &ModelConfig,
    kappa0: f64,
    seed: LineSeed,
    n_sub: usize,
    half_window: Option<i64>,
) -> Result<DiabaticLine> {
    if config.alpha == 0.0 {
        return Err(Error::DivisionByZero("covariance shift 2παd"));
    }
    if n_sub < 2 {
        return Err(Error::InvalidArgument("n_sub must be at least 2".into()));
    }
    let scales = config.scales();
    let d = scales.d.ok_or(Error::IrrationalDirection)?;
    let hw = match half_window {
        Some(h) => h,
        None => default_half_window(config)?,
    };
    let shift = TAU * config.alpha * d;
    let mut grid = uniform_grid(kappa0, shift, n_sub);
    grid.push(kappa0 + shift);
    let spectrum = band_structure(config, &grid, (-hw, hw), None, true)?;
    let order: Vec<(usize, f64)> = grid.iter().copied().enumerate().collect();
    let v_star = scales.v_star()?;

    let close = |band: usize| -> Result<DiabaticLine> {
        // the eigenvector at κ0 may sit on a sampled crossing; restart from
        // the continued vector mapped back by one cell
        let pass = follow_indices(&spectrum, &order, band, config)?;
        let first: Vec<Complex64> = pass.vectors.column(0).iter().copied().collect();
        let last: Vec<Complex64> = pass.vectors.column(n_sub).iter().copied().collect();
        let o = shifted_overlap(&first, &last);
        if o.norm() < LOST_OVERLAP {
            return Err(Error::LineLost { kappa: kappa0 + shift, overlap: o.norm() });
        }
        let back = Complex64::from_polar(1.0, -o.arg());
        let mut start: Vec<Complex64> = (0..last.len()).map(|i| if i + 1 < last.len() { last[i + 1] * back } else { Complex64::default() }).collect();
        let nrm = start.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        start.iter_mut().for_each(|z| *z /= nrm);
        let mut line = follow_from(&spectrum, &order, start, pass.energies[n_sub] - config.field * d, config)?;
        let first: Vec<Complex64> = line.vectors.column(0).iter().copied().collect();
        let last: Vec<Complex64> = line.vectors.column(n_sub).iter().copied().collect();
        let o = shifted_overlap(&first, &last);
        let closure = o.norm();
        if closure < LOST_OVERLAP {
            return Err(Error::LineLost { kappa: kappa0 + shift, overlap: closure });
        }
        line.cell = Some(CovariantCell { shift, phase: o.arg(), closure });
        line.min_overlap = line.min_overlap.min(closure);
        line.kappa_samples.pop();
        line.energies.pop();
        line.vectors = line.vectors.columns(0, n_sub).into_owned();
        Ok(line)
    };

    match seed {
        LineSeed::Band(b) => close(b),
        LineSeed::Auto => {
            let span = v_star * TAU / d;
            let e_lo = -0.5 * span;
            let candidates: Vec<usize> = spectrum.energies[0]
                .iter()
                .enumerate()
                .filter(|(_, &e)| e >= e_lo && e < e_lo + span)
                .map(|(j, _)| j)
                .collect();
            let mut best: Option<(f64, DiabaticLine)> = None;
            let mut best_overlap = 0.0f64;
            for j in candidates {
                let Ok(line) = close(j) else { continue };
                best_overlap = best_overlap.max(line.min_overlap);
                if ((line.slope - v_star) / v_star).abs() > 0.2 {
                    continue;
                }
                let rough = line.roughness();
                if best.as_ref().map_or(true, |(r, _)| rough < *r) {
                    best = Some((rough, line));
                }
            }
            best.map(|(_, l)| l).ok_or(Error::LineLost { kappa: kappa0, overlap: best_overlap })
        }
    }
}

/// `g(κ) = exp(−C (dκ/2π)²)` about `centre`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEnvelope {
    pub c: f64,
}

pub fn gaussian_envelope(c: f64) -> Result<GaussianEnvelope> {
    if !(c > 0.0) {
        return Err(Error::NonpositiveC(c));
    }
    Ok(GaussianEnvelope { c })
}

impl GaussianEnvelope {
    pub fn value(&self, kappa: f64, centre: f64, d: f64) -> f64 {
        let x = d * (kappa - centre) / TAU;
        (-self.c * x * x).exp()
    }

    /// Half-width in κ beyond which `g < ENVELOPE_CUTOFF`.
    pub fn reach(&self, d: f64) -> f64 {
        TAU / d * ((1.0 / ENVELOPE_CUTOFF).ln() / self.c).sqrt()
    }

    /// Weights on `kappas`, normalized to unit sum.
    pub fn weights(&self, kappas: &[f64], centre: f64, d: f64) -> Vec<f64> {
        let w: Vec<f64> = kappas.iter().map(|&k| self.value(k, centre, d)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| if s > 0.0 { x / s } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TransportingState {
    /// Non-negligible amplitudes, sorted by `(l, m)`.
    pub sites: Vec<(SiteIndex, Complex64)>,
    pub c: f64,
    pub gauge: Gauge,
    /// Configuration the line was computed for.
    pub config: ModelConfig,
    pub slope: f64,
    /// Line energy at the envelope centre.
    pub energy: f64,
    pub kappa_centre: f64,
    /// Probability in the outer tenth of the computed `s` range (aliasing
    /// diagnostic of the κ quadrature).
    pub alias_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleOptions {
    /// Half-range of the along-line index `s`; defaults to half the alias
    /// period of the κ quadrature, capped at 200.
    pub s_half: Option<i64>,
    /// Amplitudes with `|Ψ|²` below this (after normalization) are dropped.
    pub drop_below: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions { s_half: None, drop_below: 1e-30 }
    }
}

/// Quadrature of `Φ_{s,p} = ∫ g(κ) b_p(κ) e^{isdκ} dκ` restricted to the
/// original sublattice. Lines with a covariance cell are extended over the
/// whole range where `g ≥ ENVELOPE_CUTOFF`, centred so the packet sits at
/// `p ≈ 0`; other lines use their own samples with trapezoid weights,
/// centred on their middle sample.
pub fn assemble(line: &DiabaticLine, c: f64, config: &ModelConfig, opts: AssembleOptions) -> Result<TransportingState> {
    let env = gaussian_envelope(c)?;
    let (r, q) = config.rq()?;
    let d = config.scales().d.ok_or(Error::IrrationalDirection)?;
    let n_s = line.kappa_samples.len();
    if n_s == 0 {
        return Err(Error::GridMismatch("line has no samples".into()));
    }
    let rows = line.vectors.nrows();

    // (κ, weight, phase, shift, column)
    let mut terms: Vec<(f64, f64, Complex64, i64, usize)> = Vec::new();
    let (kappa_centre, energy, alias_period);
    match line.cell {
        Some(cell) => {
            let h = cell.shift / n_s as f64;
            let n_c = -(line.centre(0).round() as i64);
            kappa_centre = line.kappa_samples[0] + n_c as f64 * cell.shift;
            energy = line.energies[0] + n_c as f64 * config.field * d;
            let reach = env.reach(d);
            let n_lo = ((kappa_centre - reach - line.kappa_samples[0]) / cell.shift).floor() as i64;
            let n_hi = ((kappa_centre + reach - line.kappa_samples[0]) / cell.shift).ceil() as i64;
            for n in n_lo..=n_hi {
                let ph = Complex64::from_polar(1.0, n as f64 * cell.phase);
                for j in 0..n_s {
                    let k = line.kappa_samples[j] + n as f64 * cell.shift;
                    let g = env.value(k, kappa_centre, d);
                    if g >= ENVELOPE_CUTOFF {
                        terms.push((k, g * h, ph, n, j));
                    }
                }
            }
            alias_period = TAU / (d * h);
        }
        None => {
            let mid = n_s / 2;
            kappa_centre = line.kappa_samples[mid];
            energy = line.energies[mid];
            let ks = &line.kappa_samples;
            for j in 0..n_s {
                let lo = if j > 0 { ks[j] - ks[j - 1] } else { 0.0 };
                let hi = if j + 1 < n_s { ks[j + 1] - ks[j] } else { 0.0 };
                let g = env.value(ks[j], kappa_centre, d);
                terms.push((ks[j], 0.5 * (lo + hi) * g, Complex64::new(1.0, 0.0), 0, j));
            }
            let h_min = ks.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            alias_period = if h_min.is_finite() { TAU / (d * h_min) } else { 2.0 * 200.0 };
        }
    }
    let s_half = opts.s_half.unwrap_or_else(|| ((0.5 * alias_period).floor() as i64 - 1).clamp(1, 200));
    let n_min = terms.iter().map(|t| t.3).min().unwrap_or(0);
    let n_max = terms.iter().map(|t| t.3).max().unwrap_or(0);
    let p_lo = line.window.0 + n_min;
    let width = (line.window.1 - line.window.0) as usize + 1 + (n_max - n_min) as usize;

    let rows_out: Vec<(i64, Vec<Complex64>)> = (-s_half..=s_half)
        .into_par_iter()
        .map(|s| {
            let mut acc = vec![Complex64::default(); width];
            for &(k, w, ph, n, j) in &terms {
                let a = ph * Complex64::from_polar(w, s as f64 * d * k);
                let off = (n - n_min) as usize;
                for (i, b) in line.vectors.column(j).iter().enumerate().take(rows) {
                    acc[off + i] += a * b;
                }
            }
            (s, acc)
        })
        .collect();

    let mut sites = Vec::new();
    let (mut total, mut edge) = (0.0, 0.0);
    let edge_from = s_half as f64 * 0.8;
    for (s, acc) in rows_out {
        for (i, z) in acc.into_iter().enumerate() {
            let p = p_lo + i as i64;
            let idx = ExtendedIndex::new(s, p);
            if !on_sublattice(idx, r, q) {
                continue;
            }
            let site = from_extended(idx, r, q).expect("sublattice checked");
            total += z.norm_sqr();
            if (s.abs() as f64) > edge_from {
                edge += z.norm_sqr();
            }
            sites.push((site, z));
        }
    }
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("assembled state vanishes".into()));
    }
    let scale = 1.0 / total.sqrt();
    sites.retain(|(_, z)| z.norm_sqr() * scale * scale >= opts.drop_below);
    let kept: f64 = sites.iter().map(|(_, z)| z.norm_sqr()).sum();
    let scale = 1.0 / kept.sqrt();
    sites.iter_mut().for_each(|(_, z)| *z *= scale);
    sites.sort_by_key(|(s, _)| (s.l, s.m));
    Ok(TransportingState {
        sites,
        c,
        gauge: Gauge::Rotated,
        config: config.with_gauge(Gauge::Rotated),
        slope: line.slope,
        energy,
        kappa_centre,
        alias_mass: edge / total,
    })
}

impl TransportingState {
    pub fn norm_sqr(&self) -> f64 {
        self.sites.iter().map(|(_, z)| z.norm_sqr()).sum()
    }

    pub fn amplitude(&self, l: i64, m: i64) -> Complex64 {
        self.sites
            .binary_search_by_key(&(l, m), |(s, _)| (s.l, s.m))
            .map(|i| self.sites[i].1)
            .unwrap_or_default()
    }

    /// Probability-weighted mean site.
    pub fn centre(&self) -> (f64, f64) {
        self.sites
            .iter()
            .fold((0.0, 0.0), |(x, y), (s, z)| (x + s.l as f64 * z.norm_sqr(), y + s.m as f64 * z.norm_sqr()))
    }

    /// Drops the faint tail farther than `radius` from the centre along the
    /// transport direction (orthogonal to the field) and renormalizes.
    /// Returns the truncated state and the discarded probability.
    pub fn truncated(&self, radius: f64) -> Result<(TransportingState, f64)> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("truncation radius must be positive, got {radius}")));
        }
        let (ux, uy) = self.config.direction.unit();
        let (xc, yc) = self.centre();
        let eta_c = uy * xc - ux * yc;
        let mut out = self.clone();
        out.sites.retain(|(s, _)| (uy * s.l as f64 - ux * s.m as f64 - eta_c).abs() <= radius);
        let kept = out.norm_sqr();
        let scale = 1.0 / kept.sqrt();
        out.sites.iter_mut().for_each(|(_, z)| *z *= scale);
        Ok((out, self.norm_sqr() - kept))
    }

    /// Same state in another static gauge of the construction configuration.
    pub fn to_gauge(&self, target: Gauge) -> Result<TransportingState> {
        let mut out = self.clone();
        if target != self.gauge {
            for (s, z) in out.sites.iter_mut() {
                *z *= gauge_phase(self.gauge, target, *s, &self.config)?;
            }
            out.gauge = target;
            out.config = self.config.with_gauge(target);
        }
        Ok(out)
    }

    /// Places the state on `strip` in gauge `target`; returns the packet and
    /// the probability falling outside the strip.
    pub fn to_packet(&self, strip: Arc<StripLattice>, target: Gauge) -> Result<(WavePacket, f64)> {
        let g = self.to_gauge(target)?;
        Ok(WavePacket::from_sites(strip, g.sites.iter().map(|(s, z)| (s.l, s.m, *z)), PacketGauge::Static(target)))
    }

    /// Rows `(l, m, Re, Im)` after a plain-text header.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> io::Result<()> {
        for h in header {
            writeln!(out, "# {h}")?;
        }
        writeln!(out, "# C = {}", self.c)?;
        writeln!(out, "# gauge = {}", self.gauge.name())?;
        writeln!(out, "# slope = {:.12e}", self.slope)?;
        writeln!(out, "# energy = {:.12e}", self.energy)?;
        writeln!(out, "# kappa_centre = {:.12e}", self.kappa_centre)?;
        writeln!(out, "l,m,re,im")?;
        for (s, z) in &self.sites {
            writeln!(out, "{},{},{:.15e},{:.15e}", s.l, s.m, z.re, z.im)?;
        }
        Ok(())
    }
}

/// Transporting state of the automatically seeded line at `κ0 = 0`.
pub fn default_transporting_state(config: &ModelConfig, c: f64) -> Result<TransportingState> {
    let line = follow_line_covariant(config, 0.0, LineSeed::Auto, 32, None)?;
    assemble(&line, c, config, AssembleOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::build_fiber_rotated_frame;
    use crate::eigen::solve_fiber;
    use crate::lattice::to_extended;
    use crate::patch::patch_hamiltonian;

    #[test]
    fn bloch_states_of_the_fiber_are_lattice_eigenstates() {
        for &(r, q) in &[(0, 1), (1, 1), (1, 2), (2, 3)] {
            let c = ModelConfig::rational(1.3, r, q, 0.17).with_gauge(Gauge::Rotated);
            let d = c.scales().d.unwrap();
            let kappa = 0.37;
            let op = build_fiber_rotated_frame(kappa, &c, (-60, 60)).unwrap();
            let sol = solve_fiber(&op, true).unwrap();
            let v = sol.vectors.unwrap();
            let j = sol.values.iter().enumerate().min_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0;
            let e = sol.values[j];
            let (lr, mr) = ((-6, 6), (-6, 6));
            let h = patch_hamiltonian(&c, lr, mr).unwrap();
            let w = (mr.1 - mr.0 + 1) as usize;
            let psi = nalgebra::DVector::from_fn(h.nrows(), |i, _| {
                let (l, m) = (lr.0 + (i / w) as i64, mr.0 + (i % w) as i64);
                let x = to_extended(SiteIndex::new(l, m), r, q);
                v[((x.p + 60) as usize, j)] * Complex64::from_polar(1.0, x.s as f64 * d * kappa)
            });
            let res = &h * &psi - &psi * Complex64::new(e, 0.0);
            for i in 0..h.nrows() {
                let (l, m) = (lr.0 + (i / w) as i64, mr.0 + (i % w) as i64);
                if l.abs() < 6 && m.abs() < 6 {
                    assert!(res[i].norm() < 1e-10, "({r},{q}) site ({l},{m}): {}", res[i].norm());
                }
            }
        }
    }

    #[test]
    fn decoupled_limit_follows_sorted_bands() {
        let c = ModelConfig::rational(0.3, 0, 1, 0.1).with_hopping(0.0, 1.0);
        let s = band_structure(&c, &uniform_grid(0.0, 1.0, 12), (-40, 40), None, true).unwrap();
        let line = follow_line(&s, 0.0, 7, &c).unwrap();
        for (i, e) in line.energies.iter().enumerate() {
            assert!((e - s.energies[i][7]).abs() < 1e-12);
        }
        assert!(line.slope.abs() < 1e-12 && line.min_overlap > 1.0 - 1e-12);
    }

    #[test]
    fn missing_vectors_and_bad_widths() {
        let c = ModelConfig::rational(0.3, 0, 1, 0.1);
        let s = band_structure(&c, &[0.0, 0.1], (-40, 40), None, false).unwrap();
        assert_eq!(follow_line(&s, 0.0, 0, &c).unwrap_err(), Error::MissingEigenvectors);
        assert_eq!(gaussian_envelope(0.0).unwrap_err(), Error::NonpositiveC(0.0));
    }

    #[test]
    fn envelope_limits() {
        let g = gaussian_envelope(1e6).unwrap();
        let ks: Vec<f64> = (-10..=10).map(|i| 0.1 * i as f64).collect();
        let w = g.weights(&ks, 0.0, 1.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(w[10] > 1.0 - 1e-10);
    }

    #[test]
    fn covariant_line_has_drift_slope_and_closes() {
        let c = ModelConfig::rational(0.1, 0, 1, 0.1);
        let line = follow_line_covariant(&c, 0.0, LineSeed::Auto, 32, None).unwrap();
        let v = c.scales().v_star().unwrap();
        assert!(((line.slope - v) / v).abs() < 0.05, "{} vs {v}", line.slope);
        assert!(line.cell.unwrap().closure > 0.99);
    }

    #[test]
    fn assembled_state_is_normalized_and_gauge_convertible() {
        let c = ModelConfig::rational(0.1, 0, 1, 0.1);
        let st = default_transporting_state(&c, 1.0).unwrap();
        assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
        // crossings sampled near their centre leave a faint tail along the line
        assert!(st.alias_mass < 1e-7, "{}", st.alias_mass);
        let back = st.to_gauge(Gauge::LandauX).unwrap().to_gauge(Gauge::Rotated).unwrap();
        for ((_, a), (_, b)) in st.sites.iter().zip(&back.sites) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn truncation_keeps_the_core() {
        let c = ModelConfig::rational(0.1, 0, 1, 0.1);
        let st = default_transporting_state(&c, 3.0).unwrap();
        let (cut, dropped) = st.truncated(30.0).unwrap();
        assert!(dropped > 0.0 && dropped < 1e-6);
        assert!((cut.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(cut.sites.iter().all(|(s, _)| s.l.abs() <= 30));
        assert!(st.truncated(0.0).is_err());
    }
}
