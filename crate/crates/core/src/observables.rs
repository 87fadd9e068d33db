//! Moments, projections, fits and regime classification of evolved packets.
//!
//! The rotated frame uses the field unit vector `(u_x, u_y)`:
//! `ξ = u_x x + u_y y` along the field and `η = u_y x − u_x y` across it.

use std::f64::consts::TAU;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::packet::{boundary_leak, WavePacket};
use crate::strip::StripLattice;

/// Minimum number of samples accepted by the fits.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Leak threshold above which samples are excluded from fits.
pub const LEAK_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub x_mean: f64,
    pub y_mean: f64,
    /// `Σ (x² + y²) |ψ|²`
    pub m2: f64,
    /// `√(M₂ − x̄² − ȳ²)`
    pub sigma: f64,
    pub eta_mean: f64,
    pub xi_mean: f64,
    /// Raw second moments `Σ η² |ψ|²`, `Σ ξ² |ψ|²`.
    pub m2_eta: f64,
    pub m2_xi: f64,
}

impl Moments {
    pub fn var_eta(&self) -> f64 {
        (self.m2_eta - self.eta_mean * self.eta_mean).max(0.0)
    }

    pub fn var_xi(&self) -> f64 {
        (self.m2_xi - self.xi_mean * self.xi_mean).max(0.0)
    }

    fn finish(mut self) -> Self {
        self.sigma = (self.m2 - self.x_mean * self.x_mean - self.y_mean * self.y_mean).max(0.0).sqrt();
        self
    }

    fn scaled(mut self, s: f64) -> Self {
        self.x_mean *= s;
        self.y_mean *= s;
        self.m2 *= s;
        self.eta_mean *= s;
        self.xi_mean *= s;
        self.m2_eta *= s;
        self.m2_xi *= s;
        self
    }

    fn add(&mut self, o: &Moments) {
        self.x_mean += o.x_mean;
        self.y_mean += o.y_mean;
        self.m2 += o.m2;
        self.eta_mean += o.eta_mean;
        self.xi_mean += o.xi_mean;
        self.m2_eta += o.m2_eta;
        self.m2_xi += o.m2_xi;
    }

    /// Mean of the raw moments with `σ` recomputed from the means, i.e. the
    /// moments of the averaged probability distribution.
    pub fn average(items: &[Moments]) -> Moments {
        let mut acc = Moments::default();
        for m in items {
            acc.add(m);
        }
        acc.scaled(1.0 / items.len().max(1) as f64).finish()
    }
}

/// Moments of a probability distribution over strip rows.
pub fn moments_of(probs: &[f64], strip: &StripLattice, unit: (f64, f64)) -> Moments {
    let (ux, uy) = unit;
    let mut m = Moments::default();
    for (i, &w) in probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (l, mm) = strip.site(i);
        let (x, y) = (l as f64, mm as f64);
        let eta = uy * x - ux * y;
        let xi = ux * x + uy * y;
        m.x_mean += w * x;
        m.y_mean += w * y;
        m.m2 += w * (x * x + y * y);
        m.eta_mean += w * eta;
        m.xi_mean += w * xi;
        m.m2_eta += w * eta * eta;
        m.m2_xi += w * xi * xi;
    }
    m.finish()
}

/// Moments of a normalized packet in the frame of `config`'s field direction.
pub fn moments(psi: &WavePacket, config: &ModelConfig) -> Moments {
    moments_of(&psi.probabilities(), &psi.strip, config.direction.unit())
}

/// Binned `|ψ(η)|²`; bin `j` is centred at `(first_bin + j)·bin_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaDistribution {
    pub bin_width: f64,
    pub first_bin: i64,
    pub weights: Vec<f64>,
}

impl EtaDistribution {
    pub fn centre(&self, j: usize) -> f64 {
        (self.first_bin + j as i64) as f64 * self.bin_width
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Element-wise mean; all inputs must share the binning.
    pub fn average(items: &[EtaDistribution]) -> Option<EtaDistribution> {
        let first = items.first()?;
        let mut out = first.clone();
        for it in &items[1..] {
            assert_eq!((it.first_bin, it.weights.len()), (first.first_bin, first.weights.len()), "binning differs");
            for (a, b) in out.weights.iter_mut().zip(&it.weights) {
                *a += b;
            }
        }
        let s = 1.0 / items.len() as f64;
        out.weights.iter_mut().for_each(|w| *w *= s);
        Some(out)
    }
}

/// Default `η` bin width: the extended-lattice spacing `1/√N` for rational
/// directions, one lattice spacing otherwise.
pub fn default_bin_width(config: &ModelConfig) -> f64 {
    config.scales().d.unwrap_or(1.0)
}

/// Probability summed over `ξ` in bins of width `bin_width` along `η`. The
/// bin range covers the whole strip, so runs on one strip share binning.
pub fn project_eta_probs(probs: &[f64], strip: &StripLattice, unit: (f64, f64), bin_width: f64) -> EtaDistribution {
    let (ux, uy) = unit;
    let bin = |i: usize| {
        let (l, m) = strip.site(i);
        ((uy * l as f64 - ux * m as f64) / bin_width).round() as i64
    };
    let (mut lo, mut hi) = (i64::MAX, i64::MIN);
    for i in 0..strip.len() {
        let b = bin(i);
        lo = lo.min(b);
        hi = hi.max(b);
    }
    let mut weights = vec![0.0; (hi - lo + 1).max(0) as usize];
    for (i, &w) in probs.iter().enumerate() {
        weights[(bin(i) - lo) as usize] += w;
    }
    EtaDistribution { bin_width, first_bin: lo, weights }
}

pub fn project_eta(psi: &WavePacket, config: &ModelConfig, bin_width: f64) -> Result<EtaDistribution> {
    if !(bin_width > 0.0) {
        return Err(Error::InvalidArgument(format!("bin width {bin_width} must be positive")));
    }
    Ok(project_eta_probs(&psi.probabilities(), &psi.strip, config.direction.unit(), bin_width))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub sigma: Vec<f64>,
    pub m2_eta: Vec<f64>,
    pub m2_xi: Vec<f64>,
    pub eta_mean: Vec<f64>,
    pub leak: Vec<f64>,
}

impl ObservableSeries {
    pub fn push(&mut self, t: f64, m: &Moments, leak: f64) {
        self.times.push(t);
        self.x_mean.push(m.x_mean);
        self.y_mean.push(m.y_mean);
        self.sigma.push(m.sigma);
        self.m2_eta.push(m.m2_eta);
        self.m2_xi.push(m.m2_xi);
        self.eta_mean.push(m.eta_mean);
        self.leak.push(leak);
    }

    /// Records the moments of `psi` with the outer-10% leak.
    pub fn record(&mut self, psi: &WavePacket, config: &ModelConfig) {
        self.push(psi.time, &moments(psi, config), boundary_leak(psi, 0.1));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sqrt_m2_eta(&self) -> Vec<f64> {
        self.m2_eta.iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn max_leak(&self) -> f64 {
        self.leak.iter().copied().fold(0.0, f64::max)
    }

    /// Rows `t,x_mean,y_mean,sigma,sqrt_m2_eta,leak` after `#` header lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> io::Result<()> {
        for h in header {
            writeln!(out, "# {h}")?;
        }
        writeln!(out, "t,x_mean,y_mean,sigma,sqrt_m2_eta,leak")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.10e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e}",
                self.times[i],
                self.x_mean[i],
                self.y_mean[i],
                self.sigma[i],
                self.m2_eta[i].max(0.0).sqrt(),
                self.leak[i]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// Slope for linear fits, prefactor for power laws.
    pub coefficient: f64,
    /// Power-law exponent; 1 for linear fits.
    pub exponent: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub residual: f64,
    pub samples: usize,
}

impl FitResult {
    pub fn summary(&self, name: &str) -> String {
        format!(
            "[{name}]\ncoefficient = {:.10e}\nexponent = {:.10e}\nintercept = {:.10e}\nwindow = {:.6e} {:.6e}\nresidual = {:.6e}\nsamples = {}\n",
            self.coefficient, self.exponent, self.intercept, self.window.0, self.window.1, self.residual, self.samples
        )
    }
}

/// Least squares `y ≈ a x + b`; returns `(a, b, √(SS_res/SS_tot))`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return Err(Error::WindowTooShort { samples: n.min(y.len()), required: 2 });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("degenerate abscissae in linear fit".into()));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(u, v)| (v - a * u - b).powi(2)).sum();
    let residual = if ss_tot > 0.0 { (ss_res / ss_tot).sqrt() } else if ss_res == 0.0 { 0.0 } else { f64::INFINITY };
    Ok((a, b, residual))
}

/// Slope `A` of `√m2_eta` against `t` over `window`.
pub fn ballistic_fit(series: &ObservableSeries, window: (f64, f64)) -> Result<FitResult> {
    let root = series.sqrt_m2_eta();
    let (t, v): (Vec<f64>, Vec<f64>) = series
        .times
        .iter()
        .zip(&root)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if t.len() < MIN_FIT_SAMPLES {
        return Err(Error::WindowTooShort { samples: t.len(), required: MIN_FIT_SAMPLES });
    }
    let (a, b, residual) = linear_fit(&t, &v)?;
    Ok(FitResult { coefficient: a, exponent: 1.0, intercept: b, window, residual, samples: t.len() })
}

/// Log–log fit `A = c·F^γ` over `(F, A)` pairs; the residual is the rms
/// deviation in `ln A`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::WindowTooShort { samples: points.len(), required: 4 });
    }
    if points.iter().any(|&(f, a)| !(f > 0.0 && a > 0.0)) {
        return Err(Error::NonpositiveData);
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (g, b, _) = linear_fit(&lx, &ly)?;
    let rms = (lx.iter().zip(&ly).map(|(x, y)| (y - g * x - b).powi(2)).sum::<f64>() / lx.len() as f64).sqrt();
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult { coefficient: b.exp(), exponent: g, intercept: b, window: (lo, hi), residual: rms, samples: points.len() })
}

/// Floor for the initial `√m2_eta` used in growth ratios, so a single-site
/// start does not make every ratio infinite.
const INITIAL_WIDTH_FLOOR: f64 = 0.5;

fn initial_width(series: &ObservableSeries) -> f64 {
    series.m2_eta.first().map(|v| v.max(0.0).sqrt()).unwrap_or(0.0).max(INITIAL_WIDTH_FLOOR)
}

/// First time `√m2_eta` exceeds twice its initial value; `+∞` if never.
pub fn transient_estimate(series: &ObservableSeries) -> f64 {
    let w0 = initial_width(series);
    series
        .times
        .iter()
        .zip(series.sqrt_m2_eta())
        .find(|(_, v)| *v > 2.0 * w0)
        .map(|(t, _)| *t)
        .unwrap_or(f64::INFINITY)
}

/// Default ballistic window: from `max(transient, 10% of the horizon)` to
/// the last sample before the leak first exceeds [`LEAK_THRESHOLD`].
pub fn default_fit_window(series: &ObservableSeries) -> (f64, f64) {
    let (Some(&t0), Some(&t1)) = (series.times.first(), series.times.last()) else {
        return (0.0, 0.0);
    };
    let start = transient_estimate(series).min(t1).max(t0 + 0.1 * (t1 - t0));
    let end = series
        .times
        .iter()
        .zip(&series.leak)
        .take_while(|(_, l)| **l <= LEAK_THRESHOLD)
        .last()
        .map(|(t, _)| *t)
        .unwrap_or(t0);
    (start, end)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationFit {
    pub amplitude: f64,
    pub omega: f64,
    pub offset: f64,
    /// `√(SS_res/SS_tot)` of the single-frequency model.
    pub residual: f64,
}

fn sinusoid_residual(t: &[f64], v: &[f64], omega: f64) -> (f64, f64, f64, f64) {
    // least squares v ≈ c0 + c1 cos ωt + c2 sin ωt via 3×3 normal equations
    let mut a = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (&ti, &vi) in t.iter().zip(v) {
        let b = [1.0, (omega * ti).cos(), (omega * ti).sin()];
        for r in 0..3 {
            rhs[r] += b[r] * vi;
            for c in 0..3 {
                a[r][c] += b[r] * b[c];
            }
        }
    }
    let m = nalgebra::Matrix3::from_fn(|r, c| a[r][c]);
    let sol = m.lu().solve(&nalgebra::Vector3::from(rhs)).unwrap_or_default();
    let ss: f64 = t
        .iter()
        .zip(v)
        .map(|(&ti, &vi)| (vi - sol[0] - sol[1] * (omega * ti).cos() - sol[2] * (omega * ti).sin()).powi(2))
        .sum();
    (ss, sol[0], sol[1], sol[2])
}

/// Fits `v(t) ≈ c + A cos(ωt + φ)` with `ω` searched within ±10% of
/// `omega_guess` (dense scan, then golden-section refinement).
pub fn fit_oscillation(times: &[f64], values: &[f64], omega_guess: f64) -> Result<OscillationFit> {
    if times.len() < MIN_FIT_SAMPLES || times.len() != values.len() {
        return Err(Error::WindowTooShort { samples: times.len().min(values.len()), required: MIN_FIT_SAMPLES });
    }
    if !(omega_guess > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency guess {omega_guess} must be positive")));
    }
    let cost = |w: f64| sinusoid_residual(times, values, w).0;
    let (lo, hi) = (0.9 * omega_guess, 1.1 * omega_guess);
    let n = 400;
    let mut best = (f64::INFINITY, omega_guess);
    for j in 0..=n {
        let w = lo + (hi - lo) * j as f64 / n as f64;
        let c = cost(w);
        if c < best.0 {
            best = (c, w);
        }
    }
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let omega = 0.5 * (a + b);
    let (ss, c0, c1, c2) = sinusoid_residual(times, values, omega);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss_tot: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let residual = if ss_tot > 0.0 { (ss / ss_tot).sqrt() } else { 0.0 };
    Ok(OscillationFit { amplitude: c1.hypot(c2), omega, offset: c0, residual })
}

fn power_at(times: &[f64], centred: &[f64], omega: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (&t, &v) in times.iter().zip(centred) {
        re += v * (omega * t).cos();
        im -= v * (omega * t).sin();
    }
    re * re + im * im
}

/// Peak power within ±3% of `omega` over the median power of the discrete
/// spectrum between the lowest resolved frequency and Nyquist.
pub fn spectral_peak_ratio(times: &[f64], values: &[f64], omega: f64) -> f64 {
    let n = times.len();
    if n < MIN_FIT_SAMPLES || !(omega > 0.0) {
        return 0.0;
    }
    let span = times[n - 1] - times[0];
    let dt = span / (n - 1) as f64;
    let mean = values.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let w_min = TAU / span;
    let w_max = std::f64::consts::PI / dt;
    if omega > w_max {
        return 0.0;
    }
    let mut background: Vec<f64> = (1..n / 2).map(|k| power_at(times, &centred, w_min * k as f64)).filter(|p| p.is_finite()).collect();
    if background.is_empty() {
        return 0.0;
    }
    background.sort_by(|a, b| a.total_cmp(b));
    let median = background[background.len() / 2];
    let peak = (0..=30)
        .map(|j| power_at(times, &centred, omega * (0.97 + 0.06 * j as f64 / 30.0)))
        .fold(0.0, f64::max);
    if median > 0.0 {
        peak / median
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Transporting,
    Ballistic,
    Localized,
    Oscillating,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Transporting => "transporting",
            Regime::Ballistic => "ballistic",
            Regime::Localized => "localized",
            Regime::Oscillating => "oscillating",
        }
    }
}

/// Each score is at least 1 exactly when its criterion holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeScores {
    pub transporting: f64,
    pub ballistic: f64,
    pub localized: f64,
    pub oscillating: f64,
}

impl RegimeScores {
    pub fn as_array(&self) -> [f64; 4] {
        [self.transporting, self.ballistic, self.localized, self.oscillating]
    }
}

pub fn regime_scores(series: &ObservableSeries, config: &ModelConfig) -> Result<RegimeScores> {
    let n = series.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::WindowTooShort { samples: n, required: MIN_FIT_SAMPLES });
    }
    let horizon = series.times[n - 1] - series.times[0];
    let scales = config.scales();

    let transporting = match scales.drift_velocity {
        Some(v) if v > 0.0 && horizon > 0.0 => {
            let disp = (series.x_mean[n - 1] - series.x_mean[0]).hypot(series.y_mean[n - 1] - series.y_mean[0]);
            let s0 = series.sigma[0].max(INITIAL_WIDTH_FLOOR);
            let growth = series.sigma.iter().map(|s| (s - series.sigma[0]).abs() / s0).fold(0.0, f64::max);
            (disp / (0.9 * v * horizon)).min(if growth > 0.0 { 0.2 / growth } else { f64::INFINITY })
        }
        _ => 0.0,
    };

    let w0 = initial_width(series);
    let root = series.sqrt_m2_eta();
    let max_ratio = root.iter().fold(0.0f64, |a, &b| a.max(b)) / w0;
    let localized = if max_ratio > 0.0 { 3.0 / max_ratio } else { f64::INFINITY };

    let ballistic = {
        let window = default_fit_window(series);
        match ballistic_fit(series, window) {
            Ok(fit) if fit.coefficient > 0.0 => {
                let growth = root[n - 1] / w0 / 3.0;
                (0.1 / fit.residual.max(1e-300)).min(growth)
            }
            _ => 0.0,
        }
    };

    let oscillating = {
        let (wx, wy) = (scales.omega_x, scales.omega_y);
        let px = spectral_peak_ratio(&series.times, &series.x_mean, wx);
        let py = spectral_peak_ratio(&series.times, &series.y_mean, wy);
        px.max(py) / 5.0
    };

    Ok(RegimeScores { transporting, ballistic, localized, oscillating })
}

/// First satisfied regime in the order transporting, ballistic, localized,
/// oscillating; `Ambiguous` (carrying the scores) if none holds.
pub fn classify_regime(series: &ObservableSeries, config: &ModelConfig) -> Result<Regime> {
    let s = regime_scores(series, config)?;
    let order = [
        (s.transporting, Regime::Transporting),
        (s.ballistic, Regime::Ballistic),
        (s.localized, Regime::Localized),
        (s.oscillating, Regime::Oscillating),
    ];
    order
        .iter()
        .find(|(score, _)| *score >= 1.0)
        .map(|(_, r)| *r)
        .ok_or(Error::Ambiguous { scores: s.as_array() })
}
