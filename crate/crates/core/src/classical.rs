//! The effective one-dimensional classical system and its driven-torus form.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    pub y: f64,
    pub p: f64,
    pub t: f64,
}

impl ClassicalState {
    pub fn new(y: f64, p: f64) -> Self {
        ClassicalState { y, p, t: 0.0 }
    }

    /// Coordinates wrapped to `[−π, π)`.
    pub fn wrapped(&self) -> (f64, f64) {
        (wrap(self.y), wrap(self.p))
    }
}

pub fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Classic fourth-order Runge–Kutta.
    Rk4,
    /// Second-order Strang splitting with exact sub-flows; symplectic.
    Splitting,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    /// Unwrapped states at every recorded step.
    pub samples: Vec<ClassicalState>,
    /// Integral of the motion at each sample.
    pub energies: Vec<f64>,
    pub config: ModelConfig,
    /// Largest `|I(t) − I(0)|` over the run.
    pub drift: f64,
    /// Set when the drift exceeds `1e-6` per unit time.
    pub step_too_large: bool,
}

struct Driven {
    jpx: f64,
    jpy: f64,
    wx: f64,
    wy: f64,
}

impl Driven {
    fn new(config: &ModelConfig) -> Self {
        let (fx, fy) = config.field_components();
        Driven {
            jpx: TAU * config.alpha * config.jx,
            jpy: TAU * config.alpha * config.jy,
            wx: fx,
            wy: fy,
        }
    }

    fn rhs(&self, t: f64, y: f64, p: f64) -> (f64, f64) {
        (self.jpy * (p - self.wy * t).sin(), -self.jpx * (y + self.wx * t).sin())
    }

    fn rk4(&self, s: ClassicalState, h: f64) -> ClassicalState {
        let (t, y, p) = (s.t, s.y, s.p);
        let k1 = self.rhs(t, y, p);
        let k2 = self.rhs(t + 0.5 * h, y + 0.5 * h * k1.0, p + 0.5 * h * k1.1);
        let k3 = self.rhs(t + 0.5 * h, y + 0.5 * h * k2.0, p + 0.5 * h * k2.1);
        let k4 = self.rhs(t + h, y + h * k3.0, p + h * k3.1);
        ClassicalState {
            y: y + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            p: p + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            t: t + h,
        }
    }

    // kick in P at frozen time
    fn kick(&self, s: &mut ClassicalState, h: f64) {
        s.p -= h * self.jpx * (s.y + self.wx * s.t).sin();
    }

    // exact drift in Y while the clock advances
    fn drift(&self, s: &mut ClassicalState, h: f64) {
        if self.wy.abs() < 1e-12 {
            s.y += h * self.jpy * s.p.sin();
        } else {
            let a = s.p - self.wy * s.t;
            let b = s.p - self.wy * (s.t + h);
            s.y += self.jpy / self.wy * (b.cos() - a.cos());
        }
        s.t += h;
    }

    fn split(&self, mut s: ClassicalState, h: f64) -> ClassicalState {
        self.kick(&mut s, 0.5 * h);
        self.drift(&mut s, h);
        self.kick(&mut s, 0.5 * h);
        s
    }

    fn step(&self, s: ClassicalState, h: f64, scheme: Scheme) -> ClassicalState {
        match scheme {
            Scheme::Rk4 => self.rk4(s, h),
            Scheme::Splitting => self.split(s, h),
        }
    }

    fn hamiltonian(&self, s: &ClassicalState) -> f64 {
        -self.jpy * (s.p - self.wy * s.t).cos() - self.jpx * (s.y + self.wx * s.t).cos()
    }

    fn invariant(&self, s: &ClassicalState) -> f64 {
        self.hamiltonian(s) + self.wy * s.y + self.wx * s.p
    }
}

/// `H = −Jy cos P − Jx cos Y + 𝓕_y Y + 𝓕_x P` with `𝓕 = F/(2πα)`.
pub fn h_autonomous(state: &ClassicalState, config: &ModelConfig) -> Result<f64> {
    let (sfx, sfy) = config.scales().scaled_fields()?;
    Ok(-config.jy * state.p.cos() - config.jx * state.y.cos() + sfy * state.y + sfx * state.p)
}

/// Hamilton's equations of `H(t) = −J′y cos(P − ω_y t) − J′x cos(Y + ω_x t)`.
pub fn rhs_driven(t: f64, state: &ClassicalState, config: &ModelConfig) -> (f64, f64) {
    Driven::new(config).rhs(t, state.y, state.p)
}

/// `H(t) + ω_y Y + ω_x P`, exactly conserved by the driven flow.
pub fn integral_of_motion(t: f64, state: &ClassicalState, config: &ModelConfig) -> f64 {
    let s = ClassicalState { t, ..*state };
    Driven::new(config).invariant(&s)
}

/// Driven Hamiltonian `H(t)` alone.
pub fn h_driven(t: f64, state: &ClassicalState, config: &ModelConfig) -> f64 {
    let s = ClassicalState { t, ..*state };
    Driven::new(config).hamiltonian(&s)
}

/// Fixed-step integration from `state0.t` to `t_end`, recording every step.
pub fn integrate(state0: ClassicalState, t_end: f64, dt: f64, config: &ModelConfig, scheme: Scheme) -> Result<TrajectoryRecord> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let sys = Driven::new(config);
    let span = t_end - state0.t;
    let steps = (span / dt).ceil().max(0.0) as usize;
    let h = if steps > 0 { span / steps as f64 } else { dt };
    let mut samples = Vec::with_capacity(steps + 1);
    let mut energies = Vec::with_capacity(steps + 1);
    let mut s = state0;
    let i0 = sys.invariant(&s);
    let mut drift = 0.0f64;
    samples.push(s);
    energies.push(i0);
    for _ in 0..steps {
        s = sys.step(s, h, scheme);
        let i = sys.invariant(&s);
        drift = drift.max((i - i0).abs());
        samples.push(s);
        energies.push(i);
    }
    let step_too_large = span > 0.0 && drift / span > 1e-6;
    Ok(TrajectoryRecord { samples, energies, config: *config, drift, step_too_large })
}

/// Common driving period `T = 2π√N/F` for rational directions.
pub fn driving_period(config: &ModelConfig) -> Result<f64> {
    let (r, q) = config.rq()?;
    if config.field <= 0.0 {
        return Err(Error::InvalidArgument("stroboscopic period requires F > 0".into()));
    }
    Ok(TAU * ((r * r + q * q) as f64).sqrt() / config.field)
}

/// Unwrapped stroboscopic samples in the autonomous frame
/// `(Y + ω_x t, P − ω_y t)` at `t = jT`, `j = 0..=n_periods`.
pub fn stroboscopic_orbit(
    state0: ClassicalState,
    n_periods: usize,
    steps_per_period: usize,
    config: &ModelConfig,
    scheme: Scheme,
) -> Result<Vec<(f64, f64)>> {
    let period = driving_period(config)?;
    let sys = Driven::new(config);
    let h = period / steps_per_period as f64;
    let mut s = ClassicalState { t: 0.0, ..state0 };
    let mut out = Vec::with_capacity(n_periods + 1);
    out.push((s.y, s.p));
    for j in 1..=n_periods {
        for _ in 0..steps_per_period {
            s = sys.step(s, h, scheme);
        }
        let t = j as f64 * period;
        s.t = t;
        out.push((s.y + sys.wx * t, s.p - sys.wy * t));
    }
    Ok(out)
}

/// Stroboscopic map wrapped to the torus, default step `T/1000`.
pub fn stroboscopic_map(state0: ClassicalState, n_periods: usize, config: &ModelConfig) -> Result<Vec<(f64, f64)>> {
    Ok(stroboscopic_orbit(state0, n_periods, 1000, config, Scheme::Rk4)?
        .into_iter()
        .map(|(y, p)| (wrap(y), wrap(p)))
        .collect())
}

/// Poincaré samples at multiples of `2π/ω_y`, for any orientation.
pub fn poincare_section(state0: ClassicalState, n_samples: usize, config: &ModelConfig) -> Result<Vec<(f64, f64)>> {
    let (_, fy) = config.field_components();
    if fy <= 0.0 {
        return Err(Error::InvalidArgument("Poincaré sampling requires F_y > 0".into()));
    }
    let sys = Driven::new(config);
    let period = TAU / fy;
    let steps = 1000;
    let h = period / steps as f64;
    let mut s = ClassicalState { t: 0.0, ..state0 };
    let mut out = Vec::with_capacity(n_samples);
    out.push(s.wrapped());
    for j in 1..n_samples {
        for _ in 0..steps {
            s = sys.step(s, h, Scheme::Rk4);
        }
        s.t = j as f64 * period;
        out.push(s.wrapped());
    }
    Ok(out)
}

/// True when the orbit stays inside a `2π` window in both coordinates.
pub fn is_bounded(orbit: &[(f64, f64)]) -> bool {
    let span = |f: fn(&(f64, f64)) -> f64| {
        let (lo, hi) = orbit.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        hi - lo
    };
    span(|s| s.0) < TAU && span(|s| s.1) < TAU
}

/// `count` seeds evenly spaced on the `P = 0` axis over `[−π, π)`.
pub fn default_seed_grid(count: usize) -> Vec<ClassicalState> {
    (0..count).map(|j| ClassicalState::new(-PI + TAU * j as f64 / count as f64, 0.0)).collect()
}

/// Fraction of seeds whose stroboscopic orbit stays bounded.
pub fn island_scan(config: &ModelConfig, seeds: &[ClassicalState], n_periods: usize) -> Result<f64> {
    if seeds.is_empty() {
        return Ok(0.0);
    }
    let flags = seeds
        .par_iter()
        .map(|&s| Ok(is_bounded(&stroboscopic_orbit(s, n_periods, 400, config, Scheme::Rk4)?)))
        .collect::<Result<Vec<bool>>>()?;
    Ok(flags.iter().filter(|&&b| b).count() as f64 / seeds.len() as f64)
}

/// Canonical map `(X̃, P̃) → (Y, P)` relating the operator form of the
/// fiber Hamiltonian to the autonomous classical Hamiltonian.
pub fn from_tilde(x_tilde: f64, p_tilde: f64, r: i64, q: i64) -> (f64, f64) {
    let n = ((r * r + q * q) as f64).sqrt();
    let (r, q) = (r as f64, q as f64);
    ((-r * p_tilde + q * x_tilde) / n, (q * p_tilde + r * x_tilde) / n)
}

/// `−Jx cos((−rP̃ + qX̃)/√N) − Jy cos((qP̃ + rX̃)/√N) + F X̃/(2πα)`.
pub fn h_tilde(x_tilde: f64, p_tilde: f64, config: &ModelConfig) -> Result<f64> {
    let (r, q) = config.rq()?;
    if config.alpha == 0.0 {
        return Err(Error::DivisionByZero("scaled field"));
    }
    let n = ((r * r + q * q) as f64).sqrt();
    let (rf, qf) = (r as f64, q as f64);
    Ok(-config.jx * ((-rf * p_tilde + qf * x_tilde) / n).cos() - config.jy * ((qf * p_tilde + rf * x_tilde) / n).cos()
        + config.field / (TAU * config.alpha) * x_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autonomous_examples() {
        let c = ModelConfig::rational(0.0, 0, 1, 0.1);
        assert_eq!(h_autonomous(&ClassicalState::new(0.0, 0.0), &c).unwrap(), -2.0);
        // 𝓕_x = 𝓕_y = 0.5
        let f = 0.5 * TAU * 0.1 * 2f64.sqrt();
        let c = ModelConfig::rational(f, 1, 1, 0.1);
        let h = h_autonomous(&ClassicalState::new(PI / 2.0, PI / 2.0), &c).unwrap();
        assert!((h - PI / 2.0).abs() < 1e-12);
        let zero = ModelConfig::rational(0.3, 0, 1, 0.0);
        assert_eq!(h_autonomous(&ClassicalState::new(0.0, 0.0), &zero), Err(Error::DivisionByZero("scaled field")));
    }

    #[test]
    fn driven_rhs_examples() {
        let c = ModelConfig::rational(0.3, 1, 2, 0.1);
        assert_eq!(rhs_driven(0.0, &ClassicalState::new(0.0, 0.0), &c), (0.0, 0.0));
        let frozen = c.with_hopping(0.0, 1.0);
        for t in [0.0, 1.3, 7.7] {
            assert_eq!(rhs_driven(t, &ClassicalState::new(0.4, 1.1), &frozen).1, 0.0);
            let (dy, _) = rhs_driven(t, &ClassicalState::new(0.4, 1.1), &c);
            assert!(dy.abs() <= 0.2 * PI + 1e-15);
        }
    }

    #[test]
    fn pendulum_energy_conserved_at_zero_field() {
        let c = ModelConfig::rational(0.0, 0, 1, 0.1);
        let rec = integrate(ClassicalState::new(0.1, 0.0), 50.0, 1e-3, &c, Scheme::Rk4).unwrap();
        let h0 = h_autonomous(&rec.samples[0], &c).unwrap();
        for s in &rec.samples {
            assert!((h_autonomous(s, &c).unwrap() - h0).abs() < 1e-10);
        }
        assert!(!rec.step_too_large);
    }

    #[test]
    fn frozen_dynamics_without_hopping() {
        let c = ModelConfig::rational(0.5, 1, 1, 0.1).with_hopping(0.0, 0.0);
        let rec = integrate(ClassicalState::new(0.3, -0.2), 10.0, 0.01, &c, Scheme::Rk4).unwrap();
        let last = rec.samples.last().unwrap();
        assert_eq!((last.y, last.p), (0.3, -0.2));
        assert_eq!(rec.drift, 0.0);
    }

    #[test]
    fn invariant_is_conserved() {
        let c = ModelConfig::rational(0.45, 1, 2, 0.1);
        let rec = integrate(ClassicalState::new(0.7, -1.2), 100.0, 1e-3, &c, Scheme::Rk4).unwrap();
        assert!(rec.drift < 1e-9, "{}", rec.drift);
    }

    #[test]
    fn convergence_orders() {
        let c = ModelConfig::rational(0.4, 1, 1, 0.1);
        let s0 = ClassicalState::new(0.5, 0.3);
        for (scheme, order) in [(Scheme::Rk4, 4.0), (Scheme::Splitting, 2.0)] {
            let a = integrate(s0, 20.0, 0.2, &c, scheme).unwrap().drift;
            let b = integrate(s0, 20.0, 0.1, &c, scheme).unwrap().drift;
            let observed = (a / b).log2();
            assert!((observed - order).abs() < 0.6, "{scheme:?}: {observed}");
        }
    }

    #[test]
    fn periods() {
        let c = ModelConfig::rational(0.3, 0, 1, 0.1);
        assert!((driving_period(&c).unwrap() - TAU / 0.3).abs() < 1e-12);
        let c = ModelConfig::rational(0.3, 1, 1, 0.1);
        let wy = c.field_components().1;
        assert!((driving_period(&c).unwrap() - TAU / wy).abs() < 1e-12);
        let c = ModelConfig::irrational(0.3, 0.5, 0.1);
        assert_eq!(driving_period(&c).unwrap_err(), Error::IrrationalDirection);
    }

    #[test]
    fn appendix_transformation_reproduces_autonomous_hamiltonian() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for &(r, q) in &[(0, 1), (1, 1), (1, 2), (2, 3)] {
            let c = ModelConfig::rational(0.37, r, q, 0.1);
            for _ in 0..100 {
                let (xt, pt) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
                let (y, p) = from_tilde(xt, pt, r, q);
                let a = h_tilde(xt, pt, &c).unwrap();
                let b = h_autonomous(&ClassicalState::new(y, p), &c).unwrap();
                assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
