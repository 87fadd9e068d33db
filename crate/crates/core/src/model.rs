//! Physical parameters, unit conventions and derived scales.
//!
//! Units are `e = a = ħ = 1`, so Planck's constant is `h = 2π`. All hopping
//! amplitudes enter the tight-binding Hamiltonian as `-J/2` per bond.

use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Error, Result};

/// Orientation of the electric field relative to the lattice axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    /// `F ∝ (r, q)` with coprime integers `0 <= r <= q`.
    Rational { r: i64, q: i64 },
    /// `beta = F_x / F_y`, treated as a real number.
    Irrational { beta: f64 },
}

impl Direction {
    pub fn beta(&self) -> f64 {
        match *self {
            Direction::Rational { r, q } => r as f64 / q as f64,
            Direction::Irrational { beta } => beta,
        }
    }

    pub fn rational(&self) -> Option<(i64, i64)> {
        match *self {
            Direction::Rational { r, q } => Some((r, q)),
            Direction::Irrational { .. } => None,
        }
    }

    /// Unit vector along the field.
    pub fn unit(&self) -> (f64, f64) {
        match *self {
            Direction::Rational { r, q } => {
                let n = ((r * r + q * q) as f64).sqrt();
                (r as f64 / n, q as f64 / n)
            }
            Direction::Irrational { beta } => {
                let n = (1.0 + beta * beta).sqrt();
                (beta / n, 1.0 / n)
            }
        }
    }

    /// Continued-fraction convergents `(r_k, q_k)` of `beta`, at most `count` of them.
    pub fn convergents(&self, count: usize) -> Vec<(i64, i64)> {
        match *self {
            Direction::Rational { r, q } => vec![(r, q)],
            Direction::Irrational { beta } => continued_fraction_convergents(beta, count),
        }
    }
}

/// Convergents of the continued-fraction expansion of `x` in `[0, 1]`.
pub fn continued_fraction_convergents(x: f64, count: usize) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(count);
    // h_{-1}=1, h_{-2}=0, k_{-1}=0, k_{-2}=1
    let (mut h1, mut h2) = (1i64, 0i64);
    let (mut k1, mut k2) = (0i64, 1i64);
    let mut rem = x;
    for _ in 0..count {
        let a = rem.floor();
        let ai = a as i64;
        let h = ai.saturating_mul(h1).saturating_add(h2);
        let k = ai.saturating_mul(k1).saturating_add(k2);
        out.push((h, k));
        h2 = h1;
        h1 = h;
        k2 = k1;
        k1 = k;
        let frac = rem - a;
        if frac.abs() < 1e-12 || k > 1 << 40 {
            break;
        }
        rem = 1.0 / frac;
    }
    out
}

/// Vector-potential choice used to write the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gauge {
    /// `A = B(0, x)`: magnetic phases on the vertical bonds.
    LandauX,
    /// `A = B(-y, 0)`: magnetic phases on the horizontal bonds.
    LandauY,
    /// The gauge adapted to a rational field direction `(r, q)`.
    Rotated,
}

impl Gauge {
    pub fn name(&self) -> &'static str {
        match self {
            Gauge::LandauX => "landau-x",
            Gauge::LandauY => "landau-y",
            Gauge::Rotated => "rotated",
        }
    }

    pub fn parse(s: &str) -> Option<Gauge> {
        match s.trim().to_ascii_lowercase().as_str() {
            "landau-x" | "landaux" | "x" => Some(Gauge::LandauX),
            "landau-y" | "landauy" | "y" => Some(Gauge::LandauY),
            "rotated" => Some(Gauge::Rotated),
            _ => None,
        }
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The full set of physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Electric field amplitude.
    pub field: f64,
    pub direction: Direction,
    /// Peierls phase: magnetic flux per plaquette in units of the flux quantum.
    pub alpha: f64,
    pub jx: f64,
    pub jy: f64,
    pub gauge: Gauge,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            field: 0.0,
            direction: Direction::Rational { r: 0, q: 1 },
            alpha: 0.1,
            jx: 1.0,
            jy: 1.0,
            gauge: Gauge::LandauY,
        }
    }
}

impl ModelConfig {
    pub fn rational(field: f64, r: i64, q: i64, alpha: f64) -> Self {
        ModelConfig {
            field,
            direction: Direction::Rational { r, q },
            alpha,
            ..Default::default()
        }
    }

    pub fn irrational(field: f64, beta: f64, alpha: f64) -> Self {
        ModelConfig {
            field,
            direction: Direction::Irrational { beta },
            alpha,
            ..Default::default()
        }
    }

    pub fn with_hopping(mut self, jx: f64, jy: f64) -> Self {
        self.jx = jx;
        self.jy = jy;
        self
    }

    pub fn with_field(mut self, field: f64) -> Self {
        self.field = field;
        self
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    /// `(r, q)` or [`Error::IrrationalDirection`].
    pub fn rq(&self) -> Result<(i64, i64)> {
        self.direction.rational().ok_or(Error::IrrationalDirection)
    }

    /// `(F_x, F_y)`.
    pub fn field_components(&self) -> (f64, f64) {
        let (ux, uy) = self.direction.unit();
        (self.field * ux, self.field * uy)
    }

    pub fn validate(self) -> Result<ModelConfig> {
        validate(self)
    }

    pub fn scales(&self) -> DerivedScales {
        derive_scales(self)
    }
}

/// Checks parameter ranges. Hopping amplitudes may be zero so that decoupled
/// limits can be studied; negative values are rejected.
pub fn validate(config: ModelConfig) -> Result<ModelConfig> {
    if !(config.field >= 0.0) {
        return Err(Error::NegativeField(config.field));
    }
    if !(config.alpha.abs() <= 0.5) {
        return Err(Error::AlphaOutOfRange(config.alpha));
    }
    if !(config.jx >= 0.0) {
        return Err(Error::NegativeHopping { name: "Jx", value: config.jx });
    }
    if !(config.jy >= 0.0) {
        return Err(Error::NegativeHopping { name: "Jy", value: config.jy });
    }
    match config.direction {
        Direction::Rational { r, q } => {
            if q < 1 || r < 0 || r > q {
                return Err(Error::InvalidDirection { r, q });
            }
            if gcd(r, q) != 1 {
                return Err(Error::NonCoprime { r, q });
            }
        }
        Direction::Irrational { beta } => {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::BetaOutOfRange(beta));
            }
        }
    }
    if config.gauge == Gauge::Rotated && config.direction.rational().is_none() {
        return Err(Error::IrrationalDirection);
    }
    Ok(config)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Quantities derived from a [`ModelConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    pub field_x: f64,
    pub field_y: f64,
    /// Bloch frequencies; equal to the field components in these units.
    pub omega_x: f64,
    pub omega_y: f64,
    /// `r² + q²` (rational directions only).
    pub n: Option<i64>,
    /// Fine spacing `1/√N` of the extended lattice.
    pub d: Option<f64>,
    /// Coarse period `√N` along the transverse direction.
    pub d_tilde: Option<f64>,
    /// `2πα / N`.
    pub theta: Option<f64>,
    /// `2πα J`, with `J = Jx`.
    pub critical_field: f64,
    /// `F / (2πα)`; undefined at `alpha = 0`.
    pub drift_velocity: Option<f64>,
    /// `F_{x,y} / (2πα)`.
    pub scaled_field_x: Option<f64>,
    pub scaled_field_y: Option<f64>,
}

impl DerivedScales {
    pub fn v_star(&self) -> Result<f64> {
        self.drift_velocity.ok_or(Error::DivisionByZero("drift velocity"))
    }

    pub fn scaled_fields(&self) -> Result<(f64, f64)> {
        match (self.scaled_field_x, self.scaled_field_y) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(Error::DivisionByZero("scaled field")),
        }
    }
}

pub fn derive_scales(config: &ModelConfig) -> DerivedScales {
    let (fx, fy) = config.field_components();
    let two_pi_alpha = TAU * config.alpha;
    let defined = config.alpha != 0.0;
    let (n, d, d_tilde, theta) = match config.direction {
        Direction::Rational { r, q } => {
            let n = r * r + q * q;
            let nf = n as f64;
            (
                Some(n),
                Some(1.0 / nf.sqrt()),
                Some(nf.sqrt()),
                Some(2.0 * PI * config.alpha / nf),
            )
        }
        Direction::Irrational { .. } => (None, None, None, None),
    };
    DerivedScales {
        field_x: fx,
        field_y: fy,
        omega_x: fx,
        omega_y: fy,
        n,
        d,
        d_tilde,
        theta,
        critical_field: two_pi_alpha * config.jx,
        drift_velocity: defined.then(|| config.field / two_pi_alpha),
        scaled_field_x: defined.then(|| fx / two_pi_alpha),
        scaled_field_y: defined.then(|| fy / two_pi_alpha),
    }
}

/// The golden-mean orientation `(√5 − 1)/2`.
pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_9;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_non_coprime() {
        let err = ModelConfig::rational(0.3, 2, 4, 0.1).validate().unwrap_err();
        assert_eq!(err, Error::NonCoprime { r: 2, q: 4 });
    }

    #[test]
    fn validate_rejects_large_alpha() {
        let err = ModelConfig::rational(0.3, 0, 1, 0.6).validate().unwrap_err();
        assert_eq!(err, Error::AlphaOutOfRange(0.6));
    }

    #[test]
    fn validate_rejects_negative_field() {
        let err = ModelConfig::rational(-0.1, 0, 1, 0.1).validate().unwrap_err();
        assert_eq!(err, Error::NegativeField(-0.1));
    }

    #[test]
    fn validate_accepts_unchanged() {
        let c = ModelConfig::rational(0.3, 1, 1, 0.1);
        assert_eq!(c.validate().unwrap(), c);
    }

    #[test]
    fn validate_direction_ranges() {
        assert!(ModelConfig::rational(0.3, 2, 1, 0.1).validate().is_err());
        assert!(ModelConfig::rational(0.3, 0, 0, 0.1).validate().is_err());
        assert!(ModelConfig::irrational(0.3, 1.5, 0.1).validate().is_err());
        assert!(ModelConfig::irrational(0.3, GOLDEN_MEAN, 0.1).validate().is_ok());
        let rotated = ModelConfig::irrational(0.3, 0.5, 0.1).with_gauge(Gauge::Rotated);
        assert_eq!(rotated.validate().unwrap_err(), Error::IrrationalDirection);
    }

    #[test]
    fn scales_for_diagonal_field() {
        let s = ModelConfig::rational(1.0, 1, 1, 0.1).scales();
        assert!((s.field_x - 0.70711).abs() < 1e-5);
        assert!((s.field_y - 0.70711).abs() < 1e-5);
        assert_eq!(s.n, Some(2));
        assert!((s.d.unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((s.theta.unwrap() - PI * 0.1).abs() < 1e-15);
    }

    #[test]
    fn drift_velocity_and_critical_field() {
        let s = ModelConfig::rational(0.1, 0, 1, 0.1).scales();
        assert!((s.v_star().unwrap() - 0.15915).abs() < 1e-5);
        assert!((s.critical_field - 0.62832).abs() < 1e-5);
        let zero = ModelConfig::rational(0.1, 0, 1, 0.0).scales();
        assert_eq!(zero.v_star(), Err(Error::DivisionByZero("drift velocity")));
        assert!(zero.scaled_fields().is_err());
    }

    #[test]
    fn field_components_follow_direction() {
        for &(r, q) in &[(0, 1), (1, 1), (1, 2), (2, 3), (3, 7)] {
            let s = ModelConfig::rational(0.7, r, q, 0.1).scales();
            assert!((s.field_x * q as f64 - s.field_y * r as f64).abs() < 1e-15);
            assert!((s.field_x.hypot(s.field_y) - 0.7).abs() < 1e-15);
            let v = s.v_star().unwrap();
            assert!((v * TAU * 0.1 - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn golden_mean_convergents_are_fibonacci_ratios() {
        let c = continued_fraction_convergents(GOLDEN_MEAN, 8);
        assert_eq!(&c[..6], &[(0, 1), (1, 1), (1, 2), (2, 3), (3, 5), (5, 8)]);
    }
}
