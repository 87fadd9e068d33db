//! Strong-field expansions of the fiber spectrum and their comparison with
//! exact diagonalization.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::bands::uniform_grid;
use crate::eigen::solve_fiber;
use crate::error::{Error, Result};
use crate::fiber::{build_fiber_rotated_frame, spectral_period};
use crate::model::ModelConfig;

/// Below `F = STRONG_FIELD_RATIO·max(Jx, Jy)` the expansions are flagged.
pub const STRONG_FIELD_RATIO: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbativeBand {
    pub nu: i64,
    /// Order of the leading κ-dependent term.
    pub order: i64,
    pub prefactor: f64,
    /// `q + r − 1`: the band width falls as `F^{-exponent}`.
    pub exponent: i64,
    /// Unperturbed Stark level `F·d·ν`.
    pub e0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrder {
    pub energy: f64,
    /// `(m, b_m)` pairs of the first-order eigenvector.
    pub amplitudes: Vec<(i64, f64)>,
    /// False when `F` is below the strong-field threshold.
    pub strong_field: bool,
}

pub fn is_strong_field(config: &ModelConfig) -> bool {
    config.field > STRONG_FIELD_RATIO * config.jx.max(config.jy)
}

/// First-order band `E = F·ν − Jx·cos(2πα·ν − κ)` and eigenvector for a
/// field along `y`.
pub fn first_order_01(nu: i64, kappa: f64, config: &ModelConfig) -> Result<FirstOrder> {
    let (r, q) = config.rq()?;
    if (r, q) != (0, 1) {
        return Err(Error::WrongDirection { expected: "(0, 1)", r, q });
    }
    if config.field == 0.0 {
        return Err(Error::DivisionByZero("first-order eigenvector"));
    }
    let energy = config.field * nu as f64 - config.jx * (TAU * config.alpha * nu as f64 - kappa).cos();
    let c = config.jy / (2.0 * config.field);
    Ok(FirstOrder {
        energy,
        amplitudes: vec![(nu - 1, -c), (nu, 1.0), (nu + 1, c)],
        strong_field: is_strong_field(config),
    })
}

/// Second-order shift for the diagonal direction `(1, 1)`:
/// `(JxJy/2dF)[cos(2πα(ν−1) − 2dκ) − cos(2παν − 2dκ)]`.
pub fn second_order_11(nu: i64, kappa: f64, config: &ModelConfig) -> Result<f64> {
    let (r, q) = config.rq()?;
    if (r, q) != (1, 1) {
        return Err(Error::WrongDirection { expected: "(1, 1)", r, q });
    }
    if config.field == 0.0 {
        return Err(Error::DivisionByZero("second-order shift"));
    }
    let d = 1.0 / 2f64.sqrt();
    let a = TAU * config.alpha;
    let nu = nu as f64;
    Ok(config.jx * config.jy / (2.0 * d * config.field)
        * ((a * (nu - 1.0) - 2.0 * d * kappa).cos() - (a * nu - 2.0 * d * kappa).cos()))
}

/// `Λ = (−Jx)^q (−Jy)^r / (2^{q+r} F^{q+r−1})`.
pub fn leading_prefactor(r: i64, q: i64, field: f64, jx: f64, jy: f64) -> f64 {
    let n = (q + r) as i32;
    (-jx).powi(q as i32) * (-jy).powi(r as i32) / (2f64.powi(n) * field.powi(n - 1))
}

/// `(1 − q − r, q + r − 1)`: band-width and transient-time exponents in `F`.
pub fn scaling_exponents(r: i64, q: i64) -> (i64, i64) {
    (1 - q - r, q + r - 1)
}

pub fn perturbative_band(nu: i64, config: &ModelConfig) -> Result<PerturbativeBand> {
    let (r, q) = config.rq()?;
    let d = 1.0 / ((r * r + q * q) as f64).sqrt();
    Ok(PerturbativeBand {
        nu,
        order: if r == 0 { 1 } else { q + r },
        prefactor: leading_prefactor(r, q, config.field, config.jx, config.jy),
        exponent: q + r - 1,
        e0: config.field * d * nu as f64,
    })
}

/// Exact energies of the Stark level `ν` on a κ grid spanning one band period.
///
/// Valid in the strong-field regime where levels stay separated; the
/// eigenvalue nearest to `F·d·ν` is taken at each κ.
pub fn exact_band(nu: i64, config: &ModelConfig, n_kappa: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (r, q) = config.rq()?;
    if config.field <= 0.0 {
        return Err(Error::InvalidArgument("exact band requires F > 0".into()));
    }
    let n = (r * r + q * q) as f64;
    let fd = config.field / n.sqrt();
    // Stark localization length in sites, with generous margin
    let reach = (4.0 * (config.jx + config.jy) / fd).ceil() as i64 + 12 * q + 12;
    let window = (nu - reach, nu + reach);
    let grid = uniform_grid(0.0, spectral_period(config)?, n_kappa);
    let e0 = fd * nu as f64;
    let energies = grid
        .par_iter()
        .map(|&kappa| {
            let op = build_fiber_rotated_frame(kappa, config, window)?;
            let sol = solve_fiber(&op, false)?;
            Ok(sol
                .values
                .into_iter()
                .min_by(|a, b| (a - e0).abs().total_cmp(&(b - e0).abs()))
                .expect("non-empty window"))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((grid, energies))
}

/// Width `max − min` of the exact Stark band `ν`.
pub fn exact_band_width(nu: i64, config: &ModelConfig, n_kappa: usize) -> Result<f64> {
    let (_, e) = exact_band(nu, config, n_kappa)?;
    let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = e.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}
