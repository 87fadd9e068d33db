//! Site-dependent phases relating the three supported vector potentials.
//!
//! Every gauge is described by a real function `chi(l, m)` measured from the
//! Landau-y gauge, so a state in gauge `A` becomes `exp(i(chi_B − chi_A)) ψ`
//! in gauge `B`. The map therefore composes exactly.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::SiteIndex;
use crate::model::{Gauge, ModelConfig};

/// Gauge function relative to [`Gauge::LandauY`].
pub fn gauge_function(gauge: Gauge, site: SiteIndex, config: &ModelConfig) -> Result<f64> {
    let (l, m) = (site.l as f64, site.m as f64);
    let alpha = config.alpha;
    match gauge {
        Gauge::LandauY => Ok(0.0),
        Gauge::LandauX => Ok(-TAU * alpha * l * m),
        Gauge::Rotated => {
            let (r, q) = config
                .direction
                .rational()
                .ok_or(Error::UnsupportedGaugePair { from: "landau-y", to: "rotated" })?;
            let (r, q) = (r as f64, q as f64);
            let theta = TAU * alpha / (r * r + q * q);
            // l² − l and m² − m are even, so the halves stay integral
            Ok(theta
                * (0.5 * q * r * (l * l - l) - r * r * l * m - 0.5 * r * q * (m * m - m)))
        }
    }
}

/// Phase converting amplitudes expressed in `from` into `to` at one site.
pub fn gauge_phase(from: Gauge, to: Gauge, site: SiteIndex, config: &ModelConfig) -> Result<Complex64> {
    if from == to {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let names = Error::UnsupportedGaugePair { from: from.name(), to: to.name() };
    let a = gauge_function(from, site, config).map_err(|_| names.clone())?;
    let b = gauge_function(to, site, config).map_err(|_| names)?;
    Ok(Complex64::from_polar(1.0, b - a))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Gauge; 3] = [Gauge::LandauX, Gauge::LandauY, Gauge::Rotated];

    #[test]
    fn landau_y_to_x_is_minus_two_pi_alpha_lm() {
        let c = ModelConfig::rational(0.3, 1, 2, 0.1);
        for &(l, m) in &[(1, 1), (3, -2), (-5, 7)] {
            let ph = gauge_phase(Gauge::LandauY, Gauge::LandauX, SiteIndex::new(l, m), &c).unwrap();
            let want = Complex64::from_polar(1.0, -TAU * 0.1 * (l * m) as f64);
            assert!((ph - want).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_and_unit_modulus() {
        let c = ModelConfig::rational(0.3, 2, 3, 0.37);
        for g in ALL {
            let s = SiteIndex::new(4, -9);
            assert_eq!(gauge_phase(g, g, s, &c).unwrap(), Complex64::new(1.0, 0.0));
            for h in ALL {
                assert!((gauge_phase(g, h, s, &c).unwrap().norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cocycle() {
        let c = ModelConfig::rational(0.3, 1, 3, 0.1);
        for l in -6..6 {
            for m in -6..6 {
                let s = SiteIndex::new(l, m);
                for a in ALL {
                    for b in ALL {
                        for d in ALL {
                            let lhs = gauge_phase(a, b, s, &c).unwrap() * gauge_phase(b, d, s, &c).unwrap();
                            let rhs = gauge_phase(a, d, s, &c).unwrap();
                            assert!((lhs - rhs).norm() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rotated_needs_rational_direction() {
        let c = ModelConfig::irrational(0.3, 0.5, 0.1);
        let err = gauge_phase(Gauge::LandauX, Gauge::Rotated, SiteIndex::new(1, 1), &c).unwrap_err();
        assert_eq!(err, Error::UnsupportedGaugePair { from: "landau-x", to: "rotated" });
    }
}
