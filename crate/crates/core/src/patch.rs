//! Static two-dimensional Hamiltonians in each gauge and dense finite-patch
//! matrices built from them.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Gauge, ModelConfig};

/// Hopping and on-site terms of the static Hamiltonian in one gauge.
///
/// `forward_x(l, m)` is the matrix element `⟨l+1, m|H|l, m⟩`, `forward_y(l, m)`
/// is `⟨l, m+1|H|l, m⟩`.
#[derive(Debug, Clone, Copy)]
pub struct StaticHamiltonian {
    jx: f64,
    jy: f64,
    alpha: f64,
    fx: f64,
    fy: f64,
    gauge: Gauge,
    rq: (f64, f64),
    theta: f64,
}

impl StaticHamiltonian {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        let (fx, fy) = config.field_components();
        let (rq, theta) = match config.direction.rational() {
            Some((r, q)) => {
                let n = (r * r + q * q) as f64;
                ((r as f64, q as f64), TAU * config.alpha / n)
            }
            None if config.gauge == Gauge::Rotated => return Err(Error::IrrationalDirection),
            None => ((0.0, 1.0), 0.0),
        };
        Ok(StaticHamiltonian {
            jx: config.jx,
            jy: config.jy,
            alpha: config.alpha,
            fx,
            fy,
            gauge: config.gauge,
            rq,
            theta,
        })
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn onsite(&self, l: i64, m: i64) -> f64 {
        self.fx * l as f64 + self.fy * m as f64
    }

    pub fn forward_x(&self, l: i64, m: i64) -> Complex64 {
        let a = -0.5 * self.jx;
        match self.gauge {
            Gauge::LandauY => Complex64::from_polar(a, TAU * self.alpha * m as f64),
            Gauge::LandauX => Complex64::new(a, 0.0),
            Gauge::Rotated => {
                let (r, q) = self.rq;
                let u = r * l as f64 + q * m as f64;
                Complex64::from_polar(a, self.theta * q * u)
            }
        }
    }

    pub fn forward_y(&self, l: i64, m: i64) -> Complex64 {
        let a = -0.5 * self.jy;
        match self.gauge {
            Gauge::LandauY => Complex64::new(a, 0.0),
            Gauge::LandauX => Complex64::from_polar(a, -TAU * self.alpha * l as f64),
            Gauge::Rotated => {
                let (r, q) = self.rq;
                let u = r * l as f64 + q * m as f64;
                Complex64::from_polar(a, -self.theta * r * u)
            }
        }
    }
}

/// Dense Hamiltonian on the open rectangle `[l0, l1] × [m0, m1]`.
/// Site `(l, m)` has index `(l − l0)·(m1 − m0 + 1) + (m − m0)`.
pub fn patch_hamiltonian(config: &ModelConfig, l_range: (i64, i64), m_range: (i64, i64)) -> Result<DMatrix<Complex64>> {
    let h = StaticHamiltonian::new(config)?;
    let (l0, l1) = l_range;
    let (m0, m1) = m_range;
    if l1 < l0 || m1 < m0 {
        return Err(Error::InvalidArgument("empty patch".into()));
    }
    let wm = (m1 - m0 + 1) as usize;
    let n = (l1 - l0 + 1) as usize * wm;
    let idx = |l: i64, m: i64| (l - l0) as usize * wm + (m - m0) as usize;
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    for l in l0..=l1 {
        for m in m0..=m1 {
            let i = idx(l, m);
            mat[(i, i)] = Complex64::new(h.onsite(l, m), 0.0);
            if l < l1 {
                let j = idx(l + 1, m);
                let t = h.forward_x(l, m);
                mat[(j, i)] += t;
                mat[(i, j)] += t.conj();
            }
            if m < m1 {
                let j = idx(l, m + 1);
                let t = h.forward_y(l, m);
                mat[(j, i)] += t;
                mat[(i, j)] += t.conj();
            }
        }
    }
    Ok(mat)
}
