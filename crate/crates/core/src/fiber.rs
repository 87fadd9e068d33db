//! κ-parametrized one-dimensional operators obtained by Fourier reduction of
//! the rotated-gauge Hamiltonian along the lines `r·l + q·m = const`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Open Stark window `p_min..=p_max` of the rotated-frame fiber.
    OpenTruncated,
    /// Rotated-basis chains of length `K·q` closed into rings.
    PeriodicFiber,
}

/// One off-diagonal element `H[row][col]`; its Hermitian partner is implied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub row: usize,
    pub col: usize,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberOperator {
    pub size: usize,
    pub kappa: f64,
    pub diagonal: Vec<f64>,
    pub couplings: Vec<Coupling>,
    pub boundary: Boundary,
    /// Line label `u = r·l + q·m` of every row.
    pub labels: Vec<i64>,
}

impl FiberOperator {
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut h = DMatrix::<Complex64>::zeros(self.size, self.size);
        for (i, &d) in self.diagonal.iter().enumerate() {
            h[(i, i)] = Complex64::new(d, 0.0);
        }
        for c in &self.couplings {
            h[(c.row, c.col)] += c.value;
            h[(c.col, c.row)] += c.value.conj();
        }
        h
    }

    /// True when all couplings are real, so a real symmetric solver applies.
    pub fn is_real(&self) -> bool {
        self.couplings.iter().all(|c| c.value.im == 0.0)
    }

    pub fn to_dense_real(&self) -> DMatrix<f64> {
        let mut h = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diagonal));
        for c in &self.couplings {
            h[(c.row, c.col)] += c.value.re;
            h[(c.col, c.row)] += c.value.re;
        }
        h
    }
}

fn rational_parts(config: &ModelConfig) -> Result<(i64, i64, f64, f64)> {
    let (r, q) = config.rq()?;
    let n = (r * r + q * q) as f64;
    Ok((r, q, 1.0 / n.sqrt(), TAU * config.alpha / n))
}

/// Rotated-coordinate-frame fiber on the Stark window `p_min..=p_max`.
///
/// Row `p` holds `F·d·p b_p − (Jx/2)(e^{−iθqp + iqdκ} b_{p+r} + h.c.)
/// − (Jy/2)(e^{iθrp − irdκ} b_{p+q} + h.c.)`. For `r = 0` the `x` terms fold
/// into the diagonal `−Jx·cos(θqp − qdκ)`.
pub fn build_fiber_rotated_frame(kappa: f64, config: &ModelConfig, window: (i64, i64)) -> Result<FiberOperator> {
    let (r, q, d, theta) = rational_parts(config)?;
    let (p_min, p_max) = window;
    let size = if p_max >= p_min { (p_max - p_min + 1) as usize } else { 0 };
    let required = (2 * q + 1) as usize;
    if size < required {
        return Err(Error::WindowTooSmall { size, required });
    }
    let (qf, rf) = (q as f64, r as f64);
    let mut diagonal = Vec::with_capacity(size);
    let mut couplings = Vec::with_capacity(2 * size);
    for i in 0..size {
        let p = p_min + i as i64;
        let pf = p as f64;
        let mut e = config.field * d * pf;
        if r == 0 {
            e -= config.jx * (theta * qf * pf - qf * d * kappa).cos();
        } else if i + (r as usize) < size {
            couplings.push(Coupling {
                row: i,
                col: i + r as usize,
                value: Complex64::from_polar(-0.5 * config.jx, -theta * qf * pf + qf * d * kappa),
            });
        }
        if i + (q as usize) < size {
            couplings.push(Coupling {
                row: i,
                col: i + q as usize,
                value: Complex64::from_polar(-0.5 * config.jy, theta * rf * pf - rf * d * kappa),
            });
        }
        diagonal.push(e);
    }
    Ok(FiberOperator {
        size,
        kappa,
        diagonal,
        couplings,
        boundary: Boundary::OpenTruncated,
        labels: (p_min..=p_max).collect(),
    })
}

/// Rotated-basis fiber: `r` chains `μ = 0..r` of `K·q` sites each, row
/// `μ·Kq + p` carrying the label `u = r·p + q·μ`.
///
/// Chains are closed in `p`; the vertical bond leaving the last chain lands on
/// chain 0 shifted by `q` and carries `e^{ik}`. For `r = 0` there is no
/// transverse period and the operator is the open rotated-frame fiber on
/// `p = 0..K` at `κ = k`.
pub fn build_fiber_rotated_basis(k: f64, config: &ModelConfig, kk: usize) -> Result<FiberOperator> {
    let (r, q, d, theta) = rational_parts(config)?;
    if kk == 0 || kk % 2 != 0 {
        return Err(Error::OddK(kk));
    }
    if r == 0 {
        let mut op = build_fiber_rotated_frame(k, config, (0, kk as i64 - 1))?;
        op.boundary = Boundary::PeriodicFiber;
        return Ok(op);
    }
    let len = kk * q as usize;
    let size = len * r as usize;
    let (qf, rf) = (q as f64, r as f64);
    let index = |p: usize, mu: usize| mu * len + p;
    let mut diagonal = vec![0.0; size];
    let mut labels = vec![0i64; size];
    let mut couplings = Vec::with_capacity(2 * size);
    for mu in 0..r as usize {
        for p in 0..len {
            let u = r * p as i64 + q * mu as i64;
            let uf = u as f64;
            let i = index(p, mu);
            labels[i] = u;
            diagonal[i] = config.field * d * uf;
            // ⟨p+1, μ|H|p, μ⟩
            couplings.push(Coupling {
                row: index((p + 1) % len, mu),
                col: i,
                value: Complex64::from_polar(-0.5 * config.jx, theta * qf * uf),
            });
            let vertical = Complex64::from_polar(-0.5 * config.jy, -theta * rf * uf);
            if mu + 1 < r as usize {
                couplings.push(Coupling { row: index(p, mu + 1), col: i, value: vertical });
            } else {
                couplings.push(Coupling {
                    row: index((p + q as usize) % len, 0),
                    col: i,
                    value: vertical * Complex64::from_polar(1.0, k),
                });
            }
        }
    }
    Ok(FiberOperator {
        size,
        kappa: k,
        diagonal,
        couplings,
        boundary: Boundary::PeriodicFiber,
        labels,
    })
}

/// Rotated-basis quasimomentum `k = √N·κ` folded into `[0, 2π)`.
pub fn basis_k_from_kappa(kappa: f64, config: &ModelConfig) -> Result<f64> {
    let (r, q) = config.rq()?;
    if r == 0 {
        return Ok(kappa);
    }
    let n = (r * r + q * q) as f64;
    Ok((n.sqrt() * kappa).rem_euclid(TAU))
}

/// Period of the rotated-frame operator in κ, `2π/d = 2π√N`.
pub fn operator_period(config: &ModelConfig) -> Result<f64> {
    let (_, _, d, _) = rational_parts(config)?;
    Ok(TAU / d)
}

/// Period of the band set in κ, `2π/√N`.
pub fn spectral_period(config: &ModelConfig) -> Result<f64> {
    let (_, _, d, _) = rational_parts(config)?;
    Ok(TAU * d)
}

/// Integer `c` with `c·q ≡ −r (mod N)`; then `c² ≡ −1` and the diagonal gauge
/// `b_p → e^{2πi c p/N} b_p` maps the fiber at κ onto the fiber at `κ + 2π/√N`.
pub fn spectral_shift_multiplier(r: i64, q: i64) -> i64 {
    let n = r * r + q * q;
    (0..n).find(|c| (c * q + r).rem_euclid(n) == 0).unwrap_or(0)
}
