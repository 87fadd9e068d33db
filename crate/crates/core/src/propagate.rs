//! Time evolution on a strip: explicit RK4 in the time-dependent gauge and a
//! sliced Chebyshev expansion of the static Landau-y propagator.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bessel::bessel_j_sequence;
use crate::error::{Error, Result};
use crate::model::{Gauge, ModelConfig};
use crate::packet::{PacketGauge, WavePacket};
use crate::strip::StripLattice;

const CHUNK: usize = 2048;

/// Norm drift per unit time tolerated by the RK4 scheme.
pub const TD_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationStats {
    /// Largest `|‖ψ‖ − ‖ψ_0‖|` seen.
    pub max_norm_drift: f64,
    /// Largest norm change over one Chebyshev slice (zero for RK4).
    pub max_slice_drift: f64,
    /// Largest number of Chebyshev terms in one slice.
    pub max_terms: usize,
}

fn padded(amps: &[Complex64]) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(amps.len() + 1);
    v.extend_from_slice(amps);
    v.push(Complex64::new(0.0, 0.0));
    v
}

struct TdOperator<'a> {
    strip: &'a StripLattice,
    hx: f64,
    hy: f64,
    wx: f64,
    wy: f64,
    /// e^{i2παl} per row
    mag: Vec<Complex64>,
}

impl<'a> TdOperator<'a> {
    fn new(strip: &'a StripLattice, config: &ModelConfig) -> Self {
        let (wx, wy) = config.field_components();
        let mag = (0..strip.len())
            .map(|i| Complex64::from_polar(1.0, TAU * config.alpha * strip.site(i).0 as f64))
            .collect();
        TdOperator { strip, hx: 0.5 * config.jx, hy: 0.5 * config.jy, wx, wy, mag }
    }

    /// `out = −i H(t) v`; `v` carries a trailing zero at the sentinel index.
    fn apply(&self, t: f64, v: &[Complex64], out: &mut [Complex64]) {
        let ex = Complex64::from_polar(1.0, -self.wx * t);
        let ey = Complex64::from_polar(1.0, -self.wy * t);
        let s = self.strip;
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, o) in chunk.iter_mut().enumerate() {
                let i = base + k;
                let fy = self.mag[i] * ey;
                let h = -(self.hx * (ex * v[s.xp[i] as usize] + ex.conj() * v[s.xm[i] as usize])
                    + self.hy * (fy * v[s.yp[i] as usize] + fy.conj() * v[s.ym[i] as usize]));
                *o = Complex64::new(h.im, -h.re);
            }
        });
    }
}

/// RK4 evolution in the time-dependent gauge. `psi0` may be in any gauge; it
/// is converted at its own time stamp. `on_sample` receives the state (in the
/// time-dependent gauge) at every time in `sample_times` that is reached.
pub fn evolve_td_gauge_with(
    psi0: &WavePacket,
    sample_times: &[f64],
    dt: f64,
    config: &ModelConfig,
    mut on_sample: impl FnMut(&WavePacket) -> Result<()>,
) -> Result<PropagationStats> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let mut psi = psi0.to_gauge(PacketGauge::TimeDependent, config)?;
    let op = TdOperator::new(&psi.strip, config);
    let n = psi.amps.len();
    let norm0 = psi.norm();
    let t0 = psi.time;
    let mut v = padded(&psi.amps);
    let mut tmp = vec![Complex64::new(0.0, 0.0); n + 1];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![Complex64::default(); n], vec![Complex64::default(); n], vec![Complex64::default(); n], vec![Complex64::default(); n]);
    let mut stats = PropagationStats { max_norm_drift: 0.0, max_slice_drift: 0.0, max_terms: 0 };
    let mut t = t0;
    for &target in sample_times {
        if target < t - 1e-12 {
            continue;
        }
        let steps = ((target - t) / dt).ceil() as usize;
        let h = if steps > 0 { (target - t) / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            op.apply(t, &v, &mut k1);
            for i in 0..n {
                tmp[i] = v[i] + k1[i] * (0.5 * h);
            }
            op.apply(t + 0.5 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = v[i] + k2[i] * (0.5 * h);
            }
            op.apply(t + 0.5 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = v[i] + k3[i] * h;
            }
            op.apply(t + h, &tmp, &mut k4);
            for i in 0..n {
                v[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
            t += h;
        }
        t = target;
        psi.amps.copy_from_slice(&v[..n]);
        psi.time = t;
        let drift = (psi.norm() - norm0).abs();
        stats.max_norm_drift = stats.max_norm_drift.max(drift);
        let elapsed = (t - t0).max(1.0);
        if drift > TD_NORM_TOLERANCE * elapsed {
            return Err(Error::NormDrift { drift, time: t, tolerance: TD_NORM_TOLERANCE });
        }
        on_sample(&psi)?;
    }
    Ok(stats)
}

/// Snapshots at `sample_times` (time-dependent gauge).
pub fn evolve_td_gauge(psi0: &WavePacket, sample_times: &[f64], dt: f64, config: &ModelConfig) -> Result<Vec<WavePacket>> {
    let mut out = Vec::with_capacity(sample_times.len());
    evolve_td_gauge_with(psi0, sample_times, dt, config, |p| {
        out.push(p.clone());
        Ok(())
    })?;
    Ok(out)
}

struct StaticOperator<'a> {
    strip: &'a StripLattice,
    hx: f64,
    hy: f64,
    diag: Vec<f64>,
    /// e^{−i2παm} per row
    mag: Vec<Complex64>,
}

impl<'a> StaticOperator<'a> {
    fn new(strip: &'a StripLattice, config: &ModelConfig) -> Self {
        let (fx, fy) = config.field_components();
        let mut diag = Vec::with_capacity(strip.len());
        let mut mag = Vec::with_capacity(strip.len());
        for i in 0..strip.len() {
            let (l, m) = strip.site(i);
            diag.push(fx * l as f64 + fy * m as f64);
            mag.push(Complex64::from_polar(1.0, -TAU * config.alpha * m as f64));
        }
        StaticOperator { strip, hx: 0.5 * config.jx, hy: 0.5 * config.jy, diag, mag }
    }

    /// Gershgorin enclosure `[min diag − 2(Jx+Jy), max diag + 2(Jx+Jy)]`,
    /// widened by 5%; returns centre and half-width.
    fn bounds(&self) -> (f64, f64) {
        let lo = self.diag.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = 4.0 * (self.hx + self.hy);
        let (lo, hi) = (lo - pad, hi + pad);
        (0.5 * (lo + hi), 0.5 * (hi - lo) * 1.05)
    }

    /// `out = (H − c) v / R`.
    fn apply_scaled(&self, c: f64, inv_r: f64, v: &[Complex64], out: &mut [Complex64]) {
        let s = self.strip;
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(ch, chunk)| {
            let base = ch * CHUNK;
            for (k, o) in chunk.iter_mut().enumerate() {
                let i = base + k;
                let mg = self.mag[i];
                let h = v[i] * (self.diag[i] - c)
                    - (mg * v[s.xp[i] as usize] + mg.conj() * v[s.xm[i] as usize]) * self.hx
                    - (v[s.yp[i] as usize] + v[s.ym[i] as usize]) * self.hy;
                *o = h * inv_r;
            }
        });
    }
}

/// Sliced Chebyshev propagation of the static Landau-y Hamiltonian.
/// `on_sample` receives the state (Landau-y gauge) at every sample time.
pub fn evolve_static_gauge_with(
    psi0: &WavePacket,
    sample_times: &[f64],
    slice_dt: f64,
    config: &ModelConfig,
    tol: f64,
    mut on_sample: impl FnMut(&WavePacket) -> Result<()>,
) -> Result<PropagationStats> {
    if !(slice_dt > 0.0) {
        return Err(Error::InvalidArgument(format!("slice_dt = {slice_dt} must be positive")));
    }
    let mut psi = psi0.to_gauge(PacketGauge::Static(Gauge::LandauY), config)?;
    let op = StaticOperator::new(&psi.strip, config);
    let (c, r) = op.bounds();
    let n = psi.amps.len();
    let norm0 = psi.norm();
    let mut stats = PropagationStats { max_norm_drift: 0.0, max_slice_drift: 0.0, max_terms: 0 };
    let mut work = ChebyshevWork::new(n);
    let mut t = psi.time;
    for &target in sample_times {
        if target < t - 1e-12 {
            continue;
        }
        let slices = ((target - t) / slice_dt).ceil() as usize;
        let h = if slices > 0 { (target - t) / slices as f64 } else { 0.0 };
        for _ in 0..slices {
            let before = psi.norm();
            let terms = work.step(&op, c, r, h, tol, &mut psi.amps)?;
            let after = psi.norm();
            stats.max_terms = stats.max_terms.max(terms);
            stats.max_slice_drift = stats.max_slice_drift.max((after - before).abs());
            if !after.is_finite() || (after - before).abs() > 1e-8 {
                return Err(Error::BoundsTooTight { terms });
            }
        }
        t = target;
        psi.time = t;
        stats.max_norm_drift = stats.max_norm_drift.max((psi.norm() - norm0).abs());
        on_sample(&psi)?;
    }
    Ok(stats)
}

/// Snapshots at `sample_times` (Landau-y gauge).
pub fn evolve_static_gauge(
    psi0: &WavePacket,
    sample_times: &[f64],
    slice_dt: f64,
    config: &ModelConfig,
    tol: f64,
) -> Result<Vec<WavePacket>> {
    let mut out = Vec::with_capacity(sample_times.len());
    evolve_static_gauge_with(psi0, sample_times, slice_dt, config, tol, |p| {
        out.push(p.clone());
        Ok(())
    })?;
    Ok(out)
}

struct ChebyshevWork {
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    next: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl ChebyshevWork {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n + 1];
        ChebyshevWork { prev: z.clone(), cur: z.clone(), next: z.clone(), acc: z }
    }

    /// One slice `ψ ← e^{−iHh} ψ`; returns the number of terms used.
    fn step(&mut self, op: &StaticOperator, c: f64, r: f64, h: f64, tol: f64, psi: &mut [Complex64]) -> Result<usize> {
        let n = psi.len();
        let x = r * h;
        let k_max = (1.5 * x).ceil() as usize + 120;
        let bessel = bessel_j_sequence(x, k_max);
        let inv_r = 1.0 / r;
        self.prev[..n].copy_from_slice(psi);
        self.prev[n] = Complex64::default();
        op.apply_scaled(c, inv_r, &self.prev, &mut self.cur[..n]);
        self.cur[n] = Complex64::default();
        let coef = |k: usize| {
            let ik = match k % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, -1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, 1.0),
            };
            ik * (if k == 0 { 1.0 } else { 2.0 } * bessel[k])
        };
        let (a0, a1) = (coef(0), coef(1));
        for i in 0..n {
            self.acc[i] = self.prev[i] * a0 + self.cur[i] * a1;
        }
        let mut k = 1;
        let mut small = 0;
        loop {
            k += 1;
            if k > k_max {
                return Err(Error::BoundsTooTight { terms: k });
            }
            op.apply_scaled(c, inv_r, &self.cur, &mut self.next[..n]);
            let a = coef(k);
            for i in 0..n {
                self.next[i] = self.next[i] * 2.0 - self.prev[i];
                self.acc[i] += self.next[i] * a;
            }
            self.next[n] = Complex64::default();
            std::mem::swap(&mut self.prev, &mut self.cur);
            std::mem::swap(&mut self.cur, &mut self.next);
            if k as f64 > x && a.norm() < tol {
                small += 1;
                if small >= 2 {
                    break;
                }
            } else {
                small = 0;
            }
        }
        let phase = Complex64::from_polar(1.0, -c * h);
        for i in 0..n {
            psi[i] = self.acc[i] * phase;
        }
        Ok(k + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_j;
    use crate::packet::gaussian_packet;
    use std::sync::Arc;

    fn delta(strip: Arc<StripLattice>) -> WavePacket {
        let (mut p, _) = WavePacket::from_sites(strip, [(0, 0, Complex64::new(1.0, 0.0))], PacketGauge::Static(Gauge::LandauX));
        p.normalize();
        p
    }

    #[test]
    fn frozen_without_hopping_in_td_gauge() {
        let c = ModelConfig::rational(0.7, 1, 2, 0.1).with_hopping(0.0, 0.0);
        let strip = Arc::new(StripLattice::new(0.5, 10, 10));
        let p = gaussian_packet(strip, 0.3, 0.3, true, 5).unwrap();
        let out = evolve_td_gauge(&p, &[3.0], 0.01, &c).unwrap();
        let p_td = p.to_gauge(PacketGauge::TimeDependent, &c).unwrap();
        for (a, b) in out[0].amps.iter().zip(&p_td.amps) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn stark_phases_without_hopping_in_static_gauge() {
        let c = ModelConfig::rational(0.7, 1, 2, 0.1).with_hopping(0.0, 0.0);
        let strip = Arc::new(StripLattice::new(0.5, 10, 10));
        let p = gaussian_packet(strip, 0.3, 0.3, true, 5).unwrap();
        let out = evolve_static_gauge(&p, &[4.5], 1.0, &c, 1e-14).unwrap();
        let p_y = p.to_gauge(PacketGauge::Static(Gauge::LandauY), &c).unwrap();
        let (fx, fy) = c.field_components();
        for (i, (a, b)) in out[0].amps.iter().zip(&p_y.amps).enumerate() {
            let (l, m) = p.strip.site(i);
            let want = b * Complex64::from_polar(1.0, -4.5 * (fx * l as f64 + fy * m as f64));
            assert!((a - want).norm() < 1e-12);
        }
    }

    #[test]
    fn free_lattice_bessel_kernel() {
        let c = ModelConfig::rational(0.0, 0, 1, 0.0);
        let strip = Arc::new(StripLattice::new(0.0, 30, 30));
        let t = 6.0;
        let out = evolve_td_gauge(&delta(strip.clone()), &[t], 0.005, &c).unwrap();
        let stat = evolve_static_gauge(&delta(strip), &[t], 1.0, &c, 1e-14).unwrap();
        for l in -8..=8 {
            for m in -8..=8 {
                let want = (bessel_j(l, t) * bessel_j(m, t)).powi(2);
                assert!((out[0].amplitude(l, m).norm_sqr() - want).abs() < 1e-6);
                assert!((stat[0].amplitude(l, m).norm_sqr() - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn slice_length_does_not_matter() {
        let c = ModelConfig::rational(0.5, 1, 1, 0.1);
        let strip = Arc::new(StripLattice::new(1.0, 20, 16));
        let p = gaussian_packet(strip, 0.5, 0.5, true, 9).unwrap();
        let a = evolve_static_gauge(&p, &[4.0], 1.0, &c, 1e-14).unwrap();
        let b = evolve_static_gauge(&p, &[4.0], 2.0, &c, 1e-14).unwrap();
        let diff: f64 = a[0].amps.iter().zip(&b[0].amps).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff < 1e-12, "{diff}");
    }
}
