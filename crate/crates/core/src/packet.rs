//! Wave packets on a slanted strip.

use std::f64::consts::TAU;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gauge::gauge_phase;
use crate::lattice::SiteIndex;
use crate::model::{Gauge, ModelConfig};
use crate::strip::StripLattice;

/// Gauge in which packet amplitudes are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketGauge {
    Static(Gauge),
    /// Landau-x gauge with the scalar potential moved into the hoppings:
    /// `ψ_td(t) = e^{it(F_x l + F_y m)} ψ_X(t)`.
    TimeDependent,
}

impl PacketGauge {
    pub fn name(&self) -> &'static str {
        match self {
            PacketGauge::Static(g) => g.name(),
            PacketGauge::TimeDependent => "time-dependent",
        }
    }
}

#[derive(Debug, Clone)]
pub struct WavePacket {
    pub strip: Arc<StripLattice>,
    pub amps: Vec<Complex64>,
    pub gauge: PacketGauge,
    pub time: f64,
}

impl WavePacket {
    pub fn zeros(strip: Arc<StripLattice>, gauge: PacketGauge) -> Self {
        let n = strip.len();
        WavePacket { strip, amps: vec![Complex64::new(0.0, 0.0); n], gauge, time: 0.0 }
    }

    /// Builds a packet from `(l, m, amplitude)` triples; sites outside the
    /// strip are dropped and reported as lost probability.
    pub fn from_sites(
        strip: Arc<StripLattice>,
        sites: impl IntoIterator<Item = (i64, i64, Complex64)>,
        gauge: PacketGauge,
    ) -> (Self, f64) {
        let mut p = WavePacket::zeros(strip, gauge);
        let mut lost = 0.0;
        for (l, m, z) in sites {
            match p.strip.index_of(l, m) {
                Some(i) => p.amps[i] += z,
                None => lost += z.norm_sqr(),
            }
        }
        (p, lost)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let s = 1.0 / n;
            self.amps.iter_mut().for_each(|z| *z *= s);
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn amplitude(&self, l: i64, m: i64) -> Complex64 {
        self.strip.index_of(l, m).map(|i| self.amps[i]).unwrap_or_default()
    }

    /// `⟨self|other⟩`; both packets must live on the same strip.
    pub fn inner(&self, other: &WavePacket) -> Complex64 {
        assert_eq!(self.amps.len(), other.amps.len(), "packets live on different strips");
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Re-expresses the amplitudes in `target` at the packet's time stamp.
    pub fn to_gauge(&self, target: PacketGauge, config: &ModelConfig) -> Result<WavePacket> {
        if target == self.gauge {
            return Ok(self.clone());
        }
        let (fx, fy) = config.field_components();
        let t = self.time;
        let static_of = |g: PacketGauge| match g {
            PacketGauge::Static(g) => g,
            PacketGauge::TimeDependent => Gauge::LandauX,
        };
        let (from, to) = (static_of(self.gauge), static_of(target));
        let mut out = self.clone();
        for (i, z) in out.amps.iter_mut().enumerate() {
            let (l, m) = self.strip.site(i);
            let mut ph = gauge_phase(from, to, SiteIndex::new(l, m), config)?;
            let stark = t * (fx * l as f64 + fy * m as f64);
            if self.gauge == PacketGauge::TimeDependent {
                ph *= Complex64::from_polar(1.0, -stark);
            }
            if target == PacketGauge::TimeDependent {
                ph *= Complex64::from_polar(1.0, stark);
            }
            *z *= ph;
        }
        out.gauge = target;
        Ok(out)
    }

    /// Rows `(l, m, Re, Im)` after `#` header lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> io::Result<()> {
        for h in header {
            writeln!(out, "# {h}")?;
        }
        writeln!(out, "# time = {}", self.time)?;
        writeln!(out, "# gauge = {}", self.gauge.name())?;
        writeln!(out, "l,m,re,im")?;
        for (i, z) in self.amps.iter().enumerate() {
            if z.norm_sqr() > 0.0 {
                let (l, m) = self.strip.site(i);
                writeln!(out, "{l},{m},{:.15e},{:.15e}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// Phases for realization `realization` of the ensemble keyed by `seed`,
/// drawn in strip-row order.
pub fn random_phases(n: usize, seed: u64, realization: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    (0..n).map(|_| rng.gen::<f64>() * TAU).collect()
}

/// Normalized Gaussian `exp(−C_x l² − C_y m²)` centred at the origin,
/// expressed in the Landau-x gauge. With `incoherent` every amplitude gets an
/// independent uniform phase from realization 0 of `seed`.
pub fn gaussian_packet(strip: Arc<StripLattice>, cx: f64, cy: f64, incoherent: bool, seed: u64) -> Result<WavePacket> {
    gaussian_packet_realization(strip, cx, cy, incoherent.then_some((seed, 0)))
}

/// As [`gaussian_packet`], with explicit `(seed, realization)` for the phases.
pub fn gaussian_packet_realization(
    strip: Arc<StripLattice>,
    cx: f64,
    cy: f64,
    phases: Option<(u64, u64)>,
) -> Result<WavePacket> {
    if !(cx > 0.0 && cy > 0.0) {
        return Err(Error::InvalidArgument(format!("Gaussian widths must be positive, got ({cx}, {cy})")));
    }
    let mut p = WavePacket::zeros(strip, PacketGauge::Static(Gauge::LandauX));
    let theta = phases.map(|(s, r)| random_phases(p.amps.len(), s, r));
    for i in 0..p.amps.len() {
        let (l, m) = p.strip.site(i);
        let a = (-cx * (l * l) as f64 - cy * (m * m) as f64).exp();
        p.amps[i] = match &theta {
            Some(th) => Complex64::from_polar(a, th[i]),
            None => Complex64::new(a, 0.0),
        };
    }
    if p.norm_sqr() == 0.0 {
        // the numerically infinite-width limit collapses onto the origin
        let i = p.strip.index_of(0, 0).expect("origin inside strip");
        p.amps[i] = Complex64::new(1.0, 0.0);
    }
    p.normalize();
    Ok(p)
}

/// Gauge-covariant nearest-neighbour coherences `(|T_x|, |T_y|)`, with
/// `T_x = Σ ψ*_{l+1,m} ψ_{l,m}` read in the Landau-x gauge (real x hops) and
/// `T_y` likewise in the Landau-y gauge. A packet's Bloch oscillation along
/// each axis has amplitude `J|T|/F`.
pub fn hopping_coherence(psi: &WavePacket, config: &ModelConfig) -> Result<(f64, f64)> {
    let bond = |p: &WavePacket, next: &[u32]| -> f64 {
        let n = p.amps.len();
        let mut t = Complex64::new(0.0, 0.0);
        for (i, &j) in next.iter().enumerate() {
            if (j as usize) < n {
                t += p.amps[j as usize].conj() * p.amps[i];
            }
        }
        t.norm()
    };
    let px = psi.to_gauge(PacketGauge::Static(Gauge::LandauX), config)?;
    let py = psi.to_gauge(PacketGauge::Static(Gauge::LandauY), config)?;
    Ok((bond(&px, &psi.strip.xp), bond(&py, &psi.strip.yp)))
}

/// Widths `(C_x, C_y)` of the coherent Gaussian whose coherences both equal
/// `target`, found by bisection on `ln C`.
pub fn gaussian_widths_for_coherence(strip: Arc<StripLattice>, config: &ModelConfig, target: f64) -> Result<(f64, f64)> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!("coherence target must lie in (0, 1), got {target}")));
    }
    // coherence decreases monotonically with C along each axis
    let solve = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let (mut lo, mut hi) = (-8.0f64, 6.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid.exp())? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    };
    let coh = |cx: f64, cy: f64| -> Result<(f64, f64)> {
        hopping_coherence(&gaussian_packet(strip.clone(), cx, cy, false, 0)?, config)
    };
    let mut cy = 2.0 * std::f64::consts::LN_2;
    let mut cx = cy;
    for _ in 0..4 {
        cx = solve(&|c| Ok(coh(c, cy)?.0))?;
        cy = solve(&|c| Ok(coh(cx, c)?.1))?;
    }
    Ok((cx, cy))
}

/// Probability in the outer `margin_fraction` band of the strip.
pub fn boundary_leak(psi: &WavePacket, margin_fraction: f64) -> f64 {
    psi.amps
        .iter()
        .enumerate()
        .filter(|(i, _)| psi.strip.in_margin(*i, margin_fraction))
        .map(|(_, z)| z.norm_sqr())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip() -> Arc<StripLattice> {
        Arc::new(StripLattice::new(0.5, 20, 64))
    }

    #[test]
    fn gaussian_is_normalized_and_centred() {
        let p = gaussian_packet(strip(), 0.3, 0.2, false, 0).unwrap();
        assert!((p.norm() - 1.0).abs() < 1e-14);
        assert_eq!(p.amplitude(0, 0).im, 0.0);
        assert!(p.amplitude(0, 0).re > p.amplitude(1, 0).re);
    }

    #[test]
    fn narrow_limit_is_a_single_site() {
        let p = gaussian_packet(strip(), 1e6, 1e6, false, 0).unwrap();
        assert!((p.amplitude(0, 0).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn incoherent_phases_are_deterministic_and_keep_populations() {
        let a = gaussian_packet(strip(), 0.1, 0.1, true, 42).unwrap();
        let b = gaussian_packet(strip(), 0.1, 0.1, true, 42).unwrap();
        let c = gaussian_packet(strip(), 0.1, 0.1, false, 42).unwrap();
        assert_eq!(a.amps, b.amps);
        for (x, y) in a.amps.iter().zip(&c.amps) {
            assert!((x.norm_sqr() - y.norm_sqr()).abs() < 1e-15);
        }
        let d = gaussian_packet_realization(strip(), 0.1, 0.1, Some((42, 1))).unwrap();
        assert_ne!(a.amps, d.amps);
    }

    #[test]
    fn leak_of_fresh_and_marginal_packets() {
        let s = Arc::new(StripLattice::new(0.0, 64, 64));
        let p = gaussian_packet(s.clone(), 1.0, 1.0, false, 0).unwrap();
        assert!(boundary_leak(&p, 0.1) < 1e-12);
        let (mut edge, _) = WavePacket::from_sites(s, [(64, 0, Complex64::new(1.0, 0.0))], PacketGauge::TimeDependent);
        edge.normalize();
        assert_eq!(boundary_leak(&edge, 0.1), 1.0);
    }

    #[test]
    fn coherence_of_simple_packets() {
        let c = ModelConfig::rational(2.0, 1, 3, 0.1);
        let s = strip();
        let delta = gaussian_packet(s.clone(), 1e6, 1e6, false, 0).unwrap();
        let (tx, ty) = hopping_coherence(&delta, &c).unwrap();
        assert!(tx < 1e-12 && ty < 1e-12);
        // equal weights on two x neighbours
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (pair, _) = WavePacket::from_sites(
            s.clone(),
            [(0, 0, Complex64::new(h, 0.0)), (1, 0, Complex64::new(h, 0.0))],
            PacketGauge::Static(Gauge::LandauX),
        );
        let (tx, ty) = hopping_coherence(&pair, &c).unwrap();
        assert!((tx - 0.5).abs() < 1e-14 && ty < 1e-14);
        let (cx, cy) = gaussian_widths_for_coherence(s.clone(), &c, 0.5).unwrap();
        let (tx, ty) = hopping_coherence(&gaussian_packet(s, cx, cy, false, 0).unwrap(), &c).unwrap();
        assert!((tx - 0.5).abs() < 1e-9 && (ty - 0.5).abs() < 1e-9, "{tx} {ty}");
        // a real Gaussian factorizes: T_x is a one-dimensional lattice sum
        let sum = |f: &dyn Fn(f64) -> f64| (-60..=60).map(|l| f(l as f64)).sum::<f64>();
        let t1 = sum(&|l| (-cx * (l * l + (l + 1.0) * (l + 1.0))).exp()) / sum(&|l| (-2.0 * cx * l * l).exp());
        assert!((t1 - 0.5).abs() < 1e-9, "{t1}");
    }

    #[test]
    fn gauge_round_trips() {
        let c = ModelConfig::rational(0.5, 1, 2, 0.1);
        let mut p = gaussian_packet(strip(), 0.2, 0.2, true, 1).unwrap();
        p.time = 3.7;
        for g in [
            PacketGauge::Static(Gauge::LandauY),
            PacketGauge::Static(Gauge::Rotated),
            PacketGauge::TimeDependent,
        ] {
            let q = p.to_gauge(g, &c).unwrap();
            for (x, y) in p.amps.iter().zip(&q.amps) {
                assert!((x.norm_sqr() - y.norm_sqr()).abs() < 1e-16);
            }
            let back = q.to_gauge(p.gauge, &c).unwrap();
            for (x, y) in p.amps.iter().zip(&back.amps) {
                assert!((x - y).norm() < 1e-14);
            }
        }
    }
}
