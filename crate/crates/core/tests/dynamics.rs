use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;

use cyclobloch::bands::band_structure;
use cyclobloch::ensemble::{ensemble_evolve, evolve_observed, incoherent_family, sample_times, Scheme};
use cyclobloch::observables::moments;
use cyclobloch::packet::{boundary_leak, gaussian_packet, PacketGauge};
use cyclobloch::propagate::{evolve_static_gauge, evolve_td_gauge};
use cyclobloch::strip::{make_strip, StripLattice};
use cyclobloch::transport::{assemble, follow_line_covariant, AssembleOptions, LineSeed, TransportingState};
use cyclobloch::{Gauge, ModelConfig, SiteIndex};

#[test]
fn both_propagators_agree_on_the_state() {
    let c = ModelConfig::rational(0.5, 1, 1, 0.1);
    let strip = Arc::new(StripLattice::new(1.0, 32, 32));
    let psi0 = gaussian_packet(strip, 0.5, 0.5, true, 9).unwrap();
    let td = evolve_td_gauge(&psi0, &[10.0], 0.005, &c).unwrap().pop().unwrap();
    let st = evolve_static_gauge(&psi0, &[10.0], 1.0, &c, 1e-14).unwrap().pop().unwrap();
    let td = td.to_gauge(PacketGauge::Static(Gauge::LandauY), &c).unwrap();
    let overlap = st.inner(&td).norm();
    assert!(overlap > 1.0 - 1e-6, "overlap {overlap}");
}

#[test]
fn leak_grows_monotonically_until_reflection() {
    let c = ModelConfig::rational(0.0, 0, 1, 0.0);
    let strip = Arc::new(StripLattice::new(0.0, 20, 20));
    let psi0 = gaussian_packet(strip, 2.0, 2.0, false, 0).unwrap();
    let times = sample_times(14.0, 14);
    let snaps = evolve_static_gauge(&psi0, &times, 0.5, &c, 1e-14).unwrap();
    let leaks: Vec<f64> = snaps.iter().map(|p| boundary_leak(p, 0.1)).collect();
    for w in leaks.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-9), "{leaks:?}");
    }
    assert!(*leaks.last().unwrap() > 1e-6);
}

fn overlap_of(a: &TransportingState, b: &TransportingState) -> f64 {
    let map: HashMap<SiteIndex, Complex64> = a.sites.iter().copied().collect();
    b.sites.iter().map(|(s, z)| map.get(s).map_or(Complex64::default(), |w| w.conj() * z)).sum::<Complex64>().norm()
}

fn variances(st: &TransportingState) -> (f64, f64) {
    // (transverse l, along-field m) for the (0,1) direction
    let (mut ml, mut mm, mut ll, mut qq) = (0.0, 0.0, 0.0, 0.0);
    for (s, z) in &st.sites {
        let w = z.norm_sqr();
        ml += w * s.l as f64;
        mm += w * s.m as f64;
        ll += w * (s.l * s.l) as f64;
        qq += w * (s.m * s.m) as f64;
    }
    (ll - ml * ml, qq - mm * mm)
}

#[test]
fn envelope_width_trades_transverse_for_parallel_extent() {
    let c = ModelConfig::rational(0.1, 0, 1, 0.1);
    let line = follow_line_covariant(&c, 0.0, LineSeed::Auto, 32, None).unwrap();
    let v: Vec<(f64, f64)> = [0.2, 1.0, 5.0]
        .iter()
        .map(|&cc| variances(&assemble(&line, cc, &c, AssembleOptions::default()).unwrap()))
        .collect();
    assert!(v[0].0 < v[1].0 && v[1].0 < v[2].0, "transverse {v:?}");
    assert!(v[0].1 > v[1].1 && v[1].1 > v[2].1, "parallel {v:?}");
}

#[test]
fn assembly_is_converged_in_the_line_sampling() {
    let c = ModelConfig::rational(0.1, 0, 1, 0.1);
    let coarse = follow_line_covariant(&c, 0.0, LineSeed::Auto, 32, None).unwrap();
    let fine = follow_line_covariant(&c, 0.0, LineSeed::Auto, 64, None).unwrap();
    let a = assemble(&coarse, 1.0, &c, AssembleOptions::default()).unwrap();
    let b = assemble(&fine, 1.0, &c, AssembleOptions::default()).unwrap();
    let o = overlap_of(&a, &b);
    assert!(o > 0.999, "overlap {o}");
}

#[test]
fn line_vectors_repeat_after_a_full_period_when_one_over_alpha_is_integral() {
    // ten covariance cells of 2πα make up 2π, each moving the state one row
    let c = ModelConfig::rational(0.3, 0, 1, 0.1);
    let line = follow_line_covariant(&c, 0.0, LineSeed::Auto, 32, None).unwrap();
    let hw = (line.window.1 - line.window.0) / 2;
    let shifted: Vec<f64> = line.kappa_samples.iter().map(|k| k + TAU).collect();
    let s = band_structure(&c, &shifted, (-hw, hw), None, true).unwrap();
    for (j, vecs) in s.eigenvectors.as_ref().unwrap().iter().enumerate() {
        let b: Vec<Complex64> = line.vectors.column(j).iter().copied().collect();
        let mut o: Vec<f64> = (0..vecs.ncols())
            .map(|n| (10..b.len()).map(|i| b[i - 10].conj() * vecs[(i, n)]).sum::<Complex64>().norm_sqr())
            .collect();
        o.sort_by(|a, b| b.total_cmp(a));
        // near an avoided crossing the diabatic vector mixes the two partners
        let pair = (o[0] + o[1]).sqrt();
        assert!(pair > 0.99, "sample {j}: {pair}");
    }
}

#[test]
fn golden_and_rational_ensembles_both_split_at_weak_field() {
    // below the critical field both directions emit counter-propagating sub-packets
    for c in [ModelConfig::rational(0.2, 2, 3, 0.1), ModelConfig::irrational(0.2, cyclobloch::model::GOLDEN_MEAN, 0.1)] {
        let strip = Arc::new(make_strip(&c, 90, 40));
        let fam = incoherent_family(strip.clone(), 0.5, 0.5, 3, 12).unwrap();
        let e = ensemble_evolve(&fam, &sample_times(40.0, 4), Scheme::default(), &c, Some(1.0)).unwrap();
        assert!(e.valid(), "leak {}", e.max_leak);
        let eta = e.eta.last().unwrap();
        let mass = |lo: f64, hi: f64| {
            (0..eta.weights.len()).filter(|&j| (lo..hi).contains(&eta.centre(j))).map(|j| eta.weights[j]).sum::<f64>()
        };
        let (left, right) = (mass(f64::NEG_INFINITY, -10.0), mass(10.0, f64::INFINITY));
        assert!(left > 0.15 && right > 0.15, "{:?}: left {left}, right {right}", c.direction);
    }
}

#[test]
fn observed_run_matches_snapshots() {
    let c = ModelConfig::rational(0.5, 1, 2, 0.1);
    let strip = Arc::new(make_strip(&c, 16, 12));
    let psi0 = gaussian_packet(strip, 0.5, 0.5, true, 1).unwrap();
    let times = sample_times(2.0, 4);
    let run = evolve_observed(&psi0, &times, Scheme::default(), &c, None).unwrap();
    let snaps = evolve_static_gauge(&psi0, &times, 1.0, &c, 1e-14).unwrap();
    for (k, p) in snaps.iter().enumerate() {
        assert!((moments(p, &c).sigma - run.series.sigma[k]).abs() < 1e-12);
    }
}
