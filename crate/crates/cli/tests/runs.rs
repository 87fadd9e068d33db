use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cyclobloch::bands::{band_structure, uniform_grid};
use cyclobloch::fiber::spectral_period;
use cyclobloch::transport::default_half_window;
use cyclobloch::ModelConfig;

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn cyclobloch(args: &[&str], config: &str, dir: &Path, env: &[(&str, &str)]) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cyclobloch"));
    cmd.args(args).arg("--config").arg(&cfg).arg("--out").arg(dir).env_remove("CYCLOBLOCH_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn spectrum_reproduces_band_structure() {
    let dir = scratch("spectrum");
    let out = cyclobloch(&["spectrum"], "F=0.3\nr=0\nq=1\nalpha=0.1\nkappa_points=16\n", &dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# sha256 = ")));

    let c = ModelConfig::rational(0.3, 0, 1, 0.1);
    let hw = default_half_window(&c).unwrap();
    let grid = uniform_grid(0.0, spectral_period(&c).unwrap(), 16);
    let s = band_structure(&c, &grid, (-hw, hw), None, false).unwrap();
    let expected: Vec<(f64, usize, f64)> = s
        .kappa_grid
        .iter()
        .zip(&s.energies)
        .flat_map(|(&k, row)| row.iter().enumerate().map(move |(b, &e)| (k, b, e)))
        .collect();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), expected.len());
    for (row, (k, b, e)) in rows.iter().zip(&expected) {
        assert!((row[0] - k).abs() < 1e-11);
        assert_eq!(row[1] as usize, *b);
        assert!((row[2] - e).abs() <= 1e-11 * e.abs().max(1.0));
    }
}

#[test]
fn evolve_is_byte_identical_across_reruns_and_thread_counts() {
    let cfg = "beta=0.6180339887\nalpha=0.1\nF=0.5\nt_end=3\nsamples=6\nseeds=4\nstrip_L=40\nstrip_W=30\n";
    let a = scratch("evolve_a");
    let b = scratch("evolve_b");
    let oa = cyclobloch(&["evolve", "--seed", "5", "--threads", "1"], cfg, &a, &[]);
    let ob = cyclobloch(&["evolve", "--seed", "5"], cfg, &b, &[("CYCLOBLOCH_THREADS", "3")]);
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    assert!(ob.status.success(), "{}", String::from_utf8_lossy(&ob.stderr));
    for f in ["series.csv", "eta_final.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let c = scratch("evolve_c");
    assert!(cyclobloch(&["evolve", "--seed", "6"], cfg, &c, &[]).status.success());
    assert_ne!(fs::read(a.join("series.csv")).unwrap(), fs::read(c.join("series.csv")).unwrap());
}

#[test]
fn boundary_leak_fails_loudly() {
    let dir = scratch("leak");
    let out = cyclobloch(&["evolve"], "r=0\nq=1\nalpha=0.1\nF=0.1\nt_end=30\nsamples=10\nseeds=0\nstrip_L=6\nstrip_W=6\n", &dir, &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("boundary leak"));
    assert!(dir.join("series.csv").exists(), "data kept for inspection");
}

#[test]
fn config_errors_exit_nonzero_with_a_diagnostic() {
    let dir = scratch("errors");
    for (cfg, needle) in [
        ("F=0.3\nr=0\nq=1\nalpha=0.1\nbogus=1\n", "unknown key `bogus`"),
        ("F=0.3\nr=0\nq=1\nalpha=one\n", "`alpha` expects a real number"),
        ("r=2\nq=4\n", "lowest terms"),
        ("F=0.3\nr=0\nq=1\n", "missing required key `alpha`"),
    ] {
        let out = cyclobloch(&["spectrum"], cfg, &dir, &[]);
        assert!(!out.status.success(), "{cfg:?} accepted");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{cfg:?}: {err}");
    }
}

#[test]
fn phase_portrait_has_twenty_orbits() {
    let dir = scratch("portrait");
    let out = cyclobloch(&["phase-portrait"], "F=0.3\nr=0\nq=1\nalpha=0.1\nperiods=20\n", &dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("phase_portrait.csv")).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 20 * 21);
    assert_eq!(rows.last().unwrap()[0] as usize, 19);
}

#[test]
fn perturb_and_transport_state_write_outputs() {
    let dir = scratch("perturb");
    let out = cyclobloch(&["perturb"], "F=10\nr=1\nq=1\nalpha=0.1\nkappa_points=16\n", &dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&fs::read_to_string(dir.join("perturb.csv")).unwrap());
    assert_eq!(rows.len(), 16);
    // strong field: the second-order band sits on the exact one
    let width = |j: usize| {
        let v: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    };
    assert!((width(2) - width(1)).abs() < 0.1 * width(1));

    let dir = scratch("transport_state");
    let out = cyclobloch(&["transport-state"], "F=0.3\nr=0\nq=1\nalpha=0.1\nC=1\n", &dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::metadata(dir.join("transport_state.csv")).unwrap().len() > 0);
}
