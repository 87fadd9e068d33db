//! Configuration parsing and experiment runners behind the `cyclobloch`
//! command-line tool.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use sha2::{Digest, Sha256};

use cyclobloch::bands::{band_structure, uniform_grid};
use cyclobloch::classical::{default_seed_grid, is_bounded, poincare_section, stroboscopic_map};
use cyclobloch::ensemble::{ensemble_evolve, sample_times, EnsembleResult, Scheme};
use cyclobloch::fiber::spectral_period;
use cyclobloch::observables::{
    ballistic_fit, classify_regime, default_fit_window, project_eta_probs, regime_scores, scaling_fit,
    transient_estimate, LEAK_THRESHOLD,
};
use cyclobloch::packet::{gaussian_packet_realization, WavePacket};
use cyclobloch::perturbation::{exact_band, first_order_01, perturbative_band, second_order_11};
use cyclobloch::strip::make_strip;
use cyclobloch::transport::{default_half_window, default_transporting_state};
use cyclobloch::{Gauge, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subcommand {
    Spectrum,
    PhasePortrait,
    TransportState,
    Evolve,
    ScanA,
    Perturb,
    Classify,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::PhasePortrait => "phase-portrait",
            Subcommand::TransportState => "transport-state",
            Subcommand::Evolve => "evolve",
            Subcommand::ScanA => "scan-A",
            Subcommand::Perturb => "perturb",
            Subcommand::Classify => "classify",
        }
    }

    /// Run keys accepted on top of the model keys.
    fn run_keys(&self) -> &'static [&'static str] {
        const DYNAMICS: &[&str] = &["t_end", "dt", "samples", "scheme", "seeds", "Cx", "Cy", "strip_L", "strip_W"];
        match self {
            Subcommand::Spectrum => &["kappa_points", "window"],
            Subcommand::PhasePortrait => &["seeds", "periods"],
            Subcommand::TransportState => &["C"],
            Subcommand::Evolve | Subcommand::Classify => DYNAMICS,
            Subcommand::ScanA => &["t_end", "dt", "samples", "scheme", "seeds", "Cx", "Cy", "strip_L", "strip_W", "F_grid"],
            Subcommand::Perturb => &["kappa_points", "nu"],
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}` for {subcommand}")]
    UnknownKey { line: usize, key: String, subcommand: &'static str },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    TypeError { line: usize, key: String, expected: &'static str, value: String },
    #[error("missing required key `{0}`")]
    MissingRequired(&'static str),
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Model(#[from] cyclobloch::Error),
}

const MODEL_KEYS: &[&str] = &["F", "r", "q", "beta", "alpha", "Jx", "Jy", "gauge"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Static,
    TimeDependent,
}

/// Run parameters with defaults resolved for the subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub kappa_points: usize,
    /// Fiber half-window; `None` picks the field-dependent default.
    pub window: Option<i64>,
    pub seeds: usize,
    pub periods: usize,
    pub c: f64,
    pub cx: f64,
    pub cy: f64,
    pub t_end: f64,
    pub dt: f64,
    pub samples: usize,
    pub scheme: SchemeChoice,
    pub strip_l: i64,
    pub strip_w: i64,
    pub f_grid: Vec<f64>,
    pub nu: i64,
}

impl RunParams {
    fn defaults(sub: Subcommand) -> Self {
        RunParams {
            kappa_points: 64,
            window: None,
            seeds: if sub == Subcommand::PhasePortrait { 20 } else { 12 },
            periods: 200,
            c: 1.0,
            cx: 0.5,
            cy: 0.5,
            t_end: 100.0,
            dt: 0.01,
            samples: 100,
            scheme: SchemeChoice::Static,
            strip_l: 100,
            strip_w: 16,
            f_grid: Vec::new(),
            nu: 0,
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self.scheme {
            SchemeChoice::Static => Scheme::default(),
            SchemeChoice::TimeDependent => Scheme::TimeDependent { dt: self.dt },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub subcommand: Subcommand,
    pub config: ModelConfig,
    pub params: RunParams,
    /// Global seed of the incoherent phases.
    pub seed: u64,
}

impl ExperimentSpec {
    /// Fully resolved `key = value` pairs in a fixed order.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let c = &self.config;
        let p = &self.params;
        let mut out: Vec<(String, String)> = vec![("subcommand".into(), self.subcommand.name().into())];
        out.push(("F".into(), format!("{}", c.field)));
        match c.direction.rational() {
            Some((r, q)) => {
                out.push(("r".into(), r.to_string()));
                out.push(("q".into(), q.to_string()));
            }
            None => out.push(("beta".into(), format!("{}", c.direction.beta()))),
        }
        out.push(("alpha".into(), format!("{}", c.alpha)));
        out.push(("Jx".into(), format!("{}", c.jx)));
        out.push(("Jy".into(), format!("{}", c.jy)));
        out.push(("gauge".into(), c.gauge.name().into()));
        for key in self.subcommand.run_keys() {
            let value = match *key {
                "kappa_points" => p.kappa_points.to_string(),
                "window" => p.window.map_or("auto".into(), |w| w.to_string()),
                "seeds" => p.seeds.to_string(),
                "periods" => p.periods.to_string(),
                "C" => format!("{}", p.c),
                "Cx" => format!("{}", p.cx),
                "Cy" => format!("{}", p.cy),
                "t_end" => format!("{}", p.t_end),
                "dt" => format!("{}", p.dt),
                "samples" => p.samples.to_string(),
                "scheme" => match p.scheme {
                    SchemeChoice::Static => "static".into(),
                    SchemeChoice::TimeDependent => "td".into(),
                },
                "strip_L" => p.strip_l.to_string(),
                "strip_W" => p.strip_w.to_string(),
                "F_grid" => p.f_grid.iter().map(|f| format!("{f}")).collect::<Vec<_>>().join(","),
                "nu" => p.nu.to_string(),
                other => unreachable!("unhandled run key {other}"),
            };
            out.push((key.to_string(), value));
        }
        out.push(("seed".into(), self.seed.to_string()));
        out
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.resolved() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        format!("{:x}", h.finalize())
    }

    /// Header lines embedded in every output file.
    pub fn header(&self) -> Vec<String> {
        let mut out = vec![format!("cyclobloch {}", self.subcommand)];
        out.extend(self.resolved().into_iter().map(|(k, v)| format!("{k} = {v}")));
        out.push(format!("sha256 = {}", self.hash()));
        out
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::TypeError { line, key: key.into(), expected, value: value.into() })
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config(text: &str, subcommand: Subcommand, seed: u64) -> Result<ExperimentSpec, ConfigError> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax { line, text: raw.into() })?;
        let (key, value) = (key.trim(), value.trim());
        if !MODEL_KEYS.contains(&key) && !subcommand.run_keys().contains(&key) {
            return Err(ConfigError::UnknownKey { line, key: key.into(), subcommand: subcommand.name() });
        }
        if entries.insert(key.into(), (line, value.into())).is_some() {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
    }
    let get = |k: &str| entries.get(k).map(|(l, v)| (*l, v.as_str()));
    let f64_of = |k: &'static str| -> Result<Option<f64>, ConfigError> {
        get(k).map(|(l, v)| parse_value::<f64>(l, k, v, "a real number")).transpose()
    };
    let i64_of = |k: &'static str| -> Result<Option<i64>, ConfigError> {
        get(k).map(|(l, v)| parse_value::<i64>(l, k, v, "an integer")).transpose()
    };
    let usize_of = |k: &'static str| -> Result<Option<usize>, ConfigError> {
        get(k).map(|(l, v)| parse_value::<usize>(l, k, v, "a non-negative integer")).transpose()
    };

    let mut params = RunParams::defaults(subcommand);
    if let Some((l, v)) = get("F_grid") {
        params.f_grid = v
            .split(',')
            .map(|s| parse_value::<f64>(l, "F_grid", s.trim(), "a comma-separated list of reals"))
            .collect::<Result<_, _>>()?;
    }
    // direction errors come first so they are reported even in partial files
    let (r, q, beta) = (i64_of("r")?, i64_of("q")?, f64_of("beta")?);
    let direction = match (r, q, beta) {
        (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
            return Err(ConfigError::Conflict("give either r and q or beta, not both".into()))
        }
        (Some(r), Some(q), None) => ModelConfig::rational(0.0, r, q, 0.0),
        (Some(_), None, None) => return Err(ConfigError::MissingRequired("q")),
        (None, Some(_), None) => return Err(ConfigError::MissingRequired("r")),
        (None, None, Some(b)) => ModelConfig::irrational(0.0, b, 0.0),
        (None, None, None) => return Err(ConfigError::MissingRequired("r, q or beta")),
    }
    .validate()?
    .direction;
    if subcommand == Subcommand::ScanA && params.f_grid.is_empty() {
        return Err(ConfigError::MissingRequired("F_grid"));
    }
    let field = match f64_of("F")? {
        Some(f) => f,
        None if subcommand == Subcommand::ScanA => params.f_grid[0],
        None => return Err(ConfigError::MissingRequired("F")),
    };
    let alpha = f64_of("alpha")?.ok_or(ConfigError::MissingRequired("alpha"))?;
    let mut config = ModelConfig { field, alpha, direction, ..ModelConfig::default() };
    config = config.with_hopping(f64_of("Jx")?.unwrap_or(1.0), f64_of("Jy")?.unwrap_or(1.0));
    if let Some((l, v)) = get("gauge") {
        let g = Gauge::parse(v).ok_or_else(|| ConfigError::TypeError {
            line: l,
            key: "gauge".into(),
            expected: "a gauge name",
            value: v.into(),
        })?;
        config = config.with_gauge(g);
    }
    let config = config.validate()?;

    if let Some(v) = usize_of("kappa_points")? {
        params.kappa_points = v;
    }
    params.window = i64_of("window")?.or(params.window);
    if let Some(v) = usize_of("seeds")? {
        params.seeds = v;
    }
    if let Some(v) = usize_of("periods")? {
        params.periods = v;
    }
    for (key, slot) in [("C", &mut params.c), ("Cx", &mut params.cx), ("Cy", &mut params.cy), ("t_end", &mut params.t_end), ("dt", &mut params.dt)] {
        if let Some(v) = f64_of(key)? {
            *slot = v;
        }
    }
    if let Some(v) = usize_of("samples")? {
        params.samples = v;
    }
    if let Some((l, v)) = get("scheme") {
        params.scheme = match v {
            "static" | "chebyshev" => SchemeChoice::Static,
            "td" | "rk4" | "time-dependent" => SchemeChoice::TimeDependent,
            _ => {
                return Err(ConfigError::TypeError { line: l, key: "scheme".into(), expected: "static or td", value: v.into() })
            }
        };
    }
    if let Some(v) = i64_of("strip_L")? {
        params.strip_l = v;
    }
    if let Some(v) = i64_of("strip_W")? {
        params.strip_w = v;
    }
    if let Some(v) = i64_of("nu")? {
        params.nu = v;
    }
    for (key, ok) in [
        ("kappa_points", params.kappa_points > 0),
        ("samples", params.samples > 0),
        ("t_end", params.t_end > 0.0),
        ("dt", params.dt > 0.0),
        ("strip_L", params.strip_l > 0),
        ("strip_W", params.strip_w > 0),
        ("C", params.c > 0.0),
        ("Cx", params.cx > 0.0 && params.cy > 0.0),
    ] {
        if !ok {
            return Err(ConfigError::Conflict(format!("`{key}` must be positive")));
        }
    }
    Ok(ExperimentSpec { subcommand, config, params, seed })
}

/// Writes `body` to `dir/name` through a temporary file and rename.
fn write_atomic(dir: &Path, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> anyhow::Result<PathBuf> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, &buf).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(path)
}

fn write_header(out: &mut Vec<u8>, header: &[String]) -> std::io::Result<()> {
    for h in header {
        writeln!(out, "# {h}")?;
    }
    Ok(())
}

/// Runs the experiment and returns the files written to `out_dir`.
pub fn run(spec: &ExperimentSpec, out_dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    match spec.subcommand {
        Subcommand::Spectrum => run_spectrum(spec, out_dir),
        Subcommand::PhasePortrait => run_phase_portrait(spec, out_dir),
        Subcommand::TransportState => run_transport_state(spec, out_dir),
        Subcommand::Evolve => run_evolve(spec, out_dir),
        Subcommand::ScanA => run_scan_a(spec, out_dir),
        Subcommand::Perturb => run_perturb(spec, out_dir),
        Subcommand::Classify => run_classify(spec, out_dir),
    }
}

fn run_spectrum(spec: &ExperimentSpec, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let c = &spec.config;
    let hw = match spec.params.window {
        Some(w) => w,
        None => default_half_window(c)?,
    };
    let grid = uniform_grid(0.0, spectral_period(c)?, spec.params.kappa_points);
    let s = band_structure(c, &grid, (-hw, hw), None, false)?;
    Ok(vec![write_atomic(dir, "spectrum.csv", |out| s.write_csv(out, &spec.header()))?])
}

fn run_phase_portrait(spec: &ExperimentSpec, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let c = &spec.config;
    let seeds = default_seed_grid(spec.params.seeds);
    let rational = c.direction.rational().is_some();
    let orbits = seeds
        .iter()
        .map(|&s| if rational { stroboscopic_map(s, spec.params.periods, c) } else { poincare_section(s, spec.params.periods + 1, c) })
        .collect::<Result<Vec<_>, _>>()?;
    let bounded = orbits.iter().filter(|o| is_bounded(o)).count();
    let path = write_atomic(dir, "phase_portrait.csv", |out| {
        write_header(out, &spec.header())?;
        writeln!(out, "# sampling = {}", if rational { "stroboscopic" } else { "poincare" })?;
        writeln!(out, "# bounded_fraction = {}", bounded as f64 / seeds.len().max(1) as f64)?;
        writeln!(out, "seed,sample,Y,P")?;
        for (i, o) in orbits.iter().enumerate() {
            for (j, (y, p)) in o.iter().enumerate() {
                writeln!(out, "{i},{j},{y:.12e},{p:.12e}")?;
            }
        }
        Ok(())
    })?;
    Ok(vec![path])
}

fn run_transport_state(spec: &ExperimentSpec, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let state = default_transporting_state(&spec.config, spec.params.c)?;
    Ok(vec![write_atomic(dir, "transport_state.csv", |out| state.write_csv(out, &spec.header()))?])
}

fn family(spec: &ExperimentSpec, config: &ModelConfig) -> anyhow::Result<Vec<WavePacket>> {
    let p = &spec.params;
    let strip = Arc::new(make_strip(config, p.strip_l, p.strip_w));
    if p.seeds == 0 {
        return Ok(vec![gaussian_packet_realization(strip, p.cx, p.cy, None)?]);
    }
    (0..p.seeds as u64)
        .map(|r| Ok(gaussian_packet_realization(strip.clone(), p.cx, p.cy, Some((spec.seed, r)))?))
        .collect()
}

fn simulate(spec: &ExperimentSpec, config: &ModelConfig) -> anyhow::Result<EnsembleResult> {
    let p = &spec.params;
    let fam = family(spec, config)?;
    Ok(ensemble_evolve(&fam, &sample_times(p.t_end, p.samples), p.scheme(), config, None)?)
}

fn leak_check(e: &EnsembleResult) -> anyhow::Result<()> {
    if !e.valid() {
        bail!(
            "boundary leak {:.3e} exceeds {LEAK_THRESHOLD:.0e}; enlarge strip_L/strip_W or shorten t_end (outputs kept for inspection)",
            e.max_leak
        );
    }
    Ok(())
}

fn run_evolve(spec: &ExperimentSpec, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let e = simulate(spec, &spec.config)?;
    let mut files = vec![write_atomic(dir, "series.csv", |out| e.series.write_csv(out, &spec.header()))?];
    let strip = make_strip(&spec.config, spec.params.strip_l, spec.params.strip_w);
    let bw = cyclobloch::observables::default_bin_width(&spec.config);
    let eta = project_eta_probs(&e.final_probabilities, &strip, spec.config.direction.unit(), bw);
    files.push(write_atomic(dir, "eta_final.csv", |out| {
        write_header(out, &spec.header())?;
        writeln!(out, "eta,probability")?;
        for (j, w) in eta.weights.iter().enumerate() {
            writeln!(out, "{:.12e},{:.15e}", eta.centre(j), w)?;
        }
        Ok(())
    })?);
    leak_check(&e)?;
    Ok(files)
}

fn run_scan_a(spec: &ExperimentSpec, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut rows = Vec::new();
    for &f in &spec.params.f_grid {
        let c = spec.config.with_field(f).validate()?;
        let e = simulate(spec, &c)?;
        leak_check(&e).with_context(|| format!("scan point F = {f}"))?;
        let fit = ballistic_fit(&e.series, default_fit_window(&e.series)).with_context(|| format!("scan point F = {f}"))?;
        rows.push((f, fit, transient_estimate(&e.series)));
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|(f, fit, _)| (*f, fit.coefficient)).collect();
    let scaling = scaling_fit(&points).ok();
    let path = write_atomic(dir, "scan_A.csv", |out| {
        write_header(out, &spec.header())?;
        match &scaling {
            Some(s) => writeln!(out, "# exponent = {:.6e}, log residual = {:.3e}", s.exponent, s.residual)?,
            None => writeln!(out, "# exponent = n/a (need at least 4 positive points)")?,
        }
        writeln!(out, "F,A,residual,t_lo,t_hi,transient")?;
        for (f, fit, tr) in &rows {
            writeln!(out, "{f},{:.12e},{:.6e},{},{},{}", fit.coefficient, fit.residual, fit.window.0, fit.window.1, tr)?;
        }
        Ok(())
    })?;
    Ok(vec![path])
}

fn run_perturb(spec: &ExperimentSpec, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let c = &spec.config;
    let (r, q) = c.rq()?;
    let nu = spec.params.nu;
    let (grid, exact) = exact_band(nu, c, spec.params.kappa_points)?;
    let band = perturbative_band(nu, c)?;
    let approx: Vec<Option<f64>> = grid
        .iter()
        .map(|&k| match (r, q) {
            (0, 1) => first_order_01(nu, k, c).ok().map(|fo| fo.energy),
            (1, 1) => second_order_11(nu, k, c).ok().map(|de| band.e0 + de),
            _ => None,
        })
        .collect();
    let path = write_atomic(dir, "perturb.csv", |out| {
        write_header(out, &spec.header())?;
        writeln!(out, "# leading order = {}, prefactor = {:.12e}, width exponent = -{}", band.order, band.prefactor, band.exponent)?;
        writeln!(out, "kappa,exact,perturbative")?;
        for ((k, e), a) in grid.iter().zip(&exact).zip(&approx) {
            let a = a.map_or(String::new(), |a| format!("{a:.15e}"));
            writeln!(out, "{k:.12e},{e:.15e},{a}")?;
        }
        Ok(())
    })?;
    Ok(vec![path])
}

fn run_classify(spec: &ExperimentSpec, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let e = simulate(spec, &spec.config)?;
    let series = write_atomic(dir, "series.csv", |out| e.series.write_csv(out, &spec.header()))?;
    leak_check(&e)?;
    let scores = regime_scores(&e.series, &spec.config)?;
    let regime = classify_regime(&e.series, &spec.config);
    let summary = write_atomic(dir, "classify.txt", |out| {
        write_header(out, &spec.header())?;
        let [a, b, c, d] = scores.as_array();
        writeln!(out, "scores transporting={a:.6e} ballistic={b:.6e} localized={c:.6e} oscillating={d:.6e}")?;
        match &regime {
            Ok(r) => writeln!(out, "regime = {}", r.name()),
            Err(_) => writeln!(out, "regime = ambiguous"),
        }
    })?;
    regime.map_err(|e| anyhow!(e))?;
    Ok(vec![series, summary])
}

/// Thread count from the flag, else `CYCLOBLOCH_THREADS`.
pub fn resolve_threads(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("CYCLOBLOCH_THREADS") {
        Ok(v) => Ok(Some(v.trim().parse().map_err(|_| anyhow!("CYCLOBLOCH_THREADS = `{v}` is not a thread count"))?)),
        Err(_) => Ok(None),
    }
}
