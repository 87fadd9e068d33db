//! Band structures `E_ν(κ)` on κ grids and the cross-check between the two
//! fiber constructions.

use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::eigen::solve_fiber;
use crate::error::{Error, Result};
use crate::fiber::{basis_k_from_kappa, build_fiber_rotated_basis, build_fiber_rotated_frame, operator_period};
use crate::model::ModelConfig;

/// Eigenvectors with more than this mass on the outer tenth of the window are
/// considered truncation artifacts.
pub const EDGE_MASS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub kappa_grid: Vec<f64>,
    /// Retained eigenvalues per κ, ascending. Rows may differ in length.
    pub energies: Vec<Vec<f64>>,
    /// Columns match `energies`; indexed by window row.
    pub eigenvectors: Option<Vec<DMatrix<Complex64>>>,
    pub window: (i64, i64),
    /// Set when the grid covers exactly one period of the operator in κ, so
    /// index `i + len` refers to the same operator as `i`.
    pub period: Option<f64>,
}

impl SpectrumResult {
    pub fn n_kappa(&self) -> usize {
        self.kappa_grid.len()
    }

    /// Rows `(kappa, band_index, energy)` preceded by `#` header lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> io::Result<()> {
        for h in header {
            writeln!(out, "# {h}")?;
        }
        writeln!(out, "# window = {} {}", self.window.0, self.window.1)?;
        writeln!(out, "kappa,band,energy")?;
        for (kappa, row) in self.kappa_grid.iter().zip(&self.energies) {
            for (band, e) in row.iter().enumerate() {
                writeln!(out, "{kappa:.12e},{band},{e:.12e}")?;
            }
        }
        Ok(())
    }
}

/// `n` equally spaced points `start + j·span/n`, `j = 0..n`.
pub fn uniform_grid(start: f64, span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| start + span * j as f64 / n as f64).collect()
}

/// Mass of a normalized vector on the outer tenth of its rows at each end.
pub fn edge_mass(v: impl Iterator<Item = Complex64> + Clone, size: usize) -> f64 {
    let edge = (size / 10).max(1);
    v.enumerate()
        .filter(|(i, _)| *i < edge || *i >= size - edge)
        .map(|(_, z)| z.norm_sqr())
        .sum()
}

fn retain(
    values: &[f64],
    vectors: &DMatrix<Complex64>,
    energy_window: Option<(f64, f64)>,
    is_edge: impl Fn(usize) -> bool,
) -> Vec<usize> {
    (0..values.len())
        .filter(|&j| {
            if let Some((lo, hi)) = energy_window {
                if values[j] < lo || values[j] > hi {
                    return false;
                }
            }
            let mass: f64 = vectors.column(j).iter().enumerate().filter(|(i, _)| is_edge(*i)).map(|(_, z)| z.norm_sqr()).sum();
            mass < EDGE_MASS_TOLERANCE
        })
        .collect()
}

/// Window-converged eigenvalues of the rotated-frame fiber on every κ.
pub fn band_structure(
    config: &ModelConfig,
    kappa_grid: &[f64],
    window: (i64, i64),
    energy_window: Option<(f64, f64)>,
    keep_vectors: bool,
) -> Result<SpectrumResult> {
    let size = (window.1 - window.0 + 1).max(0) as usize;
    let edge = (size / 10).max(1);
    let rows: Vec<(Vec<f64>, Option<DMatrix<Complex64>>)> = kappa_grid
        .par_iter()
        .map(|&kappa| {
            let op = build_fiber_rotated_frame(kappa, config, window)?;
            let sol = solve_fiber(&op, true)?;
            let vecs = sol.vectors.expect("vectors requested");
            let keep = retain(&sol.values, &vecs, energy_window, |i| i < edge || i >= size - edge);
            let energies = keep.iter().map(|&j| sol.values[j]).collect();
            let kept = keep_vectors.then(|| DMatrix::from_fn(size, keep.len(), |i, c| vecs[(i, keep[c])]));
            Ok((energies, kept))
        })
        .collect::<Result<_>>()?;
    let period = operator_period(config).ok().filter(|&p| {
        kappa_grid.len() > 1 && {
            let step = kappa_grid[1] - kappa_grid[0];
            let n = kappa_grid.len() as f64;
            (step * n - p).abs() < 1e-9 * p
                && kappa_grid.windows(2).all(|w| ((w[1] - w[0]) - step).abs() < 1e-9 * p)
        }
    });
    let (energies, vecs): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(SpectrumResult {
        kappa_grid: kappa_grid.to_vec(),
        energies,
        eigenvectors: if keep_vectors { Some(vecs.into_iter().map(|v| v.unwrap()).collect()) } else { None },
        window,
        period,
    })
}

/// Grid points bracketing near-degeneracies (gap below `gap`), returned as
/// the original grid with midpoints inserted around them.
pub fn refine_near_crossings(spectrum: &SpectrumResult, gap: f64) -> Vec<f64> {
    let g = &spectrum.kappa_grid;
    let tight: Vec<bool> = spectrum
        .energies
        .iter()
        .map(|row| row.windows(2).any(|w| w[1] - w[0] < gap))
        .collect();
    let mut out = Vec::with_capacity(2 * g.len());
    for i in 0..g.len() {
        out.push(g[i]);
        if i + 1 < g.len() && (tight[i] || tight[i + 1]) {
            out.push(0.5 * (g[i] + g[i + 1]));
        }
    }
    out
}

/// Quasimomenta and ring length used by [`cross_validate_methods`].
#[derive(Debug, Clone)]
pub struct CrossGrids {
    /// Rotated-frame quasimomenta κ; the rotated basis uses `k = √N·κ`.
    pub kappas: Vec<f64>,
    /// Even ring parameter `K` of the rotated basis.
    pub k_period: usize,
}

/// Largest nearest-neighbour distance between window-converged eigenvalues
/// of the two constructions, in both directions.
///
/// The rotated-frame window is `u = 0..=u_max` with `u_max` the largest
/// label of the rotated basis, so both operate on the same lines.
pub fn cross_validate_methods(config: &ModelConfig, grids: &CrossGrids) -> Result<f64> {
    let (r, q) = config.rq()?;
    if grids.kappas.is_empty() {
        return Err(Error::GridMismatch("empty quasimomentum grid".into()));
    }
    let kk = grids.k_period;
    if kk == 0 || kk % 2 != 0 {
        return Err(Error::OddK(kk));
    }
    let u_max = if r == 0 { kk as i64 - 1 } else { r * (kk as i64 * q - 1) + q * (r - 1) };
    let span = u_max as f64;
    let discrepancies: Vec<f64> = grids
        .kappas
        .par_iter()
        .map(|&kappa| {
            let frame = build_fiber_rotated_frame(kappa, config, (0, u_max))?;
            let fs = solve_fiber(&frame, true)?;
            let size = frame.size;
            let edge = (size / 10).max(1);
            let a_idx = retain(&fs.values, fs.vectors.as_ref().unwrap(), None, |i| i < edge || i >= size - edge);

            let k = basis_k_from_kappa(kappa, config)?;
            let basis = build_fiber_rotated_basis(k, config, kk)?;
            let bs = solve_fiber(&basis, true)?;
            let labels = &basis.labels;
            let b_idx = retain(&bs.values, bs.vectors.as_ref().unwrap(), None, |i| {
                let u = labels[i] as f64;
                u < 0.1 * span || u > 0.9 * span
            });
            if a_idx.is_empty() || b_idx.is_empty() {
                return Err(Error::GridMismatch(format!(
                    "no window-converged states at kappa = {kappa}; enlarge K or raise F"
                )));
            }
            let nearest = |e: f64, set: &[f64]| set.iter().map(|x| (x - e).abs()).fold(f64::INFINITY, f64::min);
            let mut worst = 0.0f64;
            for &i in &a_idx {
                worst = worst.max(nearest(fs.values[i], &bs.values));
            }
            for &j in &b_idx {
                worst = worst.max(nearest(bs.values[j], &fs.values));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(discrepancies.into_iter().fold(0.0, f64::max))
}
