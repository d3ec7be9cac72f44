//! Seeded Monte-Carlo experiments and their CSV output.
//!
//! Every trial seed is `derive_seed(base_seed, cell, trial)` (see
//! [`crate::rng::derive_seed`]), so results do not depend on scheduling.
//! Trials run in parallel when the `parallel` feature is on and are
//! collected in `(cell, trial)` order.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::certificate::{certify_instance, CertificateRow};
use crate::io::{fmt_float, Instance, VarianceMode};
use crate::lifting::{gen_subspaces, synthesize, GroundTruth};
use crate::rng::derive_seed;
use crate::solver::{alm_solve, SolverConfig};
use crate::{Error, Result};

/// A trial succeeds when the relative error is below this.
pub const SUCCESS_THRESHOLD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialConfig {
    pub solver: SolverConfig,
    pub variance: VarianceMode,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            variance: VarianceMode::InvLen,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub dim: usize,
    pub len: usize,
    pub channels: usize,
    /// Support size of `h`; equal to `len` for dense filters.
    pub sparsity: usize,
    pub variance: VarianceMode,
    pub rel_error: f64,
    pub success: bool,
    pub feasibility: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

/// Ensemble and ground truth for one trial seed. The filter is dense when
/// `sparsity` is `None`.
pub fn trial_instance(
    k: usize,
    l: usize,
    n: usize,
    sparsity: Option<usize>,
    seed: u64,
    variance: VarianceMode,
) -> Result<(crate::lifting::SubspaceEnsemble, GroundTruth)> {
    let ens = gen_subspaces(l, k, n, derive_seed(seed, 1, 0), variance.variance(l))?;
    let gt_seed = derive_seed(seed, 2, 0);
    let gt = match sparsity {
        Some(s) if s < l => GroundTruth::sparse_gaussian(l, k, n, s, gt_seed)?,
        Some(s) if s > l => {
            return Err(Error::InvalidParameter(format!("sparsity {s} exceeds L = {l}")));
        }
        _ => GroundTruth::gaussian(l, k, n, gt_seed)?,
    };
    Ok((ens, gt))
}

/// Trial `seed` in its on-disk form. The stored seed is the ensemble seed,
/// so [`Instance::ensemble`] regenerates the same matrices.
pub fn trial_file(
    k: usize,
    l: usize,
    n: usize,
    sparsity: Option<usize>,
    seed: u64,
    variance: VarianceMode,
) -> Result<Instance> {
    let (ens, gt) = trial_instance(k, l, n, sparsity, seed, variance)?;
    Ok(Instance {
        len: l,
        dim: k,
        channels: n,
        seed: derive_seed(seed, 1, 0),
        variance,
        measurements: synthesize(&gt, &ens)?,
        truth: Some(gt),
    })
}

#[cfg(not(target_arch = "wasm32"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[cfg(target_arch = "wasm32")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    (f(), 0.0)
}

/// Generate, measure and solve one instance. Solver failures are recorded
/// as unsuccessful trials.
pub fn run_trial(k: usize, l: usize, n: usize, seed: u64, config: &TrialConfig) -> Result<TrialRecord> {
    run_sparse_trial(k, l, n, None, seed, config)
}

pub fn run_sparse_trial(
    k: usize,
    l: usize,
    n: usize,
    sparsity: Option<usize>,
    seed: u64,
    config: &TrialConfig,
) -> Result<TrialRecord> {
    let (ens, gt) = trial_instance(k, l, n, sparsity, seed, config.variance)?;
    let y = synthesize(&gt, &ens)?;
    let solver = SolverConfig {
        seed: derive_seed(seed, 3, 0),
        ..config.solver
    };
    let (outcome, wall_time_s) = timed(|| alm_solve(&y, &ens, &solver, Some(&gt)));
    let (rel_error, feasibility, iterations) = match outcome {
        Ok(res) => (res.rel_error.unwrap_or(f64::NAN), res.feasibility, res.iterations),
        Err(Error::InvalidParameter(msg)) => return Err(Error::InvalidParameter(msg)),
        Err(_) => (f64::NAN, f64::NAN, 0),
    };
    Ok(TrialRecord {
        seed,
        dim: k,
        len: l,
        channels: n,
        sparsity: sparsity.unwrap_or(l).min(l),
        variance: config.variance,
        rel_error,
        success: rel_error < SUCCESS_THRESHOLD,
        feasibility,
        iterations,
        wall_time_s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    K,
    L,
    N,
    S,
    /// `L` given as a multiple of `K`.
    LOverK,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(Axis::K),
            "L" | "l" => Ok(Axis::L),
            "N" | "n" => Ok(Axis::N),
            "S" | "s" => Ok(Axis::S),
            "L/K" | "l/k" => Ok(Axis::LOverK),
            other => Err(Error::InvalidParameter(format!("unknown axis '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub rows: (Axis, Vec<usize>),
    pub cols: (Axis, Vec<usize>),
    /// Values for the axes not on the grid. `s = None` means dense `h`.
    pub k: usize,
    pub l: usize,
    pub n: usize,
    pub s: Option<usize>,
    pub trials: usize,
    pub base_seed: u64,
}

/// Dimensions of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub k: usize,
    pub l: usize,
    pub n: usize,
    pub s: Option<usize>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows.0 == self.cols.0 {
            return Err(Error::InvalidParameter("grid axes must differ".into()));
        }
        let uses = |a: Axis| self.rows.0 == a || self.cols.0 == a;
        if uses(Axis::L) && uses(Axis::LOverK) {
            return Err(Error::InvalidParameter("L and L/K cannot both be axes".into()));
        }
        Ok(())
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let mut out = Vec::new();
        for &a in &self.rows.1 {
            for &b in &self.cols.1 {
                let mut cell = Cell {
                    k: self.k,
                    l: self.l,
                    n: self.n,
                    s: self.s,
                };
                let mut ratio = None;
                for (axis, v) in [(self.rows.0, a), (self.cols.0, b)] {
                    match axis {
                        Axis::K => cell.k = v,
                        Axis::L => cell.l = v,
                        Axis::N => cell.n = v,
                        Axis::S => cell.s = Some(v),
                        Axis::LOverK => ratio = Some(v),
                    }
                }
                if let Some(r) = ratio {
                    cell.l = r * cell.k;
                }
                if cell.k == 0 || cell.l == 0 || cell.n == 0 {
                    return Err(Error::InvalidDimension(format!(
                        "cell K={} L={} N={} has a zero dimension",
                        cell.k, cell.l, cell.n
                    )));
                }
                if let Some(s) = cell.s {
                    if s == 0 || s > cell.l {
                        return Err(Error::InvalidParameter(format!("sparsity {s} must lie in 1..={}", cell.l)));
                    }
                }
                out.push(cell);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub trials: usize,
    pub successes: usize,
    pub mean_rel_error: f64,
}

impl CellSummary {
    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

/// Map `f` over `items`, in parallel when available, keeping input order.
pub fn ordered_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Every trial of every cell.
pub fn grid_trials(grid: &GridSpec, config: &TrialConfig) -> Result<Vec<Vec<TrialRecord>>> {
    let cells = grid.cells()?;
    let jobs: Vec<(usize, usize, Cell)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, &cell)| (0..grid.trials).map(move |t| (ci, t, cell)))
        .collect();
    let records = ordered_map(jobs, |(ci, t, cell)| {
        let seed = derive_seed(grid.base_seed, ci as u64, t as u64);
        run_sparse_trial(cell.k, cell.l, cell.n, cell.s, seed, config)
    });
    let mut out: Vec<Vec<TrialRecord>> = vec![Vec::with_capacity(grid.trials); cells.len()];
    for (i, rec) in records.into_iter().enumerate() {
        out[i / grid.trials.max(1)].push(rec?);
    }
    Ok(out)
}

pub fn summarize(cell: Cell, records: &[TrialRecord]) -> CellSummary {
    let finite: Vec<f64> = records.iter().map(|r| r.rel_error).filter(|e| e.is_finite()).collect();
    CellSummary {
        cell,
        trials: records.len(),
        successes: records.iter().filter(|r| r.success).count(),
        mean_rel_error: if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        },
    }
}

/// Success rate and mean error for every cell of `grid`.
pub fn phase_diagram(grid: &GridSpec, config: &TrialConfig) -> Result<Vec<CellSummary>> {
    let cells = grid.cells()?;
    let trials = grid_trials(grid, config)?;
    Ok(cells
        .into_iter()
        .zip(&trials)
        .map(|(cell, recs)| summarize(cell, recs))
        .collect())
}

/// Success rates over `K x S` at fixed `L`, `N`, with `S`-sparse filters.
#[allow(clippy::too_many_arguments)]
pub fn sparsity_diagram(
    k_range: &[usize],
    s_range: &[usize],
    l: usize,
    n: usize,
    trials: usize,
    seed: u64,
    config: &TrialConfig,
) -> Result<Vec<CellSummary>> {
    if let Some(&s) = s_range.iter().find(|&&s| s > l) {
        return Err(Error::InvalidParameter(format!("sparsity {s} exceeds L = {l}")));
    }
    let grid = GridSpec {
        rows: (Axis::K, k_range.to_vec()),
        cols: (Axis::S, s_range.to_vec()),
        k: 1,
        l,
        n,
        s: None,
        trials,
        base_seed: seed,
    };
    phase_diagram(&grid, config)
}

/// Certificate rows for `trials` seeded instances at fixed dimensions.
#[allow(clippy::too_many_arguments)]
pub fn certificate_experiment(
    k: usize,
    l: usize,
    n: usize,
    trials: usize,
    seed: u64,
    c1: f64,
    deviation_iters: usize,
    variance: VarianceMode,
) -> Result<Vec<CertificateRow>> {
    let seeds: Vec<u64> = (0..trials).map(|t| derive_seed(seed, 0, t as u64)).collect();
    ordered_map(seeds, |s| {
        let (ens, gt) = trial_instance(k, l, n, None, s, variance)?;
        certify_instance(&gt, &ens, s, c1, deviation_iters)
    })
    .into_iter()
    .collect()
}

pub const PHASE_HEADER: [&str; 8] = ["K", "L", "N", "S", "trials", "successes", "success_rate", "mean_rel_error"];

pub fn write_phase_csv<W: Write>(w: W, cells: &[CellSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PHASE_HEADER)?;
    for c in cells {
        out.write_record([
            c.cell.k.to_string(),
            c.cell.l.to_string(),
            c.cell.n.to_string(),
            c.cell.s.unwrap_or(c.cell.l).to_string(),
            c.trials.to_string(),
            c.successes.to_string(),
            fmt_float(c.success_rate()),
            fmt_float(c.mean_rel_error),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub const TRIAL_HEADER: [&str; 11] = [
    "seed",
    "K",
    "L",
    "N",
    "S",
    "variance",
    "rel_error",
    "success",
    "feasibility",
    "iterations",
    "wall_time_s",
];

/// Per-trial rows. `wall_time_s` is the only column that varies between
/// runs; pass `timing = false` to write it as `0`.
pub fn write_trials_csv<W: Write>(w: W, records: &[TrialRecord], timing: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRIAL_HEADER)?;
    for r in records {
        out.write_record([
            r.seed.to_string(),
            r.dim.to_string(),
            r.len.to_string(),
            r.channels.to_string(),
            r.sparsity.to_string(),
            r.variance.as_str().to_string(),
            fmt_float(r.rel_error),
            u8::from(r.success).to_string(),
            fmt_float(r.feasibility),
            r.iterations.to_string(),
            fmt_float(if timing { r.wall_time_s } else { 0.0 }),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub const CERTIFICATE_HEADER: [&str; 13] = [
    "seed",
    "K",
    "L",
    "N",
    "tangent_residual_Y1",
    "complement_Y1",
    "tangent_residual_Y2",
    "complement_Y2",
    "gamma",
    "cg_iters",
    "cg_residual",
    "tangent_deviation",
    "cg_converged",
];

pub fn write_certificate_csv<W: Write>(w: W, rows: &[CertificateRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CERTIFICATE_HEADER)?;
    for r in rows {
        let (t2, c2) = r
            .inverse
            .map(|rep| (rep.tangent_residual, rep.complement_norm))
            .unwrap_or((f64::NAN, f64::NAN));
        out.write_record([
            r.seed.to_string(),
            r.dim.to_string(),
            r.len.to_string(),
            r.channels.to_string(),
            fmt_float(r.direct.tangent_residual),
            fmt_float(r.direct.complement_norm),
            fmt_float(t2),
            fmt_float(c2),
            fmt_float(r.direct.gamma),
            r.cg_iterations.to_string(),
            fmt_float(r.cg_residual),
            fmt_float(r.tangent_deviation),
            u8::from(r.inverse.is_some()).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub const SUPERRES_HEADER: [&str; 4] = ["index", "true", "lowpass", "recovered"];

/// One signal's time samples beside its low-pass observation and the
/// recovered estimate.
pub fn write_superres_csv<W: Write>(w: W, truth: &[f64], lowpass: &[f64], recovered: &[f64]) -> Result<()> {
    for other in [lowpass.len(), recovered.len()] {
        if other != truth.len() {
            return Err(Error::LengthMismatch {
                expected: truth.len(),
                actual: other,
            });
        }
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUPERRES_HEADER)?;
    for (i, ((t, l), r)) in truth.iter().zip(lowpass).zip(recovered).enumerate() {
        out.write_record([i.to_string(), fmt_float(*t), fmt_float(*l), fmt_float(*r)])?;
    }
    out.flush()?;
    Ok(())
}

/// Median of the finite entries, `NaN` if there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}
