use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use liftdeconv::certificate::certify_instance;
use liftdeconv::harness::{
    self, grid_trials, summarize, trial_file, write_certificate_csv, write_phase_csv, write_superres_csv,
    write_trials_csv, Axis, GridSpec, TrialConfig,
};
use liftdeconv::io::{parse_key_values, Instance, VarianceMode};
use liftdeconv::selftest;
use liftdeconv::solver::{alm_solve, SolverConfig};
use liftdeconv::spectral::FilterSpec;
use liftdeconv::superres::{build_instance, random_trains, solve_instance, TrainLevels, WaveletBasis, WaveletKind};

/// Blind deconvolution by lifting: instance generation, solving,
/// certificates and Monte-Carlo experiments.
#[derive(Parser)]
#[command(name = "liftdeconv", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Unset flags fall back to `--config`,
/// then to built-in defaults.
#[derive(Args)]
struct Common {
    /// Subspace dimension per channel
    #[arg(long = "K", global = true)]
    k: Option<usize>,
    /// Signal length
    #[arg(long = "L", global = true)]
    l: Option<usize>,
    /// Number of channels
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    /// Filter sparsity (nonzero taps); dense when unset
    #[arg(long = "S", global = true)]
    s: Option<usize>,
    /// Factorization rank
    #[arg(long = "r", global = true)]
    rank: Option<usize>,
    /// Penalty parameter
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// L-BFGS iterations per multiplier round
    #[arg(long, global = true)]
    inner_iters: Option<usize>,
    /// Multiplier rounds
    #[arg(long, global = true)]
    outer_iters: Option<usize>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ensemble variance: 1/L or 1
    #[arg(long, global = true)]
    variance: Option<VarianceMode>,
    /// Output file or directory; stdout when unset
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for experiments
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// key=value file with defaults for any of the flags above
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance directory
    Gen,
    /// Solve an instance directory and print a JSON record
    Solve {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Certificate diagnostics for one instance as a CSV row
    Certify {
        /// Instance directory with ground truth; generated from the flags when unset
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        c1: f64,
        /// Power iterations for the tangent deviation; 0 skips it
        #[arg(long, default_value_t = 100)]
        deviation_iters: usize,
    },
    /// Success rates over a two-axis grid
    PhaseDiagram {
        /// Row axis and values, e.g. K=2,4,8
        #[arg(long, default_value = "K=2,4,8")]
        rows: String,
        /// Column axis and values, e.g. L/K=1,2,4,8,16
        #[arg(long, default_value = "L/K=1,2,4,8,16")]
        cols: String,
        /// Also write every trial to this CSV
        #[arg(long)]
        trials_out: Option<PathBuf>,
        /// Include wall-clock time in the trials CSV
        #[arg(long)]
        timing: bool,
    },
    /// Success rates over K and filter sparsity
    SparsityDiagram {
        #[arg(long, value_delimiter = ',', default_value = "4")]
        k_values: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
        s_values: Vec<usize>,
    },
    /// Blind super-resolution of wavelet trains through a low-pass filter
    Superres {
        /// Gaussian width of the filter spectrum, in bins
        #[arg(long, default_value_t = 8.0)]
        width: f64,
        /// Last passed frequency bin
        #[arg(long, default_value_t = 16)]
        cutoff: usize,
        /// haar or db4
        #[arg(long, default_value = "db4")]
        wavelet: WaveletKind,
    },
    /// Run the numerical kernel checks
    Selftest,
}

const CONFIG_KEYS: [&str; 13] = [
    "K", "L", "N", "S", "r", "sigma", "inner-iters", "outer-iters", "trials", "seed", "variance", "out", "threads",
];

struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                parse_key_values(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(key) = file.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            bail!("unknown config key '{key}'");
        }
        Ok(Self { file })
    }

    fn get<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow::anyhow!("config key '{key}': {e}")))
            .transpose()
    }
}

struct Resolved {
    k: usize,
    l: usize,
    n: usize,
    s: Option<usize>,
    trials: usize,
    seed: u64,
    variance: VarianceMode,
    out: Option<PathBuf>,
    threads: Option<usize>,
    rank: Option<usize>,
    sigma: Option<f64>,
    inner_iters: Option<usize>,
    outer_iters: Option<usize>,
}

impl Resolved {
    fn new(c: Common) -> Result<Self> {
        let cfg = Settings::load(c.config.as_deref())?;
        Ok(Self {
            k: cfg.get(c.k, "K")?.unwrap_or(8),
            l: cfg.get(c.l, "L")?.unwrap_or(80),
            n: cfg.get(c.n, "N")?.unwrap_or(20),
            s: cfg.get(c.s, "S")?,
            trials: cfg.get(c.trials, "trials")?.unwrap_or(20),
            seed: cfg.get(c.seed, "seed")?.unwrap_or(0),
            variance: cfg.get(c.variance, "variance")?.unwrap_or_default(),
            out: cfg.get(c.out, "out")?,
            threads: cfg.get(c.threads, "threads")?,
            rank: cfg.get(c.rank, "r")?,
            sigma: cfg.get(c.sigma, "sigma")?,
            inner_iters: cfg.get(c.inner_iters, "inner-iters")?,
            outer_iters: cfg.get(c.outer_iters, "outer-iters")?,
        })
    }

    /// `base` with any solver flags applied.
    fn solver(&self, base: SolverConfig) -> SolverConfig {
        SolverConfig {
            rank: self.rank.unwrap_or(base.rank),
            sigma: self.sigma.unwrap_or(base.sigma),
            inner_iters: self.inner_iters.unwrap_or(base.inner_iters),
            outer_iters: self.outer_iters.unwrap_or(base.outer_iters),
            ..base
        }
    }

    fn trial_config(&self) -> TrialConfig {
        TrialConfig {
            solver: self.solver(SolverConfig::default()),
            variance: self.variance,
        }
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("--out <DIR> is required")
    }
}

/// `AXIS=v1,v2,...`
fn parse_axis(text: &str) -> Result<(Axis, Vec<usize>)> {
    let (axis, values) = text.split_once('=').context("axis must look like K=2,4,8")?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<usize>().with_context(|| format!("bad axis value '{v}'")))
        .collect::<Result<Vec<_>>>()?;
    Ok((axis.trim().parse()?, values))
}

fn gen(opts: &Resolved) -> Result<()> {
    let inst = trial_file(opts.k, opts.l, opts.n, opts.s, opts.seed, opts.variance)?;
    inst.save(opts.out_dir()?)?;
    Ok(())
}

fn solve(opts: &Resolved, dir: &Path) -> Result<()> {
    let inst = Instance::load(dir)?;
    let ens = inst.ensemble()?;
    let config = SolverConfig {
        seed: opts.seed,
        ..opts.solver(SolverConfig::default())
    };
    let res = alm_solve(&inst.measurements, &ens, &config, inst.truth.as_ref())?;
    let record = serde_json::json!({
        "K": inst.dim,
        "L": inst.len,
        "N": inst.channels,
        "sigma": config.sigma,
        "inner_iters": config.inner_iters,
        "outer_iters": config.outer_iters,
        "seed": config.seed,
        "result": res.record(),
    });
    let mut w = opts.output()?;
    serde_json::to_writer_pretty(&mut w, &record)?;
    writeln!(w)?;
    Ok(())
}

fn certify(opts: &Resolved, dir: Option<&Path>, c1: f64, deviation_iters: usize) -> Result<()> {
    let inst = match dir {
        Some(d) => Instance::load(d)?,
        None => trial_file(opts.k, opts.l, opts.n, opts.s, opts.seed, opts.variance)?,
    };
    let gt = inst.truth.as_ref().context("certify needs an instance with ground truth")?;
    let row = certify_instance(gt, &inst.ensemble()?, opts.seed, c1, deviation_iters)?;
    write_certificate_csv(opts.output()?, &[row])?;
    Ok(())
}

fn phase(opts: &Resolved, rows: &str, cols: &str, trials_out: Option<&Path>, timing: bool) -> Result<()> {
    let grid = GridSpec {
        rows: parse_axis(rows)?,
        cols: parse_axis(cols)?,
        k: opts.k,
        l: opts.l,
        n: opts.n,
        s: opts.s,
        trials: opts.trials,
        base_seed: opts.seed,
    };
    let config = opts.trial_config();
    let records = grid_trials(&grid, &config)?;
    let cells: Vec<_> = grid
        .cells()?
        .into_iter()
        .zip(&records)
        .map(|(cell, recs)| summarize(cell, recs))
        .collect();
    write_phase_csv(opts.output()?, &cells)?;
    if let Some(path) = trials_out {
        let flat: Vec<_> = records.into_iter().flatten().collect();
        write_trials_csv(File::create(path)?, &flat, timing)?;
    }
    Ok(())
}

fn sparsity(opts: &Resolved, k_values: &[usize], s_values: &[usize]) -> Result<()> {
    let cells = harness::sparsity_diagram(k_values, s_values, opts.l, opts.n, opts.trials, opts.seed, &opts.trial_config())?;
    write_phase_csv(opts.output()?, &cells)?;
    Ok(())
}

fn superres(opts: &Resolved, width: f64, cutoff: usize, wavelet: WaveletKind) -> Result<()> {
    let dir = opts.out_dir()?;
    let basis = WaveletBasis::full(wavelet, opts.l)?;
    let signals = random_trains(opts.n, opts.k, opts.seed, &basis, TrainLevels::default())?;
    let inst = build_instance(&signals, FilterSpec::new(opts.l, width, cutoff)?, opts.k, &basis)?;
    let config = SolverConfig {
        seed: opts.seed,
        ..opts.solver(SolverConfig::superres())
    };
    let res = solve_instance(&inst, &config)?;
    fs::create_dir_all(dir)?;
    for (n, x) in signals.iter().enumerate() {
        let file = File::create(dir.join(format!("signal_{n}.csv")))?;
        write_superres_csv(file, x, &inst.observations[n], &res.signals[n])?;
    }
    let truth: Vec<f64> = inst.filter.time.iter().map(|z| z.re).collect();
    let recovered: Vec<f64> = res.filter.iter().map(|z| z.re).collect();
    // the filter file reuses the layout; its lowpass column is the truth
    write_superres_csv(File::create(dir.join("filter.csv"))?, &truth, &truth, &recovered)?;
    let summary = serde_json::json!({
        "signal_errors": res.signal_errors,
        "baseline_errors": res.baseline_errors,
        "filter_error": res.filter_error,
        "solve": res.solve.record(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let opts = Resolved::new(cli.common)?;
    if let Some(t) = opts.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::Gen => gen(&opts)?,
        Command::Solve { instance } => solve(&opts, &instance)?,
        Command::Certify {
            instance,
            c1,
            deviation_iters,
        } => certify(&opts, instance.as_deref(), c1, deviation_iters)?,
        Command::PhaseDiagram {
            rows,
            cols,
            trials_out,
            timing,
        } => phase(&opts, &rows, &cols, trials_out.as_deref(), timing)?,
        Command::SparsityDiagram { k_values, s_values } => sparsity(&opts, &k_values, &s_values)?,
        Command::Superres { width, cutoff, wavelet } => superres(&opts, width, cutoff, wavelet)?,
        Command::Selftest => {
            let checks = selftest::run_all()?;
            let mut w = opts.output()?;
            for c in &checks {
                writeln!(w, "{c}")?;
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
