// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ifslab::intervals::fmt17;
use ifslab::measures::{
    coding_pushforward, stability_probe_hat, stability_probe_measures, support_estimate, w1_distance,
    CodingMeasure, CodingOptions, SamplingLaw, StabilityReport,
};
use ifslab::stochastic::{rigidity_check, separability_check, split_check, RigidityVerdict};
use ifslab::{
    chaos_probe, orbit, tail_cover, ChaosMode, ChaosParams, ConleyVerdict, Deadline, Error, GridMeasure,
    HatMeasure, Ifs, Interval, IntervalSet, SetLimits, TargetApprox, TargetOptions, TransitionMatrix,
};

use config::RunConfig;
use output::OutDir;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Budget(_) => 3,
            Failure::Internal(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidAlphabet(_)
            | Error::SymbolOutOfRange { .. }
            | Error::OutsideDomain { .. }
            | Error::MalformedInterval { .. }
            | Error::Parameter(_)
            | Error::Construction(_)
            | Error::Precondition(_)
            | Error::UnsupportedMap(_)
            | Error::Structure(_)
            | Error::Shape(_)
            | Error::Parse { .. } => Failure::Config(e.to_string()),
            Error::Budget(_) | Error::PartOverflow { .. } | Error::Convergence { .. } => {
                Failure::Budget(e.to_string())
            }
            _ => Failure::Internal(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "ifs-lab", version, about = "Attractors, target sets, chaos games and stationary measures of interval IFSs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate the target set by refining words until their images are small.
    Target(Common),
    /// Iterate the Barnsley-Hutchinson operator from the domain and probe the target atoms.
    Attractor(Common),
    /// Run a chaos game and compare its tail with the target set.
    Chaos(ChaosArgs),
    /// Estimate the stationary measure for fixed weights.
    Stationary(StationaryArgs),
    /// Iterate the generalised Markov operator of a recurrent IFS.
    Recurrent(StationaryArgs),
    /// Search for splitting, separability and rigidity witnesses.
    Split(SplitArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Named example system.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated map weights, fractions allowed.
    #[arg(long)]
    weights: Option<String>,
    /// Transition matrix CSV.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Wall-clock budget in seconds for the word searches.
    #[arg(long)]
    budget: Option<f64>,
    /// Sampling threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Copy, Clone, ValueEnum)]
enum Mode {
    Disjunctive,
    Bernoulli,
}

#[derive(Args)]
struct ChaosArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Mode::Disjunctive)]
    mode: Mode,
    /// Starting point; defaults to the domain midpoint.
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 1_000)]
    tail_from: usize,
    /// Tail cover resolution; defaults to the target tolerance.
    #[arg(long)]
    resolution: Option<f64>,
    /// Reference set CSV to compare against instead of the target atoms.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct StationaryArgs {
    #[command(flatten)]
    common: Common,
    /// Symbols per sampled sequence for the sampling cross-check.
    #[arg(long, default_value_t = 40)]
    prefix: usize,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    common: Common,
    /// Sub-interval J as `lo,hi`; defaults to the domain.
    #[arg(long)]
    interval: Option<String>,
    /// First symbol for the rigidity search.
    #[arg(long, default_value_t = 1)]
    symbol: usize,
}

/// Command-line flags layered over the config file.
struct Run {
    ifs: Ifs,
    cfg: RunConfig,
    common: Common,
    out: OutDir,
}

impl Run {
    fn new(common: &Common) -> Result<Self, Failure> {
        let mut cfg = match (&common.config, &common.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig {
                preset: Some(name.clone()),
                ..RunConfig::default()
            },
            (None, None) => return Err(Failure::Config("need --preset or --config".into())),
        };
        if let Some(w) = &common.weights {
            cfg.weights = Some(config::parse_weights(w)?);
        }
        if let Some(m) = &common.matrix {
            cfg.matrix = Some(config::load_matrix(m)?);
        }
        for (name, v) in [("--tol", common.tol), ("--budget", common.budget)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Failure::Config(format!("{name} must be > 0")));
                }
            }
        }
        cfg.tol = common.tol.or(cfg.tol);
        cfg.max_depth = common.max_depth.or(cfg.max_depth);
        cfg.max_iter = common.max_iter.or(cfg.max_iter);
        cfg.bins = common.bins.or(cfg.bins);
        cfg.samples = common.samples.or(cfg.samples);
        cfg.seed = common.seed.or(cfg.seed);
        let ifs = cfg.build_ifs()?;
        Ok(Run {
            ifs,
            cfg,
            common: common.clone(),
            out: OutDir::create(&common.out)?,
        })
    }

    fn limits(&self) -> SetLimits {
        SetLimits {
            merge_eps: self.cfg.merge_eps.unwrap_or(SetLimits::default().merge_eps),
            ..SetLimits::default()
        }
    }

    fn deadline(&self) -> Deadline {
        self.common
            .budget
            .map_or(Deadline::none(), |s| Deadline::after(Duration::from_secs_f64(s)))
    }

    fn weights(&self) -> Result<Vec<f64>, Failure> {
        let k = self.ifs.k();
        let w = self.cfg.weights.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
        if w.len() != k {
            return Err(Failure::Config(format!("{} weights for {k} maps", w.len())));
        }
        Ok(w)
    }

    fn target(&self, default_tol: f64) -> Result<(TargetApprox, bool), Failure> {
        let mut opts = TargetOptions::new(self.cfg.tol.unwrap_or(default_tol), self.cfg.max_depth.unwrap_or(30));
        opts.deadline = self.deadline();
        opts.limits = self.limits();
        match self.ifs.target_approx(&opts) {
            Ok(t) => Ok((t, false)),
            Err(Error::Budget(partial)) => Ok((*partial, true)),
            Err(e) => Err(e.into()),
        }
    }

    fn workers(&self) -> usize {
        self.common.workers.max(1)
    }
}

fn kv(report: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(report, "{key}={value}");
}

fn set_summary(report: &mut String, key: &str, set: &IntervalSet) {
    kv(report, &format!("{key}_parts"), set.len());
    kv(report, &format!("{key}_measure"), fmt17(set.measure()));
}

fn header(run: &Run, command: &str) -> String {
    let mut r = String::new();
    kv(&mut r, "command", command);
    kv(
        &mut r,
        "ifs",
        run.cfg.preset.clone().unwrap_or_else(|| "config".to_string()),
    );
    kv(&mut r, "maps", run.ifs.k());
    let d = run.ifs.domain();
    kv(&mut r, "domain", format!("{} {}", fmt17(d.lo), fmt17(d.hi)));
    r
}

fn cmd_target(common: &Common) -> Result<u8, Failure> {
    let run = Run::new(common)?;
    let (t, budget_hit) = run.target(1e-3)?;
    run.out.write("atoms.csv", t.atoms.to_csv().as_bytes())?;
    run.out.write("undecided.csv", t.undecided.to_csv().as_bytes())?;
    let mut r = header(&run, "target");
    kv(&mut r, "tol", fmt17(run.cfg.tol.unwrap_or(1e-3)));
    kv(&mut r, "atom_words", t.atom_words);
    set_summary(&mut r, "atoms", &t.atoms);
    set_summary(&mut r, "undecided", &t.undecided);
    kv(&mut r, "depth_reached", t.depth_reached);
    kv(&mut r, "words_examined", t.words_examined);
    kv(&mut r, "complete", t.complete);
    kv(&mut r, "budget_exhausted", budget_hit);
    run.out.write("report.txt", r.as_bytes())?;
    print!("{r}");
    Ok(if t.complete { 0 } else { 3 })
}

fn cmd_attractor(common: &Common) -> Result<u8, Failure> {
    let run = Run::new(common)?;
    let tol = run.cfg.tol.unwrap_or(1e-4);
    let max_iter = run.cfg.max_iter.unwrap_or(100);
    let start = run.ifs.full_set().with_limits(run.limits())?;
    let star = run.ifs.star_set(&start, tol, max_iter)?;
    run.out.write("star_set.csv", star.set.to_csv().as_bytes())?;
    let mut r = header(&run, "attractor");
    kv(&mut r, "tol", fmt17(tol));
    kv(&mut r, "star_iterations", star.iterations);
    kv(&mut r, "star_converged", star.converged);
    set_summary(&mut r, "star", &star.set);
    let (t, _) = run.target(tol)?;
    set_summary(&mut r, "target_atoms", &t.atoms);
    kv(&mut r, "target_complete", t.complete);
    if t.atoms.is_empty() {
        kv(&mut r, "conley", "skipped (no target atoms)");
        kv(&mut r, "stable", "skipped (no target atoms)");
    } else {
        kv(&mut r, "star_to_atoms_hausdorff", fmt17(star.set.hausdorff(&t.atoms)?));
        let verdict = run.ifs.conley_probe(&t.atoms, 0.05, tol, max_iter)?;
        kv(&mut r, "conley", verdict.label());
        match &verdict {
            ConleyVerdict::Escapes { residual, distance, .. } => {
                kv(&mut r, "conley_distance", fmt17(*distance));
                set_summary(&mut r, "conley_residual", residual);
            }
            ConleyVerdict::Attracts { distance, .. } | ConleyVerdict::Inconclusive { distance, .. } => {
                kv(&mut r, "conley_distance", fmt17(*distance))
            }
        }
        kv(&mut r, "stable", run.ifs.stability_probe(&t.atoms, 0.1, 0.01, 50)?);
    }
    run.out.write("report.txt", r.as_bytes())?;
    print!("{r}");
    Ok(if star.converged { 0 } else { 3 })
}

fn cmd_chaos(args: &ChaosArgs) -> Result<u8, Failure> {
    let run = Run::new(&args.common)?;
    let d = run.ifs.domain();
    let x0 = args.x0.unwrap_or(d.midpoint());
    let mode = match args.mode {
        Mode::Disjunctive => ChaosMode::Disjunctive,
        Mode::Bernoulli => ChaosMode::Bernoulli {
            weights: run.weights()?,
            seed: run.cfg.seed.unwrap_or(0),
        },
    };
    let ref_tol = run.cfg.tol.unwrap_or(1e-3);
    let resolution = args.resolution.unwrap_or(ref_tol);
    let (reference, reference_note) = match &args.reference {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            (Some(IntervalSet::from_csv(&text)?), "file")
        }
        None => {
            let (t, _) = run.target(ref_tol)?;
            if t.complete {
                (Some(t.atoms), "target atoms")
            } else {
                (None, "none (target approximation incomplete)")
            }
        }
    };
    let orb = orbit(&run.ifs, x0, &mode.stream(run.ifs.k())?, args.n)?;
    run.out.write("orbit.csv", orb.to_csv().as_bytes())?;
    run.out.write("density.ppm", &output::orbit_scatter(&orb, d))?;
    let mut r = header(&run, "chaos");
    kv(&mut r, "x0", fmt17(x0));
    kv(&mut r, "reference", reference_note);
    let code = if let Some(reference) = reference {
        let params = ChaosParams {
            x0,
            n: args.n,
            tail_from: args.tail_from,
            resolution,
        };
        let report = chaos_probe(&run.ifs, &mode, params, Some(&reference), ref_tol)?;
        run.out.write("tail.csv", report.tail.to_csv().as_bytes())?;
        r.push_str(&report.to_text());
        0
    } else {
        let tail = tail_cover(&orb, args.tail_from, resolution, d)?;
        run.out.write("tail.csv", tail.to_csv().as_bytes())?;
        kv(&mut r, "tail_parts", tail.len());
        kv(&mut r, "verdict", "no reference");
        3
    };
    run.out.write("report.txt", r.as_bytes())?;
    print!("{r}");
    Ok(code)
}

fn starts(d: Interval, bins: usize) -> Result<Vec<GridMeasure>, Failure> {
    Ok(vec![
        GridMeasure::uniform(d, bins)?,
        GridMeasure::dirac(d, bins, d.lo)?,
        GridMeasure::dirac(d, bins, d.hi)?,
    ])
}

fn cmd_stationary(args: &StationaryArgs) -> Result<u8, Failure> {
    let run = Run::new(&args.common)?;
    let weights = run.weights()?;
    let d = run.ifs.domain();
    let bins = run.cfg.bins.unwrap_or(1024);
    let tol = run.cfg.tol.unwrap_or(1e-10);
    let max_iter = run.cfg.max_iter.unwrap_or(200);
    let report = stability_probe_measures(&run.ifs, &weights, &starts(d, bins)?, tol, max_iter)?;
    let mut r = header(&run, "stationary");
    kv(&mut r, "weights", weights.iter().map(|w| fmt17(*w)).collect::<Vec<_>>().join(","));
    kv(&mut r, "bins", bins);
    let (mu, code) = match report {
        StabilityReport::Stable { limit, iterations } => {
            kv(&mut r, "operator", "stable");
            kv(&mut r, "iterations", iterations);
            (limit, 0)
        }
        StabilityReport::NotConverged {
            iterations,
            max_step,
            max_spread,
        } => {
            kv(&mut r, "operator", "not-converged");
            kv(&mut r, "iterations", iterations);
            kv(&mut r, "last_step_w1", fmt17(max_step));
            kv(&mut r, "start_spread_w1", fmt17(max_spread));
            // report the trajectory from the uniform start
            let mut mu = GridMeasure::uniform(d, bins)?;
            for _ in 0..max_iter {
                mu = ifslab::measures::markov_step(&run.ifs, &weights, &mu)?;
            }
            (mu, 3)
        }
    };
    kv(&mut r, "mean", fmt17(mu.mean()));
    kv(&mut r, "variance", fmt17(mu.variance()));
    let support = support_estimate(&mu, 0.5)?;
    set_summary(&mut r, "support", &support);
    let opts = CodingOptions {
        n_samples: run.cfg.samples.unwrap_or(100_000),
        prefix_len: args.prefix,
        tol: 1e-9,
        n_bins: bins,
        seed: run.cfg.seed.unwrap_or(0),
        workers: run.workers(),
    };
    match coding_pushforward(&run.ifs, &SamplingLaw::Bernoulli { weights }, &opts) {
        Ok(est) => {
            let CodingMeasure::Grid(sampled) = est.measure else {
                return Err(Failure::Internal("expected a grid measure".into()));
            };
            kv(&mut r, "sampled_mean", fmt17(sampled.mean()));
            kv(&mut r, "sampled_variance", fmt17(sampled.variance()));
            kv(&mut r, "unresolved_fraction", fmt17(est.unresolved_fraction));
            kv(&mut r, "w1_operator_vs_sampled", fmt17(w1_distance(&mu, &sampled)?));
        }
        Err(Error::AllUnresolved { .. }) => kv(&mut r, "unresolved_fraction", fmt17(1.0)),
        Err(e) => return Err(e.into()),
    }
    run.out.write("measure.csv", mu.to_csv().as_bytes())?;
    run.out.write("support.csv", support.to_csv().as_bytes())?;
    run.out.write("density.ppm", &output::density_strip(&mu))?;
    run.out.write("report.txt", r.as_bytes())?;
    print!("{r}");
    Ok(code)
}

fn require_matrix(run: &Run) -> Result<TransitionMatrix, Failure> {
    let p = run
        .cfg
        .matrix
        .clone()
        .ok_or_else(|| Failure::Config("this command needs --matrix or `matrix =` in the config".into()))?;
    if p.dim() != run.ifs.k() {
        return Err(Failure::Config(format!("{}-state matrix for {} maps", p.dim(), run.ifs.k())));
    }
    Ok(p)
}

fn cmd_recurrent(args: &StationaryArgs) -> Result<u8, Failure> {
    let run = Run::new(&args.common)?;
    let p = require_matrix(&run)?;
    let pbar = p.stationary_vector(1e-15, 1_000_000)?;
    let d = run.ifs.domain();
    let bins = run.cfg.bins.unwrap_or(1024);
    let tol = run.cfg.tol.unwrap_or(1e-10);
    let max_iter = run.cfg.max_iter.unwrap_or(200);
    let k = run.ifs.k();
    let mut hat_starts = vec![HatMeasure::product(&GridMeasure::uniform(d, bins)?, &pbar)?];
    for (i, mu) in starts(d, bins)?.into_iter().skip(1).enumerate() {
        let mut w = vec![0.0; k];
        w[(i * (k - 1)) % k] = 1.0;
        hat_starts.push(HatMeasure::product(&mu, &w)?);
    }
    let mut r = header(&run, "recurrent");
    kv(&mut r, "pbar", pbar.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(","));
    kv(&mut r, "primitive", p.is_primitive());
    let (hat, code) = match stability_probe_hat(&run.ifs, &p, &hat_starts, tol, max_iter)? {
        StabilityReport::Stable { limit, iterations } => {
            kv(&mut r, "operator", "stable");
            kv(&mut r, "iterations", iterations);
            (limit, 0)
        }
        StabilityReport::NotConverged {
            iterations,
            max_step,
            max_spread,
        } => {
            kv(&mut r, "operator", "not-converged");
            kv(&mut r, "iterations", iterations);
            kv(&mut r, "last_step_distance", fmt17(max_step));
            kv(&mut r, "start_spread_distance", fmt17(max_spread));
            let mut hat = hat_starts.swap_remove(0);
            for _ in 0..max_iter {
                hat = ifslab::measures::generalized_markov_step(&run.ifs, &p, &hat)?;
            }
            (hat, 3)
        }
    };
    kv(
        &mut r,
        "section_masses",
        hat.section_masses().iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(","),
    );
    kv(&mut r, "marginal_mean", fmt17(hat.marginal().mean()));
    let q = p.inverse(&pbar)?;
    let opts = CodingOptions {
        n_samples: run.cfg.samples.unwrap_or(100_000),
        prefix_len: args.prefix,
        tol: 1e-9,
        n_bins: bins,
        seed: run.cfg.seed.unwrap_or(0),
        workers: run.workers(),
    };
    let law = SamplingLaw::Markov {
        chain: q,
        initial: pbar.to_vec(),
    };
    match coding_pushforward(&run.ifs, &law, &opts) {
        Ok(est) => {
            let CodingMeasure::Hat(sampled) = est.measure else {
                return Err(Failure::Internal("expected a hat measure".into()));
            };
            kv(&mut r, "unresolved_fraction", fmt17(est.unresolved_fraction));
            kv(
                &mut r,
                "distance_operator_vs_sampled",
                fmt17(ifslab::measures::hat_distance(&hat, &sampled)?),
            );
        }
        Err(Error::AllUnresolved { .. }) => kv(&mut r, "unresolved_fraction", fmt17(1.0)),
        Err(e) => return Err(e.into()),
    }
    run.out.write("hat_measure.csv", hat.to_csv().as_bytes())?;
    run.out.write("report.txt", r.as_bytes())?;
    print!("{r}");
    Ok(code)
}

fn parse_interval(s: &str) -> Result<Interval, Failure> {
    let v = config::parse_weights(s)?;
    match v.as_slice() {
        [lo, hi] => Interval::new(*lo, *hi).map_err(Failure::from),
        _ => Err(Failure::Config(format!("--interval expects `lo,hi`, got `{s}`"))),
    }
}

fn cmd_split(args: &SplitArgs) -> Result<u8, Failure> {
    let run = Run::new(&args.common)?;
    let depth = run.cfg.max_depth.unwrap_or(12);
    let j = match &args.interval {
        Some(s) => parse_interval(s)?,
        None => run.ifs.domain(),
    };
    let (p, pbar) = match &run.cfg.matrix {
        Some(_) => {
            let p = require_matrix(&run)?;
            let pbar = p.stationary_vector(1e-15, 1_000_000)?.0;
            (p, pbar)
        }
        None => {
            let w = run.weights()?;
            (TransitionMatrix::bernoulli(&w)?, w)
        }
    };
    let words = |found: Option<(ifslab::Word, ifslab::Word)>| match found {
        Some((u, v)) => format!("{u} {v}"),
        None => format!("none-up-to-depth {depth}"),
    };
    let mut r = header(&run, "split");
    kv(&mut r, "interval", format!("{} {}", fmt17(j.lo), fmt17(j.hi)));
    kv(&mut r, "max_depth", depth);
    kv(&mut r, "split", words(split_check(&run.ifs, &p, &pbar, j, depth)?));
    kv(&mut r, "separability", words(separability_check(&run.ifs, j, depth)?));
    let tol = run.cfg.tol.unwrap_or(1e-3);
    let rigidity = match rigidity_check(&run.ifs, &p, &pbar, j, args.symbol, tol, depth)? {
        RigidityVerdict::SplitOnSymbol(u, v) => format!("split-on-symbol {} {u} {v}", args.symbol),
        RigidityVerdict::NoneFound => format!("none-up-to-depth {depth}"),
    };
    kv(&mut r, "rigidity", rigidity);
    let fixed = run.ifs.common_fixed_points(1e-9, 1000)?;
    if fixed.is_empty() {
        kv(&mut r, "common_fixed_points", "none");
    } else {
        let cells: Vec<String> = fixed
            .parts()
            .iter()
            .map(|c| format!("[{},{}]", fmt17(c.lo), fmt17(c.hi)))
            .collect();
        kv(&mut r, "common_fixed_points", cells.join(" "));
    }
    run.out.write("report.txt", r.as_bytes())?;
    print!("{r}");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Target(c) => cmd_target(c),
        Command::Attractor(c) => cmd_attractor(c),
        Command::Chaos(a) => cmd_chaos(a),
        Command::Stationary(a) => cmd_stationary(a),
        Command::Recurrent(a) => cmd_recurrent(a),
        Command::Split(a) => cmd_split(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ifs-lab: {e}");
            ExitCode::from(e.code())
        }
    }
}
