use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use stochlie::fields::{check_involutive, lie_closure, PolyVectorField};
use stochlie::flowtaylor::{remainder_slope, RemainderStudy};
use stochlie::group::{integrate_group_sde, MatrixLieGroup, Side};
use stochlie::noise::{sample_brownian, DrivingPath, TimeGrid};
use stochlie::sde::{integrate_heun, StratonovichSystem};
use stochlie::weinorman::integrate_wei_norman;
use stochlie_cli::{parse_config, parse_field_dsl, run_experiment, Experiment, ExperimentConfig, FieldDslDocument};

/// Stratonovich SDEs with superposition rules: simulation and checks.
#[derive(Debug, Parser)]
#[command(name = "stochlie", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Base seed of the random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of grid steps.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Final time of the grid.
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// Number of sample paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Output directory for CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run acceptance experiments (`all`, a name, or the config's experiment).
    Run { experiment: Option<String> },
    /// Integrate a DSL system (or scalar GBM) with the Stratonovich-Heun scheme.
    Simulate {
        /// Field DSL file with `noise` and `coeff` lines; component 1 is time.
        #[arg(long)]
        dsl: Option<PathBuf>,
        /// Initial point, comma separated.
        #[arg(long, default_value = "1")]
        z0: String,
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
    },
    /// Integrate a matrix group SDE from the identity by exponential Euler.
    Group {
        #[command(flatten)]
        group: GroupArgs,
        /// Use the left-invariant (right action) form, i.e. the stochastic exponential.
        #[arg(long)]
        left_invariant: bool,
    },
    /// Integrate Wei-Norman coordinates and reconstruct the group solution.
    WeiNorman {
        #[command(flatten)]
        group: GroupArgs,
    },
    /// Verify the linear superposition rule on shared noise paths.
    Superpose,
    /// Remainder study of the truncated stochastic Taylor flow.
    Taylor {
        /// Truncation degree N.
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// Fields Y0..Yr in DSL form (default: the Heisenberg pair).
        #[arg(long)]
        dsl: Option<PathBuf>,
        /// Initial point, comma separated (default: 0.4,-0.3).
        #[arg(long)]
        z0: Option<String>,
    },
    /// Involutivity and Lie-closure report for DSL fields.
    CheckAlgebra {
        #[arg(long)]
        dsl: PathBuf,
        #[arg(long, default_value_t = 10)]
        dim_cap: usize,
        /// Number of random sample points in [-1, 1]^n.
        #[arg(long, default_value_t = 16)]
        points: usize,
    },
    /// Write sampled Brownian paths.
    Paths {
        #[arg(long, default_value_t = 1)]
        dims: usize,
    },
}

#[derive(Debug, Args)]
struct GroupArgs {
    /// affine1, so3, heisenberg or pos_diag:<n>.
    #[arg(long, default_value = "affine1")]
    group: String,
    /// Drive the first generator by time instead of a Brownian motion.
    #[arg(long)]
    with_time: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Config file first, then explicit flags.
fn settings(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let positive = |name: &str, v: usize| if v == 0 { bail!("--{name} must be positive") } else { Ok(v) };
    if let Some(k) = common.steps {
        cfg.steps = Some(positive("steps", k)?);
    }
    if let Some(p) = common.paths {
        cfg.paths = Some(positive("paths", p)?);
    }
    if let Some(n) = common.threads {
        cfg.threads = Some(positive("threads", n)?);
    }
    if let Some(t) = common.t_end {
        if !(t.is_finite() && t > 0.0) {
            bail!("--t-end must be positive");
        }
        cfg.t_end = Some(t);
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool> {
    let cfg = settings(&cli.common)?;
    let pool = match cfg.threads {
        Some(n) => Some(rayon::ThreadPoolBuilder::new().num_threads(n).build()?),
        None => None,
    };
    let job = || command(cli.command, cfg.clone());
    match &pool {
        Some(p) => p.install(job),
        None => job(),
    }
}

fn command(command: Command, cfg: ExperimentConfig) -> Result<bool> {
    match command {
        Command::Run { experiment } => {
            let list = match experiment.as_deref() {
                Some("all") => Experiment::ALL.to_vec(),
                Some(name) => vec![name.parse()?],
                None => vec![cfg.experiment.context("no experiment given on the command line or in the config")?],
            };
            run_all(&cfg, &list)
        }
        Command::Superpose => run_all(&cfg, &[Experiment::LinearSuperposition]),
        Command::Simulate { dsl, z0, mu, sigma } => simulate(&cfg, dsl.as_deref(), &z0, mu, sigma),
        Command::Group { group, left_invariant } => {
            let side = if left_invariant { Side::RightActionLeftInvariant } else { Side::LeftActionRightInvariant };
            group_paths(&cfg, &group, |g, path, out| {
                let traj = integrate_group_sde(g, path, &g.identity(), side)?;
                traj.write_csv(out)?;
                Ok(format!("defect {:.3e}{}", traj.defect, if traj.flagged { " (flagged)" } else { "" }))
            })
        }
        Command::WeiNorman { group } => group_paths(&cfg, &group, |g, path, out| {
            let run = integrate_wei_norman(g, path)?;
            run.write_csv(out)?;
            Ok(match run.singular_index {
                Some(k) => format!("singular at node {k}"),
                None => "regular".into(),
            })
        }),
        Command::Taylor { order, dsl, z0 } => taylor(&cfg, order, dsl.as_deref(), z0.as_deref()),
        Command::CheckAlgebra { dsl, dim_cap, points } => check_algebra(&cfg, &dsl, dim_cap, points),
        Command::Paths { dims } => write_paths(&cfg, dims),
    }
}

fn run_all(cfg: &ExperimentConfig, list: &[Experiment]) -> Result<bool> {
    let mut all = true;
    for &e in list {
        let outcome = run_experiment(&ExperimentConfig { experiment: Some(e), ..cfg.clone() })?;
        println!("{}", outcome.summary_line());
        all &= outcome.pass;
    }
    Ok(all)
}

fn load_dsl(path: &Path) -> Result<FieldDslDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_field_dsl(&text).with_context(|| format!("in {}", path.display()))
}

fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad coordinate `{s}`")))
        .collect()
}

fn create(cfg: &ExperimentConfig, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = cfg.out.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn grid(cfg: &ExperimentConfig, default_t: f64) -> Result<TimeGrid> {
    Ok(TimeGrid::new(cfg.t_end.unwrap_or(default_t), cfg.steps.unwrap_or(1024))?)
}

fn simulate(cfg: &ExperimentConfig, dsl: Option<&Path>, z0: &str, mu: f64, sigma: f64) -> Result<bool> {
    let sys = match dsl {
        Some(p) => load_dsl(p)?.system()?,
        None => StratonovichSystem::gbm(mu, sigma),
    };
    let z0 = parse_point(z0)?;
    let grid = grid(cfg, 1.0)?;
    let brownian = sys.noise_dim().checked_sub(1).context("the system needs a time component")?;
    let trajectories: Vec<_> = (0..cfg.paths.unwrap_or(1) as u64)
        .into_par_iter()
        .map(|p| -> Result<_> {
            let path = sample_brownian(grid, brownian, cfg.seed, p)?.with_time_component();
            Ok(integrate_heun(&sys, &path, &z0)?)
        })
        .collect::<Result<_>>()?;
    for (p, t) in trajectories.iter().enumerate() {
        let mut w = create(cfg, &format!("simulate_p{p}.csv"))?;
        t.write_csv(&mut w)?;
        w.flush()?;
        let end: Vec<String> = t.terminal().iter().map(|x| format!("{x:.6e}")).collect();
        println!("path {p}: terminal [{}]{}", end.join(", "), if t.exit_index.is_some() { " (exploded)" } else { "" });
    }
    Ok(true)
}

fn parse_group(name: &str) -> Result<MatrixLieGroup> {
    Ok(match name {
        "affine1" => MatrixLieGroup::affine1(),
        "so3" => MatrixLieGroup::so3(),
        "heisenberg" => MatrixLieGroup::heisenberg(),
        other => match other.strip_prefix("pos_diag:") {
            Some(n) => {
                let n: usize = n.parse().context("pos_diag:<n> needs an integer")?;
                if n == 0 {
                    bail!("pos_diag needs n >= 1");
                }
                MatrixLieGroup::pos_diag(n)
            }
            None => bail!("unknown group `{other}`"),
        },
    })
}

fn group_paths<F>(cfg: &ExperimentConfig, args: &GroupArgs, f: F) -> Result<bool>
where
    F: Fn(&MatrixLieGroup, &DrivingPath, &mut dyn Write) -> Result<String> + Sync,
{
    let g = parse_group(&args.group)?;
    let grid = grid(cfg, 1.0)?;
    let brownian = if args.with_time { g.dim() - 1 } else { g.dim() };
    let results: Vec<(Vec<u8>, String)> = (0..cfg.paths.unwrap_or(1) as u64)
        .into_par_iter()
        .map(|p| -> Result<_> {
            let b = sample_brownian(grid, brownian, cfg.seed, p)?;
            let path = if args.with_time { b.with_time_component() } else { b };
            let mut buf = Vec::new();
            let note = f(&g, &path, &mut buf)?;
            Ok((buf, note))
        })
        .collect::<Result<_>>()?;
    for (p, (buf, note)) in results.iter().enumerate() {
        let mut w = create(cfg, &format!("{}_p{p}.csv", args.group.replace(':', "")))?;
        w.write_all(buf)?;
        w.flush()?;
        println!("path {p}: {note}");
    }
    Ok(true)
}

fn taylor(cfg: &ExperimentConfig, order: usize, dsl: Option<&Path>, z0: Option<&str>) -> Result<bool> {
    let fields = match dsl {
        Some(p) => load_dsl(p)?.field_list(),
        None => vec![
            PolyVectorField::zero(2),
            PolyVectorField::partial(2, 0),
            PolyVectorField::from_terms(2, [(1, 1.0, vec![1, 0])])?,
        ],
    };
    let z = match z0 {
        Some(s) => parse_point(s)?,
        None => vec![0.4, -0.3],
    };
    let t_max = cfg.t_end.unwrap_or(0.25);
    let ts: Vec<f64> = (0..5).rev().map(|i| t_max / f64::from(1 << i)).collect();
    let mut study = RemainderStudy::new(order, ts, cfg.paths.unwrap_or(128), cfg.seed);
    study.steps = cfg.steps.unwrap_or(1024);
    let rep = remainder_slope(&fields, &z, &study)?;
    let mut w = create(cfg, "taylor.csv")?;
    rep.write_csv(&mut w, true)?;
    w.flush()?;
    if rep.at_floor {
        println!("N={order}: errors at round-off floor (max {:.3e})", rep.mean_errors.iter().copied().fold(0.0, f64::max));
    } else {
        println!("N={order}: slope {:.4}", rep.slope);
    }
    Ok(true)
}

fn check_algebra(cfg: &ExperimentConfig, dsl: &Path, dim_cap: usize, points: usize) -> Result<bool> {
    let doc = load_dsl(dsl)?;
    let fields = doc.field_list();
    let Some(first) = fields.first() else { bail!("{} defines no fields", dsl.display()) };
    let n = first.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let samples: Vec<Vec<f64>> =
        (0..points.max(1)).map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    let inv = check_involutive(&fields, &samples, 1e-8)?;
    let clo = lie_closure(&fields, dim_cap, 1e-9)?;
    let mut w = create(cfg, "check_algebra.csv")?;
    writeln!(w, "property,value")?;
    writeln!(w, "involutive,{}", u8::from(inv.involutive))?;
    writeln!(w, "max_residual,{}", stochlie::io::fmt_real(inv.max_residual))?;
    writeln!(w, "closed,{}", u8::from(clo.closed))?;
    writeln!(w, "dimension,{}", clo.dimension)?;
    writeln!(w, "cap_hit,{}", u8::from(clo.cap_hit))?;
    w.flush()?;
    println!("involutive: {} (max residual {:.3e})", inv.involutive, inv.max_residual);
    if let Some(wit) = &inv.witness {
        let (i, j) = wit.pair;
        println!("  witness: [{}, {}] at {:?}", doc.fields[i].name, doc.fields[j].name, wit.point);
    }
    println!("closure: dimension {} closed {} cap_hit {}", clo.dimension, clo.closed, clo.cap_hit);
    for (k, b) in clo.basis.iter().enumerate() {
        let comps: Vec<String> = b.components().iter().map(ToString::to_string).collect();
        println!("  e{k} = ({})", comps.join(", "));
    }
    Ok(true)
}

fn write_paths(cfg: &ExperimentConfig, dims: usize) -> Result<bool> {
    let grid = grid(cfg, 1.0)?;
    for p in 0..cfg.paths.unwrap_or(1) as u64 {
        let path = sample_brownian(grid, dims, cfg.seed, p)?;
        let mut w = create(cfg, &format!("paths_p{p}.csv"))?;
        path.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(true)
}
