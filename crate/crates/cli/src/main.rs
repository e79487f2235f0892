//! `twomat`: single Monte Carlo runs, critical-curve searches, resumable
//! sweeps and reports over a run registry.
//!
//! Exit codes: 0 success (or a convergent point), 10 divergent point,
//! 11 hermiticity loss, 1 any other failure, 2 usage error.

mod registry;
mod report;
mod sweep;
mod task;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use registry::{Registry, RunRecord};
use serde::Deserialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use task::{run_and_commit, Setup, Task, TaskSpec};
use twomat::analysis::{frg_fixed_points, frg_flow, write_flow, FlowSense};
use twomat::hmc::AcceptanceRule;
use twomat::{mc_run, ChainConfig, ModelParams};

const EXIT_DIVERGED: u8 = 10;
const EXIT_HERMITICITY: u8 = 11;

#[derive(Parser)]
#[command(
    name = "twomat",
    version,
    about = "Monte Carlo and critical-curve tools for two-matrix models"
)]
struct Cli {
    /// Root under which registries are created.
    #[arg(
        long,
        env = "TWOMAT_OUTPUT_ROOT",
        default_value = "twomat-out",
        global = true
    )]
    output_root: PathBuf,
    /// TOML file whose settings override the corresponding flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain and decide MC(g, h).
    RunPoint {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        g: f64,
        #[arg(long, allow_hyphen_values = true)]
        h: f64,
        /// Write the observable series here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Locate a dipole with one of the search routines.
    Search {
        #[command(subcommand)]
        kind: SearchKind,
    },
    /// Run every task of a plan file; completed tasks are skipped.
    Sweep { plan: PathBuf },
    /// Write curve tables, asymptote fits and positivity checks.
    Report {
        #[arg(long, default_value = "adhoc")]
        registry: PathBuf,
    },
    /// Integrate the renormalisation-group flow of (h, g).
    FrgFlow {
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        h0: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        g0: f64,
        #[arg(long, default_value_t = 1e-2)]
        step: f64,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, value_enum, default_value_t = Sense::Uv)]
        sense: Sense,
        /// Stop once |h| or |g| exceeds this.
        #[arg(long, default_value_t = 10.0)]
        escape: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the fixed points instead of a trajectory.
        #[arg(long)]
        fixed_points: bool,
    },
    /// Print the Schwinger-Dyson table for the A-variations.
    SdeTable,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sense {
    Uv,
    Ir,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Hamiltonian,
    DeltaSOnly,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Matrix size N.
    #[arg(short = 'N', long = "size", default_value_t = 16)]
    size: usize,
    /// Chain length n.
    #[arg(short = 'n', long = "iterations", default_value_t = 20_000)]
    iterations: usize,
    /// Pinned seed; searches derive one from the task hash when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Leapfrog step.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Leapfrog steps per trajectory.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    acceptance: Option<Rule>,
    /// Registry directory, relative to the output root.
    #[arg(long, default_value = "adhoc")]
    registry: PathBuf,
    /// Stand-in region instead of Monte Carlo: disk:R, ellipse:A,B or halfplane:H.
    #[arg(long)]
    dummy: Option<String>,
}

#[derive(Subcommand)]
enum SearchKind {
    /// Bisect between two points of opposite verdict.
    Midpoint {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        from: [f64; 2],
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        to: [f64; 2],
        #[arg(long, default_value_t = 0.0015)]
        delta: f64,
    },
    /// March inward along a ray from a divergent point.
    Radial {
        #[command(flatten)]
        model: ModelArgs,
        /// Ray angle in degrees from the g-axis.
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, default_value_t = 0.3)]
        r0: f64,
        #[arg(long, default_value_t = 0.0015)]
        delta: f64,
        /// Adaptive step base; overrides --delta.
        #[arg(long)]
        adaptive_base: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
    },
    /// Rotate a divergent point until it converges.
    Angular(AngularArgs),
    /// Rotate a convergent point until it diverges.
    AngularNegated(AngularArgs),
}

#[derive(Args)]
struct AngularArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    start: [f64; 2],
    /// Scan step in degrees.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Final bracket width in degrees.
    #[arg(long, default_value_t = 0.5)]
    refine: f64,
    #[arg(long)]
    clockwise: bool,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let (g, h) = s.split_once(',').ok_or("expected g,h")?;
    let f = |x: &str| x.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok([f(g)?, f(h)?])
}

/// Settings read from `--config`; each present key beats its flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    q: Option<f64>,
    #[serde(rename = "N")]
    size: Option<usize>,
    n: Option<usize>,
    seed: Option<u64>,
    registry: Option<PathBuf>,
    #[serde(default)]
    chain: toml::Table,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Chain defaults for a single-host run: `ε = 2·10⁻³`, 50 steps.
fn desk_chain() -> ChainConfig {
    ChainConfig {
        epsilon: 2e-3,
        steps_per_trajectory: 50,
        ..ChainConfig::default()
    }
}

/// Replace the fields of `base` named in `table`.
pub(crate) fn overlay(base: &ChainConfig, table: &toml::Table) -> Result<ChainConfig> {
    let mut merged = toml::Table::try_from(base)?;
    merged.extend(table.clone());
    Ok(merged.try_into()?)
}

struct Resolved {
    setup: Setup,
    registry: Registry,
}

fn resolve(cli: &Cli, m: &ModelArgs) -> Result<Resolved> {
    let file = load_config(cli.config.as_deref())?;
    let mut chain = desk_chain();
    chain.n = m.iterations;
    if let Some(e) = m.epsilon {
        chain.epsilon = e;
    }
    if let Some(s) = m.steps {
        chain.steps_per_trajectory = s;
    }
    if let Some(r) = m.acceptance {
        chain.acceptance = match r {
            Rule::Hamiltonian => AcceptanceRule::Hamiltonian,
            Rule::DeltaSOnly => AcceptanceRule::DeltaSOnly,
        };
    }
    let mut chain = overlay(&chain, &file.chain)?;
    if let Some(n) = file.n {
        chain.n = n;
    }
    let seed = file.seed.or(m.seed);
    if let Some(s) = seed {
        chain.seed = s;
    }
    chain.validate()?;
    let setup = Setup {
        q: file.q.unwrap_or(m.q),
        size: file.size.unwrap_or(m.size),
        chain,
        seed,
        dummy: m.dummy.clone(),
    };
    ModelParams::new(setup.q, 0.0, 0.0, setup.size)?;
    if let Some(d) = &setup.dummy {
        d.parse::<twomat::search::Dummy>()?;
    }
    let dir = file.registry.unwrap_or_else(|| m.registry.clone());
    Ok(Resolved {
        setup,
        registry: Registry::open(cli.output_root.join(dir))?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::RunPoint { model, g, h, trace } => run_point(cli, model, *g, *h, trace.as_deref()),
        Command::Search { kind } => {
            let (model, task) = match kind {
                SearchKind::Midpoint {
                    model,
                    from,
                    to,
                    delta,
                } => (
                    model,
                    Task::Midpoint {
                        from: *from,
                        to: *to,
                        delta: *delta,
                    },
                ),
                SearchKind::Radial {
                    model,
                    phi,
                    r0,
                    delta,
                    adaptive_base,
                    max_steps,
                } => (
                    model,
                    Task::Radial {
                        phi: *phi,
                        r0: *r0,
                        delta: *delta,
                        adaptive_base: *adaptive_base,
                        max_steps: *max_steps,
                    },
                ),
                SearchKind::Angular(a) | SearchKind::AngularNegated(a) => (
                    &a.model,
                    Task::Angular {
                        start: a.start,
                        alpha: a.alpha,
                        refine: a.refine,
                        clockwise: a.clockwise,
                        negated: matches!(kind, SearchKind::AngularNegated(_)),
                    },
                ),
            };
            search(cli, model, task)
        }
        Command::Sweep { plan } => {
            let plan = sweep::SweepPlan::load(plan)?;
            let reg = Registry::open(cli.output_root.join(&plan.output))?;
            let specs = plan.specs(&desk_chain())?;
            let s = sweep::run_sweep(&reg, &specs, plan.parallelism)?;
            println!(
                "tasks {}: {} already complete, {} committed, {} failed; {} new runs",
                s.tasks, s.skipped, s.committed, s.failed, s.computed
            );
            println!("registry {}", reg.digest()?);
            Ok(u8::from(s.failed > 0))
        }
        Command::Report { registry } => {
            let dir = cli.output_root.join(registry);
            if !dir.join(registry::TASKS).exists() {
                bail!("no registry at {}", dir.display());
            }
            let s = report::report(&Registry::open(dir)?)?;
            for c in &s.curves {
                println!("curve {}", c.display());
            }
            println!("fits {}", s.fits);
            println!("positivity {}", s.positivity_rows);
            println!("registry {}", s.digest);
            Ok(0)
        }
        Command::FrgFlow {
            h0,
            g0,
            step,
            t_max,
            sense,
            escape,
            out,
            fixed_points,
        } => {
            let mut w: Box<dyn Write> = match out {
                Some(p) => Box::new(BufWriter::new(File::create(p)?)),
                None => Box::new(std::io::stdout().lock()),
            };
            if *fixed_points {
                writeln!(w, "h\tg")?;
                for (h, g) in frg_fixed_points()? {
                    writeln!(w, "{h:.10}\t{g:.10}")?;
                }
            } else {
                let sense = match sense {
                    Sense::Uv => FlowSense::Uv,
                    Sense::Ir => FlowSense::Ir,
                };
                write_flow(&frg_flow(*h0, *g0, *step, *t_max, sense, *escape)?, &mut w)?;
            }
            w.flush()?;
            Ok(0)
        }
        Command::SdeTable => {
            print!("{}", twomat::sde::render_table());
            Ok(0)
        }
    }
}

fn verdict_code(r: &RunRecord) -> u8 {
    if r.verdict {
        0
    } else if r.hermiticity_lost() {
        EXIT_HERMITICITY
    } else {
        EXIT_DIVERGED
    }
}

fn run_point(cli: &Cli, m: &ModelArgs, g: f64, h: f64, trace: Option<&Path>) -> Result<u8> {
    if m.dummy.is_some() {
        bail!("run-point needs the Monte Carlo evaluator; --dummy is for searches");
    }
    let Resolved {
        mut setup,
        registry,
    } = resolve(cli, m)?;
    // A point run always has a definite seed.
    setup.seed = Some(setup.chain.seed);
    let spec = TaskSpec::new(setup, Task::Point { g, h });
    ModelParams::new(spec.setup.q, g, h, spec.setup.size)?;
    let hash = spec.hash();

    let write_trace = |out: &twomat::RunOutcome| -> Result<()> {
        if let Some(p) = trace {
            out.series.write_tsv(BufWriter::new(File::create(p)?))?;
        }
        Ok(())
    };
    let trace_err = Arc::new(std::sync::Mutex::new(None));
    let hook: Option<task::RunHook> = trace.map(|p| {
        let p = p.to_path_buf();
        let slot = trace_err.clone();
        Arc::new(move |out: &twomat::RunOutcome| {
            let r = File::create(&p).and_then(|f| out.series.write_tsv(BufWriter::new(f)));
            if let Err(e) = r {
                *slot.lock().expect("trace lock") = Some(e);
            }
        }) as task::RunHook
    });

    let fresh = run_and_commit(&registry, &spec, hook)?;
    if let Some(e) = trace_err.lock().expect("trace lock").take() {
        return Err(e).context("writing trace");
    }
    let record = registry
        .runs()?
        .into_iter()
        .rfind(|r| r.task_hash == hash)
        .context("run missing from registry")?;
    if fresh.is_none() && trace.is_some() {
        let params = ModelParams::new(spec.setup.q, g, h, spec.setup.size)?;
        write_trace(&mc_run(&params, &spec.chain())?)?;
    }
    println!("{}", serde_json::to_string(&record)?);
    Ok(verdict_code(&record))
}

fn search(cli: &Cli, m: &ModelArgs, task: Task) -> Result<u8> {
    let Resolved { setup, registry } = resolve(cli, m)?;
    let spec = TaskSpec::new(setup, task);
    let hash = spec.hash();
    let fresh = run_and_commit(&registry, &spec, None)?;
    let rec = registry
        .tasks()?
        .into_iter()
        .find(|t| t.task_hash == hash)
        .context("task missing from registry")?;
    if let Some(out) = &fresh {
        log::info!("{} new runs", out.computed);
    }
    if rec.status != "ok" {
        warn!("{} search ended without a dipole: {}", rec.kind, rec.detail);
        eprintln!("{}: {}", rec.kind, rec.detail);
        return Ok(1);
    }
    for d in registry
        .dipoles()?
        .into_iter()
        .filter(|d| d.task_hash == hash)
    {
        println!("{}", serde_json::to_string(&d)?);
    }
    Ok(0)
}
