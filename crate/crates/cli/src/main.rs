use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{ArgGroup, Args, Parser, Subcommand};

use chaos_sep::dynamics::{self, PeriodScan};
use chaos_sep::mlp::{run_experiment, ExperimentConfig, ExperimentTable, Task, TrainConfig};
use chaos_sep::pl::{self_compose, piece_budget_from_env, PlError};
use chaos_sep::rates::{self, RatesError};
use chaos_sep::separation::{hard_family, theory_bound, SeparationConfig, SeparationReport};
use chaos_sep::Exec;

mod fnspec;
mod manifest;
mod report;

use manifest::RunManifest;

const FUNCTION_HELP: &str = "Function specs (--function):
  family:p        rho_p|x| - 1 on [-1, 1], odd p >= 3
  tent            2|x| - 1
  slope:s         s|x| - 1, 0 <= s <= 2
  file:path.json  saved function {\"domain\": [a, b], \"knots\": [[x, y], ...]}

Exit codes: 0 success, 1 internal or check failure, 2 usage or input error.
CHAOS_SEP_PIECE_BUDGET overrides the knot budget of exact compositions.";

#[derive(Parser)]
#[command(name = "chaos-sep", version, about = "Interval-map dynamics and depth separation bounds for ReLU networks", after_help = FUNCTION_HELP)]
struct Cli {
    /// Run every data-parallel loop on the current thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Oscillation growth rate of an odd period, or a comparison table.
    Rho(RhoArgs),
    /// Periodic orbits of a map up to a maximal period.
    Periods(PeriodsArgs),
    /// L1 separation floor for a network size and composition depth.
    Bound(BoundArgs),
    /// Train networks on the hard (t = 40) or easy (t = 8) task.
    Train(TrainArgs),
    /// Write the full reproduction bundle.
    Report(report::ReportArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("what").required(true).args(["period", "table"])))]
struct RhoArgs {
    #[arg(long)]
    period: Option<usize>,
    /// Root of z^(p-1) - z^(p-2) - 1 instead.
    #[arg(long, requires = "period")]
    legacy: bool,
    /// CSV `p,rho_new,rho_legacy,gap` for odd p up to this value.
    #[arg(long)]
    table: Option<usize>,
    /// Print the full record as JSON.
    #[arg(long)]
    json: bool,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PeriodsArgs {
    #[arg(long)]
    function: String,
    #[arg(long, default_value_t = 9)]
    max: usize,
    /// Also write every orbit as CSV `period,orbit_index,point_index,value`.
    #[arg(long)]
    orbits: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long)]
    t: u32,
    #[arg(long)]
    width: u64,
    #[arg(long)]
    depth: u32,
    /// Measure crossings on the exact composition for the refined floor.
    #[arg(long)]
    exact_crossings: bool,
    /// Lipschitz constant (defaults to the growth rate).
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long, requires = "y")]
    x: Option<f64>,
    #[arg(long, requires = "x")]
    y: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    task: Task,
    /// Range `a..b` (inclusive) or comma list.
    #[arg(long, default_value = "1..5", value_parser = parse_depths)]
    depths: DepthList,
    #[arg(long, default_value_t = 20)]
    width: usize,
    #[arg(long, default_value_t = 1500)]
    epochs: usize,
    /// Number of seeds, starting at 0.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 4096)]
    samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Debug)]
struct DepthList(Vec<usize>);

fn parse_depths(s: &str) -> Result<DepthList, String> {
    let bad = || format!("bad depth list `{s}` (expected a..b or a,b,c)");
    let v: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if v.is_empty() {
        return Err(bad());
    }
    if v.contains(&0) {
        return Err("depths must be at least 1".into());
    }
    Ok(DepthList(v))
}

/// Error carrying its exit code.
pub enum Failure {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

pub type CmdResult<T> = Result<T, Failure>;

pub trait OrUsage<T> {
    fn usage(self) -> CmdResult<T>;
    fn internal(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrUsage<T> for Result<T, E> {
    fn usage(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn internal(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    let res = match cli.cmd {
        Cmd::Rho(a) => cmd_rho(a),
        Cmd::Periods(a) => cmd_periods(a, exec),
        Cmd::Bound(a) => cmd_bound(a),
        Cmd::Train(a) => cmd_train(a, exec),
        Cmd::Report(a) => report::cmd_report(a, exec),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn output(path: &Option<PathBuf>) -> CmdResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display())).usage()?),
        None => Box::new(io::stdout().lock()),
    })
}

fn rates_failure(e: RatesError) -> Failure {
    match e {
        RatesError::EvenPeriod(_) | RatesError::PeriodTooSmall(_) => Failure::Usage(e.into()),
        _ => Failure::Internal(e.into()),
    }
}

fn cmd_rho(a: RhoArgs) -> CmdResult<()> {
    if let Some(p_max) = a.table {
        if p_max < 3 {
            return Err(Failure::Usage(anyhow!("--table needs a maximal period of at least 3")));
        }
        let rows = rates::rate_table(p_max).map_err(rates_failure)?;
        let out = output(&a.out)?;
        if a.json {
            serde_json::to_writer_pretty(out, &rows).internal()?;
        } else {
            rates::write_rate_table(&rows, out).internal()?;
        }
        return Ok(());
    }
    let p = a.period.expect("clap group guarantees one of --period/--table");
    let r = if a.legacy { rates::rho_legacy(p) } else { rates::rho(p) }.map_err(rates_failure)?;
    let mut out = output(&a.out)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&r).internal()?).internal()?;
    } else {
        writeln!(out, "{}", r.rho).internal()?;
    }
    Ok(())
}

pub fn scan_function(spec: &str, max: usize, exec: Exec) -> CmdResult<PeriodScan> {
    let f = fnspec::parse(spec).usage()?;
    if max == 0 {
        return Err(Failure::Usage(anyhow!("--max must be at least 1")));
    }
    dynamics::detect_periods(&f, max, piece_budget_from_env(), exec).map_err(|e| match e {
        dynamics::DynamicsError::Pl(PlError::BudgetExceeded { .. }) => Failure::Usage(
            anyhow::Error::new(e).context("raise CHAOS_SEP_PIECE_BUDGET or lower --max"),
        ),
        e => Failure::Internal(e.into()),
    })
}

pub fn write_period_summary<W: Write>(scan: &PeriodScan, w: W) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["period", "present", "orbits", "continua", "rejected"])?;
    for (n, e) in &scan.entries {
        wtr.write_record([
            n.to_string(),
            e.present().to_string(),
            e.orbits.len().to_string(),
            e.continua.len().to_string(),
            e.rejected.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn cmd_periods(a: PeriodsArgs, exec: Exec) -> CmdResult<()> {
    let scan = scan_function(&a.function, a.max, exec)?;
    write_period_summary(&scan, io::stdout().lock()).internal()?;
    if let Some(path) = &a.orbits {
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display())).usage()?;
        scan.write_csv(f).internal()?;
    }
    let prime = dynamics::prime_period_of_scan(&scan)
        .map(|p| p.period().to_string())
        .unwrap_or_else(|_| "none".into());
    eprintln!("prime period (up to {}): {prime}", a.max);
    eprintln!("sharkovsky consistent: {}", scan.sharkovsky_consistent());
    Ok(())
}

pub fn measured_crossings(p: usize, t: u32, x: f64, y: f64) -> CmdResult<u64> {
    let f = hard_family(p).usage()?;
    let h = self_compose(&f, t as usize, piece_budget_from_env()).map_err(|e| match e {
        PlError::BudgetExceeded { .. } => Failure::Usage(
            anyhow::Error::new(e).context("exact crossings need the full composition; raise CHAOS_SEP_PIECE_BUDGET"),
        ),
        e => Failure::Internal(e.into()),
    })?;
    h.count_crossings(x, y).usage()
}

fn cmd_bound(a: BoundArgs) -> CmdResult<()> {
    let mut cfg = SeparationConfig::for_family(a.p, a.t, a.width, a.depth).usage()?;
    if let (Some(x), Some(y)) = (a.x, a.y) {
        cfg.x = x;
        cfg.y = y;
    }
    if let Some(l) = a.lipschitz {
        cfg.lipschitz = l;
    }
    cfg.validate().usage()?;
    let crossings = if a.exact_crossings {
        Some(measured_crossings(a.p, a.t, cfg.x, cfg.y)?)
    } else {
        None
    };
    let rep: SeparationReport = theory_bound(&cfg, crossings).usage()?;
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", rep.to_json().internal()?);
    Ok(())
}

pub fn write_experiment(table: &ExperimentTable, dir: &Path, prefix: &str) -> anyhow::Result<Vec<String>> {
    let results = format!("{prefix}results.csv");
    let plot = format!("{prefix}plot.csv");
    table.write_results_csv(File::create(dir.join(&results))?)?;
    table.write_plot_csv(File::create(dir.join(&plot))?)?;
    table.write_loss_curves(&dir.join("losses"))?;
    let mut out = vec![results, plot];
    for r in &table.rows {
        out.push(format!("losses/loss_{}_d{}_s{}.csv", r.task, r.depth, r.seed));
    }
    Ok(out)
}

pub fn print_summary(table: &ExperimentTable) {
    println!("task depth median_l1 min_l1 max_l1 floor condition");
    for s in table.summaries() {
        println!(
            "{} {} {:.6} {:.6} {:.6} {:.6} {}",
            table.rows[0].task, s.depth, s.median_l1, s.min_l1, s.max_l1, s.floor, s.condition_met
        );
    }
}

fn cmd_train(a: TrainArgs, exec: Exec) -> CmdResult<()> {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        task: a.task,
        depths: a.depths.0,
        width: a.width,
        seeds: (0..a.seeds).collect(),
        train: TrainConfig {
            epochs: a.epochs,
            samples: a.samples,
            lr: a.lr,
            ..TrainConfig::default()
        },
        piece_budget: piece_budget_from_env(),
    };
    if cfg.width == 0 {
        return Err(Failure::Usage(anyhow!("--width must be at least 1")));
    }
    cfg.train.validate().usage()?;
    std::fs::create_dir_all(&a.out)
        .with_context(|| format!("cannot create {}", a.out.display()))
        .usage()?;
    let table = run_experiment(&cfg, exec).internal()?;
    let mut m = RunManifest::new("train");
    m.seeds = cfg.seeds.clone();
    m.outputs = write_experiment(&table, &a.out, "").internal()?;
    m.wall_time = start.elapsed().as_secs_f64();
    m.write(&a.out.join("manifest.json")).internal()?;
    if !table.rows.is_empty() {
        print_summary(&table);
    }
    Ok(())
}

pub fn ensure_empty_target(out: &Path) -> CmdResult<()> {
    if out.exists() {
        let empty = out
            .read_dir()
            .map(|mut d| d.next().is_none())
            .unwrap_or(false);
        if !empty {
            return Err(Failure::Usage(anyhow!(
                "{} already exists and is not an empty directory",
                out.display()
            )));
        }
    }
    Ok(())
}

