//! `report`: every exact check plus the experiments, written as one bundle.
//!
//! The bundle is assembled in a sibling scratch directory and renamed into
//! place at the end, so a failed run leaves nothing at `--out`.

use std::fs::File;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use num_bigint::BigUint;

use chaos_sep::covering::{
    build_empirical_graph, build_theoretical_graph, oscillation_lower_bound, IntervalLabel,
};
use chaos_sep::dynamics::{self, orbit_sign_pattern_check};
use chaos_sep::mlp::{run_experiment, ExperimentConfig, Task};
use chaos_sep::pl::{self_compose, self_compose_powers, piece_budget_from_env, PLFunction};
use chaos_sep::rates;
use chaos_sep::separation::{
    default_levels, hard_family, hard_family_orbit, interval_integral_check, slope_map, tent_map,
    theory_bound, SeparationConfig, SeparationReport,
};
use chaos_sep::Exec;

use crate::manifest::RunManifest;
use crate::{ensure_empty_target, fnspec, write_experiment, write_period_summary, CmdResult, Failure, OrUsage};

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long)]
    out: PathBuf,
    /// Skip the t = 40 training runs and use one seed for the easy task.
    #[arg(long)]
    quick: bool,
    /// Map whose periods are tabulated in periods.csv.
    #[arg(long, default_value = "family:3")]
    function: String,
    #[arg(long, default_value_t = 9)]
    max_period: usize,
}

struct Bundle {
    dir: PathBuf,
    outputs: Vec<String>,
    checks: Vec<(String, bool)>,
}

impl Bundle {
    fn csv(&mut self, name: &str) -> Result<csv::Writer<File>> {
        self.outputs.push(name.to_string());
        Ok(csv::Writer::from_path(self.dir.join(name))?)
    }

    fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.push((name.into(), ok));
    }
}

pub fn cmd_report(a: ReportArgs, exec: Exec) -> CmdResult<()> {
    let start = Instant::now();
    let f = fnspec::parse(&a.function).usage()?;
    ensure_empty_target(&a.out)?;
    let name = a
        .out
        .file_name()
        .ok_or_else(|| Failure::Usage(anyhow!("--out needs a directory name")))?
        .to_string_lossy()
        .into_owned();
    let parent = match a.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).usage()?;
    let scratch = parent.join(format!(".{name}.partial-{}", std::process::id()));
    std::fs::create_dir_all(&scratch).internal()?;

    let mut b = Bundle {
        dir: scratch.clone(),
        outputs: Vec::new(),
        checks: Vec::new(),
    };
    let built = build(&mut b, &a, &f, exec).and_then(|seeds| {
        let mut w = b.csv("checks.csv")?;
        w.write_record(["check", "pass"])?;
        for (n, ok) in &b.checks {
            w.write_record([n.as_str(), if *ok { "true" } else { "false" }])?;
        }
        w.flush()?;
        let mut m = RunManifest::new("report");
        m.seeds = seeds;
        m.outputs = b.outputs.clone();
        m.wall_time = start.elapsed().as_secs_f64();
        m.write(&scratch.join("manifest.json"))
    });
    if let Err(e) = built {
        let _ = std::fs::remove_dir_all(&scratch);
        return Err(Failure::Internal(e));
    }
    if a.out.exists() {
        std::fs::remove_dir(&a.out).internal()?;
    }
    std::fs::rename(&scratch, &a.out)
        .with_context(|| format!("cannot move bundle to {}", a.out.display()))
        .internal()?;

    let failed: Vec<&str> = b.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    println!(
        "wrote {} files to {} ({} checks, {} failed)",
        b.outputs.len() + 1,
        a.out.display(),
        b.checks.len(),
        failed.len()
    );
    if !failed.is_empty() {
        return Err(Failure::Internal(anyhow!("failed checks: {}", failed.join(", "))));
    }
    Ok(())
}

fn build(b: &mut Bundle, a: &ReportArgs, f: &PLFunction, exec: Exec) -> Result<Vec<u64>> {
    let budget = piece_budget_from_env();
    rates_section(b)?;
    spectra_section(b)?;
    family_section(b)?;
    covering_section(b, budget)?;
    integral_section(b, budget)?;
    regime_section(b, budget, exec)?;
    bounds_section(b, budget)?;

    let scan = dynamics::detect_periods(f, a.max_period, budget, exec)?;
    b.outputs.push("periods.csv".into());
    write_period_summary(&scan, File::create(b.dir.join("periods.csv"))?)?;
    b.outputs.push("orbits.csv".into());
    scan.write_csv(File::create(b.dir.join("orbits.csv"))?)?;
    b.check("periods_sharkovsky_consistent", scan.sharkovsky_consistent());

    let mut seeds: Vec<u64> = vec![0, 1, 2];
    let mut tasks = vec![Task::Easy];
    if !a.quick {
        tasks.push(Task::Hard);
    } else {
        seeds = vec![0];
    }
    for task in tasks {
        let cfg = ExperimentConfig {
            seeds: seeds.clone(),
            piece_budget: budget,
            ..ExperimentConfig::new(task)
        };
        let table = run_experiment(&cfg, exec)?;
        let outs = write_experiment(&table, &b.dir, &format!("{task}_"))?;
        b.outputs.extend(outs);
        let s = table.summaries();
        match task {
            Task::Easy => {
                let (first, last) = (&s[0], &s[s.len() - 1]);
                b.check("easy_depth_improves", last.median_l1 < first.median_l1);
            }
            Task::Hard => {
                let ok = s
                    .iter()
                    .filter(|d| d.condition_met)
                    .all(|d| d.median_l1 >= 0.5 * d.floor);
                b.check("hard_error_above_half_floor", ok);
            }
        }
    }
    Ok(seeds)
}

fn rates_section(b: &mut Bundle) -> Result<()> {
    let rows = rates::rate_table(41)?;
    b.outputs.push("rates.csv".into());
    rates::write_rate_table(&rows, File::create(b.dir.join("rates.csv"))?)?;
    let decreasing = rows.windows(2).all(|w| w[1].rho_new < w[0].rho_new);
    let above = rows.iter().all(|r| r.rho_new > std::f64::consts::SQRT_2);
    b.check("rates_decreasing_above_sqrt2", decreasing && above);
    b.check("rates_exceed_legacy", rows[1..].iter().all(|r| r.gap > 0.0));
    Ok(())
}

fn spectra_section(b: &mut Bundle) -> Result<()> {
    let mut w = b.csv("spectra.csv")?;
    w.write_record(["p", "spectral_radius", "rho", "abs_diff"])?;
    let mut ok = true;
    for p in (3..=15).step_by(2) {
        let s = build_theoretical_graph(p)?.spectral_radius(1e-14)?;
        let r = rates::rho(p)?.rho;
        ok &= (s - r).abs() <= 1e-6;
        w.write_record([p.to_string(), s.to_string(), r.to_string(), (s - r).abs().to_string()])?;
    }
    w.flush()?;
    b.check("spectral_radius_matches_rate", ok);
    Ok(())
}

fn family_section(b: &mut Bundle) -> Result<()> {
    let mut w = b.csv("family.csv")?;
    w.write_record(["p", "rho", "residual", "min_separation", "sign_pattern"])?;
    let mut ok = true;
    for p in [3, 5, 7, 9] {
        let o = hard_family_orbit(p)?;
        let r = rates::rho(p)?.rho;
        let pat = orbit_sign_pattern_check(&o.points, r).holds;
        ok &= o.closure_residual <= 1e-7 && o.min_separation() >= 1e-3 && pat;
        w.write_record([
            p.to_string(),
            r.to_string(),
            o.closure_residual.to_string(),
            o.min_separation().to_string(),
            pat.to_string(),
        ])?;
    }
    w.flush()?;
    b.check("family_orbits_close", ok);
    Ok(())
}

fn covering_section(b: &mut Bundle, budget: usize) -> Result<()> {
    let mut w = b.csv("covering.csv")?;
    w.write_record(["p", "t", "delta_i0", "crossings"])?;
    let mut ok = true;
    for p in [3, 5] {
        let f = hard_family(p)?;
        let cycle = dynamics::stefan_label(&hard_family_orbit(p)?)?;
        let g = build_empirical_graph(&f, &cycle)?;
        std::fs::write(
            b.dir.join(format!("graph_p{p}.json")),
            serde_json::to_string_pretty(&g.to_json())?,
        )?;
        b.outputs.push(format!("graph_p{p}.json"));
        let trace = oscillation_lower_bound(&g, 12);
        let (x, y) = default_levels(p)?;
        let powers = self_compose_powers(&f, 12, budget)?;
        for t in 1..=12 {
            let d = trace.at(t, IntervalLabel::I(0)).expect("I0 exists");
            let c = powers[t - 1].count_crossings(x, y)?;
            ok &= *d <= BigUint::from(c);
            w.write_record([p.to_string(), t.to_string(), d.to_string(), c.to_string()])?;
        }
    }
    w.flush()?;
    b.check("crossings_dominate_delta", ok);
    Ok(())
}

fn integral_section(b: &mut Bundle, budget: usize) -> Result<()> {
    let mut w = b.csv("integral.csv")?;
    w.write_record(["t", "intervals", "min_ratio"])?;
    let f = hard_family(3)?;
    let (x, y) = default_levels(3)?;
    let l = f.lipschitz();
    let mut ok = true;
    for t in 1..=12 {
        let h = self_compose(&f, t, budget)?;
        let rep = interval_integral_check(&h, x, y, l.powi(t as i32))?;
        ok &= rep.holds();
        w.write_record([
            t.to_string(),
            rep.intervals.len().to_string(),
            rep.min_ratio.map(|r| r.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    b.check("interval_integral_bound", ok);
    Ok(())
}

fn regime_section(b: &mut Bundle, budget: usize, exec: Exec) -> Result<()> {
    let mut w = b.csv("regimes.csv")?;
    w.write_record(["function", "lipschitz", "periods", "odd_period", "crossings_t1", "crossings_t20"])?;
    let maps: Vec<(&str, PLFunction)> = vec![
        ("family:3", hard_family(3)?),
        ("tent", tent_map()),
        ("slope:1.2", slope_map(1.2)?),
    ];
    let mut odd = Vec::new();
    for (name, f) in &maps {
        let scan = dynamics::detect_periods(f, 9, budget, exec)?;
        let periods = scan.periods();
        let has_odd = periods.iter().any(|&n| n > 1 && n % 2 == 1);
        odd.push(has_odd);
        let (lo, hi) = f.range();
        let t1 = f.count_crossings(lo, hi)?;
        let t20 = if *name == "slope:1.2" {
            self_compose(f, 20, budget)?.count_crossings(lo, hi)?.to_string()
        } else {
            String::new()
        };
        w.write_record([
            name.to_string(),
            f.lipschitz().to_string(),
            periods.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "),
            has_odd.to_string(),
            t1.to_string(),
            t20,
        ])?;
    }
    w.flush()?;
    b.check("regime_trichotomy", odd == [true, true, false]);
    Ok(())
}

fn bounds_section(b: &mut Bundle, budget: usize) -> Result<()> {
    let mut reports: Vec<SeparationReport> = (1..=5)
        .map(|l| theory_bound(&SeparationConfig::for_family(3, 40, 20, l)?, None))
        .collect::<std::result::Result<_, _>>()?;
    let desk = SeparationConfig::for_family(3, 14, 4, 2)?;
    let c = self_compose(&hard_family(3)?, 14, budget)?.count_crossings(desk.x, desk.y)?;
    reports.push(theory_bound(&desk, Some(c))?);
    b.outputs.push("bounds.csv".into());
    SeparationReport::write_csv(&reports, File::create(b.dir.join("bounds.csv"))?)?;
    let mut w = b.csv("sizing.csv")?;
    w.write_record(["l", "u", "rho", "min_t"])?;
    let phi = rates::rho(3)?.rho;
    for l in 1..=5u32 {
        w.write_record([
            l.to_string(),
            "20".into(),
            phi.to_string(),
            chaos_sep::separation::min_compositions(l, 20, phi)?.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
