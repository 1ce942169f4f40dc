use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::pl::DEFAULT_PIECE_BUDGET;
use crate::separation::{hard_family, theory_bound, SeparationConfig};

use super::{train, MlpError, MlpModel, Target, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// `f^40` of the golden map.
    Hard,
    /// `f^8` of the golden map.
    Easy,
}

impl Task {
    pub fn steps(self) -> u32 {
        match self {
            Task::Hard => 40,
            Task::Easy => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Hard => "hard",
            Task::Easy => "easy",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard" => Ok(Task::Hard),
            "easy" => Ok(Task::Easy),
            _ => Err(format!("unknown task `{s}` (expected hard or easy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub depths: Vec<usize>,
    pub width: usize,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub piece_budget: usize,
}

impl ExperimentConfig {
    pub fn new(task: Task) -> Self {
        ExperimentConfig {
            task,
            depths: (1..=5).collect(),
            width: 20,
            seeds: vec![0, 1, 2],
            train: TrainConfig::default(),
            piece_budget: DEFAULT_PIECE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub task: Task,
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
    pub epochs: usize,
    pub mse: f64,
    pub l1: f64,
    /// Midpoint-rule resolution gap, when the L¹ error is not exact.
    pub l1_gap: Option<f64>,
    pub floor: f64,
    pub condition_met: bool,
    pub pieces: usize,
    pub saturated: bool,
    pub wall_time: f64,
    #[serde(skip)]
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSummary {
    pub depth: usize,
    pub median_l1: f64,
    pub min_l1: f64,
    pub max_l1: f64,
    pub floor: f64,
    pub condition_met: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl ExperimentTable {
    /// Per-depth median, min and max of the L¹ error, in depth order.
    pub fn summaries(&self) -> Vec<DepthSummary> {
        let mut depths: Vec<usize> = self.rows.iter().map(|r| r.depth).collect();
        depths.sort_unstable();
        depths.dedup();
        depths
            .into_iter()
            .map(|d| {
                let rows: Vec<&ExperimentRow> = self.rows.iter().filter(|r| r.depth == d).collect();
                let mut l1: Vec<f64> = rows.iter().map(|r| r.l1).collect();
                let med = median(&mut l1);
                DepthSummary {
                    depth: d,
                    median_l1: med,
                    min_l1: l1[0],
                    max_l1: l1[l1.len() - 1],
                    floor: rows[0].floor,
                    condition_met: rows[0].condition_met,
                }
            })
            .collect()
    }

    pub fn summary(&self, depth: usize) -> Option<DepthSummary> {
        self.summaries().into_iter().find(|s| s.depth == depth)
    }

    /// CSV `task,depth,width,seed,epochs,mse,l1,floor`.
    pub fn write_results_csv<W: std::io::Write>(&self, w: W) -> Result<(), MlpError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["task", "depth", "width", "seed", "epochs", "mse", "l1", "floor"])?;
        for r in &self.rows {
            wtr.write_record([
                r.task.to_string(),
                r.depth.to_string(),
                r.width.to_string(),
                r.seed.to_string(),
                r.epochs.to_string(),
                r.mse.to_string(),
                r.l1.to_string(),
                r.floor.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// CSV `depth,median_l1,min_l1,max_l1,floor`, one row per depth.
    pub fn write_plot_csv<W: std::io::Write>(&self, w: W) -> Result<(), MlpError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["depth", "median_l1", "min_l1", "max_l1", "floor"])?;
        for s in self.summaries() {
            wtr.write_record([
                s.depth.to_string(),
                s.median_l1.to_string(),
                s.min_l1.to_string(),
                s.max_l1.to_string(),
                s.floor.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// One `loss_<task>_d<depth>_s<seed>.csv` (`epoch,loss`) per run.
    pub fn write_loss_curves(&self, dir: &Path) -> Result<(), MlpError> {
        std::fs::create_dir_all(dir)?;
        for r in &self.rows {
            let path = dir.join(format!("loss_{}_d{}_s{}.csv", r.task, r.depth, r.seed));
            let mut wtr = csv::Writer::from_path(path)?;
            wtr.write_record(["epoch", "loss"])?;
            for (e, l) in r.loss_curve.iter().enumerate() {
                wtr.write_record([(e + 1).to_string(), l.to_string()])?;
            }
            wtr.flush()?;
        }
        Ok(())
    }
}

/// Train one model per `(depth, seed)` on the task's target. Runs are
/// independent and distributed by `exec`; each run is itself sequential.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentTable, MlpError> {
    let f = hard_family(3)?;
    let t = cfg.task.steps();
    let target = Target::iterated(&f, t as usize, cfg.piece_budget)?;
    let jobs: Vec<(usize, u64)> = cfg
        .depths
        .iter()
        .flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let rows = exec.map(&jobs, |&(depth, seed)| -> Result<ExperimentRow, MlpError> {
        let sep = SeparationConfig::for_family(3, t, cfg.width as u64, depth as u32)?;
        let bound = theory_bound(&sep, None)?;
        let mut m = MlpModel::init(depth, cfg.width, seed)?;
        let r = train(&mut m, &target, &cfg.train, Exec::Sequential)?;
        let l1_gap = match r.l1 {
            super::L1Estimate::Grid { gap, .. } => Some(gap),
            super::L1Estimate::Exact { .. } => None,
        };
        Ok(ExperimentRow {
            task: cfg.task,
            depth,
            width: cfg.width,
            seed,
            epochs: cfg.train.epochs,
            mse: r.final_mse,
            l1: r.l1.value(),
            l1_gap,
            floor: bound.floor_headline,
            condition_met: bound.condition_met,
            pieces: r.pieces,
            saturated: r.saturated,
            wall_time: r.wall_time,
            loss_curve: r.loss_curve,
        })
    });
    Ok(ExperimentTable {
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI: f64 = 1.618_033_988_749_895;

    fn quick(task: Task, depths: Vec<usize>) -> ExperimentConfig {
        ExperimentConfig {
            depths,
            seeds: vec![0],
            train: TrainConfig {
                epochs: 3,
                samples: 64,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::new(task)
        }
    }

    #[test]
    fn floors_follow_capacity_condition() {
        let t = run_experiment(&quick(Task::Hard, vec![1, 4, 5]), Exec::default()).unwrap();
        let s = t.summaries();
        let floor = (PHI - 1.0) * (PHI - 1.0) / 32.0;
        assert!((s[0].floor - floor).abs() < 1e-12 && s[0].condition_met);
        assert!((s[1].floor - floor).abs() < 1e-12 && s[1].condition_met);
        assert_eq!(s[2].floor, 0.0);
        assert!(!s[2].condition_met);
        assert!(t.rows.iter().all(|r| r.l1_gap.is_some()));
    }

    #[test]
    fn easy_task_never_meets_condition() {
        let t = run_experiment(&quick(Task::Easy, (1..=5).collect()), Exec::default()).unwrap();
        assert!(t.rows.iter().all(|r| !r.condition_met && r.floor == 0.0 && r.l1_gap.is_none()));
    }

    #[test]
    fn empty_depths_give_empty_table() {
        let t = run_experiment(&quick(Task::Easy, vec![]), Exec::default()).unwrap();
        assert!(t.rows.is_empty());
        assert!(t.summaries().is_empty());
    }

    #[test]
    fn csv_outputs() {
        let t = run_experiment(&quick(Task::Easy, vec![1, 2]), Exec::default()).unwrap();
        let mut buf = Vec::new();
        t.write_results_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("task,depth,width,seed,epochs,mse,l1,floor\neasy,1,20,0,3,"));
        let dir = tempdir();
        t.write_loss_curves(&dir).unwrap();
        let c = std::fs::read_to_string(dir.join("loss_easy_d2_s0.csv")).unwrap();
        assert_eq!(c.lines().count(), 4);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    fn tempdir() -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("chaos-sep-exp-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }
}
