//! Per-run evaluation log and curve emission.

use std::path::Path;

use crate::error::{Error, Result};

/// One evaluation row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub steps: u64,
    pub wall_clock_s: f64,
    pub success_rate: f64,
    pub mean_vice_reward: f64,
    pub drop_rate: f64,
    pub mean_reset_attempts: f64,
}

/// One completed forward episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeDiag {
    pub end_step: u64,
    pub length: usize,
    pub dropped: bool,
}

/// Evaluation rows plus per-episode diagnostics for one training run.
#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub task_id: String,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
    pub episodes: Vec<EpisodeDiag>,
    pub vice_updates: u64,
}

impl RunLog {
    pub fn new(task_id: impl Into<String>, seed: u64) -> Self {
        Self {
            task_id: task_id.into(),
            seed,
            ..Self::default()
        }
    }

    /// Rows must arrive strictly increasing in env steps.
    pub fn push_row(&mut self, row: EvalRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.steps <= last.steps {
                return Err(Error::Config(format!(
                    "eval rows must increase in steps: {} after {}",
                    row.steps, last.steps
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// First eval step reaching the success threshold.
    pub fn steps_to_threshold(&self, threshold: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.success_rate >= threshold)
            .map(|r| r.steps)
    }

    /// Equality over everything except wall-clock (which varies per host).
    pub fn deterministic_eq(&self, other: &RunLog) -> bool {
        self.task_id == other.task_id
            && self.seed == other.seed
            && self.vice_updates == other.vice_updates
            && self.episodes == other.episodes
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.steps == b.steps
                    && a.success_rate == b.success_rate
                    && a.mean_vice_reward == b.mean_vice_reward
                    && a.drop_rate == b.drop_rate
                    && a.mean_reset_attempts == b.mean_reset_attempts
            })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "# task_id={} seed={} vice_updates={}\n",
            self.task_id, self.seed, self.vice_updates
        ));
        s.push_str("steps,wall_clock_s,success_rate,mean_vice_reward,drop_rate,mean_reset_attempts\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.steps,
                r.wall_clock_s,
                r.success_rate,
                r.mean_vice_reward,
                r.drop_rate,
                r.mean_reset_attempts
            ));
        }
        s.push_str("# episodes: end_step,length,dropped\n");
        for e in &self.episodes {
            s.push_str(&format!("{},{},{}\n", e.end_step, e.length, e.dropped as u8));
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut log = RunLog::default();
        let mut lines = text.lines();
        let meta = lines
            .next()
            .ok_or_else(|| Error::Config("empty run log".into()))?;
        if let Some(meta) = meta.strip_prefix("# ") {
            for field in meta.split_whitespace() {
                match field.split_once('=') {
                    Some(("task_id", v)) => log.task_id = v.to_string(),
                    Some(("seed", v)) => {
                        log.seed = v
                            .parse()
                            .map_err(|_| Error::Config("bad seed in run log".into()))?
                    }
                    Some(("vice_updates", v)) => {
                        log.vice_updates = v
                            .parse()
                            .map_err(|_| Error::Config("bad vice_updates in run log".into()))?
                    }
                    _ => {}
                }
            }
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("run log missing header".into()))?;
        if header != "steps,wall_clock_s,success_rate,mean_vice_reward,drop_rate,mean_reset_attempts"
        {
            return Err(Error::Config("unexpected run log header".into()));
        }
        let mut in_episodes = false;
        for line in lines {
            if line.is_empty() {
                continue;
            }
            if line.starts_with("# episodes") {
                in_episodes = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if in_episodes {
                if cols.len() != 3 {
                    return Err(Error::Config(format!("bad episode row '{line}'")));
                }
                log.episodes.push(EpisodeDiag {
                    end_step: cols[0]
                        .parse()
                        .map_err(|_| Error::Config(format!("bad end_step '{}'", cols[0])))?,
                    length: cols[1]
                        .parse()
                        .map_err(|_| Error::Config(format!("bad length '{}'", cols[1])))?,
                    dropped: cols[2] == "1",
                });
                continue;
            }
            if cols.len() != 6 {
                return Err(Error::Config(format!("bad run log row '{line}'")));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Config(format!("bad number '{s}' in run log")))
            };
            log.push_row(EvalRow {
                steps: cols[0]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad steps '{}'", cols[0])))?,
                wall_clock_s: parse(cols[1])?,
                success_rate: parse(cols[2])?,
                mean_vice_reward: parse(cols[3])?,
                drop_rate: parse(cols[4])?,
                mean_reset_attempts: parse(cols[5])?,
            })?;
        }
        Ok(log)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }
}

/// Median of a slice; even counts average the middle pair.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Write an aggregated success curve over seeds: one CSV row per eval step
/// with the median, min, and max. All logs must share the same eval grid.
pub fn emit_curves(logs: &[RunLog], path: &Path) -> Result<()> {
    if logs.is_empty() {
        return Err(Error::Empty("run logs"));
    }
    let grid: Vec<u64> = logs[0].rows.iter().map(|r| r.steps).collect();
    for log in logs {
        let other: Vec<u64> = log.rows.iter().map(|r| r.steps).collect();
        if other != grid {
            return Err(Error::Config(
                "run logs have mismatched eval step grids".into(),
            ));
        }
    }
    let mut s = String::from("steps,median,min,max\n");
    for (i, &step) in grid.iter().enumerate() {
        let vals: Vec<f64> = logs.iter().map(|l| l.rows[i].success_rate).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        s.push_str(&format!("{},{},{},{}\n", step, median(&vals), lo, hi));
    }
    std::fs::write(path, s)?;
    Ok(())
}
