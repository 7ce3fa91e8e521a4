use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{run_episode, EpisodeOutcome, EpisodeSpec, ExperimentConfig, MetricsRow, SimError};

pub const CSV_HEADER: &str = "episode_id,poi_id,delta_d_m,delta_t_ms,mode,step_index,marker_id,t_i_us,cumulative_us,timeouts,scanpath_len_deg,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub episodes: usize,
    pub successes: usize,
    pub rows: usize,
    /// Median confirmed t_i over all steps, if any step was confirmed.
    pub median_t_i_us: Option<f64>,
}

impl SweepSummary {
    pub fn success_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

/// Per-episode seed derived from the base seed (splitmix64 finalizer).
pub fn episode_seed(base: u64, episode_id: u64) -> u64 {
    let mut z = base
        ^ episode_id
            .wrapping_add(1)
            .wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn specs(cfg: &ExperimentConfig) -> Vec<Vec<EpisodeSpec>> {
    let per_cell = cfg.episodes_per_cell as u64;
    let mut cells = Vec::new();
    for &dd in &cfg.delta_d_grid {
        for &dt in &cfg.delta_t_grid {
            let c = cells.len() as u64;
            let episodes = (0..per_cell)
                .map(|e| {
                    let episode_id = c * per_cell + e;
                    EpisodeSpec {
                        episode_id,
                        poi: cfg.world[(e as usize) % cfg.world.len()].clone(),
                        delta_d_m: dd,
                        delta_t_ms: dt,
                        seed: episode_seed(cfg.agent.seed, episode_id),
                    }
                })
                .collect();
            cells.push(episodes);
        }
    }
    cells
}

/// Runs every episode of the grid. Cells run in parallel; the result is in
/// cell-major, then episode order regardless of scheduling.
pub fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<EpisodeOutcome>, SimError> {
    cfg.validate()?;
    let cells: Vec<Vec<EpisodeOutcome>> = specs(cfg)
        .par_iter()
        .map(|cell| cell.iter().map(|spec| run_episode(cfg, spec)).collect())
        .collect::<Result<_, _>>()?;
    Ok(cells.into_iter().flatten().collect())
}

pub fn write_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<(), SimError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn summarize(outcomes: &[EpisodeOutcome]) -> SweepSummary {
    let mut t_i: Vec<i64> = outcomes
        .iter()
        .flat_map(|o| o.rows.iter().filter_map(|r| r.t_i_us))
        .collect();
    t_i.sort_unstable();
    let median_t_i_us = match t_i.len() {
        0 => None,
        n if n % 2 == 1 => Some(t_i[n / 2] as f64),
        n => Some((t_i[n / 2 - 1] + t_i[n / 2]) as f64 / 2.0),
    };
    SweepSummary {
        episodes: outcomes.len(),
        successes: outcomes.iter().filter(|o| o.record.success).count(),
        rows: outcomes.iter().map(|o| o.rows.len()).sum(),
        median_t_i_us,
    }
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    out.with_file_name(name)
}

/// Runs the sweep and writes the metrics CSV to `out`. The file appears
/// only once complete; nothing is left behind on failure.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepSummary, SimError> {
    let outcomes = sweep_rows(cfg)?;
    let rows: Vec<MetricsRow> = outcomes
        .iter()
        .flat_map(|o| o.rows.iter().cloned())
        .collect();
    let tmp = partial_path(out);
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SimError::Io { path, source }
    };
    let written = fs::File::create(&tmp)
        .map_err(io_err(&tmp))
        .and_then(|f| write_csv(std::io::BufWriter::new(f), &rows))
        .and_then(|_| fs::rename(&tmp, out).map_err(io_err(out)));
    if let Err(e) = written {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    Ok(summarize(&outcomes))
}
