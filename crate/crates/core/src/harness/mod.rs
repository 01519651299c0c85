//! Monte Carlo experiments: scenario configuration, per-trial pipelines,
//! sweeps over the configuration grid and CSV emission.
//!
//! Every trial owns a random substream derived from `(seed, trial)`, so the
//! FRIS and RIS pipelines of one trial see the same angles, users and fading,
//! and results do not depend on the execution order.

mod config;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use serde::Serialize;

pub use config::{parse_list, GridRes, Model, ScenarioConfig, Scheme};

use crate::channel::{AngleSet, FadingDraw, ScenarioGeometry};
use crate::exec::Execution;
use crate::geometry::{partition_surface, ris_baseline_positions, Point, SurfaceLayout};
use crate::link::{
    alternating_optimize, optimize_positions_su, su_siso_aligned_rate, AlternatingConfig, OptimizationHistory,
    PositionSearch, Scene, SuSisoInstance,
};
use crate::numerics::RngStream;
use crate::{Error, Result};

pub const BS_LOCATION: Point = Point::new(0.0, 0.0);
pub const FRIS_LOCATION: Point = Point::new(20.0, 20.0);
pub const USER_CENTER: Point = Point::new(20.0, 0.0);
pub const USER_RADIUS: f64 = 10.0;

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub scheme: Scheme,
    pub n_elements: usize,
    pub m_antennas: usize,
    pub area: f64,
    pub snr_db: f64,
}

impl ScenarioConfig {
    /// Cartesian product of the list-valued fields, SNR varying fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &scheme in &self.scheme {
            for &n_elements in &self.n_elements {
                for &m_antennas in &self.m_antennas {
                    for &area in &self.area {
                        for &snr_db in &self.snr_db {
                            out.push(Cell { scheme, n_elements, m_antennas, area, snr_db });
                        }
                    }
                }
            }
        }
        out
    }

    fn link_dims(&self, cell: &Cell) -> (usize, usize) {
        match self.model {
            Model::SuSiso => (1, 1),
            Model::MuMiso => (cell.m_antennas, self.k_users),
        }
    }
}

/// Users uniform in the disc around [`USER_CENTER`].
pub fn drop_users(k: usize, rng: &mut RngStream) -> Vec<Point> {
    (0..k)
        .map(|_| {
            let r = USER_RADIUS * rng.uniform().sqrt();
            let phi = rng.uniform_range(0.0, std::f64::consts::TAU);
            Point::new(USER_CENTER.x + r * phi.cos(), USER_CENTER.y + r * phi.sin())
        })
        .collect()
}

/// Random inputs of one trial.
#[derive(Debug, Clone)]
pub struct TrialScene {
    pub layout: SurfaceLayout,
    pub geometry: ScenarioGeometry,
    pub angles: AngleSet,
    pub draw: FadingDraw,
    pub antennas: usize,
    pub users: usize,
    pub pso_seed: u64,
    pub stream_seed: u64,
}

impl TrialScene {
    pub fn scene(&self) -> Scene<'_> {
        Scene {
            layout: &self.layout,
            geometry: &self.geometry,
            angles: &self.angles,
            draw: &self.draw,
            antennas: self.antennas,
            users: self.users,
        }
    }
}

pub fn trial_scene(cfg: &ScenarioConfig, cell: &Cell, trial: usize) -> Result<TrialScene> {
    let (m, k) = cfg.link_dims(cell);
    let master = RngStream::new(cfg.seed);
    let mut rng = master.substream(trial as u64);
    let angles = AngleSet::random(k, &mut rng);
    let users = if cfg.redraw_users {
        drop_users(k, &mut rng)
    } else {
        drop_users(k, &mut master.substream(u64::MAX))
    };
    let draw = FadingDraw::random(&mut rng, cell.n_elements, m, k, cfg.rician_bs, cfg.rician_user);
    let pso_seed = rng.next_u64();
    let geometry = ScenarioGeometry {
        bs: BS_LOCATION,
        fris: FRIS_LOCATION,
        users,
        wavelength: cfg.wavelength,
        exponent: cfg.exponent,
        reference_distance: 1.0,
        path_loss: cfg.path_loss,
    };
    geometry.validate()?;
    Ok(TrialScene {
        layout: partition_surface(cell.area, cell.n_elements, cfg.spacing())?,
        geometry,
        angles,
        draw,
        antennas: m,
        users: k,
        pso_seed,
        stream_seed: rng.seed(),
    })
}

/// One CSV row. Aggregate rows carry `trial = -1` and cell means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: i64,
    pub seed: u64,
    pub scheme: Scheme,
    pub model: Model,
    pub n_elements: usize,
    pub m_antennas: usize,
    pub k_users: usize,
    pub snr_db: f64,
    pub area_m: f64,
    pub rate_bps_hz: f64,
    pub pos_iters: f64,
    pub phase_iters: f64,
    pub prec_iters: f64,
    pub wall_s: f64,
    #[serde(skip)]
    pub flagged: bool,
}

/// Data kept beside the record for convergence reporting.
#[derive(Debug, Clone, Default)]
pub struct TrialTrace {
    pub pso_histories: Vec<Vec<f64>>,
    pub history: Option<OptimizationHistory>,
}

fn search(cfg: &ScenarioConfig, pso_seed: u64) -> PositionSearch {
    PositionSearch {
        method: cfg.method(),
        grid: (cfg.grid_res.0, cfg.grid_res.1),
        pso: cfg.pso(pso_seed),
        sweeps: cfg.sweeps,
    }
}

/// Runs the configured pipeline on one trial of one cell.
pub fn run_trial_traced(cfg: &ScenarioConfig, cell: &Cell, trial: usize, exec: Execution) -> Result<(TrialRecord, TrialTrace)> {
    let start = Instant::now();
    let ts = trial_scene(cfg, cell, trial)?;
    let scene = ts.scene();
    let power = 10f64.powf(cell.snr_db / 10.0);
    let noise = cfg.noise();
    let mut trace = TrialTrace::default();
    let (rate, iters, flagged) = match (cfg.model, cell.scheme) {
        (Model::SuSiso, Scheme::Ris) => {
            let ch = scene.channels(&ris_baseline_positions(&ts.layout))?;
            (su_siso_aligned_rate(&SuSisoInstance::from_channels(&ch, power, noise)?), [0.0, 1.0, 0.0], false)
        }
        (Model::SuSiso, Scheme::Fris) => {
            let out = optimize_positions_su(&scene, power, noise, &search(cfg, ts.pso_seed), exec)?;
            trace.pso_histories = out.element_histories;
            (out.rate, [out.sweeps as f64, 1.0, 0.0], false)
        }
        (Model::MuMiso, scheme) => {
            let alt = AlternatingConfig {
                max_cycles: cfg.max_cycles,
                move_elements: scheme == Scheme::Fris,
                search: search(cfg, ts.pso_seed),
                ..AlternatingConfig::default()
            };
            let out = alternating_optimize(&scene, power, noise, &alt, exec)?;
            let h = &out.history;
            let total = |v: &[usize]| v.iter().sum::<usize>() as f64;
            let iters = [total(&h.position_iters), total(&h.phase_iters), total(&h.precoder_iters)];
            let flagged = out.flagged;
            trace.history = Some(out.history);
            (out.rate, iters, flagged)
        }
    };
    let record = TrialRecord {
        trial: trial as i64,
        seed: ts.stream_seed,
        scheme: cell.scheme,
        model: cfg.model,
        n_elements: cell.n_elements,
        m_antennas: ts.antennas,
        k_users: ts.users,
        snr_db: cell.snr_db,
        area_m: cell.area,
        rate_bps_hz: rate,
        pos_iters: iters[0],
        phase_iters: iters[1],
        prec_iters: iters[2],
        wall_s: start.elapsed().as_secs_f64(),
        flagged,
    };
    Ok((record, trace))
}

pub fn run_trial(cfg: &ScenarioConfig, cell: &Cell, trial: usize, exec: Execution) -> Result<TrialRecord> {
    run_trial_traced(cfg, cell, trial, exec).map(|(r, _)| r)
}

/// Mean and standard error of one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub scheme: Scheme,
    pub model: Model,
    pub n_elements: usize,
    pub m_antennas: usize,
    pub k_users: usize,
    pub snr_db: f64,
    pub area_m: f64,
    pub trials: usize,
    pub mean_rate: f64,
    pub stderr_rate: f64,
    pub flagged: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    /// Trial rows of each cell followed by its aggregate row.
    pub rows: Vec<TrialRecord>,
    pub summaries: Vec<CellSummary>,
}

impl ResultTable {
    pub fn summary(&self, scheme: Scheme, n: usize, area: f64, snr_db: f64) -> Option<&CellSummary> {
        self.summaries
            .iter()
            .find(|s| s.scheme == scheme && s.n_elements == n && s.area_m == area && s.snr_db == snr_db)
    }
}

fn mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count();
    v.sum::<f64>() / n as f64
}

fn aggregate(cfg: &ScenarioConfig, records: &[TrialRecord]) -> (TrialRecord, CellSummary) {
    let first = &records[0];
    let n = records.len();
    let rate = mean(records.iter().map(|r| r.rate_bps_hz));
    let var = if n > 1 {
        records.iter().map(|r| (r.rate_bps_hz - rate).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let flagged = records.iter().filter(|r| r.flagged).count();
    let row = TrialRecord {
        trial: -1,
        seed: cfg.seed,
        rate_bps_hz: rate,
        pos_iters: mean(records.iter().map(|r| r.pos_iters)),
        phase_iters: mean(records.iter().map(|r| r.phase_iters)),
        prec_iters: mean(records.iter().map(|r| r.prec_iters)),
        wall_s: mean(records.iter().map(|r| r.wall_s)),
        flagged: flagged > 0,
        ..first.clone()
    };
    let summary = CellSummary {
        scheme: first.scheme,
        model: first.model,
        n_elements: first.n_elements,
        m_antennas: first.m_antennas,
        k_users: first.k_users,
        snr_db: first.snr_db,
        area_m: first.area_m,
        trials: n,
        mean_rate: rate,
        stderr_rate: (var / n as f64).sqrt(),
        flagged,
    };
    (row, summary)
}

/// All cells times all trials. Trials run through `exec`; rows come back in
/// cell, then trial order.
pub fn sweep(cfg: &ScenarioConfig, exec: Execution) -> Result<ResultTable> {
    cfg.validate()?;
    let mut table = ResultTable::default();
    for cell in cfg.cells() {
        let records: Result<Vec<TrialRecord>> = exec
            .map(cfg.trials, |t| run_trial(cfg, &cell, t, Execution::Sequential))
            .into_iter()
            .collect();
        let records = records?;
        let (row, summary) = aggregate(cfg, &records);
        table.rows.extend(records);
        table.rows.push(row);
        table.summaries.push(summary);
    }
    Ok(table)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

pub fn write_rows<T: Serialize, W: Write>(out: W, rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    write_rows(file, rows, path)
}

/// `results.csv` -> `results.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.csv"))
}

/// One point of a convergence curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub trial: i64,
    pub scheme: Scheme,
    pub model: Model,
    pub n_elements: usize,
    pub snr_db: f64,
    /// `pso_element_<n>`, or `position` / `phase` / `precoder` / `cycle`.
    pub series: String,
    pub index: usize,
    pub value: f64,
}

/// PSO best-value curves per element (single-user) or per-stage sum-rates
/// per cycle (multi-user), for every trial of every cell.
pub fn convergence_report(cfg: &ScenarioConfig, exec: Execution) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for cell in cfg.cells() {
        let traces: Result<Vec<_>> = exec
            .map(cfg.trials, |t| run_trial_traced(cfg, &cell, t, Execution::Sequential))
            .into_iter()
            .collect();
        for (record, trace) in traces? {
            let row = |series: String, index: usize, value: f64| ConvergenceRow {
                trial: record.trial,
                scheme: cell.scheme,
                model: cfg.model,
                n_elements: cell.n_elements,
                snr_db: cell.snr_db,
                series,
                index,
                value,
            };
            for (n, h) in trace.pso_histories.iter().enumerate() {
                rows.extend(h.iter().enumerate().map(|(i, &v)| row(format!("pso_element_{n}"), i + 1, v)));
            }
            if let Some(h) = &trace.history {
                rows.push(row("cycle".into(), 0, h.sum_rate[0]));
                for (c, s) in h.stage_rates.iter().enumerate() {
                    for (name, v) in ["position", "phase", "precoder"].iter().zip(s) {
                        rows.push(row((*name).into(), c + 1, *v));
                    }
                    rows.push(row("cycle".into(), c + 1, h.sum_rate[c + 1]));
                }
            }
        }
    }
    Ok(rows)
}
