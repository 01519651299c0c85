use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fris_core::exec::Execution;
use fris_core::harness::{
    convergence_report, parse_list, summary_path, sweep, write_csv, write_rows, CellSummary, Model,
    ScenarioConfig,
};
use fris_core::Result;

#[derive(Parser)]
#[command(name = "fris", version, about = "Fluid RIS link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-user SISO rate sweep.
    SuSiso(RunArgs),
    /// Multi-user MISO sum-rate sweep.
    MuMiso(RunArgs),
    /// Per-iteration convergence curves.
    Convergence(RunArgs),
    /// Sweep using the model from the config file (or --model).
    Sweep(RunArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML scenario file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Comma separated SNR values in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Element counts (perfect squares), comma separated.
    #[arg(long)]
    n_elements: Option<String>,
    #[arg(long)]
    m_antennas: Option<String>,
    #[arg(long)]
    k_users: Option<usize>,
    /// Surface side lengths in meters, comma separated.
    #[arg(long)]
    area: Option<String>,
    /// Minimum element spacing in meters.
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// fris, ris, or both comma separated.
    #[arg(long)]
    scheme: Option<String>,
    /// pso or grid.
    #[arg(long)]
    method: Option<String>,
    /// Candidate grid per subarea, e.g. 10x10.
    #[arg(long)]
    grid_res: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run trials one after another.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn config(&self, model: Option<Model>) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::from_file(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(m) = &self.model {
            cfg.model = m.parse()?;
        }
        if let Some(m) = model {
            cfg.model = m;
        }
        if let Some(s) = &self.snr_db {
            cfg.snr_db = parse_list(s)?;
        }
        if let Some(s) = &self.n_elements {
            cfg.n_elements = parse_list(s)?;
        }
        if let Some(s) = &self.m_antennas {
            cfg.m_antennas = parse_list(s)?;
        }
        if let Some(k) = self.k_users {
            cfg.k_users = k;
        }
        if let Some(s) = &self.area {
            cfg.area = parse_list(s)?;
        }
        if let Some(d) = self.spacing {
            cfg.spacing = Some(d);
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = &self.scheme {
            cfg.scheme = parse_list(s)?;
        }
        if let Some(m) = &self.method {
            cfg.method = Some(m.parse()?);
        }
        if let Some(g) = &self.grid_res {
            cfg.grid_res = g.parse()?;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

fn print_summaries(summaries: &[CellSummary], to: &mut dyn Write) {
    let _ = writeln!(to, "scheme model  N  M  K  snr_db  area_m  trials  mean_rate  stderr  flagged");
    for s in summaries {
        let _ = writeln!(
            to,
            "{:<6} {} {:>2} {:>2} {:>2} {:>7.2} {:>7.3} {:>7} {:>10.4} {:>7.4} {:>8}",
            s.scheme.to_string(),
            s.model,
            s.n_elements,
            s.m_antennas,
            s.k_users,
            s.snr_db,
            s.area_m,
            s.trials,
            s.mean_rate,
            s.stderr_rate,
            s.flagged
        );
    }
}

fn emit<T: serde::Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    match out {
        Some(p) => write_csv(p, rows),
        None => write_rows(std::io::stdout().lock(), rows, Path::new("<stdout>")),
    }
}

fn run(cli: Cli) -> Result<()> {
    let (args, model, convergence) = match &cli.command {
        Command::SuSiso(a) => (a, Some(Model::SuSiso), false),
        Command::MuMiso(a) => (a, Some(Model::MuMiso), false),
        Command::Convergence(a) => (a, None, true),
        Command::Sweep(a) => (a, None, false),
    };
    let cfg = args.config(model)?;
    let out = cfg.out.as_deref();
    if convergence {
        let rows = convergence_report(&cfg, args.exec())?;
        return emit(out, &rows);
    }
    let table = sweep(&cfg, args.exec())?;
    emit(out, &table.rows)?;
    match out {
        Some(p) => {
            write_csv(&summary_path(p), &table.summaries)?;
            print_summaries(&table.summaries, &mut std::io::stdout().lock());
        }
        None => print_summaries(&table.summaries, &mut std::io::stderr().lock()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
