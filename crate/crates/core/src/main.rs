use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coprime_doa::angle::parse_angle;
use coprime_doa::sim::{
    emit_outputs, format_csv, format_summary, run_sweep, ExperimentConfig, SimError,
};
use coprime_doa::{project_single, SegmentMap};

#[derive(Parser)]
#[command(
    name = "coprime-doa",
    version,
    about = "Coprime-array DOA estimation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over SNR or snapshot count.
    Simulate(SimulateArgs),
    /// Print the segment lookup table.
    Segments {
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 7)]
        n: usize,
        /// Emit CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Disambiguate one pair of folded subarray estimates.
    Project {
        /// Representative modulo 2pi/N (angle literal, e.g. -0.9pi).
        #[arg(long, allow_hyphen_values = true)]
        rep1: String,
        /// Representative modulo 2pi/M.
        #[arg(long, allow_hyphen_values = true)]
        rep2: String,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 7)]
        n: usize,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat key = value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated angles, radians or "0.1pi" literals.
    #[arg(long, allow_hyphen_values = true)]
    doas: Option<String>,
    #[arg(long)]
    snapshots: Option<usize>,
    /// start:step:stop (inclusive) or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Snapshot counts to sweep (start:step:stop or comma list).
    #[arg(long)]
    k_sweep: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// coprime-mode or grid-music.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    grid_size: Option<usize>,
    /// CSV output path; a summary is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional segment lookup table CSV.
    #[arg(long)]
    segments_out: Option<PathBuf>,
}

impl SimulateArgs {
    fn into_config(self) -> Result<ExperimentConfig, SimError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
                    path: path.clone(),
                    source,
                })?;
                ExperimentConfig::from_config_text(&text)?
            }
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("m", self.m.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("doas", self.doas),
            ("snapshots", self.snapshots.map(|v| v.to_string())),
            ("snr_db", self.snr_db),
            ("k_sweep", self.k_sweep),
            ("trials", self.trials.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("estimator", self.estimator),
            ("grid_size", self.grid_size.map(|v| v.to_string())),
            ("out", self.out.map(|p| p.display().to_string())),
            (
                "segments_out",
                self.segments_out.map(|p| p.display().to_string()),
            ),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.apply(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.into_config()?;
            let result = run_sweep(&cfg)?;
            if cfg.out.is_none() {
                print!("{}", format_csv(&result));
            }
            for path in emit_outputs(&result, &cfg)? {
                eprintln!("wrote {}", path.display());
            }
            eprint!("{}", format_summary(&result, &cfg));
        }
        Command::Segments { m, n, csv, out } => {
            let map = SegmentMap::new(m, n)?;
            let text = if csv { map.to_csv() } else { map.to_table() };
            match out {
                Some(path) => std::fs::write(&path, text)?,
                None => print!("{text}"),
            }
        }
        Command::Project { rep1, rep2, m, n } => {
            let parse = |s: &str| parse_angle(s).ok_or_else(|| format!("invalid angle '{s}'"));
            let p = project_single(parse(&rep1)?, parse(&rep2)?, m, n)?;
            println!("psi   = {:.11e}", p.psi);
            println!("cost  = {:.11e}", p.cost);
            println!("lifts = k={}, l={}", p.lifts.0, p.lifts.1);
        }
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
