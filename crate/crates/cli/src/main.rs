//! `metarelay`: command-line front end for the metasurface relay toolkit.
//!
//! Every subcommand reads an optional JSON config, applies `--set`
//! overrides and writes its outputs into `--out`. Exit codes: 0 success,
//! 1 model or I/O error, 2 configuration or usage error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use metarelay_core::beam::Arm;
use metarelay_core::config::RunConfig;
use metarelay_core::lut::Mode;
use thiserror::Error;

use commands::{BeamArgs, ProtocolArgs};
use output::Bundle;

#[derive(Parser, Debug)]
#[command(
    name = "metarelay",
    version,
    about = "Tunable metasurface relay simulator"
)]
struct Cli {
    /// JSON run configuration; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for every random draw in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Config override, e.g. `--set lut.phase_step=30`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep the unit-cell model over the bias grid and write pattern.csv.
    Pattern,
    /// Build the lens and mirror phase lookup tables.
    Lut,
    /// Synthesise a one- or two-arm beam and write its pattern.
    Beam {
        /// LUT JSON written by `lut`; rebuilt from the config when absent.
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Lens)]
        mode: ModeArg,
        /// Arm as `ANGLE` or `ANGLE:WEIGHT` (deg). Give once or twice.
        #[arg(long = "arm", value_parser = parse_arm, allow_hyphen_values = true)]
        arms: Vec<Arm>,
        /// Incidence angle (deg).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta_i: f64,
        /// Pattern grid as `START:STOP:STEP` (deg).
        #[arg(long, default_value = "-90:90:0.5", value_parser = parse_grid, allow_hyphen_values = true)]
        grid: (f64, f64, f64),
    },
    /// Received power of a surface-relayed link.
    Budget {
        /// JSON link geometry (`tx`, `rx`, `pose`); a 3 m broadside link by default.
        #[arg(long)]
        geometry: Option<PathBuf>,
    },
    /// Coverage maps and blockage failure rates for the floor plan.
    Scenario,
    /// Simulate beam alignment over random link geometries.
    Protocol {
        #[arg(long, value_enum, default_value_t = ModeArg::Lens)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = SearchArg::Multiarm)]
        search: SearchArg,
        /// Codebook size for exhaustive legs and the UE sweep.
        #[arg(long, default_value_t = 25)]
        n: usize,
        /// Surface codebook size for the multi-arm search.
        #[arg(long, default_value_t = 64)]
        n_w: usize,
        /// Skip the refinement stage.
        #[arg(long)]
        no_refine: bool,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 3.0)]
        d_enodeb: f64,
        #[arg(long, default_value_t = 3.0)]
        d_ue: f64,
    },
    /// Run the acceptance checks; exits 1 if any fails.
    Selftest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Lens,
    Mirror,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Lens => Mode::Lens,
            ModeArg::Mirror => Mode::Mirror,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SearchArg {
    Cold,
    Steady,
    Multiarm,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(metarelay_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<metarelay_core::Error> for CliError {
    fn from(e: metarelay_core::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Model(e)
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) | CliError::Io(_) => 1,
        }
    }
}

fn parse_arm(s: &str) -> Result<Arm, String> {
    let (a, w) = s.split_once(':').unwrap_or((s, "1"));
    let angle = a
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("arm angle {a:?}: {e}"))?;
    let weight = w
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("arm weight {w:?}: {e}"))?;
    Ok(Arm { angle, weight })
}

fn parse_grid(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected START:STOP:STEP, got {s:?}"));
    };
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((p(a)?, p(b)?, p(c)?))
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for s in &cli.overrides {
        cfg.set(s)?;
    }
    // The command-line seed is authoritative so it is covered by the hash.
    cfg.sim.seed = cli.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let cfg = load_config(&cli)?;
    let mut out = Bundle::new(cfg.hash());
    info!("config {}", out.config_hash());
    let mut ok = true;
    match &cli.command {
        Command::Pattern => commands::pattern(&cfg, &mut out)?,
        Command::Lut => commands::lut(&cfg, &mut out)?,
        Command::Beam {
            lut,
            mode,
            arms,
            theta_i,
            grid,
        } => commands::beam(
            &cfg,
            &BeamArgs {
                lut: lut.clone(),
                mode: *mode,
                arms: arms.clone(),
                theta_i: *theta_i,
                grid: *grid,
            },
            &mut out,
        )?,
        Command::Budget { geometry } => commands::budget(&cfg, geometry.as_deref(), &mut out)?,
        Command::Scenario => commands::scenario(&cfg, &mut out)?,
        Command::Protocol {
            mode,
            search,
            n,
            n_w,
            no_refine,
            trials,
            d_enodeb,
            d_ue,
        } => commands::protocol(
            &cfg,
            &ProtocolArgs {
                mode: *mode,
                search: *search,
                n: *n,
                n_w: *n_w,
                refine: !no_refine,
                trials: *trials,
                d_enodeb: *d_enodeb,
                d_ue: *d_ue,
            },
            cli.seed,
            &mut out,
        )?,
        Command::Selftest => ok = commands::selftest(&cfg, &mut out)?,
    }
    for p in out.commit(&cli.out)? {
        info!("wrote {}", p.display());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("METARELAY_LOG", "warn"))
        .init();
    // clap prints usage and exits 2 on bad arguments.
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("metarelay: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
