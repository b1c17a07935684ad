use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use negaflow_core::analysis::negativity_of_real_part;
use negaflow_core::scenario::{
    self, load_config, oracle_check, read_snapshot, run_scenario, ScenarioOutcome,
};
use negaflow_core::{negativity, norm_and_purity, Engine, Error, ErrorKind};

/// Phase-space propagation of Wigner, interpolated and KvN fields.
#[derive(Parser, Debug)]
#[command(name = "negaflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario described by a TOML config.
    Run { config: PathBuf },
    /// Run the shipped Morse preset.
    Fig2 {
        #[arg(long, value_enum)]
        engine: EngineArg,
        /// Interpolation parameter for the unified engine, in [0, 1].
        #[arg(long)]
        kappa: Option<f64>,
        /// Output directory (overrides the preset's).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a snapshot's header and metrics.
    Inspect { snapshot: PathBuf },
    /// Compare the split-step propagator with the dense exponential on a small grid.
    OracleCheck { config: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EngineArg {
    Kvn,
    Unified,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Kvn => Engine::Kvn,
            EngineArg::Unified => Engine::Unified,
        }
    }
}

fn report(outcome: &ScenarioOutcome) {
    let v = &outcome.verdict;
    println!("verdict: {}", v.label);
    println!(
        "drifts: n_minus {:.3e}, n_plus {:.3e}, negative_area {:.3e} (tolerance {})",
        v.drift_n_minus, v.drift_n_plus, v.drift_negative_area, v.tolerance
    );
    for w in &outcome.record.warnings {
        println!("warning: {w}");
    }
    println!("output: {}", outcome.dir.display());
}

fn inspect(path: &Path) -> negaflow_core::Result<()> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let h = scenario::snapshot::decode_header(&bytes, path)?;
    println!("file: {}", path.display());
    println!("version: {}", h.version);
    println!(
        "representation: {} (stored as {})",
        h.representation.name(),
        h.stored.name()
    );
    println!("payload: {}", if h.complex { "complex" } else { "real" });
    println!(
        "grid: {} x {} on x in [{}, {}), p in [{}, {})",
        h.nx, h.np, h.x_min, h.x_max, h.p_min, h.p_max
    );
    println!("hbar: {}  mass: {}  kappa: {}", h.hbar, h.mass, h.kappa);
    println!("t: {}", h.t);

    let snap = read_snapshot(path)?;
    let state = &snap.state;
    let np = norm_and_purity(state);
    println!("norm: {}", np.norm);
    println!("purity: {}", np.purity);
    println!("integral: {}", np.integral);
    println!("imaginary_residue: {:e}", state.imaginary_residue());
    let m = match negativity(state) {
        Ok(m) => m,
        Err(_) => {
            println!(
                "note: metrics of the real part (imaginary residue above the negativity limit)"
            );
            negativity_of_real_part(state)
        }
    };
    println!("n_minus: {}", m.n_minus);
    println!("n_plus: {}", m.n_plus);
    println!("negative_area: {}", m.negative_area);
    Ok(())
}

fn execute(cli: Cli) -> negaflow_core::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let config = load_config(&config)?;
            report(&run_scenario(&config)?);
        }
        Command::Fig2 { engine, kappa, out } => {
            let mut config = scenario::fig2(engine.into(), kappa)?;
            if let Some(dir) = out {
                config.output.dir = dir;
            }
            report(&run_scenario(&config)?);
        }
        Command::Inspect { snapshot } => inspect(&snapshot)?,
        Command::OracleCheck { config } => {
            let config = load_config(&config)?;
            println!("{}", oracle_check(&config)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // An invalid invocation is a configuration error.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Runtime => 2,
                ErrorKind::Io => 3,
            })
        }
    }
}
