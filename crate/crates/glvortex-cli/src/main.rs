use clap::{Parser, Subcommand};
use glvortex_cli::{execute, CliError, CommandConfig, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "glvortex", version, about = "Vortex-sheet approximate solutions: profile, fields, operators and checks")]
struct Cli {
    /// Output directory (overrides GLVORTEX_OUT; default ".").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Top,
}

#[derive(Subcommand)]
enum Top {
    #[command(flatten)]
    Cmd(CommandConfig),
    /// Replay a run from a saved config.json.
    Run { config: PathBuf },
}

fn load(path: &PathBuf, out: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(CliError::Usage)?;
    if out.is_some() {
        cfg.out = out;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match cli.command {
        Top::Cmd(c) => Ok(RunConfig::new(c, cli.out)),
        Top::Run { config } => load(&config, cli.out),
    };
    let result = cfg.and_then(|c| execute(&c));
    match result {
        Ok(outcome) => {
            for l in &outcome.lines {
                println!("{l}");
            }
            println!("{}", outcome.verdict());
            for f in &outcome.files {
                log::info!("wrote {}", f.display());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("glvortex: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
