//! `gaugestring` command-line scenario runner.

mod config;
mod presets;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Scenario};
use run::{CliError, Options};

/// Cache directory override for enumerated sector bases.
const CACHE_ENV: &str = "GAUGESTRING_CACHE_DIR";

#[derive(Parser)]
#[command(name = "gaugestring", version, about = "Exact string dynamics in 2+1D lattice gauge theories")]
struct Cli {
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Cap on the basis dimension.
    #[arg(long, global = true)]
    max_dim: Option<usize>,
    /// Do not read or write cached sector bases.
    #[arg(long, global = true)]
    no_cache: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Scenario file.
    config: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a scenario and write one CSV per sweep member.
    Run(Source),
    /// List built-in scenarios, or print one.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
    /// Check a scenario and report its dimensions without evolving.
    Validate(Source),
    /// Write the fixed-energy manifold of a minimal-model scenario.
    ExportManifold(Source),
}

fn load(src: &Source) -> Result<Scenario, CliError> {
    let (label, text) = match (&src.config, &src.preset) {
        (_, Some(name)) => {
            let p = preset(name)?;
            (format!("preset {name}"), p.text.to_string())
        }
        (Some(path), None) => (path.display().to_string(), std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?),
        (None, None) => {
            return Err(CliError::Config(ConfigError { line: None, message: "give a scenario file or --preset NAME".into() }))
        }
    };
    config::parse(&text).map_err(|e| CliError::Config(ConfigError { line: e.line, message: format!("{label}: {}", e.message) }))
}

fn preset(name: &str) -> Result<&'static presets::Preset, CliError> {
    presets::find(name).ok_or_else(|| {
        CliError::Config(ConfigError {
            line: None,
            message: format!("unknown preset {name:?}; available: {}", presets::names().join(", ")),
        })
    })
}

fn cache_dir(disabled: bool) -> Option<PathBuf> {
    if disabled {
        return None;
    }
    if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
        return Some(PathBuf::from(dir));
    }
    let base = std::env::var_os("XDG_CACHE_HOME")
        .filter(|d| !d.is_empty())
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))?;
    Some(base.join("gaugestring"))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let opts = Options { out_dir: cli.out_dir, max_dim: cli.max_dim, cache_dir: cache_dir(cli.no_cache) };
    match cli.command {
        Command::Presets { show: None } => print!("{}", presets::table()),
        Command::Presets { show: Some(name) } => print!("{}", preset(&name)?.text.trim_start()),
        Command::Run(src) => {
            let s = load(&src)?;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = cli.workers {
                pool = pool.num_threads(n);
            }
            let pool = pool.build().map_err(|e| CliError::Other(e.to_string()))?;
            for out in pool.install(|| run::run_scenario(&s, &opts))? {
                println!("wrote {} (dimension {})", out.csv.display(), out.dimension);
                println!("wrote {}", out.meta.display());
            }
        }
        Command::Validate(src) => {
            let s = load(&src)?;
            let setup = run::setup(&s, &opts)?;
            let lat = &setup.lattice;
            let dims = run::dimensions(&s, &setup, &opts)?;
            println!("ok");
            println!("scenario {} ({}), {} job(s)", s.name, s.model.name(), s.jobs().len());
            println!(
                "lattice {} {}x{}: {} sites, {} links, {} plaquettes ({})",
                lat.geometry(),
                lat.spec().extent_x,
                lat.spec().extent_y,
                lat.num_sites(),
                lat.num_links(),
                lat.num_plaquettes(),
                lat.boundary_note()
            );
            println!("string {} of length {}, {} minimal strings", s.shape.name(), setup.seed.len(), setup.strings.len());
            let what = if setup.sector.is_some() { "sector" } else { "manifold" };
            for (m, g, d) in dims {
                println!("m={m} g={g}: {what} dimension {d}");
            }
        }
        Command::ExportManifold(src) => {
            let s = load(&src)?;
            for path in run::export_manifolds(&s, &opts)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
