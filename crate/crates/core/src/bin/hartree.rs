use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hartree::io::read_field;
use hartree::norms::{norm_lp, norm_wiener};
use hartree::runner::{self, RunConfig};
use hartree::{boundary_mass_fraction, Error, Field64};

#[derive(Parser)]
#[command(
    name = "hartree",
    version,
    about = "Hartree equation experiments and field tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `io.out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted `key=value` applied after parsing, e.g. `grid.n=2048`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print L², L^∞ and Wiener norms of an HWF1 field.
    Norms { field: PathBuf },
    /// Print grid information of an HWF1 field.
    FieldInfo { field: PathBuf },
}

fn exit_for(err: &Error) -> ExitCode {
    if err.is_io() {
        ExitCode::from(3)
    } else if err.is_config() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("HW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "HW_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("HW_THREADS: {e}")))
}

fn load(path: &PathBuf) -> Result<Field64, Error> {
    read_field(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run {
            config,
            out,
            mut overrides,
        } => {
            if let Some(dir) = out {
                overrides.push(format!("io.out_dir={}", toml_string(&dir)));
            }
            let cfg = RunConfig::from_path(&config, &overrides)?;
            let report = runner::run(&cfg)?;
            for m in &report.metrics {
                println!(
                    "{} {:<32} {:>14.6e}  ({:?} {:e})",
                    if m.pass { "PASS" } else { "FAIL" },
                    m.name,
                    m.value,
                    m.relation,
                    m.tolerance
                );
            }
            if let Some(e) = &report.error {
                eprintln!("numerical failure: {e}");
            }
            println!("report: {}", cfg.io.out_dir.join("report.json").display());
            Ok(report.pass)
        }
        Command::Norms { field } => {
            let u = load(&field)?;
            println!("l2       {:.17e}", norm_lp(&u, 2.0)?);
            println!("linf     {:.17e}", norm_lp(&u, f64::INFINITY)?);
            println!("wiener   {:.17e}", norm_wiener(&u));
            Ok(true)
        }
        Command::FieldInfo { field } => {
            let u = load(&field)?;
            let g = u.grid();
            println!("dim      {}", g.dim());
            println!("n        {}", g.n());
            println!("length   {}", g.length());
            println!("dx       {}", g.dx());
            println!("dxi      {}", g.dxi());
            println!("boundary {:.6e}", boundary_mass_fraction(&u, 0.05)?);
            Ok(true)
        }
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

/// Quotes a path as a TOML basic string.
fn toml_string(path: &std::path::Path) -> String {
    toml::Value::String(path.to_string_lossy().into_owned()).to_string()
}
