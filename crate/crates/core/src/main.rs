use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use umcf::config::{apply_overrides, parse_config, InitialProfile, Manifest, RunConfig};
use umcf::experiments::{self, Output, Report};
use umcf::geometry::{initial_condition, Shape};
use umcf::io::OutputSink;
use umcf::solver::{run, HaltReason};
use umcf::Error;

#[derive(Parser)]
#[command(name = "umcf", version, about = "Spectral phase-field solver for non-oriented mean curvature flow")]
struct Cli {
    /// Worker threads (falls back to UMCF_THREADS, then to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (replaces run.output_dir/run.experiment_name).
        #[arg(long)]
        out: Option<PathBuf>,
        /// `section.key=value`, may be repeated.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Shrinking circle compared with the exact radius law.
    ValidateCircle2d {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop at t = 0.01 instead of t = 0.03.
        #[arg(long)]
        quick: bool,
    },
    /// Shrinking sphere compared with the exact radius law.
    ValidateSphere3d {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use N = 64 with tolerance 8ε instead of N = 128 with 5ε.
        #[arg(long)]
        quick: bool,
    },
    /// Stationarity of the exact one-dimensional profile.
    ValidateProfile1d {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profile stability for σ = 4ε² against σ = ε².
    SigmaStudy {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
    },
    /// Energy of the recovery fields against the sharp-interface limit.
    GammaLimsup {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("UMCF_THREADS").ok().and_then(|v| v.trim().parse().ok()));
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::InvalidGeometry(_) | Error::InvalidStudy(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(command: Command) -> umcf::Result<bool> {
    let report = match command {
        Command::Run { config, out, overrides } => return run_config(&config, out.as_deref(), &overrides),
        Command::ValidateCircle2d { out, quick } => {
            experiments::circle_2d(if quick { 0.01 } else { 0.03 }, &Output(out))?
        }
        Command::ValidateSphere3d { out, quick } => {
            let (n, tol) = if quick { (64, 8.0) } else { (128, 5.0) };
            experiments::sphere_3d(n, tol, &Output(out))?
        }
        Command::ValidateProfile1d { out } => experiments::profile_1d(&Output(out))?,
        Command::SigmaStudy { out, steps } => experiments::sigma_study(steps, &Output(out))?,
        Command::GammaLimsup { out } => experiments::gamma_limsup(&Output(out))?,
    };
    Ok(print_report(&report))
}

fn print_report(report: &Report) -> bool {
    for line in report.lines() {
        println!("{line}");
    }
    report.passed()
}

fn load(path: &Path, overrides: &[String]) -> umcf::Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        key: String::new(),
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let config = parse_config(&text)?;
    if overrides.is_empty() {
        return Ok(config);
    }
    parse_config(&apply_overrides(&text, overrides)?)
}

fn run_config(path: &Path, out: Option<&Path>, overrides: &[String]) -> umcf::Result<bool> {
    let config = load(path, overrides)?;
    let resolved = config.resolve()?;
    let grid = config.build_grid()?;
    let plan = config.plan()?;
    let shape = match config.shapes.as_slice() {
        [one] => one.clone(),
        many => Shape::Union {
            members: many.to_vec(),
        },
    };
    let truncated = config.run.initial_profile == InitialProfile::Truncated;
    let u0 = initial_condition(&shape, &grid, resolved.params.eps, truncated)?;

    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => Path::new(&config.run.output_dir).join(&config.run.experiment_name),
    };
    let mut sink = OutputSink::create(&dir, resolved.params.eps, config.run.mask_level)?;
    let manifest = Manifest::new(&config, &resolved, rayon::current_num_threads()).to_toml()?;
    let manifest_path = dir.join("manifest.toml");
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;

    let end = run(u0, &plan, &mut sink)?;
    sink.finish()?;
    let last = sink.records.last();
    println!(
        "{}: {} steps, t = {:.6e}, halted {:?}, energy {:.6e}",
        dir.display(),
        end.step_index,
        end.time,
        end.halted,
        last.map_or(f64::NAN, |r| r.energy.total)
    );
    Ok(end.halted != Some(HaltReason::Divergence))
}
