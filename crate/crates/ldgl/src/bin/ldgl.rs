use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ldgl::experiment::{aggregate_reports, run_experiment, verify_run, ExperimentConfig, Task};
use ldgl::Error;

#[derive(Parser)]
#[command(
    name = "ldgl",
    version,
    about = "Layered superconductor experiments (LD / AGL)"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// run directory (overrides `output_dir` of the config)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// write final states as binary field files plus a layer CSV
    #[arg(long)]
    dump_fields: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// re-check the finished run directory
    #[arg(long)]
    verify: bool,
}

#[derive(Subcommand)]
enum Cmd {
    ConstructUpperBound(RunArgs),
    MinimizeLd(RunArgs),
    MinimizeAgl(RunArgs),
    CompareLdAgl(RunArgs),
    Diagnostics(RunArgs),
    /// Aggregate run directories into one CSV/JSON table
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Recompute the stored scalars of a run directory
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn run(task: Task, a: RunArgs) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&a.config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    if let Some(t) = cfg.task {
        if t != task {
            let e = Error::Config(format!(
                "config task `{}` conflicts with subcommand `{}`",
                t.name(),
                task.name()
            ));
            return fail(EXIT_CONFIG, &e);
        }
    }
    cfg.task = Some(task);
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.dump_fields |= a.dump_fields;
    let out = match a.out.or_else(|| cfg.output_dir.as_ref().map(PathBuf::from)) {
        Some(o) => o,
        None => {
            return fail(
                EXIT_CONFIG,
                &Error::Config("no output directory (--out)".into()),
            )
        }
    };
    let summary = match run_experiment(&cfg, &out, a.workers) {
        Ok(s) => s,
        Err(e @ Error::Config(_)) => return fail(EXIT_CONFIG, &e),
        Err(e) => return fail(1, &e),
    };
    println!(
        "{}: {} points, {} ok, {} failed, {} skipped -> {}",
        task.name(),
        summary.n_points,
        summary.n_ok,
        summary.n_failed,
        summary.n_skipped,
        out.display()
    );
    for r in summary.rows.iter().filter(|r| r.reason.is_some()) {
        eprintln!("point {}: {}", r.point, r.reason.as_deref().unwrap_or(""));
    }
    if a.verify {
        if let code @ 1.. = verify(&out) {
            return ExitCode::from(code);
        }
    }
    if summary.n_failed > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn verify(out: &PathBuf) -> u8 {
    match verify_run(out) {
        Ok(r) if r.mismatches.is_empty() => {
            println!("verify: {} points match", r.checked);
            0
        }
        Ok(r) => {
            for m in &r.mismatches {
                eprintln!("mismatch: {m}");
            }
            EXIT_PARTIAL
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn fail(code: u8, e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::ConstructUpperBound(a) => run(Task::ConstructUpperBound, a),
        Cmd::MinimizeLd(a) => run(Task::MinimizeLd, a),
        Cmd::MinimizeAgl(a) => run(Task::MinimizeAgl, a),
        Cmd::CompareLdAgl(a) => run(Task::CompareLdAgl, a),
        Cmd::Diagnostics(a) => run(Task::Diagnostics, a),
        Cmd::Report { out, runs } => match aggregate_reports(&runs, &out) {
            Ok(n) => {
                println!("report: {n} rows -> {}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(1, &e),
        },
        Cmd::Verify { out } => ExitCode::from(verify(&out)),
    }
}
