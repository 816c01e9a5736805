//! The `cuboid3d` command line: AP3D evaluation, pairwise IoU matrices,
//! dataset statistics and kernel benchmarks.
//!
//! Every subcommand is also exposed as a function returning its artifacts
//! in memory, so the binary is a thin layer that parses flags, writes files
//! and maps errors to exit codes.

pub mod args;
pub mod commands;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

pub use args::{Cli, Command, OutputFormat};
pub use commands::{
    cmd_bench, cmd_eval, cmd_iou, cmd_stats, BenchFlags, BenchReport, EvalArtifacts, EvalFlags,
    IouFlags, StatsArtifacts, StatsFlags,
};

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "CUBOID3D_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(cuboid3d::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// 0 success, 1 usage, 2 input or schema, 3 internal.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<cuboid3d::Error> for CliError {
    fn from(e: cuboid3d::Error) -> Self {
        match e {
            cuboid3d::Error::InvalidInput(msg) => CliError::Usage(msg),
            other => CliError::Input(other),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn emit(output: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match output {
        Some(path) => write_file(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    match &cli.command {
        Command::Eval(a) => {
            let out = in_pool(threads, || cmd_eval(&a.gt, &a.pred, &a.flags()?))??;
            if let Some(dir) = &a.output {
                write_file(&dir.join("ap_report.json"), &out.json)?;
                write_file(&dir.join("ap_report.csv"), &out.csv)?;
            }
            match a.format {
                Some(OutputFormat::Json) => print!("{}", out.json),
                Some(OutputFormat::Csv) => print!("{}", out.csv),
                None => print!("{}", out.table),
            }
            Ok(())
        }
        Command::Iou(a) => {
            let csv = in_pool(threads, || cmd_iou(&a.boxes_a, &a.boxes_b, &a.flags()))??;
            emit(a.output.as_deref(), &csv)
        }
        Command::Bench(a) => {
            let report = cmd_bench(&a.flags(threads))?;
            let text = match a.format {
                Some(OutputFormat::Json) => report.to_json(),
                Some(OutputFormat::Csv) => report.to_csv(),
                None => report.to_text(),
            };
            emit(a.output.as_deref(), &text)
        }
        Command::Stats(a) => {
            let out = in_pool(threads, || cmd_stats(&a.dataset, &a.flags()))??;
            if let Some(dir) = &a.output {
                write_file(&dir.join("stats.json"), &out.json)?;
                for (name, csv) in &out.csvs {
                    write_file(&dir.join(format!("{name}.csv")), csv)?;
                }
            }
            match a.format {
                Some(OutputFormat::Json) => print!("{}", out.json),
                Some(OutputFormat::Csv) => {
                    for (name, csv) in &out.csvs {
                        println!("# {name}");
                        print!("{csv}");
                    }
                }
                None => println!("{}", out.summary),
            }
            Ok(())
        }
    }
}

/// Runs `f` on a dedicated pool when a thread count is given.
fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        Some(n) => Ok(cuboid3d::intersect::with_threads(n, f)?),
        None => Ok(f()),
    }
}

/// Parses `args`, runs the command and reports failures on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
