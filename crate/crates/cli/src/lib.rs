//! Command-line front end for `t2m`.
//!
//! ```text
//! t2m inspect|verify|integrate|transform-check --config <path|-> [--perturb <eps>] [--quiet]
//! ```
//!
//! Exit codes: 0 success, 1 configuration or failed check, 2 mathematical
//! precondition (degenerate Lagrangian, singular Jacobian or metric),
//! 3 integration stopped mid-flight.

pub mod commands;
pub mod config;
pub mod report;

use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use config::{Format, RunConfig};
use report::Report;

#[derive(Debug, Parser)]
#[command(name = "t2m", version, about = "Semisprays, connections and Craig-Synge flows on T2M")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print g, g⁻¹, G, the connection coefficients and the Cartan forms at each point.
    Inspect(Common),
    /// Evaluate the residual suite over the sample points.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Shift N⁽²⁾ by `eps·I` before checking (sensitivity hook).
        #[arg(long, value_name = "EPS", allow_negative_numbers = true)]
        perturb: Option<f64>,
    },
    /// Integrate the Craig-Synge system and write the trajectory.
    Integrate(Common),
    /// Check the tensor laws of g and z⁽²⁾ under a base diffeomorphism.
    TransformCheck(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration, or `-` for stdin.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Suppress the human-readable summary on stderr.
    #[arg(long)]
    pub quiet: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Inspect(_) => "inspect",
            Command::Verify { .. } => "verify",
            Command::Integrate(_) => "integrate",
            Command::TransformCheck(_) => "transform-check",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Inspect(c) | Command::Integrate(c) | Command::TransformCheck(c) => c,
            Command::Verify { common, .. } => common,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Math(#[from] t2m::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Math(e) => math_exit_code(e),
        }
    }
}

/// Exit code for an engine error raised while computing.
pub fn math_exit_code(e: &t2m::Error) -> i32 {
    use t2m::Error::*;
    match e {
        DegenerateLagrangian { .. } | SingularJacobian { .. } | SingularMetric { .. } | Domain(_) | Invalid(_) => 2,
        Step { .. } => 3,
        Parse { .. } | Index { .. } | Dimension { .. } | Config(_) => 1,
    }
}

/// Everything a run produces. `stdout` holds the artifact unless the
/// configuration names an output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit: i32,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<Report>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_config(path: &Path) -> Result<Vec<u8>, CliError> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).map_err(|e| CliError::Io(format!("reading stdin: {e}")))?;
        return Ok(buf);
    }
    std::fs::read(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

/// Parse arguments and run. Argument errors are reported like config errors.
pub fn run_args<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let exit = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let (stdout, stderr) = if exit == 0 { (text, String::new()) } else { (String::new(), text) };
            Outcome { exit, stdout, stderr, report: None }
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let common = cli.command.common();
    let mut report = Report {
        command: cli.command.name().to_string(),
        config_digest: String::new(),
        results: Vec::new(),
        exit: 0,
        error: None,
        trajectory: None,
    };
    let bytes = match read_config(&common.config) {
        Ok(b) => b,
        Err(e) => return finish(report.failed(&e), None, None, common.quiet),
    };
    report.config_digest = sha256_hex(&bytes);
    let cfg = match std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))
        .and_then(RunConfig::from_json)
    {
        Ok(c) => c,
        Err(e) => return finish(report.failed(&e), None, None, common.quiet),
    };
    let l = match cfg.lagrangian_spec() {
        Ok(l) => l,
        Err(e) => return finish(report.failed(&e), Some(&cfg), None, common.quiet),
    };

    let mut csv = None;
    let computed = match &cli.command {
        Command::Inspect(_) => commands::inspect(&cfg, &l),
        Command::Verify { perturb, .. } => commands::verify(&cfg, &l, *perturb),
        Command::TransformCheck(_) => commands::transform_check(&cfg, &l),
        Command::Integrate(_) => commands::integrate(&cfg, &l).map(|run| {
            if cfg.format == Format::Csv {
                csv = Some(run.trajectory.to_csv());
            } else {
                report.trajectory = Some(commands::trajectory_table(&run.trajectory));
            }
            // Any failure after the first step is a runtime failure.
            if let Some(e) = run.error {
                report.exit = 3;
                report.error = Some(e.to_string());
            }
            run.results
        }),
    };
    match computed {
        Ok(results) => {
            report.results = results;
            if report.exit == 0 && !report.all_pass() {
                report.exit = 1;
            }
        }
        Err(e) => report = report.failed(&e),
    }
    finish(report, Some(&cfg), csv, common.quiet)
}

impl Report {
    fn failed(mut self, e: &CliError) -> Self {
        self.exit = e.exit_code();
        self.error = Some(e.to_string());
        self
    }
}

fn finish(mut report: Report, cfg: Option<&RunConfig>, csv: Option<String>, quiet: bool) -> Outcome {
    let format = cfg.map(|c| c.format).unwrap_or_default();
    let artifact = match (csv, format) {
        (Some(csv), _) => csv,
        (None, Format::Csv) => report.to_csv(),
        (None, Format::Json) => report.to_json(),
    };
    let mut stdout = String::new();
    let mut stderr = String::new();
    match cfg.and_then(|c| c.output.as_ref()) {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &artifact) {
                report = report.failed(&CliError::Io(format!("writing {}: {e}", path.display())));
                stdout = report.to_json();
            }
        }
        None => stdout = artifact,
    }
    if !quiet {
        stderr = report.to_table();
    } else if let Some(e) = &report.error {
        stderr = format!("error: {e}\n");
    }
    Outcome { exit: report.exit, stdout, stderr, report: Some(report) }
}
