//! Config-driven experiment runner: `nplab <command> --config FILE`.
//!
//! Every run writes `<command>-<hash>.csv`, `<command>-<hash>.json` and a
//! `<command>-<hash>.README.md` column sidecar, where `<hash>` is the first
//! 12 hex digits of the SHA-256 of the canonical config. Exit codes: 0 on
//! success, 2 for invalid input, 3 for numerical failures, 1 for output
//! errors; failures print one JSON record on stderr.

mod commands;
pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{Command, CountConfig, ExperimentConfig, OracleConfig};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "nplab", version, about = "Neumann-Poincare operator numerical laboratory")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "NPLAB_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub verbose: bool,
}

/// Output of one command before it is written out.
pub struct Artifacts {
    pub csv: String,
    pub json: serde_json::Value,
    /// `(column, meaning and units)` for the sidecar.
    pub columns: &'static [(&'static str, &'static str)],
    pub summary: Vec<(String, String)>,
}

#[derive(Debug)]
pub enum Failure {
    Validation(Error),
    Numerical(Error),
    Output(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Output(_) => 1,
        }
    }

    fn record(&self) -> ErrorRecord {
        let (kind, message) = match self {
            Failure::Validation(e) | Failure::Numerical(e) => (e.kind(), e.to_string()),
            Failure::Output(m) => ("output", m.clone()),
        };
        ErrorRecord { status: "error", kind, message, exit_code: self.exit_code() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e)
        } else {
            Failure::Validation(e)
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord {
    status: &'static str,
    kind: &'static str,
    message: String,
    exit_code: i32,
}

fn artifact_stem(cmd: Command, cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.canonical(cmd));
    format!("{}-{}", cmd.name(), &hex::encode(digest)[..12])
}

fn sidecar(cmd: Command, stem: &str, columns: &[(&str, &str)]) -> String {
    let mut s = format!("# {stem}\n\nArtifacts of `nplab {}`.\n\n## {stem}.csv\n\n| column | meaning |\n|---|---|\n", cmd.name());
    for (c, m) in columns {
        s.push_str(&format!("| `{c}` | {m} |\n"));
    }
    s.push_str(&format!(
        "\n## {stem}.json\n\nFull report including the resolved config. Values are dimensionless unless stated; \
         lengths are in the units of the shape spec.\n"
    ));
    s
}

fn write_all(dir: &Path, stem: &str, cmd: Command, art: &Artifacts) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&art.json).map_err(std::io::Error::other)? + "\n";
    let files = [
        (format!("{stem}.csv"), art.csv.clone()),
        (format!("{stem}.json"), json),
        (format!("{stem}.README.md"), sidecar(cmd, stem, art.columns)),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        out.push(path);
    }
    Ok(out)
}

/// Load, validate and run one experiment, writing its artifacts.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    let cfg = ExperimentConfig::load(&cli.config).map_err(Failure::Validation)?;
    cfg.validate(cli.command).map_err(Failure::Validation)?;
    let art = commands::run(cli.command, &cfg)?;
    let stem = artifact_stem(cli.command, &cfg);
    let paths = write_all(&cli.out, &stem, cli.command, &art).map_err(|e| Failure::Output(e.to_string()))?;

    let mut stdout = std::io::stdout().lock();
    let width = art.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &art.summary {
        let _ = writeln!(stdout, "{k:<width$}  {v}");
    }
    for p in &paths {
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    Ok(paths)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    // Dense kernels run sequentially so that artifacts do not depend on the
    // thread count; rayon parallelism is over independent rows and samples.
    faer::set_global_parallelism(faer::Par::Seq);
    if let Some(n) = cli.threads {
        let res = if n == 0 {
            Err("thread count must be at least 1".to_string())
        } else {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
        };
        if let Err(msg) = res {
            return fail(Failure::Validation(Error::InvalidParameter(msg)));
        }
    }
    match execute(&cli) {
        Ok(_) => 0,
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> i32 {
    let record = serde_json::to_string(&f.record()).unwrap_or_else(|_| "{\"status\":\"error\"}".into());
    eprintln!("{record}");
    f.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::from(Error::InvalidParameter("x".into())).exit_code(), 2);
        assert_eq!(Failure::from(Error::Cholesky("x".into())).exit_code(), 3);
        assert_eq!(Failure::from(Error::BranchTracking { h: 0.1, overlap: 0.2 }).exit_code(), 3);
        assert_eq!(Failure::from(Error::Embedding { h: 0.1, reason: "x".into() }).exit_code(), 2);
        let rec = serde_json::to_value(Failure::Numerical(Error::NonFinite("S")).record()).unwrap();
        assert_eq!(rec["kind"], "non_finite");
        assert_eq!(rec["exit_code"], 3);
    }

    #[test]
    fn stem_ignores_formatting_but_not_content() {
        let a: ExperimentConfig = serde_json::from_str(r#"{"oracle": {"trials": 3, "seed": 1}}"#).unwrap();
        let b: ExperimentConfig = serde_json::from_str("{\n  \"oracle\" : { \"seed\": 1, \"trials\": 3 }\n}").unwrap();
        let c: ExperimentConfig = serde_json::from_str(r#"{"oracle": {"trials": 3, "seed": 2}}"#).unwrap();
        assert_eq!(artifact_stem(Command::Oracle, &a), artifact_stem(Command::Oracle, &b));
        assert_ne!(artifact_stem(Command::Oracle, &a), artifact_stem(Command::Oracle, &c));
        assert!(artifact_stem(Command::Oracle, &a).starts_with("oracle-"));
    }
}
