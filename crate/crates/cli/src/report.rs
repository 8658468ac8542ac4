//! Result files and the output directory.
//!
//! Layout of an output directory:
//!
//! | file | written by | content |
//! |---|---|---|
//! | `config.resolved.json` | every run | the resolved config, seed included |
//! | `summary.csv` / `summary.json` | `simulate` | per-round summary |
//! | `transcript.jsonl` | `simulate --transcript`, `llm-run` | one round per line |
//! | `martingale.csv` / `martingale.json` | `martingale` | belief trace |
//! | `sweep.csv` / `sweep.json` | `sweep` | one block of rounds per axis value |
//! | `llm_result.json` | `llm-run` | voted answer |
//! | `FAILED` | any run exiting non-zero | the error |
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mad_core::montecarlo::{MartingaleTrace, SweepPoint};
use mad_core::TrialSummary;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const CSV_HEADER: &str =
    "round,mean_agent_accuracy,mean_belief,voted_accuracy,se_agent,se_belief,se_voted";
pub const FAILED_MARKER: &str = "FAILED";
pub const RESOLVED_CONFIG: &str = "config.resolved.json";

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates `root` if needed and clears a stale failure marker.
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let marker = root.join(FAILED_MARKER);
        if marker.exists() {
            fs::remove_file(&marker).map_err(|e| io_err(&marker, e))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.root.join(name);
        write_atomic(&path, contents.as_ref())?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, to_json(value)?)
    }

    pub fn mark_failed(&self, error: &CliError) {
        if let Err(e) = self.write(FAILED_MARKER, format!("{error}\n")) {
            log::error!("could not write failure marker: {e}");
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Run(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn push_rows(out: &mut String, prefix: &str, s: &TrialSummary) {
    for t in 0..s.rounds() {
        writeln!(
            out,
            "{prefix}{t},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.mean_agent_accuracy[t],
            s.mean_belief[t],
            s.voted_accuracy[t],
            s.se_agent[t],
            s.se_belief[t],
            s.se_voted[t],
        )
        .expect("writing to a String");
    }
}

/// One row per round `0..=T`, six decimals.
pub fn summary_csv(summary: &TrialSummary) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    push_rows(&mut out, "", summary);
    out
}

/// Summary rows prefixed with the sweep axis value.
pub fn sweep_csv(axis: &str, points: &[SweepPoint]) -> String {
    let mut out = format!("{axis},{CSV_HEADER}\n");
    for p in points {
        push_rows(&mut out, &format!("{},", csv_field(&p.label)), &p.summary);
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn martingale_csv(trace: &MartingaleTrace) -> String {
    let mut out = String::from("round,mean_belief,se_belief,deviation,tolerance\n");
    for (t, ((p, se), tol)) in trace
        .mean_belief
        .iter()
        .zip(&trace.se_belief)
        .zip(&trace.tolerance)
        .enumerate()
    {
        writeln!(out, "{t},{p:.6},{se:.6},{:.6},{tol:.6}", p - trace.p0).expect("writing to a String");
    }
    out
}

/// The JSON counterpart of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub config: RunConfig,
    pub summary: TrialSummary,
}

pub fn summary_json(config: &RunConfig, summary: &TrialSummary) -> Result<String> {
    to_json(&SummaryDocument {
        config: config.clone(),
        summary: summary.clone(),
    })
}

pub fn parse_summary_json(text: &str) -> Result<SummaryDocument> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// One compact JSON record per line.
pub fn jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| CliError::Run(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mad_core::montecarlo::run_trials;
    use mad_core::{BeliefVector, DebateConfig, ExperimentSpec};

    fn summary(t: usize) -> TrialSummary {
        let cfg = DebateConfig::new(5, BeliefVector::new(vec![2.0, 1.0, 1.0, 1.0]).unwrap(), t, 42);
        run_trials(&ExperimentSpec::new(cfg, 200)).unwrap()
    }

    #[test]
    fn csv_shape() {
        let csv = summary_csv(&summary(3));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,"));
        for l in &lines[1..] {
            let fields: Vec<&str> = l.split(',').collect();
            assert_eq!(fields.len(), 7);
            assert!(fields[1..].iter().all(|f| f.split('.').nth(1).map(str::len) == Some(6)));
        }
    }

    #[test]
    fn json_round_trips() {
        let s = summary(2);
        let cfg = RunConfig {
            seed: Some(42),
            ..RunConfig::default()
        };
        let text = summary_json(&cfg, &s).unwrap();
        let back = parse_summary_json(&text).unwrap();
        assert_eq!(back.summary, s);
        assert_eq!(back.config, cfg);
        assert_eq!(summary_json(&back.config, &back.summary).unwrap(), text);
    }

    #[test]
    fn emission_is_deterministic() {
        assert_eq!(summary_csv(&summary(1)), summary_csv(&summary(1)));
    }

    #[test]
    fn atomic_write_and_marker() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap();
        out.write("a.txt", "x").unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("a.txt")).unwrap(), "x");
        assert!(!dir.path().join("a.txt.tmp").exists());
        out.mark_failed(&CliError::Run("boom".into()));
        assert!(dir.path().join(FAILED_MARKER).exists());
        OutputDir::create(dir.path()).unwrap();
        assert!(!dir.path().join(FAILED_MARKER).exists());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_atomic(&dir.path().join("missing/x.csv"), b"x").unwrap_err();
        assert!(matches!(err, CliError::Io(_)));
    }
}
