//! Solution files: one JSON document per optimization run, carrying
//! the solution itself plus the settings needed to re-evaluate it.
//! Numbers survive the round trip bit for bit.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::crab::CrabSolution;
use crate::error::{Error, Result};
use crate::optimize::{OptimizeOutcome, OptimizerConfig, SynthesisConfig, Termination};

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk form of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub schema_version: u32,
    /// Milliseconds since the Unix epoch at save time.
    pub created_unix_ms: u64,
    pub converged: bool,
    pub evaluations: u64,
    pub restarts_used: usize,
    pub termination: Termination,
    pub synthesis: SynthesisConfig,
    pub optimizer: OptimizerConfig,
    pub solution: CrabSolution,
}

impl SolutionFile {
    pub fn from_outcome(
        outcome: &OptimizeOutcome,
        synthesis: &SynthesisConfig,
        optimizer: &OptimizerConfig,
    ) -> Self {
        let created_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        SolutionFile {
            schema_version: SCHEMA_VERSION,
            created_unix_ms,
            converged: outcome.converged,
            evaluations: outcome.evaluations,
            restarts_used: outcome.restarts_used,
            termination: outcome.termination,
            synthesis: *synthesis,
            optimizer: *optimizer,
            solution: outcome.solution.clone(),
        }
    }
}

pub fn save_solution(path: &Path, file: &SolutionFile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(file)
        .map_err(|e| Error::InvalidInput(format!("solution serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_solution(path: &Path) -> Result<SolutionFile> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: SolutionFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: format!(
                "unsupported schema version {}, expected {}",
                file.schema_version, SCHEMA_VERSION
            ),
        });
    }
    file.solution.validate()?;
    file.synthesis.validate()?;
    Ok(file)
}

/// Solution files found in a directory, plus warnings for entries that
/// could not be loaded.
#[derive(Debug)]
pub struct LoadedSolutions {
    /// (path, file) pairs sorted by file name.
    pub entries: Vec<(PathBuf, SolutionFile)>,
    pub warnings: Vec<String>,
}

/// Load every `*.json` in `dir`. Unreadable or invalid files become
/// warnings, not errors, so one corrupt file cannot sink a batch.
pub fn load_solutions_dir(dir: &Path) -> Result<LoadedSolutions> {
    let read = std::fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut paths: Vec<PathBuf> = read
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();

    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for path in paths {
        match load_solution(&path) {
            Ok(file) => entries.push((path, file)),
            Err(err) => warnings.push(format!("skipping {}: {err}", path.display())),
        }
    }
    Ok(LoadedSolutions { entries, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::GateKind;
    use crate::model::TransmonModel;
    use crate::optimize::{evaluate_solution, optimize_gate};

    fn small_outcome() -> (OptimizeOutcome, SynthesisConfig, OptimizerConfig) {
        let model = TransmonModel::default();
        let synth = SynthesisConfig {
            num_components: 2,
            num_steps: 40,
            ..SynthesisConfig::default()
        };
        let opt = OptimizerConfig {
            max_cost_evaluations: 400,
            restart_limit: 1,
            ..OptimizerConfig::default()
        };
        let outcome = optimize_gate(&model, GateKind::Phase, &synth, &opt, 5).unwrap();
        (outcome, synth, opt)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (outcome, synth, opt) = small_outcome();
        let file = SolutionFile::from_outcome(&outcome, &synth, &opt);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phase_00.json");
        save_solution(&path, &file).unwrap();
        let loaded = load_solution(&path).unwrap();
        assert_eq!(loaded, file);
        assert_eq!(
            loaded.solution.achieved_infidelity.to_bits(),
            file.solution.achieved_infidelity.to_bits()
        );
        for (a, b) in loaded
            .solution
            .coefficients
            .channels
            .iter()
            .flatten()
            .zip(file.solution.coefficients.channels.iter().flatten())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // re-evaluating the loaded solution reproduces the stored value
        let again = evaluate_solution(&loaded.solution, &loaded.synthesis).unwrap();
        assert_eq!(again, file.solution.achieved_infidelity);
    }

    #[test]
    fn schema_version_is_enforced() {
        let (outcome, synth, opt) = small_outcome();
        let mut file = SolutionFile::from_outcome(&outcome, &synth, &opt);
        file.schema_version = 99;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("future.json");
        save_solution(&path, &file).unwrap();
        assert!(matches!(
            load_solution(&path).unwrap_err(),
            Error::Parse { .. }
        ));
    }

    #[test]
    fn directory_scan_skips_corrupt_files() {
        let (outcome, synth, opt) = small_outcome();
        let file = SolutionFile::from_outcome(&outcome, &synth, &opt);
        let dir = tempfile::tempdir().unwrap();
        save_solution(&dir.path().join("good_a.json"), &file).unwrap();
        save_solution(&dir.path().join("good_b.json"), &file).unwrap();
        std::fs::write(dir.path().join("corrupt.json"), "{ not json").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

        let loaded = load_solutions_dir(dir.path()).unwrap();
        assert_eq!(loaded.entries.len(), 2);
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("corrupt.json"));
        let names: Vec<_> = loaded
            .entries
            .iter()
            .map(|(p, _)| p.file_name().unwrap().to_str().unwrap().to_string())
            .collect();
        assert_eq!(names, vec!["good_a.json", "good_b.json"]);

        assert!(load_solutions_dir(Path::new("/nonexistent/dir")).is_err());
    }
}
