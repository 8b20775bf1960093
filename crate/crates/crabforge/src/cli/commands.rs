//! Subcommand implementations. Results and reports go to stdout,
//! progress and warnings to stderr; callers map errors to exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cli::config::RunConfig;
use crate::cli::emit;
use crate::cli::persist::{self, LoadedSolutions, SolutionFile};
use crate::crab::BasisTable;
use crate::error::{Error, Result};
use crate::gates::GateKind;
use crate::optimize::{run_campaign, CampaignResult, OptimizeOutcome};
use crate::robustness::{
    sweep_infidelity_vs_sigma, tolerance_search, DisturbanceConfig, DisturbanceKind,
    ToleranceReport,
};
use crate::seeds::derive_seed;
use crate::spectrum::grid_spectra;

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

/// Run the configured campaigns and persist one solution file per run,
/// plus a machine-readable and a human-readable summary.
pub fn cmd_optimize(config: &RunConfig) -> Result<()> {
    config.validate()?;
    ensure_dir(&config.output_dir)?;

    let mut results: Vec<CampaignResult> = Vec::new();
    for &gate in &config.gates {
        eprintln!(
            "optimizing {gate}: {} runs, base seed {}",
            config.runs_per_gate, config.base_seed
        );
        let result = run_campaign(
            &config.model,
            gate,
            &config.synthesis,
            &config.optimizer,
            config.runs_per_gate,
            config.base_seed,
        )?;
        for (i, outcome) in result.outcomes.iter().enumerate() {
            let file = SolutionFile::from_outcome(outcome, &config.synthesis, &config.optimizer);
            let path = config.output_dir.join(format!("{gate}_{i:02}.json"));
            persist::save_solution(&path, &file)?;
        }
        eprintln!(
            "  {gate}: {}/{} converged",
            result.outcomes.len() - result.non_converged_count,
            result.outcomes.len()
        );
        results.push(result);
    }

    emit::write_campaign_summary_csv(&config.output_dir.join("summary.csv"), &results)?;
    let text = emit::campaign_summary_text(&results);
    emit::write_campaign_summary_text(&config.output_dir.join("summary.txt"), &results)?;
    print!("{text}");
    Ok(())
}

fn load_nonempty(dir: &Path) -> Result<LoadedSolutions> {
    let loaded = persist::load_solutions_dir(dir)?;
    for warning in &loaded.warnings {
        eprintln!("warning: {warning}");
    }
    if loaded.entries.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no solutions found in {}",
            dir.display()
        )));
    }
    Ok(loaded)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "solution".into())
}

/// Per-solution disturbance seed: distinct solutions must not share
/// realization draws.
fn solution_disturbance_config(base: &DisturbanceConfig, rng_seed: u64) -> DisturbanceConfig {
    DisturbanceConfig {
        seed: derive_seed(base.seed, &[rng_seed]),
        ..*base
    }
}

/// Tolerance search over every converged solution in a directory.
/// Writes one step-by-step CSV per solution and an aggregate CSV, and
/// prints per-gate statistics.
pub fn cmd_robust(
    config: &RunConfig,
    kind: DisturbanceKind,
    dir: &Path,
    out: Option<&Path>,
) -> Result<()> {
    config.validate()?;
    let loaded = load_nonempty(dir)?;
    let out_dir = out.unwrap_or(dir);
    ensure_dir(out_dir)?;

    let threshold = config.disturbance.threshold;
    let mut searched: Vec<(PathBuf, SolutionFile, ToleranceReport)> = Vec::new();
    for (path, file) in loaded.entries {
        if file.solution.achieved_infidelity >= threshold {
            eprintln!(
                "skipping {}: clean infidelity {:e} is not below the threshold {threshold:e}",
                path.display(),
                file.solution.achieved_infidelity
            );
            continue;
        }
        let dconfig = solution_disturbance_config(&config.disturbance, file.solution.rng_seed);
        eprintln!("searching {kind} tolerance for {}", path.display());
        let report = tolerance_search(&file.solution, kind, &dconfig, &file.synthesis)?;
        let step_path = out_dir.join(format!("tolerance_{kind}_{}.csv", file_stem(&path)));
        emit::write_tolerance_csv(&step_path, &report)?;
        searched.push((path, file, report));
    }
    if searched.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no solutions with clean infidelity below {threshold:e} in {}",
            dir.display()
        )));
    }

    let mut csv = String::from(
        "file,gate,seed,clean_infidelity,tolerated_sigma,tolerated_sigma_ev\n",
    );
    for (path, file, report) in &searched {
        let tolerated = report
            .tolerated_sigma
            .map(|v| v.to_string())
            .unwrap_or_default();
        let tolerated_ev = report
            .tolerated_sigma_ev
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{tolerated},{tolerated_ev}",
            file_stem(path),
            file.solution.gate,
            file.solution.rng_seed,
            report.clean_infidelity
        );
    }
    let aggregate_path = out_dir.join(format!("tolerance_{kind}.csv"));
    std::fs::write(&aggregate_path, &csv)
        .map_err(|e| Error::io(aggregate_path.display().to_string(), e))?;

    println!("{kind} tolerance, infidelity threshold {threshold:e}:");
    for (path, file, report) in &searched {
        match (report.tolerated_sigma, report.tolerated_sigma_ev) {
            (Some(sigma), Some(ev)) => println!(
                "  {} [{}] clean {:.4e}: tolerated sigma {:.4e} rad/ns = {:.4e} eV",
                file_stem(path),
                file.solution.gate,
                report.clean_infidelity,
                sigma,
                ev
            ),
            _ => println!(
                "  {} [{}] clean {:.4e}: no tolerated sigma within {} steps",
                file_stem(path),
                file.solution.gate,
                report.clean_infidelity,
                report.steps.len()
            ),
        }
    }
    for gate in GateKind::ALL {
        let found: Vec<f64> = searched
            .iter()
            .filter(|(_, f, _)| f.solution.gate == gate)
            .filter_map(|(_, _, r)| r.tolerated_sigma)
            .collect();
        if found.is_empty() {
            continue;
        }
        let avg = found.iter().sum::<f64>() / found.len() as f64;
        let max = found.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "  {gate}: {} solutions, avg tolerated {:.4e} rad/ns ({:.4e} eV), best {:.4e} rad/ns ({:.4e} eV)",
            found.len(),
            avg,
            crate::robustness::sigma_to_ev(avg),
            max,
            crate::robustness::sigma_to_ev(max)
        );
    }
    Ok(())
}

/// Export the sampled signals and per-channel spectra of one solution.
pub fn cmd_emit(solution_path: &Path, out: Option<&Path>) -> Result<()> {
    let file = persist::load_solution(solution_path)?;
    let parent = solution_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = out.map(Path::to_path_buf).unwrap_or(parent);
    ensure_dir(&out_dir)?;

    let table = BasisTable::new(&file.solution.basis, file.synthesis.num_steps)?;
    let grid = table.fill_grid(&file.solution.coefficients)?;

    let signals = out_dir.join("signals.csv");
    emit::write_signals_csv(&signals, &grid)?;
    println!("wrote {}", signals.display());

    for (channel, spectrum) in crate::model::Channel::ALL.iter().zip(grid_spectra(&grid)?) {
        let path = out_dir.join(format!("spectrum_{}.csv", channel.label()));
        emit::write_spectrum_csv(&path, &spectrum)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Disturbed-infidelity sweep for one solution over a sigma ladder
/// (default: the search ladder thinned to every fourth step, with a
/// clean sigma = 0 row first).
pub fn cmd_sweep(
    config: &RunConfig,
    solution_path: &Path,
    kind: DisturbanceKind,
    sigmas: Option<Vec<f64>>,
    realizations: usize,
    out: Option<&Path>,
) -> Result<()> {
    config.validate()?;
    let file = persist::load_solution(solution_path)?;
    let parent = solution_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = out.map(Path::to_path_buf).unwrap_or(parent);
    ensure_dir(&out_dir)?;

    let sigmas = match sigmas {
        Some(list) => list,
        None => {
            let mut list = vec![0.0];
            list.extend((0..=40).step_by(4).map(|n| config.disturbance.sigma_at(n)));
            list
        }
    };
    let dconfig = solution_disturbance_config(&config.disturbance, file.solution.rng_seed);
    let points = sweep_infidelity_vs_sigma(
        &file.solution,
        kind,
        &sigmas,
        realizations,
        dconfig.seed,
        &file.synthesis,
    )?;
    let path = out_dir.join(format!("sweep_{kind}.csv"));
    emit::write_sweep_csv(&path, &points)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Reassemble per-gate campaign statistics from files on disk.
fn rebuild_campaigns(entries: &[(PathBuf, SolutionFile)]) -> Vec<CampaignResult> {
    let mut results = Vec::new();
    for gate in GateKind::ALL {
        let outcomes: Vec<OptimizeOutcome> = entries
            .iter()
            .filter(|(_, f)| f.solution.gate == gate)
            .map(|(_, f)| OptimizeOutcome {
                solution: f.solution.clone(),
                converged: f.converged,
                restarts_used: f.restarts_used,
                evaluations: f.evaluations,
                termination: f.termination,
            })
            .collect();
        if outcomes.is_empty() {
            continue;
        }
        let converged: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.converged)
            .map(|o| o.solution.achieved_infidelity)
            .collect();
        let non_converged_count = outcomes.len() - converged.len();
        let average_infidelity = if converged.is_empty() {
            None
        } else {
            Some(converged.iter().sum::<f64>() / converged.len() as f64)
        };
        let minimum_infidelity = converged.iter().cloned().reduce(f64::min);
        results.push(CampaignResult {
            gate,
            outcomes,
            average_infidelity,
            minimum_infidelity,
            non_converged_count,
        });
    }
    results
}

/// Print the campaign digest for a directory of saved solutions.
pub fn cmd_report(dir: &Path) -> Result<()> {
    let loaded = load_nonempty(dir)?;
    let results = rebuild_campaigns(&loaded.entries);
    print!("{}", emit::campaign_summary_text(&results));
    Ok(())
}
