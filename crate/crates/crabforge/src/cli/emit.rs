//! CSV export. Plain comma-separated text: header row, LF line ends,
//! `.` decimal point, shortest round-trip float formatting, so a rerun
//! over the same data produces byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Channel;
use crate::optimize::CampaignResult;
use crate::propagate::ControlGrid;
use crate::robustness::{sigma_to_ev, SweepPoint, ToleranceReport};
use crate::spectrum::SpectrumTable;

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Sampled control signals, one row per time step: the midpoint time in
/// ns, then one column per channel in rad/ns.
pub fn signals_csv(grid: &ControlGrid) -> String {
    let mut out = String::from("t_ns");
    for ch in Channel::ALL {
        let _ = write!(out, ",{}", ch.label());
    }
    out.push('\n');
    for m in 0..grid.num_steps() {
        let _ = write!(out, "{}", grid.sample_time(m));
        for ch in Channel::ALL {
            let _ = write!(out, ",{}", grid.value(ch.index(), m));
        }
        out.push('\n');
    }
    out
}

pub fn write_signals_csv(path: &Path, grid: &ControlGrid) -> Result<()> {
    write_text(path, &signals_csv(grid))
}

/// One-sided amplitude spectrum, one row per frequency bin.
pub fn spectrum_csv(spectrum: &SpectrumTable) -> String {
    let mut out = String::from("freq_ghz,amplitude\n");
    for (f, a) in spectrum.frequencies.iter().zip(&spectrum.amplitudes) {
        let _ = writeln!(out, "{f},{a}");
    }
    out
}

pub fn write_spectrum_csv(path: &Path, spectrum: &SpectrumTable) -> Result<()> {
    write_text(path, &spectrum_csv(spectrum))
}

/// Disturbed-infidelity statistics per sigma.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("sigma,sigma_ev,mean_infidelity,min_infidelity,max_infidelity\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.sigma,
            sigma_to_ev(p.sigma),
            p.mean_infidelity,
            p.min_infidelity,
            p.max_infidelity
        );
    }
    out
}

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    write_text(path, &sweep_csv(points))
}

/// Every round of one tolerance search, newest sigma last.
pub fn tolerance_csv(report: &ToleranceReport) -> String {
    let mut out = String::from("step,sigma,sigma_ev,pass_count,first_fail_infidelity\n");
    for (n, step) in report.steps.iter().enumerate() {
        let fail = step
            .first_fail_infidelity
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{n},{},{},{},{fail}",
            step.sigma,
            sigma_to_ev(step.sigma),
            step.pass_count
        );
    }
    out
}

pub fn write_tolerance_csv(path: &Path, report: &ToleranceReport) -> Result<()> {
    write_text(path, &tolerance_csv(report))
}

/// One row per optimization run across all campaigns.
pub fn campaign_summary_csv(results: &[CampaignResult]) -> String {
    let mut out =
        String::from("gate,run,seed,converged,infidelity,evaluations,restarts,termination\n");
    for result in results {
        for (i, o) in result.outcomes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{i},{},{},{},{},{},{}",
                result.gate,
                o.solution.rng_seed,
                o.converged,
                o.solution.achieved_infidelity,
                o.evaluations,
                o.restarts_used,
                o.termination
            );
        }
    }
    out
}

pub fn write_campaign_summary_csv(path: &Path, results: &[CampaignResult]) -> Result<()> {
    write_text(path, &campaign_summary_csv(results))
}

/// Human-readable campaign digest: per gate, run counts and infidelity
/// statistics over the converged runs.
pub fn campaign_summary_text(results: &[CampaignResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>5} {:>10} {:>14} {:>14} {:>12}",
        "gate", "runs", "converged", "avg infid", "min infid", "avg evals"
    );
    for result in results {
        let runs = result.outcomes.len();
        let converged = runs - result.non_converged_count;
        let avg = result
            .average_infidelity
            .map(|v| format!("{v:.4e}"))
            .unwrap_or_else(|| "-".into());
        let min = result
            .minimum_infidelity
            .map(|v| format!("{v:.4e}"))
            .unwrap_or_else(|| "-".into());
        let avg_evals = result
            .outcomes
            .iter()
            .map(|o| o.evaluations)
            .sum::<u64>() as f64
            / runs.max(1) as f64;
        let _ = writeln!(
            out,
            "{:<10} {:>5} {:>10} {:>14} {:>14} {:>12.0}",
            result.gate.name(),
            runs,
            converged,
            avg,
            min,
            avg_evals
        );
    }
    out
}

pub fn write_campaign_summary_text(path: &Path, results: &[CampaignResult]) -> Result<()> {
    write_text(path, &campaign_summary_text(results))
}
