//! Direct-search minimization of gate infidelity over basis coefficients.
//!
//! The optimizer is a standard Nelder-Mead simplex (reflection 1,
//! expansion 2, contraction 1/2, shrink 1/2) stopping at an infidelity
//! threshold, at simplex value collapse, or on an evaluation budget. A
//! gate run draws a fresh randomized basis, and re-randomizes it on
//! non-convergence up to a restart cap; the evaluation budget is shared
//! across the restarts of one run.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crab::{
    sample_basis, BasisTable, CrabBasis, CrabCoefficients, CrabSolution, RandomizationMode,
};
use crate::error::{Error, Result};
use crate::gates::GateKind;
use crate::linalg::ComplexMatrix;
use crate::model::{TransmonModel, NUM_CHANNELS};
use crate::propagate::{infidelity, ControlGrid, FidelityForm, Propagator};
use crate::seeds::{self, derive_seed, tags};

const NM_REFLECTION: f64 = 1.0;
const NM_EXPANSION: f64 = 2.0;
const NM_CONTRACTION: f64 = 0.5;
const NM_SHRINK: f64 = 0.5;

/// Default simplex value-spread below which the search is considered
/// collapsed.
pub const DEFAULT_SPREAD_TOLERANCE: f64 = 1e-6;

/// Signal synthesis choices shared by the cost function and every later
/// re-evaluation of a stored solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Basis component pairs per channel.
    pub num_components: usize,
    pub randomization_mode: RandomizationMode,
    /// Propagation grid resolution over [0, T].
    pub num_steps: usize,
    pub fidelity_form: FidelityForm,
    /// Optional symmetric signal bound, rad/ns; applied inside the cost
    /// evaluation only.
    pub clamp: Option<f64>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            num_components: 10,
            randomization_mode: RandomizationMode::Qutip,
            num_steps: 1000,
            fidelity_form: FidelityForm::Linear,
            clamp: None,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_components < 1 {
            return Err(Error::Config("num_components must be at least 1".into()));
        }
        if self.num_steps < 2 {
            return Err(Error::Config("num_steps must be at least 2".into()));
        }
        if let Some(c) = self.clamp {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!(
                    "clamp must be positive and finite, got {c}"
                )));
            }
        }
        Ok(())
    }

    /// Length of the flattened coefficient vector the optimizer works in.
    pub fn parameter_count(&self) -> usize {
        NUM_CHANNELS * 2 * self.num_components
    }
}

/// Termination and restart policy for one gate optimization run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Infidelity below which a run stops and counts as converged.
    pub target_infidelity: f64,
    /// Cost evaluation budget for a whole run, shared across restarts.
    pub max_cost_evaluations: u64,
    /// Initial coefficients are uniform in ±this, rad/ns.
    pub initial_coefficient_scale: f64,
    /// Relative displacement building the initial simplex.
    pub initial_simplex_spread: f64,
    /// Total basis draws attempted before giving up.
    pub restart_limit: usize,
    /// Keep minimizing past the threshold until spread or budget stops
    /// the search.
    pub polish: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            target_infidelity: 1e-2,
            max_cost_evaluations: 200_000,
            initial_coefficient_scale: 0.05,
            initial_simplex_spread: 0.1,
            restart_limit: 5,
            polish: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_infidelity > 0.0 && self.target_infidelity < 1.0) {
            return Err(Error::Config(format!(
                "target_infidelity must lie in (0, 1), got {}",
                self.target_infidelity
            )));
        }
        if self.max_cost_evaluations < 1 {
            return Err(Error::Config("max_cost_evaluations must be at least 1".into()));
        }
        if self.restart_limit < 1 {
            return Err(Error::Config("restart_limit must be at least 1".into()));
        }
        if !(self.initial_coefficient_scale.is_finite() && self.initial_coefficient_scale > 0.0) {
            return Err(Error::Config("initial_coefficient_scale must be positive".into()));
        }
        if !(self.initial_simplex_spread.is_finite() && self.initial_simplex_spread > 0.0) {
            return Err(Error::Config("initial_simplex_spread must be positive".into()));
        }
        Ok(())
    }
}

/// Reusable cost evaluator for one (model, basis, target) triple.
///
/// Holds the precomputed basis table and the propagation scratch, so each
/// evaluation is a dense fill plus the slice product. Every infidelity
/// this crate reports for a solution flows through here, keeping stored
/// and re-evaluated values bit-identical.
pub struct CostContext {
    table: BasisTable,
    propagator: Propagator,
    target: ComplexMatrix,
    num_components: usize,
    fidelity_form: FidelityForm,
    clamp: Option<f64>,
    values: Vec<f64>,
    evaluations: u64,
}

impl CostContext {
    pub fn new(
        model: &TransmonModel,
        basis: &CrabBasis,
        target: &ComplexMatrix,
        synth: &SynthesisConfig,
    ) -> Result<Self> {
        synth.validate()?;
        basis.validate()?;
        if (basis.gate_time - model.gate_time).abs() > 1e-12 * model.gate_time {
            return Err(Error::InvalidInput(format!(
                "basis gate time {} ns does not match model gate time {} ns",
                basis.gate_time, model.gate_time
            )));
        }
        if target.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: target.dim(),
                context: "cost target",
            });
        }
        let table = BasisTable::new(basis, synth.num_steps)?;
        let propagator = Propagator::new(model)?;
        Ok(CostContext {
            values: vec![0.0; NUM_CHANNELS * table.num_steps()],
            num_components: basis.num_components,
            table,
            propagator,
            target: target.clone(),
            fidelity_form: synth.fidelity_form,
            clamp: synth.clamp,
            evaluations: 0,
        })
    }

    /// Infidelity of the flattened coefficient vector (channel-major,
    /// cos block first).
    pub fn evaluate(&mut self, flat: &[f64]) -> Result<f64> {
        let coeffs = CrabCoefficients::from_flat(flat, self.num_components)?;
        self.evaluate_coefficients(&coeffs)
    }

    pub fn evaluate_coefficients(&mut self, coeffs: &CrabCoefficients) -> Result<f64> {
        self.table.fill_into(coeffs, &mut self.values)?;
        if let Some(bound) = self.clamp {
            for v in &mut self.values {
                *v = v.clamp(-bound, bound);
            }
        }
        let grid = ControlGrid::new(self.table.num_steps(), self.table.dt(), self.values.clone())?;
        let result = self.propagator.propagate(&grid)?;
        self.evaluations += 1;
        infidelity(&result, &self.target, self.fidelity_form)
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }
}

/// One-shot cost: unflatten, synthesize the default grid, propagate, and
/// score against the target. Hot loops should hold a [`CostContext`].
pub fn cost(
    model: &TransmonModel,
    basis: &CrabBasis,
    coefficient_vector: &[f64],
    target: &ComplexMatrix,
) -> Result<f64> {
    let synth = SynthesisConfig {
        num_components: basis.num_components,
        randomization_mode: basis.randomization_mode,
        ..SynthesisConfig::default()
    };
    CostContext::new(model, basis, target, &synth)?.evaluate(coefficient_vector)
}

/// Re-evaluate a stored solution through the same path the optimizer
/// used; the result matches its achieved infidelity exactly when the
/// synthesis settings match.
pub fn evaluate_solution(solution: &CrabSolution, synth: &SynthesisConfig) -> Result<f64> {
    solution.validate()?;
    let target = solution.gate.target_unitary();
    let mut ctx = CostContext::new(&solution.model, &solution.basis, &target, synth)?;
    ctx.evaluate_coefficients(&solution.coefficients)
}

/// Why a Nelder-Mead search stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    /// Best value fell below the target.
    Threshold,
    /// Simplex value spread collapsed.
    Spread,
    /// Evaluation budget ran out.
    Budget,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Threshold => "threshold",
            Termination::Spread => "spread",
            Termination::Budget => "budget",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Stopping rules for one simplex search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop as soon as any evaluation falls below this value.
    pub target_value: f64,
    /// Stop when the simplex value spread falls below this.
    pub spread_tolerance: f64,
    pub max_evaluations: u64,
}

#[derive(Debug, Clone)]
pub struct NelderMeadOutcome {
    pub best_vector: Vec<f64>,
    pub best_value: f64,
    pub evaluations: u64,
    pub termination: Termination,
    /// Best value after each completed iteration; non-increasing.
    pub best_trace: Vec<f64>,
}

struct EvalTracker<F> {
    objective: F,
    evaluations: u64,
    max_evaluations: u64,
    best_value: f64,
    best_vector: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> Result<f64>> EvalTracker<F> {
    /// Ok(None) signals budget exhaustion; values must be finite.
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>> {
        if self.evaluations >= self.max_evaluations {
            return Ok(None);
        }
        let value = (self.objective)(x)?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: "objective value",
            });
        }
        self.evaluations += 1;
        if value < self.best_value {
            self.best_value = value;
            self.best_vector.clear();
            self.best_vector.extend_from_slice(x);
        }
        Ok(Some(value))
    }
}

/// Minimize `objective` from `initial`, displacing each coordinate by
/// `displacements[i]` to build the starting simplex.
pub fn nelder_mead<F>(
    objective: F,
    initial: &[f64],
    displacements: &[f64],
    options: &NelderMeadOptions,
) -> Result<NelderMeadOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = initial.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot optimize zero parameters".into()));
    }
    if displacements.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: displacements.len(),
            context: "simplex displacements",
        });
    }
    if displacements.iter().any(|d| !d.is_finite() || *d == 0.0) {
        return Err(Error::InvalidInput(
            "simplex displacements must be finite and nonzero".into(),
        ));
    }
    if options.max_evaluations < 1 {
        return Err(Error::InvalidInput("evaluation budget must be at least 1".into()));
    }

    let mut tracker = EvalTracker {
        objective,
        evaluations: 0,
        max_evaluations: options.max_evaluations,
        best_value: f64::INFINITY,
        best_vector: initial.to_vec(),
    };
    let mut trace = Vec::new();

    macro_rules! finish {
        ($termination:expr) => {
            return Ok(NelderMeadOutcome {
                best_vector: tracker.best_vector,
                best_value: tracker.best_value,
                evaluations: tracker.evaluations,
                termination: $termination,
                best_trace: trace,
            })
        };
    }
    // Evaluate one point or finish on budget/threshold.
    macro_rules! eval_point {
        ($x:expr) => {
            match tracker.eval($x)? {
                Some(v) => {
                    if tracker.best_value < options.target_value {
                        finish!(Termination::Threshold);
                    }
                    v
                }
                None => finish!(Termination::Budget),
            }
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut x = initial.to_vec();
        if i > 0 {
            x[i - 1] += displacements[i - 1];
        }
        let v = eval_point!(&x);
        simplex.push((x, v));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(simplex[0].1);
        if simplex[n].1 - simplex[0].1 < options.spread_tolerance {
            finish!(Termination::Spread);
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }

        let (best_val, second_worst_val, worst_val) = (simplex[0].1, simplex[n - 1].1, simplex[n].1);
        let worst = std::mem::take(&mut simplex[n].0);

        let reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst)
            .map(|(c, w)| c + NM_REFLECTION * (c - w))
            .collect();
        let f_reflected = eval_point!(&reflected);

        if f_reflected < best_val {
            let expanded: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + NM_EXPANSION * (c - w))
                .collect();
            let f_expanded = eval_point!(&expanded);
            simplex[n] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
        } else if f_reflected < second_worst_val {
            simplex[n] = (reflected, f_reflected);
        } else {
            let accepted = if f_reflected < worst_val {
                // outside contraction, toward the reflected point
                let contracted: Vec<f64> = centroid
                    .iter()
                    .zip(&reflected)
                    .map(|(c, r)| c + NM_CONTRACTION * (r - c))
                    .collect();
                let f_contracted = eval_point!(&contracted);
                (f_contracted <= f_reflected).then_some((contracted, f_contracted))
            } else {
                // inside contraction, toward the worst point
                let contracted: Vec<f64> = centroid
                    .iter()
                    .zip(&worst)
                    .map(|(c, w)| c + NM_CONTRACTION * (w - c))
                    .collect();
                let f_contracted = eval_point!(&contracted);
                (f_contracted < worst_val).then_some((contracted, f_contracted))
            };
            match accepted {
                Some(point) => simplex[n] = point,
                None => {
                    // shrink everything toward the best vertex
                    simplex[n].0 = worst;
                    let anchor = simplex[0].0.clone();
                    for (x, v) in simplex.iter_mut().skip(1) {
                        for (xi, ai) in x.iter_mut().zip(&anchor) {
                            *xi = ai + NM_SHRINK * (*xi - ai);
                        }
                        *v = eval_point!(x);
                    }
                }
            }
        }
    }
}

/// Result of one gate optimization run, converged or not.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub solution: CrabSolution,
    pub converged: bool,
    /// Extra basis draws beyond the first attempt.
    pub restarts_used: usize,
    pub evaluations: u64,
    pub termination: Termination,
}

/// Optimize toward an explicit 4x4 target labeled as `gate`.
fn optimize_target(
    model: &TransmonModel,
    gate: GateKind,
    target: &ComplexMatrix,
    synth: &SynthesisConfig,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<OptimizeOutcome> {
    model.validate()?;
    synth.validate()?;
    opt.validate()?;

    let dim = synth.parameter_count();
    let mut remaining = opt.max_cost_evaluations;
    let mut total_evaluations = 0u64;
    let mut attempts = 0usize;
    let mut best: Option<(f64, CrabBasis, Vec<f64>, Termination)> = None;

    for attempt in 0..opt.restart_limit {
        // a fresh simplex needs dim+1 evaluations to even form
        if remaining < dim as u64 + 2 {
            break;
        }
        let basis_seed = derive_seed(seed, &[tags::BASIS, attempt as u64]);
        let basis = sample_basis(model, synth.num_components, synth.randomization_mode, basis_seed)?;
        let mut ctx = CostContext::new(model, &basis, target, synth)?;

        let mut rng = seeds::make_rng(derive_seed(seed, &[tags::SIMPLEX, attempt as u64]));
        let initial: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(-opt.initial_coefficient_scale..opt.initial_coefficient_scale))
            .collect();
        let displacements: Vec<f64> = initial
            .iter()
            .map(|x| opt.initial_simplex_spread * x.abs().max(opt.initial_coefficient_scale))
            .collect();
        let options = NelderMeadOptions {
            target_value: if opt.polish { -1.0 } else { opt.target_infidelity },
            spread_tolerance: DEFAULT_SPREAD_TOLERANCE,
            max_evaluations: remaining,
        };
        let run = nelder_mead(|v| ctx.evaluate(v), &initial, &displacements, &options)?;

        total_evaluations += run.evaluations;
        remaining -= run.evaluations;
        attempts = attempt + 1;
        if best.as_ref().is_none_or(|(v, ..)| run.best_value < *v) {
            best = Some((run.best_value, basis, run.best_vector, run.termination));
        }
        if best.as_ref().is_some_and(|(v, ..)| *v < opt.target_infidelity) {
            break;
        }
    }

    let (value, basis, vector, termination) = best.ok_or_else(|| {
        Error::InvalidInput(format!(
            "evaluation budget {} cannot cover one simplex of {} parameters",
            opt.max_cost_evaluations, dim
        ))
    })?;
    let solution = CrabSolution {
        coefficients: CrabCoefficients::from_flat(&vector, synth.num_components)?,
        basis,
        model: *model,
        gate,
        achieved_infidelity: value,
        rng_seed: seed,
    };
    Ok(OptimizeOutcome {
        converged: value < opt.target_infidelity,
        restarts_used: attempts.saturating_sub(1),
        evaluations: total_evaluations,
        termination,
        solution,
    })
}

/// Synthesize one gate: draw a basis, minimize the infidelity, restart
/// with fresh randomization if the search stalls above the threshold.
pub fn optimize_gate(
    model: &TransmonModel,
    gate: GateKind,
    synth: &SynthesisConfig,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<OptimizeOutcome> {
    optimize_target(model, gate, &gate.target_unitary(), synth, opt, seed)
}

/// Aggregate statistics over a campaign of independent runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignResult {
    pub gate: GateKind,
    /// One outcome per run, in run order.
    pub outcomes: Vec<OptimizeOutcome>,
    /// Mean infidelity over converged runs; absent when none converged.
    pub average_infidelity: Option<f64>,
    /// Best infidelity over converged runs; absent when none converged.
    pub minimum_infidelity: Option<f64>,
    pub non_converged_count: usize,
}

impl CampaignResult {
    pub fn converged_solutions(&self) -> impl Iterator<Item = &CrabSolution> {
        self.outcomes
            .iter()
            .filter(|o| o.converged)
            .map(|o| &o.solution)
    }
}

/// Run `num_solutions` independent optimizations of one gate. Run i uses
/// seed base_seed + i; results are collected in run order regardless of
/// worker scheduling.
pub fn run_campaign(
    model: &TransmonModel,
    gate: GateKind,
    synth: &SynthesisConfig,
    opt: &OptimizerConfig,
    num_solutions: usize,
    base_seed: u64,
) -> Result<CampaignResult> {
    if num_solutions < 1 {
        return Err(Error::InvalidInput("campaign needs at least one run".into()));
    }
    let mut indexed: Vec<(usize, OptimizeOutcome)> = (0..num_solutions)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            optimize_gate(model, gate, synth, opt, seed).map(|o| (i, o))
        })
        .collect::<Result<_>>()?;
    indexed.sort_by_key(|(i, _)| *i);
    let outcomes: Vec<OptimizeOutcome> = indexed.into_iter().map(|(_, o)| o).collect();

    let converged: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.converged)
        .map(|o| o.solution.achieved_infidelity)
        .collect();
    let average_infidelity = if converged.is_empty() {
        None
    } else {
        Some(converged.iter().sum::<f64>() / converged.len() as f64)
    };
    let minimum_infidelity = converged.iter().copied().reduce(f64::min);
    Ok(CampaignResult {
        gate,
        non_converged_count: outcomes.len() - converged.len(),
        outcomes,
        average_infidelity,
        minimum_infidelity,
    })
}
