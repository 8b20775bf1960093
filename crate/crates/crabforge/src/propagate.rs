//! Time evolution under sampled controls and gate infidelity.
//!
//! The evolution is piecewise constant: `U(T) = ∏ₘ exp(−i·H(tₘ)·dt)` with
//! the latest step leftmost and tₘ the midpoint of slice m. Each slice
//! exponential is evaluated to machine precision with a scaled
//! Paterson-Stockmeyer Taylor kernel (matmul-only, no per-slice
//! decomposition); [`matrix_exp_hermitian`] provides the independent
//! eigendecomposition route and the two are cross-checked in tests.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matmul_into, ComplexMatrix};
use crate::model::{ControlValues, HamiltonianOps, TransmonModel, NUM_CHANNELS};

/// Tolerance for Hermiticity checks on exponentiation inputs.
const HERMITIAN_TOL: f64 = 1e-9;
/// Relative tolerance for grid duration vs model gate time.
const GRID_TIME_RTOL: f64 = 1e-9;
/// Truncation order of the slice-exponential Taylor polynomial.
const TAYLOR_ORDER: usize = 12;
/// 1-norm cap below which order-12 truncation error is < 1e-17.
const TAYLOR_THETA: f64 = 0.25;

/// Which reading of the trace-overlap infidelity to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityForm {
    /// I = 1 − |Tr(target†·block)| / 4.
    #[default]
    Linear,
    /// I = 1 − |Tr(target†·block)|² / 16.
    Squared,
}

impl std::str::FromStr for FidelityForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(FidelityForm::Linear),
            "squared" => Ok(FidelityForm::Squared),
            other => Err(Error::InvalidInput(format!(
                "unknown fidelity form '{other}', expected 'linear' or 'squared'"
            ))),
        }
    }
}

impl std::fmt::Display for FidelityForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FidelityForm::Linear => "linear",
            FidelityForm::Squared => "squared",
        })
    }
}

/// Discretized control signals: one row per channel, rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    num_steps: usize,
    dt: f64,
    /// Channel-major: `values[channel · num_steps + m]`, channel order
    /// δ₁, δ₂, F₁, F₂, g.
    values: Vec<f64>,
}

impl ControlGrid {
    pub fn new(num_steps: usize, dt: f64, values: Vec<f64>) -> Result<Self> {
        if num_steps < 1 {
            return Err(Error::InvalidInput(
                "grid needs at least one step".into(),
            ));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "dt must be positive and finite, got {dt}"
            )));
        }
        if values.len() != NUM_CHANNELS * num_steps {
            return Err(Error::DimensionMismatch {
                expected: NUM_CHANNELS * num_steps,
                got: values.len(),
                context: "grid values",
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "grid values",
            });
        }
        Ok(ControlGrid {
            num_steps,
            dt,
            values,
        })
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn total_time(&self) -> f64 {
        self.dt * self.num_steps as f64
    }

    /// Midpoint time of slice m.
    pub fn sample_time(&self, m: usize) -> f64 {
        (m as f64 + 0.5) * self.dt
    }

    pub fn value(&self, channel: usize, m: usize) -> f64 {
        self.values[channel * self.num_steps + m]
    }

    pub fn channel_row(&self, channel: usize) -> &[f64] {
        &self.values[channel * self.num_steps..(channel + 1) * self.num_steps]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn control_values_at(&self, m: usize) -> ControlValues {
        ControlValues {
            delta1: self.value(0, m),
            delta2: self.value(1, m),
            f1: self.value(2, m),
            f2: self.value(3, m),
            g: self.value(4, m),
        }
    }
}

/// Outcome of propagating a grid: the full unitary and its restriction
/// to the computational subspace.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub full_unitary: ComplexMatrix,
    /// 4x4 block at rows/columns |00>, |01>, |10>, |11>; generally not
    /// unitary when leakage is present.
    pub computational_block: ComplexMatrix,
    /// 1 minus the mean squared column norm of the block.
    pub leakage: f64,
}

/// Scratch buffers for the slice-exponential kernel.
#[derive(Debug, Clone)]
struct ExpScratch {
    a: Vec<Complex64>,
    a2: Vec<Complex64>,
    a3: Vec<Complex64>,
    poly: Vec<Complex64>,
    horner: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl ExpScratch {
    fn new(dim: usize) -> Self {
        let zero = vec![Complex64::ZERO; dim * dim];
        ExpScratch {
            a: zero.clone(),
            a2: zero.clone(),
            a3: zero.clone(),
            poly: zero.clone(),
            horner: zero.clone(),
            tmp: zero,
        }
    }
}

/// Reciprocal factorials 1/k! for k = 0..=TAYLOR_ORDER.
fn taylor_coefficients() -> [f64; TAYLOR_ORDER + 1] {
    let mut c = [0.0; TAYLOR_ORDER + 1];
    c[0] = 1.0;
    for k in 1..=TAYLOR_ORDER {
        c[k] = c[k - 1] / k as f64;
    }
    c
}

/// out = c_lo·I + c1·a + c2·a2 + c3·src3 where src3 is a3 or a matmul tail.
#[allow(clippy::too_many_arguments)]
fn poly_combine(
    out: &mut [Complex64],
    n: usize,
    c_lo: f64,
    c1: f64,
    a: &[Complex64],
    c2: f64,
    a2: &[Complex64],
    c3: f64,
    src3: &[Complex64],
) {
    for i in 0..n * n {
        out[i] = c1 * a[i] + c2 * a2[i] + c3 * src3[i];
    }
    for i in 0..n {
        out[i * n + i] += c_lo;
    }
}

/// out = c_lo·I + c1·a + c2·a2 + tail (tail entering with weight 1).
#[allow(clippy::too_many_arguments)]
fn poly_combine_tail(
    out: &mut [Complex64],
    n: usize,
    c_lo: f64,
    c1: f64,
    a: &[Complex64],
    c2: f64,
    a2: &[Complex64],
    tail: &[Complex64],
) {
    for i in 0..n * n {
        out[i] = c1 * a[i] + c2 * a2[i] + tail[i];
    }
    for i in 0..n {
        out[i * n + i] += c_lo;
    }
}

/// Compute exp(−i·scale·h) into `out` for Hermitian `h` (flat row-major).
///
/// Scaling and squaring keeps the scaled 1-norm at or below
/// [`TAYLOR_THETA`]; the order-12 polynomial then truncates below 1e-17,
/// so the result is unitary to rounding error.
fn exp_minus_i_scale_h(
    h: &[Complex64],
    scale: f64,
    n: usize,
    s: &mut ExpScratch,
    out: &mut [Complex64],
) {
    let c = taylor_coefficients();
    let minus_i_scale = Complex64::new(0.0, -scale);
    for (ai, &hi) in s.a.iter_mut().zip(h) {
        *ai = minus_i_scale * hi;
    }

    // 1-norm (max column abs sum) decides the squaring count.
    let mut norm1 = 0.0f64;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            col += s.a[i * n + j].norm();
        }
        norm1 = norm1.max(col);
    }
    let squarings = if norm1 > TAYLOR_THETA {
        (norm1 / TAYLOR_THETA).log2().ceil() as u32
    } else {
        0
    };
    if squarings > 0 {
        let shrink = (0.5f64).powi(squarings as i32);
        for ai in s.a.iter_mut() {
            *ai *= shrink;
        }
    }

    matmul_into(&s.a, &s.a, &mut s.a2, n);
    matmul_into(&s.a2, &s.a, &mut s.a3, n);

    // Paterson-Stockmeyer in powers of a3:
    // p = Σₖ cₖ aᵏ = q0 + a3·(q1 + a3·(q2 + a3·q3)) with cubic blocks qᵢ.
    poly_combine(&mut s.horner, n, c[9], c[10], &s.a, c[11], &s.a2, c[12], &s.a3);
    matmul_into(&s.a3, &s.horner, &mut s.tmp, n);
    poly_combine_tail(&mut s.poly, n, c[6], c[7], &s.a, c[8], &s.a2, &s.tmp);
    matmul_into(&s.a3, &s.poly, &mut s.tmp, n);
    poly_combine_tail(&mut s.horner, n, c[3], c[4], &s.a, c[5], &s.a2, &s.tmp);
    matmul_into(&s.a3, &s.horner, &mut s.tmp, n);
    poly_combine_tail(&mut s.poly, n, c[0], c[1], &s.a, c[2], &s.a2, &s.tmp);

    for _ in 0..squarings {
        matmul_into(&s.poly, &s.poly, &mut s.tmp, n);
        std::mem::swap(&mut s.poly, &mut s.tmp);
    }
    out.copy_from_slice(&s.poly);
}

/// Reusable propagation engine: owns the operator cache and all scratch
/// buffers, so repeated evaluations allocate nothing per slice.
#[derive(Debug, Clone)]
pub struct Propagator {
    model: TransmonModel,
    ops: HamiltonianOps,
    h: ComplexMatrix,
    u: Vec<Complex64>,
    step: Vec<Complex64>,
    tmp: Vec<Complex64>,
    scratch: ExpScratch,
}

impl Propagator {
    pub fn new(model: &TransmonModel) -> Result<Self> {
        let ops = HamiltonianOps::new(model)?;
        let dim = model.dim();
        Ok(Propagator {
            model: *model,
            ops,
            h: ComplexMatrix::zeros(dim),
            u: vec![Complex64::ZERO; dim * dim],
            step: vec![Complex64::ZERO; dim * dim],
            tmp: vec![Complex64::ZERO; dim * dim],
            scratch: ExpScratch::new(dim),
        })
    }

    pub fn model(&self) -> &TransmonModel {
        &self.model
    }

    /// Evolve the identity through every slice of the grid.
    pub fn propagate(&mut self, grid: &ControlGrid) -> Result<PropagationResult> {
        let span = grid.total_time();
        if (span - self.model.gate_time).abs() > GRID_TIME_RTOL * self.model.gate_time {
            return Err(Error::InvalidInput(format!(
                "grid spans {span} ns but the model gate time is {} ns",
                self.model.gate_time
            )));
        }
        self.propagate_unchecked(grid)
    }

    /// Same as [`Self::propagate`] without the duration check; used where
    /// the grid intentionally covers a sub-interval.
    fn propagate_unchecked(&mut self, grid: &ControlGrid) -> Result<PropagationResult> {
        let n = self.model.dim();
        self.u.fill(Complex64::ZERO);
        for i in 0..n {
            self.u[i * n + i] = Complex64::ONE;
        }
        for m in 0..grid.num_steps() {
            let cv = grid.control_values_at(m);
            self.ops.assemble_into(&cv, &mut self.h)?;
            exp_minus_i_scale_h(
                self.h.entries(),
                grid.dt(),
                n,
                &mut self.scratch,
                &mut self.step,
            );
            matmul_into(&self.step, &self.u, &mut self.tmp, n);
            std::mem::swap(&mut self.u, &mut self.tmp);
        }

        let full_unitary = ComplexMatrix::from_entries(n, self.u.clone())?;
        let idx = self.model.computational_indices();
        let mut block = ComplexMatrix::zeros(4);
        for (bi, &i) in idx.iter().enumerate() {
            for (bj, &j) in idx.iter().enumerate() {
                block.set(bi, bj, full_unitary.get(i, j));
            }
        }
        let mut norm_sum = 0.0;
        for j in 0..4 {
            for i in 0..4 {
                norm_sum += block.get(i, j).norm_sqr();
            }
        }
        let leakage = (1.0 - norm_sum / 4.0).clamp(0.0, 1.0);
        Ok(PropagationResult {
            full_unitary,
            computational_block: block,
            leakage,
        })
    }
}

/// One-shot propagation; hot loops should hold a [`Propagator`] instead.
pub fn propagate(model: &TransmonModel, grid: &ControlGrid) -> Result<PropagationResult> {
    Propagator::new(model)?.propagate(grid)
}

/// Propagate a sub-interval grid (duration need not match the gate time).
pub fn propagate_interval(
    model: &TransmonModel,
    grid: &ControlGrid,
) -> Result<PropagationResult> {
    Propagator::new(model)?.propagate_unchecked(grid)
}

/// Trace-overlap infidelity of the computational block against a 4x4
/// target, insensitive to global phase.
pub fn infidelity(
    result: &PropagationResult,
    target: &ComplexMatrix,
    form: FidelityForm,
) -> Result<f64> {
    block_infidelity(&result.computational_block, target, form)
}

/// Infidelity from an explicit 4x4 block.
pub fn block_infidelity(
    block: &ComplexMatrix,
    target: &ComplexMatrix,
    form: FidelityForm,
) -> Result<f64> {
    if target.dim() != 4 || block.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: target.dim().max(block.dim()),
            context: "infidelity operands",
        });
    }
    // Tr(target†·block) = Σᵢⱼ conj(target[i][j])·block[i][j].
    let mut overlap = Complex64::ZERO;
    for (t, b) in target.entries().iter().zip(block.entries()) {
        overlap += t.conj() * b;
    }
    let normalized = overlap.norm() / 4.0;
    let inf = match form {
        FidelityForm::Linear => 1.0 - normalized,
        FidelityForm::Squared => 1.0 - normalized * normalized,
    };
    Ok(inf.max(0.0))
}

/// exp(−i·scale·h) for Hermitian h via eigendecomposition.
///
/// Independent of the propagation kernel; serves as its cross-check and
/// as the one-shot exponential for callers outside the hot loop.
pub fn matrix_exp_hermitian(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::zeros(h.dim());
    crate::linalg::expi_hermitian_into(h, scale, HERMITIAN_TOL, &mut out)?;
    Ok(out)
}
