//! Randomized chopped-basis control parameterization.
//!
//! Each channel j carries a truncated trigonometric expansion
//! `Γⱼ(t) = Σₖ [aₖ cos(ωⱼᵏ t) + bₖ sin(ωⱼᵏ t)]` whose frequencies are
//! randomized around the Fourier harmonics of the gate window `[0, T]`.
//! Coefficient vectors store the cos block first, then the sin block;
//! persistence and optimizer flattening both rely on that layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::GateKind;
use crate::model::{TransmonModel, NUM_CHANNELS};
use crate::propagate::ControlGrid;
use crate::seeds;

/// How random offsets enter the basis frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomizationMode {
    /// ωⱼᵏ = k·2π/T + r with r uniform in [-0.5, 0.5) rad/ns.
    #[default]
    Qutip,
    /// ωⱼᵏ = (k + r)·2π/T with r uniform in [-0.5, 0.5), dimensionless.
    Original,
}

impl std::str::FromStr for RandomizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qutip" => Ok(RandomizationMode::Qutip),
            "original" => Ok(RandomizationMode::Original),
            other => Err(Error::InvalidInput(format!(
                "unknown randomization mode '{other}', expected 'qutip' or 'original'"
            ))),
        }
    }
}

impl std::fmt::Display for RandomizationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RandomizationMode::Qutip => "qutip",
            RandomizationMode::Original => "original",
        })
    }
}

/// A sampled basis: per-channel frequency lists over the window [0, T].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrabBasis {
    /// Component pairs per channel (cos + sin share each frequency).
    pub num_components: usize,
    /// Gate window length T in ns; the frequencies refer to this window.
    pub gate_time: f64,
    /// `frequencies[channel][k]`, rad/ns, one row per control channel.
    pub frequencies: Vec<Vec<f64>>,
    pub randomization_mode: RandomizationMode,
    /// Seed the frequencies were drawn from, kept for provenance.
    pub seed: u64,
}

impl CrabBasis {
    pub fn validate(&self) -> Result<()> {
        if self.num_components < 1 {
            return Err(Error::InvalidInput(
                "num_components must be at least 1".into(),
            ));
        }
        if !(self.gate_time.is_finite() && self.gate_time > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gate_time must be positive and finite, got {}",
                self.gate_time
            )));
        }
        if self.frequencies.len() != NUM_CHANNELS {
            return Err(Error::DimensionMismatch {
                expected: NUM_CHANNELS,
                got: self.frequencies.len(),
                context: "basis frequency rows",
            });
        }
        for row in &self.frequencies {
            if row.len() != self.num_components {
                return Err(Error::DimensionMismatch {
                    expected: self.num_components,
                    got: row.len(),
                    context: "basis frequencies per channel",
                });
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFinite {
                    context: "basis frequencies",
                });
            }
        }
        Ok(())
    }

    /// Coefficients per channel: one cos and one sin weight per component.
    pub fn coefficients_per_channel(&self) -> usize {
        2 * self.num_components
    }
}

/// Map uniform offsets in [-0.5, 0.5) to frequencies under a mode.
///
/// `offsets[channel][k]` pairs with harmonic index k+1. Split out from
/// [`sample_basis`] so the mapping is testable with pinned offsets.
pub fn frequencies_from_offsets(
    gate_time: f64,
    mode: RandomizationMode,
    offsets: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let base = 2.0 * std::f64::consts::PI / gate_time;
    offsets
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(idx, &r)| {
                    let k = (idx + 1) as f64;
                    match mode {
                        RandomizationMode::Qutip => k * base + r,
                        RandomizationMode::Original => (k + r) * base,
                    }
                })
                .collect()
        })
        .collect()
}

/// Draw a fresh randomized basis. Offsets are drawn channel-major
/// (channel 0 components first), uniformly over [-0.5, 0.5).
pub fn sample_basis(
    model: &TransmonModel,
    num_components: usize,
    mode: RandomizationMode,
    seed: u64,
) -> Result<CrabBasis> {
    model.validate()?;
    if num_components < 1 {
        return Err(Error::InvalidInput(
            "num_components must be at least 1".into(),
        ));
    }
    let mut rng = seeds::make_rng(seed);
    let offsets: Vec<Vec<f64>> = (0..NUM_CHANNELS)
        .map(|_| {
            (0..num_components)
                .map(|_| rand::Rng::random_range(&mut rng, -0.5..0.5))
                .collect()
        })
        .collect();
    let basis = CrabBasis {
        num_components,
        gate_time: model.gate_time,
        frequencies: frequencies_from_offsets(model.gate_time, mode, &offsets),
        randomization_mode: mode,
        seed,
    };
    basis.validate()?;
    Ok(basis)
}

/// Expansion coefficients, rad/ns: per channel, cos block then sin block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrabCoefficients {
    /// `channels[channel]` has length 2·num_components:
    /// `[a₁ .. a_{Nc}, b₁ .. b_{Nc}]`.
    pub channels: Vec<Vec<f64>>,
}

impl CrabCoefficients {
    pub fn zeros(num_components: usize) -> Self {
        CrabCoefficients {
            channels: vec![vec![0.0; 2 * num_components]; NUM_CHANNELS],
        }
    }

    pub fn num_components(&self) -> usize {
        self.channels.first().map_or(0, |row| row.len() / 2)
    }

    pub fn validate_for(&self, basis: &CrabBasis) -> Result<()> {
        if self.channels.len() != NUM_CHANNELS {
            return Err(Error::DimensionMismatch {
                expected: NUM_CHANNELS,
                got: self.channels.len(),
                context: "coefficient rows",
            });
        }
        for row in &self.channels {
            if row.len() != basis.coefficients_per_channel() {
                return Err(Error::DimensionMismatch {
                    expected: basis.coefficients_per_channel(),
                    got: row.len(),
                    context: "coefficients per channel",
                });
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite {
                    context: "coefficients",
                });
            }
        }
        Ok(())
    }

    /// Channel-major flattening used by the optimizer: channel 0's
    /// cos+sin block, then channel 1's, and so on.
    pub fn flatten(&self) -> Vec<f64> {
        self.channels.iter().flatten().copied().collect()
    }

    pub fn from_flat(flat: &[f64], num_components: usize) -> Result<Self> {
        let per_channel = 2 * num_components;
        if flat.len() != NUM_CHANNELS * per_channel {
            return Err(Error::DimensionMismatch {
                expected: NUM_CHANNELS * per_channel,
                got: flat.len(),
                context: "flattened coefficient vector",
            });
        }
        Ok(CrabCoefficients {
            channels: flat.chunks(per_channel).map(<[f64]>::to_vec).collect(),
        })
    }
}

/// A basis, its optimized coefficients, and how they were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrabSolution {
    pub basis: CrabBasis,
    pub coefficients: CrabCoefficients,
    pub model: TransmonModel,
    pub gate: GateKind,
    pub achieved_infidelity: f64,
    /// Seed of the optimizer run that produced this solution.
    pub rng_seed: u64,
}

impl CrabSolution {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.basis.validate()?;
        self.coefficients.validate_for(&self.basis)?;
        if !(0.0..=1.0).contains(&self.achieved_infidelity) {
            return Err(Error::OutOfDomain {
                context: "achieved_infidelity",
                value: self.achieved_infidelity,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(())
    }
}

/// (sin, cos) of one basis argument, from a single compiled body.
///
/// Every signal path takes its trig values from here. Inlining is blocked
/// so the optimizer cannot specialize one call site into a bare sin or
/// cos (or a merged sincos) that rounds differently from another site;
/// pointwise and gridded synthesis must agree bit for bit.
#[inline(never)]
fn trig_pair(arg: f64) -> (f64, f64) {
    (arg.sin(), arg.cos())
}

/// Evaluate one channel's signal at time t, rad/ns.
///
/// Accumulates the cos block in component order, then the sin block; the
/// gridded path in [`BasisTable`] reproduces this order bit for bit.
pub fn synthesize_signal(
    basis: &CrabBasis,
    coeffs: &CrabCoefficients,
    channel: usize,
    t: f64,
) -> Result<f64> {
    if channel >= NUM_CHANNELS {
        return Err(Error::InvalidInput(format!(
            "channel index {channel} out of range 0..{NUM_CHANNELS}"
        )));
    }
    if !(0.0..=basis.gate_time).contains(&t) {
        return Err(Error::OutOfDomain {
            context: "signal time",
            value: t,
            min: 0.0,
            max: basis.gate_time,
        });
    }
    coeffs.validate_for(basis)?;
    let freqs = &basis.frequencies[channel];
    let row = &coeffs.channels[channel];
    let n_c = basis.num_components;
    // Mul and add stay separate statements so no path contracts them
    // into a fused multiply-add behind the other's back.
    let mut acc = 0.0;
    for k in 0..n_c {
        let (_, c) = trig_pair(freqs[k] * t);
        let term = row[k] * c;
        acc += term;
    }
    for k in 0..n_c {
        let (s, _) = trig_pair(freqs[k] * t);
        let term = row[n_c + k] * s;
        acc += term;
    }
    Ok(acc)
}

/// Basis functions pre-evaluated on the propagation grid.
///
/// Built once per basis, then reused for every coefficient vector the
/// optimizer tries; filling a grid is a dense weighted sum with no trig.
#[derive(Debug, Clone)]
pub struct BasisTable {
    num_steps: usize,
    num_components: usize,
    dt: f64,
    /// `cos_tab[(channel·N_c + k)·num_steps + m] = cos(ωⱼᵏ tₘ)`.
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
}

impl BasisTable {
    /// Midpoint sample times tₘ = (m + ½)·T/num_steps.
    pub fn new(basis: &CrabBasis, num_steps: usize) -> Result<Self> {
        basis.validate()?;
        if num_steps < 1 {
            return Err(Error::InvalidInput(
                "num_steps must be at least 1".into(),
            ));
        }
        let n_c = basis.num_components;
        let dt = basis.gate_time / num_steps as f64;
        let mut cos_tab = vec![0.0; NUM_CHANNELS * n_c * num_steps];
        let mut sin_tab = vec![0.0; NUM_CHANNELS * n_c * num_steps];
        for ch in 0..NUM_CHANNELS {
            for k in 0..n_c {
                let w = basis.frequencies[ch][k];
                let base = (ch * n_c + k) * num_steps;
                for m in 0..num_steps {
                    let t = (m as f64 + 0.5) * dt;
                    let (s, c) = trig_pair(w * t);
                    cos_tab[base + m] = c;
                    sin_tab[base + m] = s;
                }
            }
        }
        Ok(BasisTable {
            num_steps,
            num_components: n_c,
            dt,
            cos_tab,
            sin_tab,
        })
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Write all channel signals into `values` (length 5·num_steps,
    /// channel-major rows). Matches [`synthesize_signal`] bit for bit.
    pub fn fill_into(&self, coeffs: &CrabCoefficients, values: &mut [f64]) -> Result<()> {
        if values.len() != NUM_CHANNELS * self.num_steps {
            return Err(Error::DimensionMismatch {
                expected: NUM_CHANNELS * self.num_steps,
                got: values.len(),
                context: "grid value buffer",
            });
        }
        let n_c = self.num_components;
        for row in &coeffs.channels {
            if row.len() != 2 * n_c {
                return Err(Error::DimensionMismatch {
                    expected: 2 * n_c,
                    got: row.len(),
                    context: "coefficients per channel",
                });
            }
        }
        values.fill(0.0);
        for ch in 0..NUM_CHANNELS {
            let row = &coeffs.channels[ch];
            let out = &mut values[ch * self.num_steps..(ch + 1) * self.num_steps];
            for (k, &a) in row[..n_c].iter().enumerate() {
                let tab = &self.cos_tab[(ch * n_c + k) * self.num_steps..][..self.num_steps];
                for (o, c) in out.iter_mut().zip(tab) {
                    let term = a * c;
                    *o += term;
                }
            }
            for (k, &b) in row[n_c..].iter().enumerate() {
                let tab = &self.sin_tab[(ch * n_c + k) * self.num_steps..][..self.num_steps];
                for (o, s) in out.iter_mut().zip(tab) {
                    let term = b * s;
                    *o += term;
                }
            }
        }
        Ok(())
    }

    pub fn fill_grid(&self, coeffs: &CrabCoefficients) -> Result<ControlGrid> {
        let mut values = vec![0.0; NUM_CHANNELS * self.num_steps];
        self.fill_into(coeffs, &mut values)?;
        ControlGrid::new(self.num_steps, self.dt, values)
    }
}

/// Discretize the synthesized signals on a midpoint grid over [0, T].
pub fn sample_grid(
    basis: &CrabBasis,
    coeffs: &CrabCoefficients,
    num_steps: usize,
) -> Result<ControlGrid> {
    if num_steps < 2 {
        return Err(Error::InvalidInput(
            "num_steps must be at least 2".into(),
        ));
    }
    coeffs.validate_for(basis)?;
    BasisTable::new(basis, num_steps)?.fill_grid(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn test_model() -> TransmonModel {
        TransmonModel::default()
    }

    fn random_coeffs(num_components: usize, seed: u64) -> CrabCoefficients {
        let mut rng = seeds::make_rng(seed);
        CrabCoefficients {
            channels: (0..NUM_CHANNELS)
                .map(|_| {
                    (0..2 * num_components)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn zero_offsets_give_harmonics() {
        let offsets = vec![vec![0.0; 4]; NUM_CHANNELS];
        for mode in [RandomizationMode::Qutip, RandomizationMode::Original] {
            let freqs = frequencies_from_offsets(40.0, mode, &offsets);
            for row in &freqs {
                for (idx, &w) in row.iter().enumerate() {
                    let expected = (idx + 1) as f64 * 2.0 * std::f64::consts::PI / 40.0;
                    assert!((w - expected).abs() < 1e-15, "mode {mode:?}");
                }
            }
        }
        // first harmonic of a 40 ns window
        let freqs = frequencies_from_offsets(40.0, RandomizationMode::Qutip, &offsets);
        assert!((freqs[0][0] - 0.157_079_632_679_489_66).abs() < 1e-15);
    }

    #[test]
    fn offset_ranges_respected() {
        let model = test_model();
        let base = 2.0 * std::f64::consts::PI / model.gate_time;
        for seed in 0..20 {
            let q = sample_basis(&model, 10, RandomizationMode::Qutip, seed).unwrap();
            for row in &q.frequencies {
                for (idx, &w) in row.iter().enumerate() {
                    let k = (idx + 1) as f64;
                    assert!(w >= k * base - 0.5 && w < k * base + 0.5);
                }
            }
            let o = sample_basis(&model, 10, RandomizationMode::Original, seed).unwrap();
            for row in &o.frequencies {
                for (idx, &w) in row.iter().enumerate() {
                    let k = (idx + 1) as f64;
                    assert!(w >= (k - 0.5) * base && w < (k + 0.5) * base);
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = test_model();
        let a = sample_basis(&model, 10, RandomizationMode::Qutip, 99).unwrap();
        let b = sample_basis(&model, 10, RandomizationMode::Qutip, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_basis(&model, 10, RandomizationMode::Qutip, 100).unwrap();
        assert_ne!(a.frequencies, c.frequencies);
    }

    #[test]
    fn synthesize_zero_coefficients() {
        let model = test_model();
        let basis = sample_basis(&model, 10, RandomizationMode::Qutip, 1).unwrap();
        let coeffs = CrabCoefficients::zeros(10);
        for ch in 0..NUM_CHANNELS {
            for t in [0.0, 13.7, 40.0] {
                assert_eq!(synthesize_signal(&basis, &coeffs, ch, t).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn synthesize_single_cos_at_zero() {
        let model = test_model();
        let basis = sample_basis(&model, 10, RandomizationMode::Qutip, 1).unwrap();
        let mut coeffs = CrabCoefficients::zeros(10);
        coeffs.channels[2][0] = 1.0;
        assert!((synthesize_signal(&basis, &coeffs, 2, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn synthesize_matches_scalar_oracle() {
        // a1 = 0.3 on cos, b2 = -0.5 on sin, pinned frequencies.
        let basis = CrabBasis {
            num_components: 2,
            gate_time: 40.0,
            frequencies: vec![vec![0.2, 0.5]; NUM_CHANNELS],
            randomization_mode: RandomizationMode::Qutip,
            seed: 0,
        };
        basis.validate().unwrap();
        let mut coeffs = CrabCoefficients::zeros(2);
        coeffs.channels[0][0] = 0.3;
        coeffs.channels[0][3] = -0.5;
        let got = synthesize_signal(&basis, &coeffs, 0, 1.0).unwrap();
        let expected = 0.3 * 0.2f64.cos() - 0.5 * 0.5f64.sin();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn synthesize_rejects_out_of_domain() {
        let model = test_model();
        let basis = sample_basis(&model, 3, RandomizationMode::Qutip, 1).unwrap();
        let coeffs = CrabCoefficients::zeros(3);
        assert!(synthesize_signal(&basis, &coeffs, 0, -0.1).is_err());
        assert!(synthesize_signal(&basis, &coeffs, 0, 40.1).is_err());
        assert!(synthesize_signal(&basis, &coeffs, 5, 1.0).is_err());
    }

    #[test]
    fn synthesis_is_linear_in_coefficients() {
        let model = test_model();
        let basis = sample_basis(&model, 6, RandomizationMode::Qutip, 5).unwrap();
        let c1 = random_coeffs(6, 10);
        let c2 = random_coeffs(6, 11);
        let (alpha, beta) = (0.7, -1.3);
        let combined = CrabCoefficients {
            channels: c1
                .channels
                .iter()
                .zip(&c2.channels)
                .map(|(r1, r2)| {
                    r1.iter()
                        .zip(r2)
                        .map(|(&a, &b)| alpha * a + beta * b)
                        .collect()
                })
                .collect(),
        };
        for ch in 0..NUM_CHANNELS {
            for t in [0.0, 7.3, 21.9, 40.0] {
                let lhs = synthesize_signal(&basis, &combined, ch, t).unwrap();
                let rhs = alpha * synthesize_signal(&basis, &c1, ch, t).unwrap()
                    + beta * synthesize_signal(&basis, &c2, ch, t).unwrap();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_matches_pointwise_synthesis_exactly() {
        let model = test_model();
        let basis = sample_basis(&model, 10, RandomizationMode::Qutip, 17).unwrap();
        let coeffs = random_coeffs(10, 18);
        let num_steps = 64;
        let grid = sample_grid(&basis, &coeffs, num_steps).unwrap();
        let dt = model.gate_time / num_steps as f64;
        for ch in 0..NUM_CHANNELS {
            for m in 0..num_steps {
                let t = (m as f64 + 0.5) * dt;
                let direct = synthesize_signal(&basis, &coeffs, ch, t).unwrap();
                assert_eq!(grid.value(ch, m), direct, "channel {ch} step {m}");
            }
        }
    }

    #[test]
    fn grid_midpoint_times() {
        let model = test_model();
        let basis = sample_basis(&model, 2, RandomizationMode::Qutip, 3).unwrap();
        let coeffs = CrabCoefficients::zeros(2);
        let grid = sample_grid(&basis, &coeffs, 2).unwrap();
        assert!((grid.sample_time(0) - 10.0).abs() < 1e-12);
        assert!((grid.sample_time(1) - 30.0).abs() < 1e-12);
        assert!(grid.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flatten_round_trips() {
        let coeffs = random_coeffs(10, 77);
        let flat = coeffs.flatten();
        assert_eq!(flat.len(), NUM_CHANNELS * 20);
        let back = CrabCoefficients::from_flat(&flat, 10).unwrap();
        assert_eq!(coeffs, back);
        // channel-major layout: channel 0 block leads
        assert_eq!(flat[0], coeffs.channels[0][0]);
        assert_eq!(flat[20], coeffs.channels[1][0]);
        assert!(CrabCoefficients::from_flat(&flat[1..], 10).is_err());
    }

    #[test]
    fn harmonic_basis_functions_are_orthogonal() {
        // Zero offsets put every component on an exact Fourier harmonic;
        // cos and sin rows are then pairwise orthogonal over [0, T].
        let n_c = 6;
        let gate_time = 40.0;
        let offsets = vec![vec![0.0; n_c]; NUM_CHANNELS];
        let freqs = frequencies_from_offsets(gate_time, RandomizationMode::Qutip, &offsets);
        let quad_points = 10_000;
        let dt = gate_time / quad_points as f64;
        let eval = |func: usize, t: f64| -> f64 {
            // functions 0..n_c are cos rows, n_c..2n_c sin rows
            if func < n_c {
                (freqs[0][func] * t).cos()
            } else {
                (freqs[0][func - n_c] * t).sin()
            }
        };
        let norm = gate_time / 2.0;
        for i in 0..2 * n_c {
            for j in 0..2 * n_c {
                let mut inner = 0.0;
                for m in 0..quad_points {
                    let t = (m as f64 + 0.5) * dt;
                    inner += eval(i, t) * eval(j, t) * dt;
                }
                if i == j {
                    assert!((inner - norm).abs() / norm < 1e-6, "diag {i}");
                } else {
                    assert!(inner.abs() / norm < 1e-6, "off-diag {i},{j}");
                }
            }
        }
    }

    #[test]
    fn validation_rejects_malformed_inputs() {
        let model = test_model();
        assert!(sample_basis(&model, 0, RandomizationMode::Qutip, 1).is_err());
        let basis = sample_basis(&model, 4, RandomizationMode::Qutip, 1).unwrap();
        let wrong = CrabCoefficients::zeros(5);
        assert!(wrong.validate_for(&basis).is_err());
        let mut nan = CrabCoefficients::zeros(4);
        nan.channels[3][2] = f64::NAN;
        assert!(nan.validate_for(&basis).is_err());
        assert!(sample_grid(&basis, &CrabCoefficients::zeros(4), 1).is_err());
    }
}
