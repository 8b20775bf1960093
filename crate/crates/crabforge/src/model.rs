//! Physical model of the controlled two-transmon system.
//!
//! Each transmon is truncated to `levels_per_mode` bosonic levels; the pair
//! lives on the tensor-product space with mode 1 as the left (slow) factor,
//! so basis state `|n1 n2>` sits at index `levels_per_mode * n1 + n2`.
//!
//! All Hamiltonian coefficients are angular frequencies in rad/ns and time
//! is in ns. Quoted GHz control values are fed in numerically unchanged by
//! default; [`FrequencyConvention::TwoPi`] multiplies them by 2π instead.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Energy (eV) of one quantum at 1 GHz; used only at reporting boundaries.
pub const EV_PER_GHZ: f64 = 4.1357e-6;

/// Number of control channels: two detunings, two drive amplitudes, one
/// exchange coupling.
pub const NUM_CHANNELS: usize = 5;

/// Control channel identifiers, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Delta1,
    Delta2,
    F1,
    F2,
    G,
}

impl Channel {
    pub const ALL: [Channel; NUM_CHANNELS] = [
        Channel::Delta1,
        Channel::Delta2,
        Channel::F1,
        Channel::F2,
        Channel::G,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Channel::Delta1 => "delta1",
            Channel::Delta2 => "delta2",
            Channel::F1 => "f1",
            Channel::F2 => "f2",
            Channel::G => "g",
        }
    }
}

/// How quoted GHz figures map onto the internal rad/ns coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConvention {
    /// Quoted value used as-is (1 GHz -> 1 rad/ns).
    #[default]
    Direct,
    /// Quoted value treated as an ordinary frequency (1 GHz -> 2π rad/ns).
    TwoPi,
}

impl FrequencyConvention {
    pub fn to_angular(self, f_ghz: f64) -> f64 {
        match self {
            FrequencyConvention::Direct => f_ghz,
            FrequencyConvention::TwoPi => 2.0 * std::f64::consts::PI * f_ghz,
        }
    }
}

/// Static parameters of the simulated device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmonModel {
    /// Bosonic levels kept per mode (>= 2; 3 keeps one leakage level).
    pub levels_per_mode: usize,
    /// Anharmonicity η in rad/ns; enters as (η/2) n(n-1) per mode.
    pub anharmonicity: f64,
    /// Gate duration T in ns.
    pub gate_time: f64,
}

impl Default for TransmonModel {
    fn default() -> Self {
        TransmonModel {
            levels_per_mode: 3,
            anharmonicity: 0.2,
            gate_time: 40.0,
        }
    }
}

impl TransmonModel {
    pub fn new(levels_per_mode: usize, anharmonicity: f64, gate_time: f64) -> Result<Self> {
        let model = TransmonModel {
            levels_per_mode,
            anharmonicity,
            gate_time,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels_per_mode < 2 {
            return Err(Error::InvalidDimension {
                dim: self.levels_per_mode,
                reason: "levels_per_mode must be at least 2",
            });
        }
        if !self.gate_time.is_finite() || self.gate_time <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "gate_time must be positive and finite, got {}",
                self.gate_time
            )));
        }
        if !self.anharmonicity.is_finite() {
            return Err(Error::NonFinite {
                context: "anharmonicity",
            });
        }
        Ok(())
    }

    /// Total Hilbert-space dimension (levels_per_mode squared).
    pub fn dim(&self) -> usize {
        self.levels_per_mode * self.levels_per_mode
    }

    pub fn num_channels(&self) -> usize {
        NUM_CHANNELS
    }

    /// Full-space indices of the computational states |00>, |01>, |10>, |11>.
    pub fn computational_indices(&self) -> [usize; 4] {
        let d = self.levels_per_mode;
        [0, 1, d, d + 1]
    }
}

/// Instantaneous values of the five control channels, rad/ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlValues {
    pub delta1: f64,
    pub delta2: f64,
    pub f1: f64,
    pub f2: f64,
    pub g: f64,
}

impl ControlValues {
    pub const ZERO: ControlValues = ControlValues {
        delta1: 0.0,
        delta2: 0.0,
        f1: 0.0,
        f2: 0.0,
        g: 0.0,
    };

    pub fn as_array(&self) -> [f64; NUM_CHANNELS] {
        [self.delta1, self.delta2, self.f1, self.f2, self.g]
    }

    pub fn from_array(values: [f64; NUM_CHANNELS]) -> Self {
        ControlValues {
            delta1: values[0],
            delta2: values[1],
            f1: values[2],
            f2: values[3],
            g: values[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Lowering operator on a d-level mode: entries A[n-1, n] = sqrt(n).
pub fn annihilation_op(d: usize) -> Result<ComplexMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimension {
            dim: d,
            reason: "mode operators need at least 2 levels",
        });
    }
    let mut a = ComplexMatrix::zeros(d);
    for n in 1..d {
        a.set(n - 1, n, Complex64::new((n as f64).sqrt(), 0.0));
    }
    Ok(a)
}

/// Number operator diag(0, 1, ..., d-1).
pub fn number_op(d: usize) -> Result<ComplexMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimension {
            dim: d,
            reason: "mode operators need at least 2 levels",
        });
    }
    let mut n_op = ComplexMatrix::zeros(d);
    for n in 0..d {
        n_op.set(n, n, Complex64::new(n as f64, 0.0));
    }
    Ok(n_op)
}

/// Constant operator terms of the Hamiltonian, embedded in the full space
/// and built once per model. Per-time-step assembly is then a linear
/// combination of these with the instantaneous control values.
#[derive(Debug, Clone)]
pub struct HamiltonianOps {
    dim: usize,
    /// (η/2) [n1(n1-1) + n2(n2-1)], control-independent.
    drift: ComplexMatrix,
    /// Number operator of mode 1, scaled by δ1(t).
    number1: ComplexMatrix,
    /// Number operator of mode 2, scaled by δ2(t).
    number2: ComplexMatrix,
    /// i(a1 - a1†), scaled by F1(t).
    drive1: ComplexMatrix,
    /// i(a2 - a2†), scaled by F2(t).
    drive2: ComplexMatrix,
    /// a1 a2† + a2 a1†, scaled by g(t).
    exchange: ComplexMatrix,
}

impl HamiltonianOps {
    pub fn new(model: &TransmonModel) -> Result<Self> {
        model.validate()?;
        let d = model.levels_per_mode;
        let a = annihilation_op(d)?;
        let n_op = number_op(d)?;
        let id = ComplexMatrix::identity(d);

        // Mode 1 is the left tensor factor.
        let number1 = n_op.kron(&id);
        let number2 = id.kron(&n_op);

        // (η/2) n(n-1) summed over both modes.
        let mut anh_mode = ComplexMatrix::zeros(d);
        for n in 0..d {
            let val = 0.5 * model.anharmonicity * (n as f64) * (n as f64 - 1.0);
            anh_mode.set(n, n, Complex64::new(val, 0.0));
        }
        let drift = anh_mode.kron(&id).add(&id.kron(&anh_mode));

        // i(a - a†) is Hermitian for a real drive amplitude.
        let i = Complex64::new(0.0, 1.0);
        let drive_mode = a.scale(i).add(&a.adjoint().scale(-i));
        let drive1 = drive_mode.kron(&id);
        let drive2 = id.kron(&drive_mode);

        let a1 = a.kron(&id);
        let a2 = id.kron(&a);
        let exchange = a1.matmul(&a2.adjoint()).add(&a2.matmul(&a1.adjoint()));

        Ok(HamiltonianOps {
            dim: model.dim(),
            drift,
            number1,
            number2,
            drive1,
            drive2,
            exchange,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Assemble H(t) for the given control values into `out`.
    pub fn assemble_into(&self, cv: &ControlValues, out: &mut ComplexMatrix) -> Result<()> {
        if !cv.is_finite() {
            return Err(Error::NonFinite {
                context: "control values",
            });
        }
        debug_assert_eq!(out.dim(), self.dim);
        out.clone_from(&self.drift);
        out.add_scaled(cv.delta1, &self.number1);
        out.add_scaled(cv.delta2, &self.number2);
        out.add_scaled(cv.f1, &self.drive1);
        out.add_scaled(cv.f2, &self.drive2);
        out.add_scaled(cv.g, &self.exchange);
        Ok(())
    }

    pub fn assemble(&self, cv: &ControlValues) -> Result<ComplexMatrix> {
        let mut out = ComplexMatrix::zeros(self.dim);
        self.assemble_into(cv, &mut out)?;
        Ok(out)
    }
}

/// Assemble the full Hamiltonian at one point in control space.
///
/// Builds the operator set on each call; hot loops should construct
/// [`HamiltonianOps`] once and reuse it.
pub fn assemble_hamiltonian(model: &TransmonModel, cv: &ControlValues) -> Result<ComplexMatrix> {
    HamiltonianOps::new(model)?.assemble(cv)
}
