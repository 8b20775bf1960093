//! Target gates on the two-qubit computational subspace.
//!
//! Targets are 4x4 unitaries in the ordered basis |00>, |01>, |10>, |11>
//! (qubit 1 is the left factor, matching the mode ordering of the model).
//! Single-qubit members of the set act on qubit 1 and leave qubit 2 alone.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::ComplexMatrix;

/// Members of the universal gate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    /// Controlled-NOT, qubit 1 controls qubit 2.
    Cnot,
    /// Hadamard on qubit 1.
    Hadamard,
    /// Phase gate S = diag(1, i) on qubit 1.
    Phase,
    /// Pi/8 gate T = diag(1, e^{i pi/4}) on qubit 1.
    Pi8,
}

impl GateKind {
    pub const ALL: [GateKind; 4] = [
        GateKind::Cnot,
        GateKind::Hadamard,
        GateKind::Phase,
        GateKind::Pi8,
    ];

    /// Stable lowercase name used on the CLI and in file names.
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Cnot => "cnot",
            GateKind::Hadamard => "hadamard",
            GateKind::Phase => "phase",
            GateKind::Pi8 => "pi8",
        }
    }

    /// The 4x4 target unitary in the computational basis.
    pub fn target_unitary(self) -> ComplexMatrix {
        let one = Complex64::ONE;
        let zero = Complex64::ZERO;
        match self {
            GateKind::Cnot => ComplexMatrix::from_entries(
                4,
                vec![
                    one, zero, zero, zero, //
                    zero, one, zero, zero, //
                    zero, zero, zero, one, //
                    zero, zero, one, zero,
                ],
            )
            .expect("static 4x4 entries"),
            GateKind::Hadamard => {
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                ComplexMatrix::from_entries(
                    4,
                    vec![
                        h, zero, h, zero, //
                        zero, h, zero, h, //
                        h, zero, -h, zero, //
                        zero, h, zero, -h,
                    ],
                )
                .expect("static 4x4 entries")
            }
            GateKind::Phase => diag_on_qubit1(Complex64::new(0.0, 1.0)),
            GateKind::Pi8 => {
                let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
                diag_on_qubit1(phase)
            }
        }
    }
}

/// diag(1, 1, p, p): a diagonal single-qubit gate diag(1, p) on qubit 1.
fn diag_on_qubit1(p: Complex64) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4);
    m.set(0, 0, Complex64::ONE);
    m.set(1, 1, Complex64::ONE);
    m.set(2, 2, p);
    m.set(3, 3, p);
    m
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "cnot" => Ok(GateKind::Cnot),
            "hadamard" | "h" => Ok(GateKind::Hadamard),
            "phase" | "s" => Ok(GateKind::Phase),
            "pi8" | "t" => Ok(GateKind::Pi8),
            other => Err(Error::InvalidInput(format!(
                "unknown gate '{other}', expected one of: cnot, hadamard, phase, pi8"
            ))),
        }
    }
}
