//! One-sided amplitude spectra of sampled control signals.
//!
//! Uses the direct discrete Fourier transform: the traces here are a
//! few thousand samples, so the quadratic cost stays in milliseconds
//! and no transform dependency is needed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagate::ControlGrid;

/// One-sided amplitude spectrum of a uniformly sampled real signal.
///
/// Bin k holds the amplitude at frequency k/(N·dt). Bin 0 carries
/// |X_0|/N; every later bin carries 2|X_k|/N, so a pure in-bin cosine
/// of amplitude A reports A at its bin. Under this convention mean
/// square power is A_0^2 + (1/2)·sum of interior A_k^2, plus
/// (1/4)·A_{N/2}^2 for even N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    /// Number of time samples the spectrum was computed from.
    pub num_samples: usize,
    /// Sample spacing, ns.
    pub sample_spacing: f64,
    /// Bin frequencies, GHz; length N/2 + 1.
    pub frequencies: Vec<f64>,
    /// Bin amplitudes, same units as the signal; same length.
    pub amplitudes: Vec<f64>,
}

impl SpectrumTable {
    pub fn num_bins(&self) -> usize {
        self.frequencies.len()
    }

    /// Index of the largest-amplitude bin at nonzero frequency, with
    /// its frequency in GHz. None when the table has only the DC bin.
    pub fn dominant_bin(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for k in 1..self.amplitudes.len() {
            match best {
                Some((kb, _)) if self.amplitudes[k] <= self.amplitudes[kb] => {}
                _ => best = Some((k, self.frequencies[k])),
            }
        }
        best
    }

    /// Relative gap between the signal's mean square and the same
    /// quantity reassembled from the spectrum. Near zero for a
    /// spectrum computed from exactly these samples.
    pub fn parseval_residual(&self, samples: &[f64]) -> Result<f64> {
        let n = self.num_samples;
        if samples.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: samples.len(),
                context: "parseval_residual samples",
            });
        }
        let time_power: f64 = samples.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let mut freq_power = self.amplitudes[0] * self.amplitudes[0];
        let nyquist = if n.is_multiple_of(2) { Some(n / 2) } else { None };
        for (k, a) in self.amplitudes.iter().enumerate().skip(1) {
            let weight = if Some(k) == nyquist { 0.25 } else { 0.5 };
            freq_power += weight * a * a;
        }
        let scale = time_power.max(freq_power).max(f64::MIN_POSITIVE);
        Ok((time_power - freq_power).abs() / scale)
    }
}

/// Compute the one-sided amplitude spectrum of uniformly spaced real
/// samples with spacing dt (ns). Frequencies come out in GHz.
pub fn amplitude_spectrum(samples: &[f64], dt: f64) -> Result<SpectrumTable> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("spectrum needs at least one sample".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sample spacing must be positive and finite, got {dt}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "spectrum input samples",
        });
    }
    let n = samples.len();
    let bins = n / 2 + 1;
    let mut frequencies = Vec::with_capacity(bins);
    let mut amplitudes = Vec::with_capacity(bins);
    let span = n as f64 * dt;
    for k in 0..bins {
        // phase index k*j mod n keeps arguments in one period
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &x) in samples.iter().enumerate() {
            let phase = -std::f64::consts::TAU * ((k * j) % n) as f64 / n as f64;
            acc += Complex64::from_polar(x, phase);
        }
        let scale = if k == 0 { 1.0 } else { 2.0 };
        frequencies.push(k as f64 / span);
        amplitudes.push(scale * acc.norm() / n as f64);
    }
    Ok(SpectrumTable {
        num_samples: n,
        sample_spacing: dt,
        frequencies,
        amplitudes,
    })
}

/// Spectrum of every channel of a sampled control grid, in channel
/// storage order.
pub fn grid_spectra(grid: &ControlGrid) -> Result<Vec<SpectrumTable>> {
    (0..crate::model::NUM_CHANNELS)
        .map(|ch| amplitude_spectrum(grid.channel_row(ch), grid.dt()))
        .collect()
}
