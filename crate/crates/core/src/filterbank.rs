//! Zero-phase normalizing filters.
//!
//! The magnitude response is `√((p_ref + ε) / (p_target + ε))` on the PSD
//! grid. The impulse response is its inverse real FFT of length `nfft`,
//! circularly shifted by `nfft / 2` so it is a centered even-symmetric FIR.
//! Filtering removes the resulting `nfft / 2`-sample group delay.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectral::{Psd, SignalRecord};

/// Relative regularizer used when none is given: `1e-12 · max(p_ref)`.
pub const DEFAULT_RELATIVE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizingFilter {
    impulse: Vec<f64>,
    magnitude: Vec<f64>,
    fs_hz: f64,
    eps: f64,
}

/// Default regularizer for a reference spectrum.
pub fn default_eps(source_ref: &Psd) -> f64 {
    DEFAULT_RELATIVE_EPS * source_ref.values().iter().fold(0.0f64, |m, &v| m.max(v))
}

/// Designs the filter mapping `target` onto `source_ref`.
pub fn design_filter(source_ref: &Psd, target: &Psd, eps: f64) -> Result<NormalizingFilter> {
    source_ref.ensure_same_grid(target)?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "eps {eps} must be finite and non-negative"
        )));
    }
    let mut magnitude = Vec::with_capacity(target.bins());
    for (k, (&s, &t)) in source_ref.values().iter().zip(target.values()).enumerate() {
        let den = t + eps;
        let num = s + eps;
        let h = if den > 0.0 {
            (num / den).sqrt()
        } else if num == 0.0 {
            // 0/0 with eps = 0: nothing to map at this bin.
            0.0
        } else {
            return Err(Error::DivisionByZero {
                bin: k,
                source_power: s,
            });
        };
        if !h.is_finite() {
            return Err(Error::NonFinite("filter magnitude"));
        }
        magnitude.push(h);
    }
    let impulse = impulse_from_magnitude(&magnitude);
    Ok(NormalizingFilter {
        impulse,
        magnitude,
        fs_hz: target.fs_hz(),
        eps,
    })
}

/// Centered zero-phase impulse response of length `2 (P - 1)`.
fn impulse_from_magnitude(magnitude: &[f64]) -> Vec<f64> {
    let f = 2 * (magnitude.len() - 1);
    let mut spec: Vec<Complex<f64>> = (0..f)
        .map(|k| {
            let k = if k < magnitude.len() { k } else { f - k };
            Complex::new(magnitude[k], 0.0)
        })
        .collect();
    FftPlanner::<f64>::new()
        .plan_fft_inverse(f)
        .process(&mut spec);
    let half = f / 2;
    (0..f)
        .map(|n| spec[(n + f - half) % f].re / f as f64)
        .collect()
}

/// `|FFT(impulse)|` over the one-sided bins.
pub(crate) fn magnitude_from_impulse(impulse: &[f64]) -> Vec<f64> {
    let f = impulse.len();
    let mut buf: Vec<Complex<f64>> = impulse.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(f)
        .process(&mut buf);
    buf[..f / 2 + 1].iter().map(|z| z.norm()).collect()
}

impl NormalizingFilter {
    /// Rebuilds a filter from a stored impulse response, recomputing its
    /// magnitude and checking that the response is zero phase about `F/2`.
    pub fn from_impulse(impulse: Vec<f64>, fs_hz: f64, eps: f64) -> Result<Self> {
        let f = impulse.len();
        if f < 2 || !f.is_multiple_of(2) {
            return Err(Error::InvalidLength(format!(
                "impulse length {f} must be even and ≥ 2"
            )));
        }
        if impulse.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("impulse response"));
        }
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate {fs_hz} is not positive"
            )));
        }
        let scale = impulse
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(1e-300);
        let half = f / 2;
        for m in 1..half {
            if (impulse[half + m] - impulse[half - m]).abs() > 1e-9 * scale {
                return Err(Error::InvalidSpectrum(format!(
                    "impulse is not even-symmetric about sample {half} (offset {m})"
                )));
            }
        }
        let magnitude = magnitude_from_impulse(&impulse);
        Ok(Self {
            impulse,
            magnitude,
            fs_hz,
            eps,
        })
    }

    pub fn impulse(&self) -> &[f64] {
        &self.impulse
    }

    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.impulse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impulse.is_empty()
    }

    /// Samples of delay introduced by the centered impulse.
    pub fn group_delay(&self) -> usize {
        self.impulse.len() / 2
    }

    /// |H| sampled at `n_points` uniformly spaced frequencies on `[0, fs/2]`.
    pub fn frequency_response(&self, n_points: usize) -> Result<Vec<(f64, f64)>> {
        if n_points < 2 {
            return Err(Error::InvalidLength(format!(
                "n_points {n_points} must be ≥ 2"
            )));
        }
        let f = self.impulse.len() as f64;
        let nyquist = self.fs_hz / 2.0;
        Ok((0..n_points)
            .map(|i| {
                let frac = i as f64 / (n_points - 1) as f64;
                // Radians per sample, 0..π.
                let omega = PI * frac;
                // On the design grid the DFT value is exact.
                let bin = frac * (f / 2.0);
                let mag = if (bin - bin.round()).abs() < 1e-9 {
                    self.magnitude[bin.round() as usize]
                } else {
                    let (re, im) =
                        self.impulse
                            .iter()
                            .enumerate()
                            .fold((0.0, 0.0), |(re, im), (n, &h)| {
                                let ph = omega * n as f64;
                                (re + h * ph.cos(), im - h * ph.sin())
                            });
                    re.hypot(im)
                };
                (frac * nyquist, mag)
            })
            .collect())
    }

    /// Filters every channel with the same impulse response.
    ///
    /// Linear convolution by FFT overlap-add, trimmed to the input length
    /// with the `F/2` group delay removed. Samples beyond the record edges
    /// are taken as zero.
    pub fn apply(&self, record: &SignalRecord) -> Result<SignalRecord> {
        if record.fs_hz() != self.fs_hz {
            return Err(Error::SampleRateMismatch {
                filter_hz: self.fs_hz,
                record_hz: record.fs_hz(),
            });
        }
        let ola = OverlapAdd::new(&self.impulse);
        let delay = self.group_delay();
        let data = record
            .data()
            .par_iter()
            .map(|x| ola.convolve_trimmed(x, delay))
            .collect();
        SignalRecord::new(record.subject_id(), record.fs_hz(), data)
    }
}

/// Free-function form of [`NormalizingFilter::apply`].
pub fn apply_filter(filter: &NormalizingFilter, record: &SignalRecord) -> Result<SignalRecord> {
    filter.apply(record)
}

/// Free-function form of [`NormalizingFilter::frequency_response`].
pub fn frequency_response(filter: &NormalizingFilter, n_points: usize) -> Result<Vec<(f64, f64)>> {
    filter.frequency_response(n_points)
}

struct OverlapAdd {
    fft_len: usize,
    block: usize,
    kernel_len: usize,
    kernel_spec: Vec<Complex<f64>>,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl OverlapAdd {
    fn new(kernel: &[f64]) -> Self {
        let kernel_len = kernel.len();
        let fft_len = (4 * kernel_len).next_power_of_two();
        let block = fft_len - kernel_len + 1;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut kernel_spec = vec![Complex::new(0.0, 0.0); fft_len];
        for (slot, &h) in kernel_spec.iter_mut().zip(kernel) {
            *slot = Complex::new(h, 0.0);
        }
        forward.process(&mut kernel_spec);
        Self {
            fft_len,
            block,
            kernel_len,
            kernel_spec,
            forward,
            inverse,
        }
    }

    /// `(h * x)[n + delay]` for `n` in `0..x.len()`.
    fn convolve_trimmed(&self, x: &[f64], delay: usize) -> Vec<f64> {
        let full_len = x.len() + self.kernel_len - 1;
        let mut full = vec![0.0; full_len];
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let norm = 1.0 / self.fft_len as f64;
        for (b, chunk) in x.chunks(self.block).enumerate() {
            let start = b * self.block;
            buf.fill(Complex::new(0.0, 0.0));
            for (slot, &v) in buf.iter_mut().zip(chunk) {
                *slot = Complex::new(v, 0.0);
            }
            self.forward.process(&mut buf);
            for (z, h) in buf.iter_mut().zip(&self.kernel_spec) {
                *z *= h;
            }
            self.inverse.process(&mut buf);
            let produced = chunk.len() + self.kernel_len - 1;
            for (out, z) in full[start..start + produced].iter_mut().zip(&buf) {
                *out += z.re * norm;
            }
        }
        full[delay..delay + x.len()].to_vec()
    }
}
