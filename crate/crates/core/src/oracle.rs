//! Stationary Gaussian ground truth.
//!
//! Circulant embeddings of autocorrelation sequences, the general
//! Bures–Wasserstein distance between Gaussians, and seeded generators for
//! stationary Gaussian signals and mains line noise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectral::{Psd, SignalRecord};

/// Spectra below this are treated as an inadmissible (indefinite) embedding.
pub const SPECTRUM_FLOOR: f64 = -1e-9;

/// Largest matrix dimension accepted by [`bures_wasserstein`].
pub const MAX_ORACLE_DIM: usize = 64;

/// A zero-mean stationary Gaussian described by a truncated ACF embedded
/// in an `N × N` circulant covariance, `N = 2K − 1 + Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantGaussian {
    acf: Vec<f64>,
    zero_pad: usize,
    spectrum: Vec<f64>,
}

impl CirculantGaussian {
    pub fn acf(&self) -> &[f64] {
        &self.acf
    }

    pub fn zero_pad(&self) -> usize {
        self.zero_pad
    }

    pub fn n(&self) -> usize {
        2 * self.acf.len() - 1 + self.zero_pad
    }

    /// Eigenvalues of the circulant covariance, in DFT order.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// `[r0, r1, …, r_{K−1}, 0 × Q, r_{K−1}, …, r1]`.
    pub fn first_column(&self) -> Vec<f64> {
        first_column(&self.acf, self.zero_pad)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let col = self.first_column();
        let n = col.len();
        DMatrix::from_fn(n, n, |i, j| col[(i + n - j) % n])
    }
}

fn first_column(acf: &[f64], zero_pad: usize) -> Vec<f64> {
    let mut col = acf.to_vec();
    col.extend(std::iter::repeat_n(0.0, zero_pad));
    col.extend(acf[1..].iter().rev());
    col
}

/// Embeds `acf` (lags `0..K`) into a circulant covariance and computes
/// its spectrum `λ = F r`.
pub fn circulant_from_acf(acf: &[f64], zero_pad: usize) -> Result<CirculantGaussian> {
    if acf.is_empty() {
        return Err(Error::InvalidLength(
            "autocorrelation needs at least lag 0".into(),
        ));
    }
    if acf.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("autocorrelation"));
    }
    let col = first_column(acf, zero_pad);
    let n = col.len();
    let mut buf: Vec<Complex<f64>> = col.iter().map(|&r| Complex::new(r, 0.0)).collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(n)
        .process(&mut buf);
    let scale = col.iter().map(|r| r.abs()).sum::<f64>().max(1.0);
    let mut spectrum = Vec::with_capacity(n);
    for (k, z) in buf.iter().enumerate() {
        debug_assert!(
            z.im.abs() <= 1e-9 * scale,
            "imaginary residual {} at bin {k}",
            z.im
        );
        if z.re < SPECTRUM_FLOOR {
            return Err(Error::NonPositiveSpectrum {
                bin: k,
                value: z.re,
            });
        }
        spectrum.push(z.re);
    }
    Ok(CirculantGaussian {
        acf: acf.to_vec(),
        zero_pad,
        spectrum,
    })
}

/// Multiplies `acf` by the triangular window `1 − k/K`.
///
/// The window's transform is a non-negative Fejér kernel, so a truncated
/// positive-definite ACF stays admissible after embedding.
pub fn bartlett_taper(acf: &[f64]) -> Vec<f64> {
    let k = acf.len() as f64;
    acf.iter()
        .enumerate()
        .map(|(lag, r)| r * (1.0 - lag as f64 / k))
        .collect()
}

fn sym_eigen(m: &DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}×{}",
            n,
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("covariance"));
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-9 * m.abs().max().max(1.0) {
        return Err(Error::DimensionMismatch(format!(
            "{what} is not symmetric ({asym:e})"
        )));
    }
    Ok(SymmetricEigen::new(m.clone()))
}

/// Principal square root of a symmetric PSD matrix.
fn psd_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m, what)?;
    let norm = eig.eigenvalues.abs().max();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -1e-6 * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd { eigenvalue: *v });
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

/// W2 distance between `N(mean_a, cov_a)` and `N(mean_b, cov_b)`:
/// `√(‖ma − mb‖² + tr(A + B − 2 (A^½ B A^½)^½))`.
pub fn bures_wasserstein(
    mean_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> Result<f64> {
    let n = cov_a.nrows();
    if n == 0 || n > MAX_ORACLE_DIM {
        return Err(Error::DimensionMismatch(format!(
            "dimension {n} outside 1..={MAX_ORACLE_DIM}"
        )));
    }
    if cov_b.nrows() != n || mean_a.len() != n || mean_b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "means {} and {}, covariances {} and {}",
            mean_a.len(),
            mean_b.len(),
            n,
            cov_b.nrows()
        )));
    }
    let root_a = psd_sqrt(cov_a, "covariance A")?;
    // B is validated for PSD-ness through its own eigendecomposition.
    psd_sqrt(cov_b, "covariance B")?;
    let inner = &root_a * cov_b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = psd_sqrt(&inner, "A^½ B A^½")?;
    let bures2 = cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
    let mean2 = (mean_a - mean_b).norm_squared();
    Ok((mean2 + bures2).max(0.0).sqrt())
}

/// Seeded standard-normal stream; per call, never shared.
fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generates a zero-mean stationary Gaussian signal whose population PSD
/// is `psd`, by spectral synthesis.
///
/// `psd` is read as a continuous one-sided density (linearly interpolated
/// between bins), so the two-sided density is `S(f) = p(f) / 2` everywhere.
/// Independent blocks of length `B = 4 · nfft` are drawn with Gaussian
/// Fourier coefficients with `E|X_k|² = B · fs · S(f_k)`, inverse
/// transformed, and crossfaded with half-overlapping sine windows whose
/// squares sum to one.
pub fn synth_gaussian_process(psd: &Psd, len: usize, seed: u64) -> Result<SignalRecord> {
    let mut rng = rng(seed);
    let x = synth_channel(psd, len, &mut rng)?;
    SignalRecord::new("synthetic", psd.fs_hz(), vec![x])
}

/// Multichannel variant drawing each channel from one seeded stream in
/// channel order.
pub fn synth_gaussian_record(
    psd: &Psd,
    channels: usize,
    len: usize,
    seed: u64,
) -> Result<SignalRecord> {
    if channels == 0 {
        return Err(Error::InvalidLength(
            "at least one channel is required".into(),
        ));
    }
    let mut rng = rng(seed);
    let data = (0..channels)
        .map(|_| synth_channel(psd, len, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    SignalRecord::new("synthetic", psd.fs_hz(), data)
}

fn synth_channel(psd: &Psd, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let nfft = psd.nfft();
    if len < nfft {
        return Err(Error::InvalidLength(format!(
            "length {len} is shorter than the PSD's nfft {nfft}"
        )));
    }
    let block = 4 * nfft;
    let hop = block / 2;
    let upsample = block / nfft;
    let fs = psd.fs_hz();
    let p = psd.values();

    // Per-bin standard deviations on the block grid.
    let half = block / 2;
    let sigma: Vec<f64> = (0..=half)
        .map(|k| {
            let pos = k as f64 / upsample as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(p.len() - 1);
            let t = pos - lo as f64;
            let one_sided = p[lo] * (1.0 - t) + p[hi] * t;
            (block as f64 * fs * one_sided / 2.0).sqrt()
        })
        .collect();

    let window: Vec<f64> = (0..block)
        .map(|n| (PI * (n as f64 + 0.5) / block as f64).sin())
        .collect();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(block);

    // Blocks start at −hop so every output sample is covered by two blocks.
    let n_blocks = len.div_ceil(hop) + 1;
    let mut out = vec![0.0; len];
    let mut spec = vec![Complex::new(0.0, 0.0); block];
    for b in 0..n_blocks {
        for k in 0..=half {
            let g = if k == 0 || k == half {
                Complex::new(sigma[k] * rng.sample::<f64, _>(StandardNormal), 0.0)
            } else {
                let s = sigma[k] / std::f64::consts::SQRT_2;
                Complex::new(
                    s * rng.sample::<f64, _>(StandardNormal),
                    s * rng.sample::<f64, _>(StandardNormal),
                )
            };
            spec[k] = g;
            if k != 0 && k != half {
                spec[block - k] = g.conj();
            }
        }
        ifft.process(&mut spec);
        let start = b as isize * hop as isize - hop as isize;
        for (n, (z, w)) in spec.iter().zip(&window).enumerate() {
            let t = start + n as isize;
            if t >= 0 && (t as usize) < len {
                out[t as usize] += z.re / block as f64 * w;
            }
        }
    }
    Ok(out)
}

/// Adds `amplitude · sin(2π f t + φ_c)` to every channel, with each
/// channel's phase drawn uniformly from the seeded stream.
pub fn inject_line_noise(
    record: &SignalRecord,
    freq_hz: f64,
    amplitude: f64,
    seed: u64,
) -> Result<SignalRecord> {
    let nyquist = record.fs_hz() / 2.0;
    if !(freq_hz > 0.0 && freq_hz < nyquist) {
        return Err(Error::FrequencyOutOfRange {
            freq_hz,
            nyquist_hz: nyquist,
        });
    }
    if !amplitude.is_finite() {
        return Err(Error::NonFinite("line amplitude"));
    }
    let mut rng = rng(seed);
    let omega = 2.0 * PI * freq_hz / record.fs_hz();
    let data = record
        .data()
        .iter()
        .map(|ch| {
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            ch.iter()
                .enumerate()
                .map(|(n, &x)| x + amplitude * (omega * n as f64 + phase).sin())
                .collect()
        })
        .collect();
    SignalRecord::new(record.subject_id(), record.fs_hz(), data)
}

/// `1 / (1 + f / f0)` style pink-ish spectrum plus a floor, on the grid of
/// a given sample rate and nfft. Used by the demos and tests.
pub fn one_over_f_psd(
    fs_hz: f64,
    nfft: usize,
    scale: f64,
    knee_hz: f64,
    floor: f64,
) -> Result<Psd> {
    let df = fs_hz / nfft as f64;
    let values = (0..=nfft / 2)
        .map(|k| scale / (1.0 + k as f64 * df / knee_hz) + floor)
        .collect();
    Psd::new(values, fs_hz)
}
