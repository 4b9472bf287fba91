//! Welch power spectral density estimation, channel averaging and
//! ℓ1 normalization.
//!
//! PSDs are one-sided densities over the `nfft / 2 + 1` non-negative
//! frequency bins, scaled by `1 / (fs · Σw²)` with interior bins doubled,
//! so that `Σ p[k] · fs / nfft` approximates the signal variance.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ values = 1` accepted by [`NormalizedPsd::new`].
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// A multichannel, uniformly sampled real time series.
///
/// Samples are stored channel-major: `data[c]` holds the `L` samples of
/// channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    subject_id: String,
    fs_hz: f64,
    data: Vec<Vec<f64>>,
}

impl SignalRecord {
    pub fn new(subject_id: impl Into<String>, fs_hz: f64, data: Vec<Vec<f64>>) -> Result<Self> {
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(Error::InvalidRecord(format!(
                "sample rate {fs_hz} is not positive"
            )));
        }
        let Some(first) = data.first() else {
            return Err(Error::InvalidRecord("record has no channels".into()));
        };
        let len = first.len();
        if len == 0 {
            return Err(Error::InvalidRecord("record has no samples".into()));
        }
        if let Some(c) = data.iter().position(|ch| ch.len() != len) {
            return Err(Error::InvalidRecord(format!(
                "channel {c} has {} samples, channel 0 has {len}",
                data[c].len()
            )));
        }
        if data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("signal samples"));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            fs_hz,
            data,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn channels(&self) -> usize {
        self.data.len()
    }

    pub fn samples(&self) -> usize {
        self.data[0].len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c]
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Vec<f64>> {
        self.data
    }

    pub fn with_subject_id(mut self, id: impl Into<String>) -> Self {
        self.subject_id = id.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Bartlett,
    Rectangular,
}

impl Window {
    /// Periodic (DFT-even) window coefficients of length `m`.
    pub fn coefficients(self, m: usize) -> Vec<f64> {
        let len = m as f64;
        (0..m)
            .map(|n| {
                let n = n as f64;
                match self {
                    Window::Hann => 0.5 - 0.5 * (2.0 * PI * n / len).cos(),
                    Window::Bartlett => 1.0 - (2.0 * n / len - 1.0).abs(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(Window::Hann),
            "bartlett" => Ok(Window::Bartlett),
            "rectangular" | "boxcar" => Ok(Window::Rectangular),
            other => Err(Error::InvalidConfig(format!("unknown window {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub nperseg: usize,
    pub noverlap: usize,
    pub nfft: usize,
    pub window: Window,
    pub detrend: bool,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            nperseg: 512,
            noverlap: 256,
            nfft: 512,
            window: Window::Hann,
            detrend: true,
        }
    }
}

impl WelchConfig {
    /// Number of one-sided bins, `nfft / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.nperseg == 0 {
            return Err(Error::InvalidConfig("nperseg must be positive".into()));
        }
        if self.noverlap >= self.nperseg {
            return Err(Error::InvalidConfig(format!(
                "noverlap {} must be smaller than nperseg {}",
                self.noverlap, self.nperseg
            )));
        }
        if self.nfft < self.nperseg {
            return Err(Error::InvalidConfig(format!(
                "nfft {} is smaller than nperseg {}",
                self.nfft, self.nperseg
            )));
        }
        if !self.nfft.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "nfft {} must be even",
                self.nfft
            )));
        }
        Ok(())
    }
}

fn check_grid(fs_hz: f64, values: &[f64]) -> Result<()> {
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(Error::InvalidSpectrum(format!(
            "sample rate {fs_hz} is not positive"
        )));
    }
    if values.len() < 2 {
        return Err(Error::InvalidSpectrum(format!(
            "{} bins; at least 2 are required",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectrum"));
    }
    if let Some(k) = values.iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidSpectrum(format!(
            "negative power {} at bin {k}",
            values[k]
        )));
    }
    Ok(())
}

/// One-sided power spectral density over `P = nfft / 2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    values: Vec<f64>,
    fs_hz: f64,
}

impl Psd {
    /// Builds a PSD from its one-sided values; `nfft` is `2 (P - 1)`.
    pub fn new(values: Vec<f64>, fs_hz: f64) -> Result<Self> {
        check_grid(fs_hz, &values)?;
        Ok(Self { values, fs_hz })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn nfft(&self) -> usize {
        2 * (self.values.len() - 1)
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    /// Frequency spacing `fs / nfft`.
    pub fn df(&self) -> f64 {
        self.fs_hz / self.nfft() as f64
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.df()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.bins()).map(|k| self.frequency(k))
    }

    /// Bin nearest to `freq_hz`.
    pub fn bin_of(&self, freq_hz: f64) -> usize {
        ((freq_hz / self.df()).round().max(0.0) as usize).min(self.bins() - 1)
    }

    /// `Σ p[k] · df`, the variance implied by the density.
    pub fn total_power(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.df()
    }

    pub fn scaled(&self, alpha: f64) -> Result<Psd> {
        Psd::new(self.values.iter().map(|v| v * alpha).collect(), self.fs_hz)
    }

    pub fn same_grid(&self, other: &Psd) -> bool {
        self.values.len() == other.values.len() && self.fs_hz == other.fs_hz
    }

    pub(crate) fn ensure_same_grid(&self, other: &Psd) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::MismatchedGrids(format!(
                "{} bins at {} Hz vs {} bins at {} Hz",
                self.bins(),
                self.fs_hz,
                other.bins(),
                other.fs_hz
            )))
        }
    }
}

/// An ℓ1-normalized PSD: a probability mass function over frequency bins.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPsd {
    inner: Psd,
}

impl NormalizedPsd {
    /// Wraps values that already sum to one (within [`NORMALIZATION_TOL`]).
    pub fn new(values: Vec<f64>, fs_hz: f64) -> Result<Self> {
        let inner = Psd::new(values, fs_hz)?;
        let sum: f64 = inner.values.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { inner })
    }

    pub fn values(&self) -> &[f64] {
        &self.inner.values
    }

    pub fn fs_hz(&self) -> f64 {
        self.inner.fs_hz
    }

    pub fn nfft(&self) -> usize {
        self.inner.nfft()
    }

    pub fn as_psd(&self) -> &Psd {
        &self.inner
    }

    pub fn into_psd(self) -> Psd {
        self.inner
    }
}

/// Welch estimate of the one-sided PSD of a single channel.
///
/// Segments that would run past the end of the signal are dropped.
pub fn welch_psd(channel: &[f64], fs_hz: f64, cfg: &WelchConfig) -> Result<Psd> {
    cfg.validate()?;
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sample rate {fs_hz} is not positive"
        )));
    }
    if channel.len() < cfg.nperseg {
        return Err(Error::SignalTooShort {
            len: channel.len(),
            nperseg: cfg.nperseg,
        });
    }
    if channel.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("signal samples"));
    }

    let window = cfg.window.coefficients(cfg.nperseg);
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.nfft);
    let bins = cfg.bins();
    let hop = cfg.nperseg - cfg.noverlap;
    let segments = (channel.len() - cfg.nperseg) / hop + 1;

    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.nfft];
    for s in 0..segments {
        let seg = &channel[s * hop..s * hop + cfg.nperseg];
        let mean = if cfg.detrend {
            seg.iter().sum::<f64>() / cfg.nperseg as f64
        } else {
            0.0
        };
        for (slot, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *slot = Complex::new((x - mean) * w, 0.0);
        }
        buf[cfg.nperseg..].fill(Complex::new(0.0, 0.0));
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf[..bins]) {
            *a += z.norm_sqr();
        }
    }

    let scale = 1.0 / (fs_hz * win_energy * segments as f64);
    for (k, a) in acc.iter_mut().enumerate() {
        *a *= scale;
        if k != 0 && k != bins - 1 {
            *a *= 2.0;
        }
    }
    Psd::new(acc, fs_hz)
}

/// Per-channel Welch PSDs of a record, in channel order.
pub fn psd_matrix(record: &SignalRecord, cfg: &WelchConfig) -> Result<Vec<Psd>> {
    cfg.validate()?;
    record
        .data()
        .par_iter()
        .enumerate()
        .map(|(c, ch)| welch_psd(ch, record.fs_hz(), cfg).map_err(|e| e.in_channel(c)))
        .collect()
}

/// Elementwise arithmetic mean of PSDs on a shared grid.
pub(crate) fn mean_psd(psds: &[Psd], what: &'static str) -> Result<Psd> {
    let first = psds.first().ok_or(Error::EmptyInput(what))?;
    for p in &psds[1..] {
        first.ensure_same_grid(p)?;
    }
    let n = psds.len() as f64;
    let values = (0..first.bins())
        .map(|k| psds.iter().map(|p| p.values[k]).sum::<f64>() / n)
        .collect();
    Psd::new(values, first.fs_hz)
}

/// Channel-averaged PSD `(1/C) Σ p_c`.
pub fn channel_average(psds: &[Psd]) -> Result<Psd> {
    mean_psd(psds, "no channel PSDs to average")
}

/// Channel-averaged Welch PSD of a whole record.
pub fn record_psd(record: &SignalRecord, cfg: &WelchConfig) -> Result<Psd> {
    channel_average(&psd_matrix(record, cfg)?)
}

/// Divides a PSD by its ℓ1 norm.
pub fn l1_normalize(p: &Psd) -> Result<NormalizedPsd> {
    let sum: f64 = p.values.iter().sum();
    if sum <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    if !sum.is_finite() {
        return Err(Error::NonFinite("spectrum sum"));
    }
    let values = p.values.iter().map(|v| v / sum).collect();
    Ok(NormalizedPsd {
        inner: Psd::new(values, p.fs_hz)?,
    })
}
