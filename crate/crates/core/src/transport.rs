//! Wasserstein-2 geometry of stationary Gaussian spectra.
//!
//! Zero-mean stationary Gaussian processes with circulant covariances share
//! the Fourier eigenbasis, so the Bures–Wasserstein distance between them
//! reduces to the Euclidean distance between square-rooted spectra. On the
//! probability simplex that distance is `√2` times the Hellinger distance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{l1_normalize, mean_psd, NormalizedPsd, Psd};

/// How the source reference spectrum is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Arithmetic mean of the source subjects' channel-averaged PSDs.
    Barycenter,
    /// Mean of the ℓ1-normalized source PSDs.
    NormalizedBarycenter,
    /// Squared mean of square-rooted source PSDs, the W2 minimizer.
    WassersteinBarycenter,
    /// The source subject nearest to each target in Hellinger distance.
    SubjectToSubject,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Barycenter => "barycenter",
            Scheme::NormalizedBarycenter => "normalized_barycenter",
            Scheme::WassersteinBarycenter => "wasserstein_barycenter",
            Scheme::SubjectToSubject => "subject_to_subject",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "barycenter" => Ok(Scheme::Barycenter),
            "normalized_barycenter" => Ok(Scheme::NormalizedBarycenter),
            "wasserstein_barycenter" => Ok(Scheme::WassersteinBarycenter),
            "subject_to_subject" => Ok(Scheme::SubjectToSubject),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

/// The spectrum a target subject is mapped onto.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpectrum {
    scheme: Scheme,
    psd: Psd,
    matched_source_id: Option<String>,
    source_count: usize,
}

impl ReferenceSpectrum {
    pub fn new(
        scheme: Scheme,
        psd: Psd,
        matched_source_id: Option<String>,
        source_count: usize,
    ) -> Result<Self> {
        if matched_source_id.is_some() != (scheme == Scheme::SubjectToSubject) {
            return Err(Error::InvalidConfig(format!(
                "matched source id must be set exactly for subject_to_subject, scheme is {scheme}"
            )));
        }
        if scheme == Scheme::NormalizedBarycenter {
            let sum: f64 = psd.values().iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(Self {
            scheme,
            psd,
            matched_source_id,
            source_count,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn psd(&self) -> &Psd {
        &self.psd
    }

    pub fn matched_source_id(&self) -> Option<&str> {
        self.matched_source_id.as_deref()
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }
}

/// `‖√a − √b‖₂` over raw spectra of equal length.
///
/// This is the W2 distance between zero-mean Gaussians whose covariances
/// are diagonal in a common orthonormal basis with eigenvalues `a` and `b`.
pub fn spectral_w2(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "spectra of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x.max(0.0).sqrt() - y.max(0.0).sqrt();
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// W2 distance between the stationary Gaussian processes with PSDs `a`, `b`.
pub fn w2_spectral(a: &Psd, b: &Psd) -> Result<f64> {
    a.ensure_same_grid(b)?;
    spectral_w2(a.values(), b.values())
}

/// Hellinger distance `(1/√2) ‖√a − √b‖₂` between two PMFs.
pub fn hellinger(a: &NormalizedPsd, b: &NormalizedPsd) -> Result<f64> {
    a.as_psd().ensure_same_grid(b.as_psd())?;
    let d = spectral_w2(a.values(), b.values())? / std::f64::consts::SQRT_2;
    Ok(d.min(1.0))
}

/// Arithmetic barycenter `(1/I) Σ p_i`.
pub fn barycenter_arithmetic(psds: &[Psd]) -> Result<Psd> {
    mean_psd(psds, "no source PSDs")
}

/// Mean of the ℓ1-normalized PSDs; each subject weighs equally.
pub fn barycenter_normalized(psds: &[Psd]) -> Result<NormalizedPsd> {
    let first = psds.first().ok_or(Error::EmptyInput("no source PSDs"))?;
    let normalized = psds
        .iter()
        .map(|p| {
            first.ensure_same_grid(p)?;
            l1_normalize(p).map(NormalizedPsd::into_psd)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = mean_psd(&normalized, "no source PSDs")?;
    // Renormalize to absorb rounding in the mean of PMFs.
    l1_normalize(&mean)
}

/// W2 barycenter of circulant Gaussians: `((1/I) Σ √p_i)²`.
pub fn barycenter_wasserstein(psds: &[Psd]) -> Result<Psd> {
    let first = psds.first().ok_or(Error::EmptyInput("no source PSDs"))?;
    for p in &psds[1..] {
        first.ensure_same_grid(p)?;
    }
    let n = psds.len() as f64;
    let values = (0..first.bins())
        .map(|k| {
            let m = psds.iter().map(|p| p.values()[k].sqrt()).sum::<f64>() / n;
            m * m
        })
        .collect();
    Psd::new(values, first.fs_hz())
}

/// A source subject available for subject-to-subject matching.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpectrum {
    pub id: String,
    pub psd: Psd,
    pub normalized: NormalizedPsd,
}

impl SourceSpectrum {
    pub fn new(id: impl Into<String>, psd: Psd) -> Result<Self> {
        let normalized = l1_normalize(&psd)?;
        Ok(Self {
            id: id.into(),
            psd,
            normalized,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub index: usize,
    pub distance: f64,
    /// The matched subject's unnormalized channel-averaged PSD.
    pub psd: Psd,
}

/// Finds the source whose normalized PSD is nearest to `target` in
/// Hellinger distance. Ties go to the lowest index.
pub fn match_subject(target: &NormalizedPsd, sources: &[SourceSpectrum]) -> Result<Match> {
    if sources.is_empty() {
        return Err(Error::EmptyInput("no source subjects to match"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in sources.iter().enumerate() {
        s.psd.ensure_same_grid(s.normalized.as_psd())?;
        let d = hellinger(&s.normalized, target)?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    let (index, distance) = best.expect("non-empty sources");
    Ok(Match {
        index,
        distance,
        psd: sources[index].psd.clone(),
    })
}
