//! Spectral domain adaptation for multichannel time series.
//!
//! Each target subject gets a single zero-phase FIR filter, shared by all of
//! its channels, that transports its channel-averaged power spectrum onto a
//! reference spectrum built from source subjects. Under a zero-mean
//! stationary Gaussian model this filter is the optimal transport map in
//! Wasserstein-2.
//!
//! * [`spectral`]: Welch PSDs, channel averaging, ℓ1 normalization.
//! * [`transport`]: spectral W2 and Hellinger distances, barycenters,
//!   subject-to-subject matching.
//! * [`filterbank`]: filter design and application.
//! * [`oracle`]: circulant Gaussians, the general Bures–Wasserstein
//!   distance, synthetic signals.
//! * [`pipeline`] and [`io`]: manifests, file formats, batch fit/apply.
//! * [`cli`]: the `cmmn` command.

pub mod cli;
pub mod error;
pub mod filterbank;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
pub use filterbank::{apply_filter, design_filter, frequency_response, NormalizingFilter};
pub use pipeline::{
    fit_apply_target, fit_reference, DatasetManifest, FittedReference, PipelineConfig,
};
pub use spectral::{
    channel_average, l1_normalize, psd_matrix, record_psd, welch_psd, NormalizedPsd, Psd,
    SignalRecord, WelchConfig, Window,
};
pub use transport::{
    barycenter_arithmetic, barycenter_normalized, barycenter_wasserstein, hellinger, match_subject,
    w2_spectral, ReferenceSpectrum, Scheme, SourceSpectrum,
};
