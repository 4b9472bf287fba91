//! On-disk formats.
//!
//! * Signals, binary: little-endian `f64`, channel-major (all `L` samples of
//!   channel 0, then channel 1, …). Size is exactly `8 · C · L` bytes.
//! * Signals, CSV: one row per sample, one column per channel.
//! * PSD tables: CSV with header `freq_hz,power`, one row per bin.
//! * Filters: JSON, see [`FilterFile`].
//!
//! Floats are written with Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::NormalizingFilter;
use crate::spectral::{Psd, SignalRecord};
use crate::transport::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64le,
    Csv,
}

impl Dtype {
    /// `csv` for `.csv` paths, binary otherwise.
    pub fn from_path(path: &Path) -> Dtype {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Dtype::Csv,
            _ => Dtype::F64le,
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::FileMissing(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        location: format!("byte {}", e.utf8_error().valid_up_to()),
        message: "invalid UTF-8".into(),
    })
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn encode_f64le(record: &SignalRecord) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * record.channels() * record.samples());
    for ch in record.data() {
        for x in ch {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn encode_csv(record: &SignalRecord) -> String {
    let mut out = String::new();
    for n in 0..record.samples() {
        for c in 0..record.channels() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{:?}", record.channel(c)[n]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes a record in the given format.
pub fn write_signal(path: &Path, record: &SignalRecord, dtype: Dtype) -> Result<()> {
    match dtype {
        Dtype::F64le => write_file(path, &encode_f64le(record)),
        Dtype::Csv => write_file(path, encode_csv(record).as_bytes()),
    }
}

/// Reads a record of `channels × samples` from a binary or CSV file.
pub fn read_signal(
    path: &Path,
    dtype: Dtype,
    subject_id: &str,
    fs_hz: f64,
    channels: usize,
    samples: usize,
) -> Result<SignalRecord> {
    let data = match dtype {
        Dtype::F64le => {
            let bytes = read_file(path)?;
            let expected = 8 * channels as u64 * samples as u64;
            if bytes.len() as u64 != expected {
                return Err(Error::SizeMismatch {
                    path: path.to_path_buf(),
                    expected,
                    actual: bytes.len() as u64,
                });
            }
            if samples == 0 {
                vec![vec![]; channels]
            } else {
                bytes
                    .chunks_exact(8 * samples)
                    .map(|ch| {
                        ch.chunks_exact(8)
                            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                            .collect()
                    })
                    .collect()
            }
        }
        Dtype::Csv => parse_signal_csv(path, &read_text(path)?, channels, samples)?,
    };
    SignalRecord::new(subject_id, fs_hz, data)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        location: format!("line {line}"),
        message: message.into(),
    }
}

fn parse_signal_csv(
    path: &Path,
    text: &str,
    channels: usize,
    samples: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut data = vec![Vec::with_capacity(samples); channels];
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != channels {
            return Err(parse_err(
                path,
                i + 1,
                format!("{} columns, expected {channels}", fields.len()),
            ));
        }
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(path, i + 1, format!("not a number: {f:?}")))?;
            data[c].push(v);
        }
        rows += 1;
    }
    if rows != samples {
        return Err(parse_err(
            path,
            rows,
            format!("{rows} rows, expected {samples}"),
        ));
    }
    Ok(data)
}

/// `freq_hz,power` table with a header row.
pub fn encode_psd(psd: &Psd) -> String {
    let mut out = String::from("freq_hz,power\n");
    for (f, p) in psd.frequencies().zip(psd.values()) {
        writeln!(out, "{f:?},{p:?}").unwrap();
    }
    out
}

pub fn write_psd(path: &Path, psd: &Psd) -> Result<()> {
    write_file(path, encode_psd(psd).as_bytes())
}

/// Parses a `freq_hz,power` table. The sample rate is twice the last
/// (Nyquist) frequency; the grid must be uniform from 0 Hz.
pub fn parse_psd(path: &Path, text: &str) -> Result<Psd> {
    let mut freqs = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("freq")) {
            continue;
        }
        let (f, p) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, i + 1, "expected two columns"))?;
        let f: f64 = f
            .trim()
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad frequency {f:?}")))?;
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad power {p:?}")))?;
        freqs.push(f);
        values.push(p);
    }
    if values.len() < 2 {
        return Err(parse_err(path, 1, "a PSD table needs at least two bins"));
    }
    let nyquist = *freqs.last().expect("non-empty");
    let df = nyquist / (freqs.len() - 1) as f64;
    for (k, f) in freqs.iter().enumerate() {
        if (f - k as f64 * df).abs() > 1e-9 * nyquist.max(1.0) {
            return Err(parse_err(
                path,
                k + 2,
                format!("frequency {f} off the uniform grid"),
            ));
        }
    }
    Psd::new(values, 2.0 * nyquist).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn read_psd(path: &Path) -> Result<Psd> {
    parse_psd(path, &read_text(path)?)
}

/// JSON form of a [`NormalizingFilter`].
///
/// `magnitude_sum` is `Σ |H[k]|` over the one-sided bins; on load the
/// magnitude is recomputed from `impulse` and must reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterFile {
    pub fs_hz: f64,
    pub nfft: usize,
    pub eps: f64,
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_source_id: Option<String>,
    pub magnitude_sum: f64,
    pub impulse: Vec<f64>,
}

impl FilterFile {
    pub fn new(
        filter: &NormalizingFilter,
        scheme: Scheme,
        matched_source_id: Option<String>,
    ) -> Self {
        Self {
            fs_hz: filter.fs_hz(),
            nfft: filter.len(),
            eps: filter.eps(),
            scheme,
            matched_source_id,
            magnitude_sum: filter.magnitude().iter().sum(),
            impulse: filter.impulse().to_vec(),
        }
    }

    pub fn into_filter(self) -> Result<NormalizingFilter> {
        if self.impulse.len() != self.nfft {
            return Err(Error::InvalidLength(format!(
                "impulse has {} taps, nfft is {}",
                self.impulse.len(),
                self.nfft
            )));
        }
        let filter = NormalizingFilter::from_impulse(self.impulse, self.fs_hz, self.eps)?;
        let recomputed: f64 = filter.magnitude().iter().sum();
        if (recomputed - self.magnitude_sum).abs() > 1e-9 * self.magnitude_sum.abs().max(1.0) {
            return Err(Error::ChecksumMismatch {
                stored: self.magnitude_sum,
                recomputed,
            });
        }
        Ok(filter)
    }
}

pub fn write_filter(path: &Path, file: &FilterFile) -> Result<()> {
    let json = serde_json::to_vec_pretty(file).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_file(path, &json)
}

pub fn read_filter_file(path: &Path) -> Result<FilterFile> {
    read_json(path)
}

pub fn read_filter(path: &Path) -> Result<NormalizingFilter> {
    read_filter_file(path)?.into_filter()
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    json.push(b'\n');
    write_file(path, &json)
}
