//! Batch pipeline: dataset manifests, reference fitting on source subjects,
//! and per-target filter design and application.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{default_eps, design_filter, NormalizingFilter};
use crate::io::{self, Dtype, FilterFile};
use crate::spectral::{l1_normalize, record_psd, Psd, SignalRecord, WelchConfig};
use crate::transport::{
    barycenter_arithmetic, barycenter_normalized, barycenter_wasserstein, hellinger, match_subject,
    w2_spectral, ReferenceSpectrum, Scheme, SourceSpectrum,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub subject_id: String,
    pub fs_hz: f64,
    pub channels: usize,
    pub samples: usize,
    /// Relative paths resolve against the manifest's directory.
    pub data_path: PathBuf,
    pub dtype: Dtype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub subjects: Vec<SubjectEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(dataset_id: impl Into<String>, subjects: Vec<SubjectEntry>) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            subjects,
            base_dir: PathBuf::new(),
        }
    }

    /// Directory relative data paths are resolved against.
    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut m: DatasetManifest = io::read_json(path)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    /// Checks that subject ids are unique.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in &self.subjects {
            if !seen.insert(s.subject_id.as_str()) {
                return Err(Error::DuplicateSubject(s.subject_id.clone()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &SubjectEntry) -> PathBuf {
        self.base_dir.join(&entry.data_path)
    }

    pub fn load_record(&self, entry: &SubjectEntry) -> Result<SignalRecord> {
        load_record(&self.resolve(entry), entry)
    }

    /// Adds or replaces the entry with the same subject id.
    pub fn upsert(&mut self, entry: SubjectEntry) {
        match self
            .subjects
            .iter_mut()
            .find(|s| s.subject_id == entry.subject_id)
        {
            Some(slot) => *slot = entry,
            None => self.subjects.push(entry),
        }
    }
}

/// Reads the signal file described by `entry` from `path`.
pub fn load_record(path: &Path, entry: &SubjectEntry) -> Result<SignalRecord> {
    io::read_signal(
        path,
        entry.dtype,
        &entry.subject_id,
        entry.fs_hz,
        entry.channels,
        entry.samples,
    )
    .map_err(|e| e.in_subject(&entry.subject_id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub welch: WelchConfig,
    pub scheme: Scheme,
    /// Absolute regularizer; `None` uses `1e-12 · max(reference)`.
    pub eps: Option<f64>,
    /// ℓ1-normalize the target PSD before forming the filter ratio.
    pub normalize_target: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            welch: WelchConfig::default(),
            scheme: Scheme::Barycenter,
            eps: None,
            normalize_target: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.welch.validate()?;
        if let Some(eps) = self.eps {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "eps {eps} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Source-side result of fitting: the reference for barycenter schemes,
/// plus every source subject's channel-averaged PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedReference {
    pub scheme: Scheme,
    pub welch: WelchConfig,
    pub sources: Vec<SourceSpectrum>,
    /// Absent for subject-to-subject, which matches per target.
    pub reference: Option<ReferenceSpectrum>,
}

impl FittedReference {
    pub fn fs_hz(&self) -> f64 {
        self.sources[0].psd.fs_hz()
    }

    pub fn nfft(&self) -> usize {
        self.sources[0].psd.nfft()
    }

    /// Reference spectrum for a target whose channel-averaged PSD is
    /// `target`.
    pub fn reference_for(&self, target: &Psd) -> Result<ReferenceSpectrum> {
        match &self.reference {
            Some(r) => Ok(r.clone()),
            None => {
                let m = match_subject(&l1_normalize(target)?, &self.sources)?;
                ReferenceSpectrum::new(
                    Scheme::SubjectToSubject,
                    m.psd,
                    Some(self.sources[m.index].id.clone()),
                    self.sources.len(),
                )
            }
        }
    }

    /// Writes `reference.json` plus PSD tables into `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let mut sources = Vec::with_capacity(self.sources.len());
        for s in &self.sources {
            let rel = PathBuf::from("sources").join(format!("{}.psd.csv", s.id));
            io::write_psd(&dir.join(&rel), &s.psd)?;
            sources.push(SourceEntry {
                subject_id: s.id.clone(),
                psd_path: rel,
            });
        }
        let reference_psd = match &self.reference {
            Some(r) => {
                let rel = PathBuf::from("reference.psd.csv");
                io::write_psd(&dir.join(&rel), r.psd())?;
                Some(rel)
            }
            None => None,
        };
        let file = ReferenceFile {
            scheme: self.scheme,
            fs_hz: self.fs_hz(),
            nfft: self.nfft(),
            source_count: self.sources.len(),
            welch: self.welch,
            reference_psd,
            sources,
        };
        let path = dir.join("reference.json");
        io::write_json(&path, &file)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ReferenceFile = io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let sources = file
            .sources
            .iter()
            .map(|s| SourceSpectrum::new(&s.subject_id, io::read_psd(&base.join(&s.psd_path))?))
            .collect::<Result<Vec<_>>>()?;
        if sources.is_empty() {
            return Err(Error::EmptyInput("reference has no source subjects"));
        }
        let reference = match &file.reference_psd {
            Some(rel) => Some(ReferenceSpectrum::new(
                file.scheme,
                io::read_psd(&base.join(rel))?,
                None,
                file.source_count,
            )?),
            None => None,
        };
        if reference.is_none() != (file.scheme == Scheme::SubjectToSubject) {
            return Err(Error::InvalidConfig(format!(
                "reference file for scheme {} {} a reference PSD",
                file.scheme,
                if reference.is_some() {
                    "must not carry"
                } else {
                    "needs"
                }
            )));
        }
        let fitted = FittedReference {
            scheme: file.scheme,
            welch: file.welch,
            sources,
            reference,
        };
        if fitted.fs_hz() != file.fs_hz || fitted.nfft() != file.nfft {
            return Err(Error::GridMismatch(format!(
                "reference.json declares {} Hz / nfft {}, PSD tables are {} Hz / nfft {}",
                file.fs_hz,
                file.nfft,
                fitted.fs_hz(),
                fitted.nfft()
            )));
        }
        Ok(fitted)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SourceEntry {
    subject_id: String,
    psd_path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReferenceFile {
    scheme: Scheme,
    fs_hz: f64,
    nfft: usize,
    source_count: usize,
    welch: WelchConfig,
    #[serde(default)]
    reference_psd: Option<PathBuf>,
    sources: Vec<SourceEntry>,
}

/// Channel-averaged PSD of every subject in manifest order.
pub fn subject_psds(manifest: &DatasetManifest, welch: &WelchConfig) -> Result<Vec<(String, Psd)>> {
    manifest
        .subjects
        .par_iter()
        .map(|entry| {
            let rec = manifest.load_record(entry)?;
            let psd = record_psd(&rec, welch).map_err(|e| e.in_subject(&entry.subject_id))?;
            Ok((entry.subject_id.clone(), psd))
        })
        .collect()
}

/// Builds the source-side reference from channel-averaged PSDs.
pub fn reference_from_psds(
    psds: Vec<(String, Psd)>,
    scheme: Scheme,
    welch: WelchConfig,
) -> Result<FittedReference> {
    if psds.is_empty() {
        return Err(Error::EmptyInput("no source subjects"));
    }
    let raw: Vec<Psd> = psds.iter().map(|(_, p)| p.clone()).collect();
    let count = raw.len();
    let reference = match scheme {
        Scheme::Barycenter => Some(barycenter_arithmetic(&raw)?),
        Scheme::NormalizedBarycenter => Some(barycenter_normalized(&raw)?.into_psd()),
        Scheme::WassersteinBarycenter => Some(barycenter_wasserstein(&raw)?),
        Scheme::SubjectToSubject => None,
    }
    .map(|p| ReferenceSpectrum::new(scheme, p, None, count))
    .transpose()?;
    let sources = psds
        .into_iter()
        .map(|(id, p)| SourceSpectrum::new(&id, p).map_err(|e| e.in_subject(&id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FittedReference {
        scheme,
        welch,
        sources,
        reference,
    })
}

/// Channel-averaged PSDs of the source subjects, combined per the scheme.
pub fn fit_reference(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
) -> Result<FittedReference> {
    config.validate()?;
    manifest.validate()?;
    if manifest.subjects.is_empty() {
        return Err(Error::EmptyInput("source manifest has no subjects"));
    }
    let psds = subject_psds(manifest, &config.welch)?;
    reference_from_psds(psds, config.scheme, config.welch)
}

/// One row of the per-subject report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub subject_id: String,
    pub scheme: Scheme,
    pub matched_source_id: Option<String>,
    pub w2_before: f64,
    pub w2_after: f64,
    pub hellinger_before: f64,
    pub hellinger_after: f64,
}

pub const REPORT_HEADER: &str =
    "subject_id\tscheme\tmatched_source_id\tw2_before\tw2_after\thellinger_before\thellinger_after";

/// TSV report; an empty field marks a missing matched source.
pub fn format_report(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}",
            r.subject_id,
            r.scheme,
            r.matched_source_id.as_deref().unwrap_or(""),
            r.w2_before,
            r.w2_after,
            r.hellinger_before,
            r.hellinger_after
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone)]
pub struct SubjectOutcome {
    pub target_psd: Psd,
    pub reference: ReferenceSpectrum,
    pub filter: NormalizingFilter,
    pub filtered: SignalRecord,
    pub filtered_psd: Psd,
    pub report: ReportRow,
}

/// Designs and applies one target subject's filter.
pub fn adapt_record(
    record: &SignalRecord,
    fitted: &FittedReference,
    config: &PipelineConfig,
) -> Result<SubjectOutcome> {
    let welch = &config.welch;
    if record.fs_hz() != fitted.fs_hz() || welch.nfft != fitted.nfft() {
        return Err(Error::GridMismatch(format!(
            "target is {} Hz with nfft {}, reference is {} Hz with nfft {}",
            record.fs_hz(),
            welch.nfft,
            fitted.fs_hz(),
            fitted.nfft()
        )));
    }
    let target_psd = record_psd(record, welch)?;
    let reference = fitted.reference_for(&target_psd)?;
    let ratio_target = if config.normalize_target {
        l1_normalize(&target_psd)?.into_psd()
    } else {
        target_psd.clone()
    };
    let eps = config.eps.unwrap_or_else(|| default_eps(reference.psd()));
    let filter = design_filter(reference.psd(), &ratio_target, eps)?;
    let filtered = filter.apply(record)?;
    let filtered_psd = record_psd(&filtered, welch)?;

    let ref_pmf = l1_normalize(reference.psd())?;
    let report = ReportRow {
        subject_id: record.subject_id().to_string(),
        scheme: fitted.scheme,
        matched_source_id: reference.matched_source_id().map(str::to_string),
        w2_before: w2_spectral(&target_psd, reference.psd())?,
        w2_after: w2_spectral(&filtered_psd, reference.psd())?,
        hellinger_before: hellinger(&l1_normalize(&target_psd)?, &ref_pmf)?,
        hellinger_after: hellinger(&l1_normalize(&filtered_psd)?, &ref_pmf)?,
    };
    Ok(SubjectOutcome {
        target_psd,
        reference,
        filter,
        filtered,
        filtered_psd,
        report,
    })
}

/// Filters every target subject, in manifest order.
///
/// `config.welch` must produce the reference's grid; the scheme comes from
/// the fitted reference.
pub fn fit_apply_target(
    manifest: &DatasetManifest,
    fitted: &FittedReference,
    config: &PipelineConfig,
) -> Result<Vec<SubjectOutcome>> {
    config.validate()?;
    manifest.validate()?;
    if manifest.subjects.is_empty() {
        return Err(Error::EmptyInput("target manifest has no subjects"));
    }
    manifest
        .subjects
        .par_iter()
        .map(|entry| {
            let rec = manifest.load_record(entry)?;
            adapt_record(&rec, fitted, config).map_err(|e| e.in_subject(&entry.subject_id))
        })
        .collect()
}

/// Writes per-subject filter and filtered-signal files, a manifest of the
/// filtered data, and `report.tsv`. Returns the report text.
pub fn write_outcomes(
    out_dir: &Path,
    dataset_id: &str,
    outcomes: &[SubjectOutcome],
) -> Result<String> {
    let mut filtered_manifest = DatasetManifest::new(format!("{dataset_id}-filtered"), Vec::new());
    for o in outcomes {
        let id = &o.report.subject_id;
        let file = FilterFile::new(
            &o.filter,
            o.report.scheme,
            o.report.matched_source_id.clone(),
        );
        io::write_filter(&out_dir.join(format!("{id}.filter.json")), &file)?;
        let data_path = PathBuf::from(format!("{id}.filtered.bin"));
        io::write_signal(&out_dir.join(&data_path), &o.filtered, Dtype::F64le)?;
        io::write_psd(
            &out_dir.join(format!("{id}.filtered.psd.csv")),
            &o.filtered_psd,
        )?;
        filtered_manifest.subjects.push(SubjectEntry {
            subject_id: id.clone(),
            fs_hz: o.filtered.fs_hz(),
            channels: o.filtered.channels(),
            samples: o.filtered.samples(),
            data_path,
            dtype: Dtype::F64le,
        });
    }
    filtered_manifest.save(&out_dir.join("manifest.json"))?;
    let rows: Vec<ReportRow> = outcomes.iter().map(|o| o.report.clone()).collect();
    let report = format_report(&rows);
    io::write_file(&out_dir.join("report.tsv"), report.as_bytes())?;
    Ok(report)
}
