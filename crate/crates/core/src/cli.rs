//! Command-line front end.
//!
//! Reports go to stdout, diagnostics to stderr. Exit status is 0 on
//! success, 1 for invalid input or usage, 2 for filesystem failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, Result};
use crate::io::{self, Dtype};
use crate::oracle::{inject_line_noise, synth_gaussian_record};
use crate::pipeline::{
    fit_apply_target, fit_reference, subject_psds, write_outcomes, DatasetManifest,
    FittedReference, PipelineConfig, SubjectEntry,
};
use crate::spectral::{l1_normalize, Psd, WelchConfig, Window};
use crate::transport::{
    barycenter_arithmetic, barycenter_normalized, barycenter_wasserstein, hellinger, match_subject,
    w2_spectral, Scheme, SourceSpectrum,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cmmn",
    version,
    about = "Spectral normalization of multichannel recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Channel-averaged Welch PSD of every subject in a manifest.
    Psd {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        welch: WelchArgs,
        /// Output directory for `<subject>.psd.csv` tables.
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine PSD tables into a reference spectrum.
    Barycenter {
        #[arg(long = "psd", required = true)]
        psds: Vec<PathBuf>,
        #[arg(long, default_value = "barycenter")]
        scheme: String,
        /// Output table; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest source PSD to a target in Hellinger distance.
    Match {
        #[arg(long)]
        target: PathBuf,
        #[arg(long = "source", required = true)]
        sources: Vec<PathBuf>,
    },
    /// Fit the source reference from a source manifest.
    Fit {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        welch: WelchArgs,
        #[arg(long, default_value = "barycenter")]
        scheme: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design and apply per-subject filters to a target manifest.
    Apply {
        #[arg(long)]
        manifest: PathBuf,
        /// `reference.json` written by `fit`.
        #[arg(long)]
        reference: PathBuf,
        #[command(flatten)]
        welch: WelchArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        normalize_target: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Distance between two PSD tables.
    Distance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// `w2` or `hellinger`.
        #[arg(long, default_value = "w2")]
        metric: String,
    },
    /// Synthesize a stationary Gaussian record with a given PSD.
    Synth {
        #[arg(long)]
        psd: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        /// Add a random-phase sinusoid at this frequency.
        #[arg(long)]
        line_hz: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        line_amp: f64,
        /// Signal file; `.csv` selects CSV, anything else f64le.
        #[arg(long)]
        out: PathBuf,
        /// Add the record to this manifest (created if missing).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        subject: Option<String>,
    },
}

#[derive(Debug, Args)]
struct WelchArgs {
    #[arg(long)]
    nperseg: Option<usize>,
    #[arg(long)]
    noverlap: Option<usize>,
    #[arg(long)]
    nfft: Option<usize>,
    /// hann, bartlett or rectangular.
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    no_detrend: bool,
}

impl WelchArgs {
    /// Applies the given flags over `base`. A new `nperseg` without explicit
    /// `noverlap`/`nfft` keeps half overlap and `nfft = nperseg`.
    fn over(&self, base: WelchConfig) -> Result<WelchConfig> {
        let mut cfg = base;
        if let Some(n) = self.nperseg {
            cfg.nperseg = n;
            cfg.noverlap = n / 2;
            cfg.nfft = n;
        }
        if let Some(n) = self.noverlap {
            cfg.noverlap = n;
        }
        if let Some(n) = self.nfft {
            cfg.nfft = n;
        }
        if let Some(w) = &self.window {
            cfg.window = w.parse::<Window>()?;
        }
        if self.no_detrend {
            cfg.detrend = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn parse_scheme(s: &str, allow_matching: bool) -> Result<Scheme> {
    let scheme: Scheme = s.parse()?;
    if scheme == Scheme::SubjectToSubject && !allow_matching {
        return Err(Error::InvalidConfig(
            "subject_to_subject has no single barycenter; use `match` or `fit`".into(),
        ));
    }
    Ok(scheme)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Psd {
            manifest,
            welch,
            out: dir,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let cfg = welch.over(WelchConfig::default())?;
            for (id, psd) in subject_psds(&m, &cfg)? {
                let path = dir.join(format!("{id}.psd.csv"));
                io::write_psd(&path, &psd)?;
                writeln!(out, "{id}\t{}", path.display()).map_err(out_err)?;
            }
        }
        Command::Barycenter {
            psds,
            scheme,
            out: dest,
        } => {
            let scheme = parse_scheme(&scheme, false)?;
            let inputs = psds
                .iter()
                .map(|p| io::read_psd(p))
                .collect::<Result<Vec<_>>>()?;
            let result = match scheme {
                Scheme::Barycenter => barycenter_arithmetic(&inputs)?,
                Scheme::NormalizedBarycenter => barycenter_normalized(&inputs)?.into_psd(),
                Scheme::WassersteinBarycenter => barycenter_wasserstein(&inputs)?,
                Scheme::SubjectToSubject => unreachable!("rejected above"),
            };
            emit_psd(&result, dest.as_deref(), out)?;
        }
        Command::Match { target, sources } => {
            let target = l1_normalize(&io::read_psd(&target)?)?;
            let lib = sources
                .iter()
                .map(|p| SourceSpectrum::new(p.display().to_string(), io::read_psd(p)?))
                .collect::<Result<Vec<_>>>()?;
            let best = match_subject(&target, &lib)?;
            let distances = lib
                .iter()
                .map(|s| hellinger(&s.normalized, &target))
                .collect::<Result<Vec<_>>>()?;
            let report = json!({
                "index": best.index,
                "source": lib[best.index].id,
                "hellinger": best.distance,
                "distances": distances,
            });
            writeln!(out, "{report}").map_err(out_err)?;
        }
        Command::Fit {
            manifest,
            welch,
            scheme,
            out: dir,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let config = PipelineConfig {
                welch: welch.over(WelchConfig::default())?,
                scheme: parse_scheme(&scheme, true)?,
                ..PipelineConfig::default()
            };
            let fitted = fit_reference(&m, &config)?;
            let path = fitted.save(&dir)?;
            let report = json!({
                "reference": path.display().to_string(),
                "scheme": fitted.scheme,
                "source_count": fitted.sources.len(),
                "fs_hz": fitted.fs_hz(),
                "nfft": fitted.nfft(),
            });
            writeln!(out, "{report}").map_err(out_err)?;
        }
        Command::Apply {
            manifest,
            reference,
            welch,
            eps,
            normalize_target,
            seed,
            out: dir,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let fitted = FittedReference::load(&reference)?;
            let config = PipelineConfig {
                welch: welch.over(fitted.welch)?,
                scheme: fitted.scheme,
                eps,
                normalize_target,
                seed,
            };
            let outcomes = fit_apply_target(&m, &fitted, &config)?;
            let report = write_outcomes(&dir, &m.dataset_id, &outcomes)?;
            out.write_all(report.as_bytes()).map_err(out_err)?;
        }
        Command::Distance { a, b, metric } => {
            let a = io::read_psd(&a)?;
            let b = io::read_psd(&b)?;
            let d = match metric.as_str() {
                "w2" => w2_spectral(&a, &b)?,
                "hellinger" => hellinger(&l1_normalize(&a)?, &l1_normalize(&b)?)?,
                other => return Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
            };
            writeln!(out, "{d:?}").map_err(out_err)?;
        }
        Command::Synth {
            psd,
            length,
            seed,
            channels,
            line_hz,
            line_amp,
            out: dest,
            manifest,
            subject,
        } => {
            let psd = io::read_psd(&psd)?;
            let subject = subject.unwrap_or_else(|| file_stem(&dest));
            let mut rec = synth_gaussian_record(&psd, channels, length, seed)?
                .with_subject_id(subject.clone());
            if let Some(f) = line_hz {
                // Separate stream so the line phases do not shift the noise.
                rec = inject_line_noise(&rec, f, line_amp, seed.wrapping_add(0x9e37_79b9))?;
            }
            let dtype = Dtype::from_path(&dest);
            io::write_signal(&dest, &rec, dtype)?;
            if let Some(mpath) = manifest {
                add_to_manifest(&mpath, &dest, &rec, &subject, dtype)?;
            }
            let report = json!({
                "path": dest.display().to_string(),
                "subject_id": subject,
                "fs_hz": rec.fs_hz(),
                "channels": rec.channels(),
                "samples": rec.samples(),
                "seed": seed,
            });
            writeln!(out, "{report}").map_err(out_err)?;
        }
    }
    Ok(())
}

fn emit_psd(psd: &Psd, dest: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match dest {
        Some(p) => {
            io::write_psd(p, psd)?;
            writeln!(out, "{}", p.display()).map_err(out_err)
        }
        None => out
            .write_all(io::encode_psd(psd).as_bytes())
            .map_err(out_err),
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("subject")
        .to_string()
}

fn add_to_manifest(
    manifest: &Path,
    data: &Path,
    rec: &crate::spectral::SignalRecord,
    subject: &str,
    dtype: Dtype,
) -> Result<()> {
    let mut m = if manifest.exists() {
        DatasetManifest::load(manifest)?
    } else {
        DatasetManifest::new(file_stem(manifest), Vec::new())
    };
    let base = match manifest.parent() {
        Some(b) if !b.as_os_str().is_empty() => b,
        _ => Path::new("."),
    };
    let data_path = relative_to(data, base);
    m.upsert(SubjectEntry {
        subject_id: subject.to_string(),
        fs_hz: rec.fs_hz(),
        channels: rec.channels(),
        samples: rec.samples(),
        data_path,
        dtype,
    });
    m.save(manifest)
}

fn relative_to(path: &Path, base: &Path) -> PathBuf {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let (p, b) = (abs(path), abs(base));
    p.strip_prefix(&b).map(Path::to_path_buf).unwrap_or(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_paths_stay_relative() {
        let dir = tempfile::tempdir().unwrap();
        let rec = crate::spectral::SignalRecord::new("a", 8.0, vec![vec![0.0; 4]]).unwrap();
        let manifest = dir.path().join("m.json");
        add_to_manifest(
            &manifest,
            &dir.path().join("data/a.bin"),
            &rec,
            "a",
            Dtype::F64le,
        )
        .unwrap();
        let m = DatasetManifest::load(&manifest).unwrap();
        assert_eq!(m.subjects[0].data_path, Path::new("data/a.bin"));
        assert_eq!(
            relative_to(Path::new("x/y.bin"), Path::new(".")),
            Path::new("x/y.bin")
        );
    }

    #[test]
    fn welch_flag_overrides() {
        let args = WelchArgs {
            nperseg: Some(256),
            noverlap: None,
            nfft: None,
            window: Some("bartlett".into()),
            no_detrend: true,
        };
        let cfg = args.over(WelchConfig::default()).unwrap();
        assert_eq!((cfg.nperseg, cfg.noverlap, cfg.nfft), (256, 128, 256));
        assert_eq!(cfg.window, Window::Bartlett);
        assert!(!cfg.detrend);

        let bad = WelchArgs {
            nperseg: None,
            noverlap: Some(600),
            nfft: None,
            window: None,
            no_detrend: false,
        };
        assert!(bad.over(WelchConfig::default()).is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["cmmn", "frobnicate"]), EXIT_INVALID);
        assert_eq!(run(["cmmn", "distance", "--bogus"]), EXIT_INVALID);
        assert_eq!(run(["cmmn", "--help"]), EXIT_OK);
    }

    #[test]
    fn barycenter_rejects_matching_scheme() {
        assert!(parse_scheme("subject_to_subject", false).is_err());
        assert!(parse_scheme("subject_to_subject", true).is_ok());
        assert!(parse_scheme("median", true).is_err());
    }
}
