//! File-based batch run: write source and target datasets, fit a
//! subject-to-subject reference, adapt the targets and print the report.
//!
//! Usage: `cargo run --example pipeline_batch [OUT_DIR]`

use std::path::{Path, PathBuf};

use cmmn::io::{write_signal, Dtype};
use cmmn::oracle::{inject_line_noise, one_over_f_psd, synth_gaussian_record};
use cmmn::pipeline::{write_outcomes, SubjectEntry};
use cmmn::{
    fit_apply_target, fit_reference, DatasetManifest, FittedReference, PipelineConfig, Scheme,
};

fn dataset(
    dir: &Path,
    name: &str,
    line_hz: f64,
    knees: &[f64],
    seed: u64,
) -> cmmn::Result<DatasetManifest> {
    let mut m = DatasetManifest::new(name, Vec::new());
    for (i, &knee) in knees.iter().enumerate() {
        let id = format!("{name}{i}");
        let base = one_over_f_psd(256.0, 512, 1.0, knee, 0.01)?;
        let rec = synth_gaussian_record(&base, 8, 30 * 256, seed + i as u64)?;
        let rec = inject_line_noise(&rec, line_hz, 2.0, seed + 50 + i as u64)?;
        let data_path = PathBuf::from(format!("{name}/{id}.bin"));
        write_signal(&dir.join(&data_path), &rec, Dtype::F64le)?;
        m.subjects.push(SubjectEntry {
            subject_id: id,
            fs_hz: rec.fs_hz(),
            channels: rec.channels(),
            samples: rec.samples(),
            data_path,
            dtype: Dtype::F64le,
        });
    }
    let path = dir.join(format!("{name}.json"));
    m.save(&path)?;
    DatasetManifest::load(&path)
}

fn main() -> cmmn::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("cmmn-pipeline-batch"));
    let source = dataset(&dir, "src", 60.0, &[2.0, 8.0, 30.0], 1)?;
    let target = dataset(&dir, "tgt", 50.0, &[3.0, 25.0], 10)?;

    let config = PipelineConfig {
        scheme: Scheme::SubjectToSubject,
        ..PipelineConfig::default()
    };
    let ref_path = fit_reference(&source, &config)?.save(&dir.join("reference"))?;
    let fitted = FittedReference::load(&ref_path)?;
    let outcomes = fit_apply_target(&target, &fitted, &config)?;
    print!(
        "{}",
        write_outcomes(&dir.join("adapted"), "tgt", &outcomes)?
    );
    println!("outputs in {}", dir.display());
    Ok(())
}
