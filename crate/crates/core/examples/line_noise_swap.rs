//! Maps a 50 Hz-line recording onto a 60 Hz-line reference.

use cmmn::oracle::{inject_line_noise, one_over_f_psd, synth_gaussian_record};
use cmmn::pipeline::{adapt_record, reference_from_psds};
use cmmn::{record_psd, PipelineConfig, Scheme, SignalRecord};

fn subject(id: &str, seed: u64, line_hz: f64) -> cmmn::Result<SignalRecord> {
    let base = one_over_f_psd(256.0, 512, 1.0, 4.0, 0.01)?;
    let rec = synth_gaussian_record(&base, 4, 1 << 16, seed)?;
    Ok(inject_line_noise(&rec, line_hz, 5.0, seed + 100)?.with_subject_id(id))
}

fn main() -> cmmn::Result<()> {
    let config = PipelineConfig::default();
    let psds = (0..3)
        .map(|i| {
            Ok((
                format!("us{i}"),
                record_psd(&subject("us", i, 60.0)?, &config.welch)?,
            ))
        })
        .collect::<cmmn::Result<Vec<_>>>()?;
    let fitted = reference_from_psds(psds, Scheme::Barycenter, config.welch)?;

    let target = subject("eu0", 42, 50.0)?;
    let out = adapt_record(&target, &fitted, &config)?;
    let db = |p: &cmmn::Psd, hz: f64| 10.0 * p.values()[p.bin_of(hz)].log10();
    for hz in [50.0, 60.0] {
        println!(
            "{hz} Hz: {:.1} dB -> {:.1} dB (reference {:.1} dB)",
            db(&out.target_psd, hz),
            db(&out.filtered_psd, hz),
            db(out.reference.psd(), hz)
        );
    }
    let r = &out.report;
    println!(
        "w2 {:.4} -> {:.4}, hellinger {:.4} -> {:.4}",
        r.w2_before, r.w2_after, r.hellinger_before, r.hellinger_after
    );
    Ok(())
}
