//! Nearest source subject by Hellinger distance on normalized spectra.

use cmmn::oracle::one_over_f_psd;
use cmmn::{hellinger, l1_normalize, match_subject, SourceSpectrum};

fn main() -> cmmn::Result<()> {
    let fs = 256.0;
    let sources = [2.0, 6.0, 15.0, 40.0]
        .iter()
        .enumerate()
        .map(|(i, &knee)| {
            SourceSpectrum::new(format!("src{i}"), one_over_f_psd(fs, 256, 1.0, knee, 0.01)?)
        })
        .collect::<cmmn::Result<Vec<_>>>()?;

    // Scale does not matter; only the spectral shape does.
    let target = one_over_f_psd(fs, 256, 250.0, 12.0, 0.01)?;
    let t = l1_normalize(&target)?;
    for s in &sources {
        println!("{}\thellinger {:.5}", s.id, hellinger(&t, &s.normalized)?);
    }
    let m = match_subject(&t, &sources)?;
    println!(
        "match: {} (distance {:.5})",
        sources[m.index].id, m.distance
    );
    Ok(())
}
