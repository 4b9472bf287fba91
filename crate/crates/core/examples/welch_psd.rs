//! Welch PSD of a noisy two-tone record, per channel and channel-averaged.

use cmmn::oracle::{inject_line_noise, one_over_f_psd, synth_gaussian_record};
use cmmn::{channel_average, l1_normalize, psd_matrix, WelchConfig};

fn main() -> cmmn::Result<()> {
    let fs = 256.0;
    let base = one_over_f_psd(fs, 512, 1.0, 4.0, 0.01)?;
    let rec = synth_gaussian_record(&base, 4, 60 * 256, 1)?;
    let rec = inject_line_noise(&rec, 50.0, 2.0, 2)?;

    let cfg = WelchConfig::default();
    let per_channel = psd_matrix(&rec, &cfg)?;
    let avg = channel_average(&per_channel)?;
    let pmf = l1_normalize(&avg)?;

    println!(
        "{} channels, {} bins, df = {} Hz",
        per_channel.len(),
        avg.bins(),
        avg.df()
    );
    println!("freq_hz\tpower\tpmf");
    for k in (0..avg.bins()).step_by(16).chain([avg.bin_of(50.0)]) {
        println!(
            "{:.1}\t{:.4e}\t{:.4e}",
            avg.frequency(k),
            avg.values()[k],
            pmf.values()[k]
        );
    }
    Ok(())
}
