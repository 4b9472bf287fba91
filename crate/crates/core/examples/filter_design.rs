//! Designs a zero-phase normalizing filter and prints its frequency response.

use cmmn::oracle::one_over_f_psd;
use cmmn::{design_filter, Psd};

fn main() -> cmmn::Result<()> {
    let fs = 256.0;
    let reference = one_over_f_psd(fs, 512, 1.0, 8.0, 0.01)?;

    // Target carries a 50 Hz line on top of the reference shape.
    let mut v = reference.values().to_vec();
    let k = reference.bin_of(50.0);
    v[k] *= 100.0;
    let target = Psd::new(v, fs)?;

    let filter = design_filter(&reference, &target, 0.0)?;
    println!(
        "{} taps, group delay {} samples (removed on apply)",
        filter.len(),
        filter.group_delay()
    );
    println!("freq_hz\tmagnitude");
    for (f, m) in filter.frequency_response(17)? {
        println!("{f:.1}\t{m:.4}");
    }
    println!("at 50 Hz: {:.4}", filter.magnitude()[k]);
    Ok(())
}
