//! The three barycenter schemes over a few synthetic source spectra.

use cmmn::oracle::one_over_f_psd;
use cmmn::{
    barycenter_arithmetic, barycenter_normalized, barycenter_wasserstein, w2_spectral, Psd,
};

fn main() -> cmmn::Result<()> {
    let fs = 256.0;
    let sources: Vec<Psd> = [(1.0, 4.0), (4.0, 8.0), (0.5, 20.0)]
        .iter()
        .map(|&(scale, knee)| one_over_f_psd(fs, 256, scale, knee, 0.01))
        .collect::<cmmn::Result<_>>()?;

    let arith = barycenter_arithmetic(&sources)?;
    let normalized = barycenter_normalized(&sources)?;
    let wasserstein = barycenter_wasserstein(&sources)?;

    for (name, b) in [
        ("arithmetic", &arith),
        ("normalized", normalized.as_psd()),
        ("wasserstein", &wasserstein),
    ] {
        let cost: f64 = sources
            .iter()
            .map(|s| w2_spectral(b, s).map(|d| d * d))
            .sum::<cmmn::Result<f64>>()?;
        println!(
            "{name:12} total power {:.4}  Σ W2² to sources {:.4}",
            b.total_power(),
            cost
        );
    }
    Ok(())
}
