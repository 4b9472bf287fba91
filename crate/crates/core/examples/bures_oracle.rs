//! Bures-Wasserstein distance between circulant Gaussians agrees with the
//! closed-form spectral distance.

use cmmn::oracle::{bartlett_taper, bures_wasserstein, circulant_from_acf};
use cmmn::transport::spectral_w2;
use nalgebra::DVector;

fn main() -> cmmn::Result<()> {
    let acf_a: Vec<f64> = (0..8).map(|k| 0.8f64.powi(k)).collect();
    let acf_b: Vec<f64> = (0..8)
        .map(|k| (0.6 * k as f64).cos() + if k == 0 { 0.5 } else { 0.0 })
        .collect();
    let a = circulant_from_acf(&bartlett_taper(&acf_a), 4)?;
    let b = circulant_from_acf(&bartlett_taper(&acf_b), 4)?;

    let zero = DVector::zeros(a.n());
    let bures = bures_wasserstein(&zero, &a.covariance(), &zero, &b.covariance())?;
    let spectral = spectral_w2(a.spectrum(), b.spectrum())?;
    println!("N = {}", a.n());
    println!("bures    {bures:.12}");
    println!("spectral {spectral:.12}");
    println!("|diff|   {:.3e}", (bures - spectral).abs());
    Ok(())
}
