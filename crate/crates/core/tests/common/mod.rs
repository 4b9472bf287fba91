#![allow(dead_code)]

use cmmn::oracle::{inject_line_noise, one_over_f_psd, synth_gaussian_record};
use cmmn::{Psd, SignalRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FS: f64 = 256.0;
pub const LONG: usize = 1 << 18;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 1/f-shaped base spectrum on the default 512-point grid.
pub fn pink() -> Psd {
    one_over_f_psd(FS, 512, 1.0, 4.0, 0.01).unwrap()
}

/// Gaussian 1/f record with an optional sinusoidal mains line.
pub fn subject(
    id: &str,
    channels: usize,
    len: usize,
    seed: u64,
    line: Option<(f64, f64)>,
) -> SignalRecord {
    let rec = synth_gaussian_record(&pink(), channels, len, seed).unwrap();
    let rec = match line {
        Some((hz, amp)) => inject_line_noise(&rec, hz, amp, seed ^ 0xface).unwrap(),
        None => rec,
    };
    rec.with_subject_id(id)
}

pub fn rel_l2(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Random PSD with some exact zeros.
pub fn random_psd(rng: &mut ChaCha8Rng, bins: usize, fs: f64) -> Psd {
    let v = (0..bins)
        .map(|_| {
            if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.0..10.0f64).powi(2)
            }
        })
        .collect();
    Psd::new(v, fs).unwrap()
}

pub fn report(id: &str, name: &str, pass: bool, detail: String) {
    println!(
        "[{}] {id} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
