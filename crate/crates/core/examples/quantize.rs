//! Maps a record to letters `a..z` and back, reporting the reconstruction
//! error against the half-bin bound.
//!
//! cargo run --example quantize

use ecg_byte::preprocess::estimate_percentiles;
use ecg_byte::quantizer::{desymbolize, symbolize, NormalizationParams};
use ecg_byte::synth::{synthetic_record, SynthConfig};

fn main() -> ecg_byte::Result<()> {
    let rec = synthetic_record(3, &SynthConfig::default())?;
    let stats = estimate_percentiles([&rec], 100_000, 0)?;
    let params = NormalizationParams::new(stats.p1, stats.p99)?;
    println!("{}", params.to_kv_string());

    let symbols = symbolize(&rec, &params);
    let text = String::from_utf8_lossy(&symbols.as_bytes()[..80]);
    println!("first 80 symbols of lead I: {text}");

    let back = desymbolize(symbols.as_bytes(), &params, (rec.num_leads(), rec.num_samples()), rec.sample_rate_hz())?;
    let (lo, hi) = (params.p1 - params.eps1, params.p99 + params.eps1);
    let mut worst = 0.0f64;
    for (a, b) in rec.data().iter().zip(back.data().iter()) {
        let x = f64::from(*a);
        if (lo..=hi).contains(&x) {
            worst = worst.max((x - f64::from(*b)).abs());
        }
    }
    println!("max in-range error {worst:.5}, half bin {:.5}", params.bin_width() / 2.0);
    Ok(())
}
