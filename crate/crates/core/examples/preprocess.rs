//! Filters, denoises, downsamples and segments a raw 500 Hz record, then
//! estimates clipping percentiles from the segments.
//!
//! cargo run --example preprocess

use ecg_byte::preprocess::{estimate_percentiles, preprocess_record, PreprocessConfig};
use ecg_byte::synth::{synthetic_record, SynthConfig};

fn main() -> ecg_byte::Result<()> {
    let raw_cfg = SynthConfig { num_samples: 5000, sample_rate_hz: 500.0, ..Default::default() };
    let raw = synthetic_record(1, &raw_cfg)?;
    println!("raw: {} leads x {} samples at {} Hz", raw.num_leads(), raw.num_samples(), raw.sample_rate_hz());

    let cfg = PreprocessConfig::default();
    let segments = preprocess_record(&raw, &cfg)?;
    for (i, seg) in segments.iter().enumerate() {
        let lead0 = seg.data().row(0);
        let (lo, hi) = lead0.iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        println!(
            "segment {i}: {}x{} at {} Hz, lead I range [{lo:.3}, {hi:.3}]",
            seg.num_leads(),
            seg.num_samples(),
            seg.sample_rate_hz()
        );
    }

    let stats = estimate_percentiles(&segments, cfg.sample_budget, cfg.seed)?;
    println!("p1 = {:.4}, p99 = {:.4} from {} samples", stats.p1, stats.p99, stats.sample_count);
    println!("\nconfig file:\n{}", cfg.to_kv_string());
    Ok(())
}
