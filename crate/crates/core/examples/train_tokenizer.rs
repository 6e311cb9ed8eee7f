//! Trains merges on a symbol corpus, saves the tokenizer file and shows the
//! longest learned tokens and the shrinking token count.
//!
//! cargo run --release --example train_tokenizer [num_merges] [strategy]

use ecg_byte::bpe::{train_with, TrainStrategy};
use ecg_byte::preprocess::estimate_percentiles;
use ecg_byte::quantizer::{concat_corpus, symbolize, NormalizationParams};
use ecg_byte::synth::{synthetic_corpus, SynthConfig};

fn main() -> ecg_byte::Result<()> {
    let mut args = std::env::args().skip(1);
    let num_merges: usize = args.next().map_or(500, |a| a.parse().expect("num_merges"));
    let strategy: TrainStrategy = args.next().map_or(TrainStrategy::default(), |a| a.parse().expect("strategy"));

    let records = synthetic_corpus(100, 5, &SynthConfig::default())?;
    let stats = estimate_percentiles(&records, 300_000, 0)?;
    let params = NormalizationParams::new(stats.p1, stats.p99)?;
    let seqs: Vec<_> = records.iter().map(|r| symbolize(r, &params)).collect();
    let corpus = concat_corpus(&seqs);

    let start = std::time::Instant::now();
    let out = train_with(corpus.as_bytes(), num_merges, 26, strategy)?;
    println!(
        "{strategy:?}: {} merges on {} symbols in {:.2}s",
        out.tokenizer.num_merges(),
        corpus.len(),
        start.elapsed().as_secs_f64()
    );
    for step in [0, num_merges / 4, num_merges / 2, num_merges] {
        if let Some(c) = out.token_counts.get(step) {
            println!("  after {step:>5} merges: {c} tokens");
        }
    }
    println!("compression {:.2}x", corpus.len() as f64 / out.ids.len() as f64);

    let mut longest: Vec<_> = (256..out.tokenizer.next_id()).collect();
    longest.sort_by_key(|&id| std::cmp::Reverse(out.tokenizer.expansion(id).map_or(0, |e| e.len())));
    for id in longest.into_iter().take(5) {
        println!("  token {id}: {}", out.tokenizer.vocab_string(id)?);
    }

    let path = std::env::temp_dir().join("example.ecgbyte");
    out.tokenizer.save(&path)?;
    println!("saved {}", path.display());
    Ok(())
}
