//! Token usage ranking, encoded length histogram and compression ratio for
//! an encoded corpus.
//!
//! cargo run --release --example corpus_stats

use ecg_byte::analysis::{compression_ratio, length_distribution, token_usage, write_lengths_csv, write_usage_csv};
use ecg_byte::bpe::train;
use ecg_byte::codec::Trie;
use ecg_byte::preprocess::estimate_percentiles;
use ecg_byte::quantizer::{concat_corpus, symbolize, NormalizationParams};
use ecg_byte::synth::{synthetic_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records = synthetic_corpus(60, 21, &SynthConfig::default())?;
    let stats = estimate_percentiles(&records, 200_000, 0)?;
    let params = NormalizationParams::new(stats.p1, stats.p99)?;
    let seqs: Vec<_> = records.iter().map(|r| symbolize(r, &params)).collect();
    let tok = train(concat_corpus(&seqs).as_bytes(), 400, 26)?.tokenizer;
    let encoded = Trie::build(&tok)?.encode_batch(&seqs);

    let usage = token_usage(encoded.iter().map(Vec::as_slice));
    println!("{} distinct tokens used of {}", usage.counts().len(), tok.vocab_size());
    let mut out = std::io::stdout().lock();
    let mut top = Vec::new();
    write_usage_csv(&mut top, &usage)?;
    for line in String::from_utf8_lossy(&top).lines().take(6) {
        println!("{line}");
    }

    let lengths: Vec<usize> = encoded.iter().map(Vec::len).collect();
    let summary = length_distribution(&lengths, 50)?;
    if let Some(s) = &summary {
        println!("lengths: min {} max {} mean {:.1}", s.min, s.max, s.mean);
    }
    write_lengths_csv(&mut out, summary.as_ref())?;
    let symbols: usize = seqs.iter().map(|s| s.len()).sum();
    println!("compression {:.2}x", compression_ratio(symbols, lengths.iter().sum())?);
    Ok(())
}
