//! End to end on synthetic data: preprocess raw records, sample a training
//! subset, train, encode everything, decode one record and assemble a
//! training sequence.
//!
//! cargo run --release --example pipeline

use ecg_byte::bpe::train;
use ecg_byte::codec::Trie;
use ecg_byte::preprocess::{estimate_percentiles, preprocess_record, PreprocessConfig};
use ecg_byte::quantizer::{concat_corpus, desymbolize, symbolize, NormalizationParams};
use ecg_byte::sampler::{extract_features, fit_cluster_model, stratified_sample, SamplerConfig};
use ecg_byte::sequence::{assemble, SpecialTokens, VocabInfo};
use ecg_byte::synth::{synthetic_record, SynthConfig};

fn main() -> ecg_byte::Result<()> {
    let raw_cfg = SynthConfig { num_samples: 5000, sample_rate_hz: 500.0, ..Default::default() };
    let cfg = PreprocessConfig::default();
    let mut segments = Vec::new();
    for seed in 0..20 {
        segments.extend(preprocess_record(&synthetic_record(seed, &raw_cfg)?, &cfg)?);
    }
    let stats = estimate_percentiles(&segments, cfg.sample_budget, cfg.seed)?;
    let params = NormalizationParams::new(stats.p1, stats.p99)?;
    println!("{} segments, p1 {:.3}, p99 {:.3}", segments.len(), params.p1, params.p99);

    let features = segments
        .iter()
        .enumerate()
        .map(|(i, r)| extract_features(r, i))
        .collect::<ecg_byte::Result<Vec<_>>>()?;
    let sampler = SamplerConfig { seed: 1, ..Default::default() };
    let model = fit_cluster_model(&features, &sampler)?;
    let picked = stratified_sample(model.assignments(), 50, sampler.seed)?;
    println!("sampled {} segments over {} clusters ({:?})", picked.len(), model.k(), model.method());

    let train_seqs: Vec<_> = picked.iter().map(|&i| symbolize(&segments[i], &params)).collect();
    let out = train(concat_corpus(&train_seqs).as_bytes(), 500, 26)?;
    let tok = out.tokenizer;
    let trie = Trie::build(&tok)?;

    let all: Vec<_> = segments.iter().map(|r| symbolize(r, &params)).collect();
    let encoded = trie.encode_batch(&all);
    let symbols: usize = all.iter().map(|s| s.len()).sum();
    let tokens: usize = encoded.iter().map(Vec::len).sum();
    println!("encoded {symbols} symbols into {tokens} tokens ({:.2}x)", symbols as f64 / tokens as f64);

    let shape = (segments[0].num_leads(), segments[0].num_samples());
    let rebuilt = desymbolize(&tok.decode(&encoded[0])?, &params, shape, segments[0].sample_rate_hz())?;
    assert_eq!(symbolize(&rebuilt, &params), all[0]);
    println!("decoded segment 0 back to a {}x{} record", rebuilt.num_leads(), rebuilt.num_samples());

    let ecg_vocab = tok.vocab_size() as u32;
    let vocab = VocabInfo::new(32_000, ecg_vocab, SpecialTokens::after(32_000, ecg_vocab))?;
    let layout = assemble(&encoded[0], &[1, 2, 3], &[4, 5], &vocab)?;
    println!("training sequence: L = {}, loss_start = {}", layout.total_len, layout.loss_start);
    Ok(())
}
