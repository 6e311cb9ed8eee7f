//! Greedy longest-match encoding with per-token spans, decoding back to
//! symbols and per-sample token ownership for one lead.
//!
//! cargo run --release --example encode_spans

use ecg_byte::analysis::export_mapping;
use ecg_byte::bpe::train;
use ecg_byte::codec::{check_spans, Trie};
use ecg_byte::preprocess::estimate_percentiles;
use ecg_byte::quantizer::{concat_corpus, symbolize, NormalizationParams};
use ecg_byte::synth::{synthetic_corpus, SynthConfig};

fn main() -> ecg_byte::Result<()> {
    let records = synthetic_corpus(40, 8, &SynthConfig::default())?;
    let stats = estimate_percentiles(&records, 200_000, 0)?;
    let params = NormalizationParams::new(stats.p1, stats.p99)?;
    let seqs: Vec<_> = records.iter().map(|r| symbolize(r, &params)).collect();
    let tok = train(concat_corpus(&seqs).as_bytes(), 300, 26)?.tokenizer;
    let trie = Trie::build(&tok)?;
    println!("trie: {} nodes, depth {}", trie.num_nodes(), trie.max_depth());

    let symbols = seqs[0].as_bytes();
    let spans = trie.encode_with_spans(symbols);
    check_spans(&spans, symbols.len())?;
    println!("{} symbols -> {} tokens", symbols.len(), spans.len());
    for s in spans.iter().take(8) {
        println!("  id {:>4} at {:>3} len {:>2}: {}", s.id, s.start, s.len, tok.vocab_string(s.id)?);
    }

    let ids: Vec<_> = spans.iter().map(|s| s.id).collect();
    assert_eq!(tok.decode(&ids)?, symbols);
    println!("decode reproduces the symbols");

    let rows = export_mapping(&records[0], &spans, &params, 1)?;
    for r in rows.iter().take(5) {
        println!("  lead II t={} value={:.3} token={}", r.time_index, r.value, r.token_id);
    }
    Ok(())
}
