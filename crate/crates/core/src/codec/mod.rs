//! Greedy longest-match encoding over a byte trie, decoding, and
//! token-to-symbol spans.

pub mod io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bpe::{TokenId, Tokenizer, BASE_VOCAB};
use crate::error::{Error, Result};

/// Covers `symbols[start..start + len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub id: TokenId,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Default)]
struct Node {
    /// Sorted by byte.
    children: Vec<(u8, u32)>,
    token: Option<TokenId>,
}

/// Trie keyed by base bytes. Every single byte is a token; each merge adds
/// the path of its full expansion.
#[derive(Debug, Clone)]
pub struct Trie {
    nodes: Vec<Node>,
    max_depth: usize,
}

impl Trie {
    pub fn build(tok: &Tokenizer) -> Result<Self> {
        let mut nodes = Vec::with_capacity(1 + 256 + tok.num_merges() * 2);
        nodes.push(Node {
            children: (0..=255u8).map(|b| (b, u32::from(b) + 1)).collect(),
            token: None,
        });
        nodes.extend((0..BASE_VOCAB).map(|id| Node {
            children: Vec::new(),
            token: Some(id),
        }));
        let mut trie = Self { nodes, max_depth: 1 };
        for m in tok.merges() {
            trie.insert(tok.expansion(m.new_id)?, m.new_id);
        }
        Ok(trie)
    }

    fn child(&self, node: u32, b: u8) -> Option<u32> {
        let children = &self.nodes[node as usize].children;
        children
            .binary_search_by_key(&b, |c| c.0)
            .ok()
            .map(|i| children[i].1)
    }

    /// Expansions shared by several merges keep the earliest id.
    fn insert(&mut self, bytes: &[u8], id: TokenId) {
        let mut node = 0u32;
        for &b in bytes {
            node = match self.child(node, b) {
                Some(c) => c,
                None => {
                    let new = self.nodes.len() as u32;
                    self.nodes.push(Node::default());
                    let children = &mut self.nodes[node as usize].children;
                    let at = children.partition_point(|c| c.0 < b);
                    children.insert(at, (b, new));
                    new
                }
            };
        }
        let slot = &mut self.nodes[node as usize].token;
        if slot.is_none() {
            *slot = Some(id);
        }
        self.max_depth = self.max_depth.max(bytes.len());
    }

    /// Token id stored for exactly this byte string.
    pub fn lookup(&self, bytes: &[u8]) -> Option<TokenId> {
        let mut node = 0u32;
        for &b in bytes {
            node = self.child(node, b)?;
        }
        self.nodes[node as usize].token
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Deepest token on the path from `start`. `start` must be in range.
    pub fn longest_match(&self, symbols: &[u8], start: usize) -> (TokenId, usize) {
        let mut node = 0u32;
        let mut best = (TokenId::from(symbols[start]), 1);
        for (depth, &b) in symbols[start..].iter().enumerate() {
            match self.child(node, b) {
                Some(c) => node = c,
                None => break,
            }
            if let Some(id) = self.nodes[node as usize].token {
                best = (id, depth + 1);
            }
        }
        best
    }

    pub fn encode(&self, symbols: &[u8]) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(symbols.len() / 2 + 1);
        let mut i = 0;
        while i < symbols.len() {
            let (id, len) = self.longest_match(symbols, i);
            out.push(id);
            i += len;
        }
        out
    }

    pub fn encode_with_spans(&self, symbols: &[u8]) -> Vec<TokenSpan> {
        let mut out = Vec::with_capacity(symbols.len() / 2 + 1);
        let mut start = 0;
        while start < symbols.len() {
            let (id, len) = self.longest_match(symbols, start);
            out.push(TokenSpan { id, start, len });
            start += len;
        }
        out
    }

    /// Encodes records in parallel, preserving order.
    pub fn encode_batch<S: AsRef<[u8]> + Sync>(&self, records: &[S]) -> Vec<Vec<TokenId>> {
        records.par_iter().map(|r| self.encode(r.as_ref())).collect()
    }
}

pub fn build_trie(tok: &Tokenizer) -> Result<Trie> {
    Trie::build(tok)
}

pub fn decode(ids: &[TokenId], tok: &Tokenizer) -> Result<Vec<u8>> {
    tok.decode(ids)
}

/// Checks that spans tile `0..total` in order with non-empty lengths.
pub fn check_spans(spans: &[TokenSpan], total: usize) -> Result<()> {
    let mut at = 0;
    for (i, s) in spans.iter().enumerate() {
        if s.start != at || s.len == 0 {
            return Err(Error::SpanMismatch(format!(
                "span {i} starts at {} with length {}, expected start {at}",
                s.start, s.len
            )));
        }
        at += s.len;
    }
    if at != total {
        return Err(Error::SpanMismatch(format!("spans cover {at} of {total} symbols")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::Merge;
    use proptest::prelude::*;

    fn tok(merges: &[((u32, u32), u32)]) -> Tokenizer {
        Tokenizer::from_merges(
            26,
            merges.iter().map(|&(pair, new_id)| Merge { pair, new_id }),
        )
        .unwrap()
    }

    fn ab_chain() -> Tokenizer {
        tok(&[((97, 98), 256), ((256, 256), 257)])
    }

    #[test]
    fn base_trie() {
        let t = Trie::build(&tok(&[])).unwrap();
        assert_eq!(t.num_nodes(), 257);
        assert_eq!(t.lookup(b"a"), Some(97));
        assert_eq!(t.lookup(&[0]), Some(0));
        assert_eq!(t.lookup(b"ab"), None);
    }

    #[test]
    fn merge_paths() {
        let t = Trie::build(&tok(&[((97, 98), 256), ((256, 99), 257)])).unwrap();
        assert_eq!(t.lookup(b"ab"), Some(256));
        assert_eq!(t.lookup(b"abc"), Some(257));
        assert_eq!(t.lookup(b"a"), Some(97));
        assert_eq!(t.max_depth(), 3);
    }

    #[test]
    fn encode_examples() {
        let t = Trie::build(&ab_chain()).unwrap();
        assert_eq!(t.encode(b"abab"), vec![257]);
        assert_eq!(t.encode(b"abac"), vec![256, 97, 99]);
        assert!(t.encode(b"").is_empty());
        assert_eq!(t.encode(&[7, 97]), vec![7, 97]);
    }

    #[test]
    fn span_examples() {
        let t = Trie::build(&ab_chain()).unwrap();
        let s = |id, start, len| TokenSpan { id, start, len };
        assert_eq!(t.encode_with_spans(b"abab"), vec![s(257, 0, 4)]);
        assert_eq!(
            t.encode_with_spans(b"abac"),
            vec![s(256, 0, 2), s(97, 2, 1), s(99, 3, 1)]
        );
        assert!(t.encode_with_spans(b"").is_empty());
    }

    #[test]
    fn decode_examples() {
        let tk = ab_chain();
        assert_eq!(decode(&[257], &tk).unwrap(), b"abab");
        assert_eq!(decode(&[97], &tk).unwrap(), b"a");
        assert!(matches!(decode(&[9999], &tk), Err(Error::UnknownToken(9999))));
    }

    #[test]
    fn span_check_rejects_gaps() {
        let s = |start, len| TokenSpan { id: 97, start, len };
        assert!(check_spans(&[s(0, 2), s(2, 1)], 3).is_ok());
        assert!(check_spans(&[s(0, 2), s(3, 1)], 4).is_err());
        assert!(check_spans(&[s(0, 2)], 3).is_err());
        assert!(check_spans(&[s(0, 0), s(0, 1)], 1).is_err());
    }

    #[test]
    fn batch_preserves_order() {
        let t = Trie::build(&ab_chain()).unwrap();
        let recs = vec![b"abab".to_vec(), b"c".to_vec(), b"ab".to_vec()];
        assert_eq!(t.encode_batch(&recs), vec![vec![257], vec![99], vec![256]]);
    }

    proptest! {
        #[test]
        fn round_trip_after_training(
            corpus in proptest::collection::vec(97u8..101, 0..300),
            probe in proptest::collection::vec(97u8..123, 0..300),
            merges in 0usize..30,
        ) {
            let tk = crate::bpe::train(&corpus, merges, 26).unwrap().tokenizer;
            let t = Trie::build(&tk).unwrap();
            let ids = t.encode(&probe);
            prop_assert_eq!(tk.decode(&ids).unwrap(), probe.clone());
            let spans = t.encode_with_spans(&probe);
            prop_assert!(check_spans(&spans, probe.len()).is_ok());
            prop_assert_eq!(spans.iter().map(|s| s.id).collect::<Vec<_>>(), ids);
        }
    }
}
