//! Most-frequent-pair merge training.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::str::FromStr;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};

use super::stats::{best_pair, get_stats, merge_in_place, Pair};
use super::tokenizer::Tokenizer;
use super::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainStrategy {
    /// Full pair recount and array rewrite every iteration.
    #[default]
    Recount,
    /// Linked-list corpus with pair counts updated around each merge site.
    Incremental,
}

impl FromStr for TrainStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recount" => Ok(Self::Recount),
            "incremental" => Ok(Self::Incremental),
            _ => Err(Error::InvalidParameter(format!("unknown training strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// The corpus after all merges.
    pub ids: Vec<TokenId>,
    pub tokenizer: Tokenizer,
    /// Corpus length before any merge, then after each merge.
    pub token_counts: Vec<usize>,
}

pub fn train(corpus: &[u8], num_merges: usize, alphabet_size: usize) -> Result<TrainOutput> {
    train_with(corpus, num_merges, alphabet_size, TrainStrategy::default())
}

/// Both strategies pick the most frequent pair with ties to the smallest
/// `(left, right)` and stop early once no pair remains.
pub fn train_with(
    corpus: &[u8],
    num_merges: usize,
    alphabet_size: usize,
    strategy: TrainStrategy,
) -> Result<TrainOutput> {
    let tokenizer = Tokenizer::new(alphabet_size)?;
    let ids: Vec<TokenId> = corpus.iter().map(|&b| TokenId::from(b)).collect();
    match strategy {
        TrainStrategy::Recount => Ok(recount(ids, num_merges, tokenizer)),
        TrainStrategy::Incremental => Ok(Incremental::new(ids).run(num_merges, tokenizer)),
    }
}

fn log_progress(i: usize, num_merges: usize, pair: Pair, count: u64, len: usize) {
    if (i + 1) % 250 == 0 || i + 1 == num_merges {
        log::debug!("merge {}/{num_merges}: {pair:?} x{count}, {len} tokens", i + 1);
    }
}

fn recount(mut ids: Vec<TokenId>, num_merges: usize, mut tokenizer: Tokenizer) -> TrainOutput {
    let mut token_counts = vec![ids.len()];
    for i in 0..num_merges {
        let stats = get_stats(&ids);
        let Some((pair, count)) = best_pair(&stats) else {
            break;
        };
        let new_id = tokenizer.push_merge(pair).expect("pair ids are defined");
        merge_in_place(&mut ids, pair, new_id);
        token_counts.push(ids.len());
        log_progress(i, num_merges, pair, count, ids.len());
    }
    TrainOutput {
        ids,
        tokenizer,
        token_counts,
    }
}

const NONE: u32 = u32::MAX;

/// Corpus as a doubly linked list over the original positions. A merge
/// keeps its left node and kills the right one.
struct Incremental {
    tokens: Vec<TokenId>,
    prev: Vec<u32>,
    next: Vec<u32>,
    counts: FxHashMap<Pair, u64>,
    /// Left-node positions where the pair may occur; stale entries are
    /// skipped when processed.
    positions: FxHashMap<Pair, Vec<u32>>,
    heap: BinaryHeap<(u64, Reverse<Pair>)>,
    len: usize,
}

impl Incremental {
    fn new(tokens: Vec<TokenId>) -> Self {
        let n = tokens.len();
        assert!(n < NONE as usize, "corpus too large for 32-bit positions");
        let prev = (0..n as u32).map(|i| if i == 0 { NONE } else { i - 1 }).collect();
        let next = (0..n as u32)
            .map(|i| if i as usize + 1 == n { NONE } else { i + 1 })
            .collect();
        let mut counts: FxHashMap<Pair, u64> = FxHashMap::default();
        let mut positions: FxHashMap<Pair, Vec<u32>> = FxHashMap::default();
        for (i, w) in tokens.windows(2).enumerate() {
            let p = (w[0], w[1]);
            *counts.entry(p).or_insert(0) += 1;
            positions.entry(p).or_default().push(i as u32);
        }
        let heap = counts.iter().map(|(&p, &c)| (c, Reverse(p))).collect();
        Self {
            tokens,
            prev,
            next,
            counts,
            positions,
            heap,
            len: n,
        }
    }

    fn pop_best(&mut self) -> Option<(Pair, u64)> {
        while let Some((c, Reverse(p))) = self.heap.pop() {
            if self.counts.get(&p) == Some(&c) {
                return Some((p, c));
            }
        }
        None
    }

    fn dec(&mut self, p: Pair, touched: &mut FxHashSet<Pair>) {
        let c = self.counts.get_mut(&p).expect("decremented pair is counted");
        *c -= 1;
        if *c == 0 {
            self.counts.remove(&p);
        }
        touched.insert(p);
    }

    fn inc(&mut self, p: Pair, at: u32, touched: &mut FxHashSet<Pair>) {
        *self.counts.entry(p).or_insert(0) += 1;
        self.positions.entry(p).or_default().push(at);
        touched.insert(p);
    }

    fn apply(&mut self, pair: Pair, new_id: TokenId) {
        let mut sites = self.positions.remove(&pair).unwrap_or_default();
        sites.sort_unstable();
        sites.dedup();
        let mut touched = FxHashSet::default();
        for i in sites {
            let iu = i as usize;
            let j = self.next[iu];
            // A site is stale if its left node was absorbed or its tokens changed.
            if self.tokens[iu] != pair.0 || j == NONE || self.tokens[j as usize] != pair.1 {
                continue;
            }
            let p = self.prev[iu];
            let k = self.next[j as usize];
            if p != NONE {
                self.dec((self.tokens[p as usize], pair.0), &mut touched);
            }
            self.dec(pair, &mut touched);
            if k != NONE {
                self.dec((pair.1, self.tokens[k as usize]), &mut touched);
            }
            self.tokens[iu] = new_id;
            self.next[iu] = k;
            if k != NONE {
                self.prev[k as usize] = i;
            }
            self.tokens[j as usize] = NONE;
            self.len -= 1;
            if p != NONE {
                self.inc((self.tokens[p as usize], new_id), p, &mut touched);
            }
            if k != NONE {
                self.inc((new_id, self.tokens[k as usize]), i, &mut touched);
            }
        }
        for p in touched {
            if let Some(&c) = self.counts.get(&p) {
                self.heap.push((c, Reverse(p)));
            }
        }
    }

    fn run(mut self, num_merges: usize, mut tokenizer: Tokenizer) -> TrainOutput {
        let mut token_counts = vec![self.len];
        for i in 0..num_merges {
            let Some((pair, count)) = self.pop_best() else {
                break;
            };
            let new_id = tokenizer.push_merge(pair).expect("pair ids are defined");
            self.apply(pair, new_id);
            token_counts.push(self.len);
            log_progress(i, num_merges, pair, count, self.len);
        }
        let mut ids = Vec::with_capacity(self.len);
        let mut cur = if self.tokens.is_empty() { NONE } else { 0 };
        while cur != NONE {
            ids.push(self.tokens[cur as usize]);
            cur = self.next[cur as usize];
        }
        TrainOutput {
            ids,
            tokenizer,
            token_counts,
        }
    }
}
