//! Adjacent-pair counting and single-pair merging over id arrays.

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::TokenId;

pub type Pair = (TokenId, TokenId);
pub type PairCounts = FxHashMap<Pair, u64>;

/// Below this length pairs are counted on the calling thread.
pub const PARALLEL_THRESHOLD: usize = 1000;
const MIN_CHUNK: usize = 1 << 15;

pub fn get_stats(ids: &[TokenId]) -> PairCounts {
    if ids.len() < PARALLEL_THRESHOLD {
        get_stats_serial(ids)
    } else {
        get_stats_parallel(ids)
    }
}

pub fn get_stats_serial(ids: &[TokenId]) -> PairCounts {
    let mut counts = PairCounts::default();
    count_into(ids, &mut counts);
    counts
}

fn count_into(ids: &[TokenId], counts: &mut PairCounts) {
    for w in ids.windows(2) {
        *counts.entry((w[0], w[1])).or_insert(0) += 1;
    }
}

/// Contiguous chunks that share their boundary element, so each adjacent
/// pair lands in exactly one chunk; partial maps are folded then reduced.
pub fn get_stats_parallel(ids: &[TokenId]) -> PairCounts {
    if ids.len() < 2 {
        return PairCounts::default();
    }
    let pairs = ids.len() - 1;
    let chunks = (rayon::current_num_threads() * 4).clamp(1, pairs.div_ceil(MIN_CHUNK).max(1));
    let per = pairs.div_ceil(chunks);
    (0..chunks)
        .into_par_iter()
        .fold(PairCounts::default, |mut acc, c| {
            let lo = c * per;
            let hi = ((c + 1) * per).min(pairs);
            if lo < hi {
                count_into(&ids[lo..=hi], &mut acc);
            }
            acc
        })
        .reduce(PairCounts::default, |mut a, mut b| {
            if a.len() < b.len() {
                std::mem::swap(&mut a, &mut b);
            }
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        })
}

/// Highest count, ties to the smallest pair.
pub fn best_pair(counts: &PairCounts) -> Option<(Pair, u64)> {
    counts
        .iter()
        .map(|(&p, &c)| (p, c))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
}

/// Left-to-right, non-overlapping replacement of `pair` with `new_id`.
pub fn merge(ids: &[TokenId], pair: Pair, new_id: TokenId) -> Vec<TokenId> {
    let mut out = ids.to_vec();
    merge_in_place(&mut out, pair, new_id);
    out
}

/// [`merge`] writing over the input and truncating to the write position.
pub fn merge_in_place(ids: &mut Vec<TokenId>, pair: Pair, new_id: TokenId) {
    let n = ids.len();
    let (mut read, mut write) = (0, 0);
    while read < n {
        if read + 1 < n && ids[read] == pair.0 && ids[read + 1] == pair.1 {
            ids[write] = new_id;
            read += 2;
        } else {
            ids[write] = ids[read];
            read += 1;
        }
        write += 1;
    }
    ids.truncate(write);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(entries: &[((u32, u32), u64)]) -> PairCounts {
        entries.iter().copied().collect()
    }

    #[test]
    fn counts_small_examples() {
        assert_eq!(get_stats(&[97, 98, 97]), map(&[((97, 98), 1), ((98, 97), 1)]));
        assert_eq!(get_stats(&[97, 97, 97]), map(&[((97, 97), 2)]));
        assert!(get_stats(&[]).is_empty());
        assert!(get_stats(&[5]).is_empty());
        assert!(get_stats_parallel(&[5]).is_empty());
    }

    #[test]
    fn parallel_matches_serial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1000, 10_000, 100_003] {
            let ids: Vec<u32> = (0..len).map(|_| rng.gen_range(97..110)).collect();
            assert_eq!(get_stats_parallel(&ids), get_stats_serial(&ids));
        }
    }

    #[test]
    fn merge_examples() {
        assert_eq!(merge(&[97, 98, 97, 98], (97, 98), 256), vec![256, 256]);
        assert_eq!(merge(&[97, 97, 97], (97, 97), 256), vec![256, 97]);
        assert_eq!(merge(&[97, 99, 98], (97, 98), 256), vec![97, 99, 98]);
        assert_eq!(merge(&[], (97, 98), 256), Vec::<u32>::new());
    }

    #[test]
    fn best_pair_prefers_smaller_on_ties() {
        let c = map(&[((98, 97), 2), ((97, 99), 2), ((97, 98), 1)]);
        assert_eq!(best_pair(&c), Some(((97, 99), 2)));
        assert_eq!(best_pair(&PairCounts::default()), None);
    }

    proptest! {
        #[test]
        fn counts_sum_to_len_minus_one(ids in proptest::collection::vec(97u32..100, 0..3000)) {
            let total: u64 = get_stats(&ids).values().sum();
            prop_assert_eq!(total as usize, ids.len().saturating_sub(1));
        }

        #[test]
        fn merge_only_shrinks_by_replacements(
            ids in proptest::collection::vec(97u32..100, 0..500),
            a in 97u32..100,
            b in 97u32..100,
        ) {
            let out = merge(&ids, (a, b), 256);
            let replaced = out.iter().filter(|&&t| t == 256).count();
            prop_assert_eq!(out.len() + replaced, ids.len());
            let expanded: Vec<u32> = out
                .iter()
                .flat_map(|&t| if t == 256 { vec![a, b] } else { vec![t] })
                .collect();
            prop_assert_eq!(expanded, ids);
        }
    }
}
