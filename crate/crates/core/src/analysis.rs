//! Token usage, encoded length statistics, compression ratio and
//! token-to-signal plot data.

use std::collections::BTreeMap;
use std::io::Write;

use crate::bpe::TokenId;
use crate::codec::{check_spans, TokenSpan};
use crate::error::{Error, Result};
use crate::quantizer::{symbolize, NormalizationParams};
use crate::signal_io::EcgRecord;

pub const DEFAULT_LENGTH_BIN: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenUsage {
    counts: BTreeMap<TokenId, u64>,
}

impl TokenUsage {
    pub fn add(&mut self, ids: &[TokenId]) {
        for &id in ids {
            *self.counts.entry(id).or_insert(0) += 1;
        }
    }

    pub fn merge(mut self, other: TokenUsage) -> TokenUsage {
        for (id, c) in other.counts {
            *self.counts.entry(id).or_insert(0) += c;
        }
        self
    }

    pub fn counts(&self) -> &BTreeMap<TokenId, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// `(id, count)` by descending count, ties by ascending id.
    pub fn ranked(&self) -> Vec<(TokenId, u64)> {
        let mut v: Vec<(TokenId, u64)> = self.counts.iter().map(|(&i, &c)| (i, c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

pub fn token_usage<'a, I: IntoIterator<Item = &'a [TokenId]>>(encoded: I) -> TokenUsage {
    let mut u = TokenUsage::default();
    for ids in encoded {
        u.add(ids);
    }
    u
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthBin {
    pub lo: usize,
    /// Exclusive.
    pub hi: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthSummary {
    pub count: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub bin_width: usize,
    /// Consecutive bins from `min` rounded down to a bin edge through `max`.
    pub histogram: Vec<LengthBin>,
}

/// `None` for an empty stream.
pub fn length_distribution(lengths: &[usize], bin_width: usize) -> Result<Option<LengthSummary>> {
    if bin_width == 0 {
        return Err(Error::InvalidParameter("bin width must be positive".into()));
    }
    let (Some(&min), Some(&max)) = (lengths.iter().min(), lengths.iter().max()) else {
        return Ok(None);
    };
    let first = min / bin_width;
    let mut histogram: Vec<LengthBin> = (first..=max / bin_width)
        .map(|b| LengthBin {
            lo: b * bin_width,
            hi: (b + 1) * bin_width,
            count: 0,
        })
        .collect();
    for &l in lengths {
        histogram[l / bin_width - first].count += 1;
    }
    Ok(Some(LengthSummary {
        count: lengths.len(),
        min,
        max,
        mean: lengths.iter().sum::<usize>() as f64 / lengths.len() as f64,
        bin_width,
        histogram,
    }))
}

pub fn compression_ratio(symbol_len: usize, token_len: usize) -> Result<f64> {
    if token_len == 0 {
        return Err(Error::InvalidParameter("compression ratio of zero tokens".into()));
    }
    Ok(symbol_len as f64 / token_len as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingRow {
    pub time_index: usize,
    /// Bin-midpoint reconstruction of the sample.
    pub value: f64,
    pub token_id: TokenId,
}

/// Per-sample token ownership for one lead of a record, given spans over
/// its lead-major symbol sequence.
pub fn export_mapping(
    rec: &EcgRecord,
    spans: &[TokenSpan],
    params: &NormalizationParams,
    lead: usize,
) -> Result<Vec<MappingRow>> {
    let (c, t) = (rec.num_leads(), rec.num_samples());
    if lead >= c {
        return Err(Error::InvalidParameter(format!(
            "lead {lead} out of range for a {c}-lead record"
        )));
    }
    check_spans(spans, c * t)?;
    let symbols = symbolize(rec, params);
    let lo = lead * t;
    let mut rows = Vec::with_capacity(t);
    for s in spans {
        let (a, b) = (s.start.max(lo), (s.start + s.len).min(lo + t));
        for pos in a..b {
            rows.push(MappingRow {
                time_index: pos - lo,
                value: params.dequantize_index(params.symbol_index(symbols.as_bytes()[pos])?),
                token_id: s.id,
            });
        }
    }
    Ok(rows)
}

pub fn write_usage_csv<W: Write>(out: &mut W, usage: &TokenUsage) -> std::io::Result<()> {
    writeln!(out, "id,count,rank")?;
    for (rank, (id, count)) in usage.ranked().into_iter().enumerate() {
        writeln!(out, "{id},{count},{}", rank + 1)?;
    }
    Ok(())
}

pub fn write_lengths_csv<W: Write>(out: &mut W, summary: Option<&LengthSummary>) -> std::io::Result<()> {
    writeln!(out, "bin_lo,bin_hi,count")?;
    for b in summary.map_or(&[][..], |s| &s.histogram) {
        writeln!(out, "{},{},{}", b.lo, b.hi, b.count)?;
    }
    Ok(())
}

pub fn write_mapping_csv<W: Write>(out: &mut W, rows: &[MappingRow]) -> std::io::Result<()> {
    writeln!(out, "time_index,value,token_id")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.time_index, r.value, r.token_id)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn usage_counts_and_ranks() {
        let u = token_usage([&[256u32, 256, 97][..]]);
        assert_eq!(u.counts().get(&256), Some(&2));
        assert_eq!(u.counts().get(&97), Some(&1));
        assert_eq!(u.ranked(), vec![(256, 2), (97, 1)]);
        assert!(token_usage(std::iter::empty::<&[u32]>()).counts().is_empty());
    }

    #[test]
    fn usage_shards_merge() {
        let a: &[u32] = &[1, 2, 2];
        let b: &[u32] = &[2, 3];
        let whole = token_usage([&[1u32, 2, 2, 2, 3][..]]);
        assert_eq!(token_usage([a]).merge(token_usage([b])), whole);
        assert_eq!(whole.total(), 5);
    }

    #[test]
    fn rank_ties_by_id() {
        let u = token_usage([&[5u32, 3, 9][..]]);
        assert_eq!(u.ranked(), vec![(3, 1), (5, 1), (9, 1)]);
    }

    #[test]
    fn length_stats() {
        let s = length_distribution(&[500, 500, 1000], 50).unwrap().unwrap();
        assert_eq!((s.min, s.max), (500, 1000));
        assert!((s.mean - 666.6666666666666).abs() < 1e-9);
        assert_eq!(s.histogram.first().unwrap().lo, 500);
        assert_eq!(s.histogram.last().unwrap().hi, 1050);
        assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 3);
        let one = length_distribution(&[42], 50).unwrap().unwrap();
        assert_eq!((one.min, one.max, one.mean), (42, 42, 42.0));
        assert!(length_distribution(&[], 50).unwrap().is_none());
        assert!(length_distribution(&[1], 0).is_err());
    }

    #[test]
    fn ratios() {
        assert!((compression_ratio(6000, 474).unwrap() - 12.66).abs() < 0.005);
        assert_eq!(compression_ratio(6000, 6000).unwrap(), 1.0);
        assert!(compression_ratio(6000, 0).is_err());
    }

    #[test]
    fn mapping_rows_follow_spans() {
        let p = NormalizationParams::new(0.0, 1.0).unwrap();
        let rec = EcgRecord::with_default_leads(Array2::from_elem((1, 4), 0.5f32), 250.0).unwrap();
        let s = |id, start, len| TokenSpan { id, start, len };
        let rows = export_mapping(&rec, &[s(256, 0, 2), s(97, 2, 1), s(99, 3, 1)], &p, 0).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows.iter().map(|r| r.token_id).collect::<Vec<_>>(), vec![256, 256, 97, 99]);
        assert_eq!(rows.iter().map(|r| r.time_index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn mapping_second_lead_and_bounds() {
        let p = NormalizationParams::new(0.0, 1.0).unwrap();
        let rec = EcgRecord::with_default_leads(Array2::zeros((12, 3)), 250.0).unwrap();
        let spans: Vec<TokenSpan> = (0..36).map(|i| TokenSpan { id: 97, start: i, len: 1 }).collect();
        assert_eq!(export_mapping(&rec, &spans, &p, 11).unwrap().len(), 3);
        assert!(export_mapping(&rec, &spans, &p, 12).is_err());
        assert!(matches!(
            export_mapping(&rec, &spans[..35], &p, 0),
            Err(Error::SpanMismatch(_))
        ));
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_usage_csv(&mut buf, &token_usage([&[7u32, 7, 8][..]])).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,count,rank\n7,2,1\n8,1,2\n");
        let mut buf = Vec::new();
        write_lengths_csv(&mut buf, length_distribution(&[10, 60], 50).unwrap().as_ref()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bin_lo,bin_hi,count\n0,50,1\n50,100,1\n");
    }
}
