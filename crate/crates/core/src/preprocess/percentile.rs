use std::borrow::Borrow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::EcgRecord;

pub const MIN_SAMPLE_BUDGET: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileStats {
    pub p1: f64,
    pub p99: f64,
    pub sample_count: usize,
}

/// Fixed-capacity uniform sample of a value stream (Algorithm R).
#[derive(Debug, Clone)]
pub struct Reservoir {
    capacity: usize,
    seen: u64,
    values: Vec<f32>,
    rng: ChaCha8Rng,
}

impl Reservoir {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Self {
            capacity,
            seen: 0,
            values: Vec::with_capacity(capacity.min(1 << 20)),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn push(&mut self, v: f32) {
        self.seen += 1;
        if self.values.len() < self.capacity {
            self.values.push(v);
        } else {
            let j = self.rng.gen_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.values[j as usize] = v;
            }
        }
    }

    pub fn extend_from_record(&mut self, rec: &EcgRecord) {
        for &v in rec.data().iter() {
            self.push(v);
        }
    }

    /// Combines two reservoirs into a uniform sample of the union of their
    /// streams: each output slot draws from a side with probability
    /// proportional to the items that side has not yet contributed.
    pub fn merge(mut self, mut other: Reservoir) -> Reservoir {
        self.values.shuffle(&mut self.rng);
        other.values.shuffle(&mut self.rng);
        let total_seen = self.seen + other.seen;
        let target = self.capacity.min(total_seen as usize);
        let (mut left_seen, mut right_seen) = (self.seen, other.seen);
        let (mut left, mut right) = (self.values.into_iter(), other.values.into_iter());
        let mut merged = Vec::with_capacity(target);
        while merged.len() < target {
            let from_left = self.rng.gen_range(0..left_seen + right_seen) < left_seen;
            let next = if from_left {
                left_seen -= 1;
                left.next().or_else(|| right.next())
            } else {
                right_seen -= 1;
                right.next().or_else(|| left.next())
            };
            match next {
                Some(v) => merged.push(v),
                None => break,
            }
        }
        Reservoir {
            capacity: self.capacity,
            seen: total_seen,
            values: merged,
            rng: self.rng,
        }
    }

    pub fn into_stats(self) -> Result<PercentileStats> {
        if self.values.is_empty() {
            return Err(Error::EmptyInput("no samples for percentile estimation"));
        }
        let mut v: Vec<f64> = self.values.iter().map(|&x| f64::from(x)).collect();
        v.sort_by(f64::total_cmp);
        Ok(PercentileStats {
            p1: quantile_sorted(&v, 0.01),
            p99: quantile_sorted(&v, 0.99),
            sample_count: v.len(),
        })
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Global 1st/99th percentiles from a seeded uniform sample of
/// `sample_budget` values drawn across all records.
pub fn estimate_percentiles<I>(records: I, sample_budget: usize, seed: u64) -> Result<PercentileStats>
where
    I: IntoIterator,
    I::Item: Borrow<EcgRecord>,
{
    if sample_budget < MIN_SAMPLE_BUDGET {
        return Err(Error::InvalidParameter(format!(
            "sample budget must be >= {MIN_SAMPLE_BUDGET}, got {sample_budget}"
        )));
    }
    let mut reservoir = Reservoir::new(sample_budget, seed);
    for rec in records {
        reservoir.extend_from_record(rec.borrow());
    }
    reservoir.into_stats()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn record_of(values: Vec<f32>) -> EcgRecord {
        let n = values.len();
        EcgRecord::with_default_leads(Array2::from_shape_vec((1, n), values).unwrap(), 250.0)
            .unwrap()
    }

    #[test]
    fn uniform_stream_percentiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let records: Vec<EcgRecord> = (0..20)
            .map(|_| record_of((0..50_000).map(|_| rng.gen::<f32>()).collect()))
            .collect();
        let stats = estimate_percentiles(&records, 300_000, 42).unwrap();
        assert_eq!(stats.sample_count, 300_000);
        assert!((stats.p1 - 0.01).abs() <= 0.005, "p1 {}", stats.p1);
        assert!((stats.p99 - 0.99).abs() <= 0.005, "p99 {}", stats.p99);
    }

    #[test]
    fn constant_stream() {
        let stats = estimate_percentiles([record_of(vec![3.0; 1000])], 300, 1).unwrap();
        assert_eq!((stats.p1, stats.p99), (3.0, 3.0));
    }

    #[test]
    fn empty_stream_is_an_error() {
        let none: Vec<EcgRecord> = Vec::new();
        assert!(matches!(
            estimate_percentiles(none, 1000, 0),
            Err(Error::EmptyInput(_))
        ));
        assert!(estimate_percentiles([record_of(vec![1.0])], 10, 0).is_err());
    }

    #[test]
    fn seeded_and_reproducible() {
        let rec = record_of((0..10_000).map(|i| i as f32).collect());
        let a = estimate_percentiles([&rec], 500, 9).unwrap();
        let b = estimate_percentiles([&rec], 500, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn merged_reservoirs_keep_capacity_and_seen() {
        let mut a = Reservoir::new(100, 1);
        let mut b = Reservoir::new(100, 2);
        (0..1000).for_each(|i| a.push(i as f32));
        (0..30).for_each(|i| b.push(-(i as f32)));
        let m = a.merge(b);
        assert_eq!(m.seen(), 1030);
        assert_eq!(m.values().len(), 100);

        let mut small = Reservoir::new(100, 3);
        (0..10).for_each(|i| small.push(i as f32));
        let m = small.merge(Reservoir::new(100, 4));
        assert_eq!(m.values().len(), 10);
    }

    #[test]
    fn merge_is_proportional() {
        // One side saw 9x as many values; it should supply ~90% of the merge.
        let mut big = Reservoir::new(2000, 5);
        let mut small = Reservoir::new(2000, 6);
        (0..90_000).for_each(|_| big.push(1.0));
        (0..10_000).for_each(|_| small.push(0.0));
        let m = big.merge(small);
        let ones = m.values().iter().filter(|&&v| v == 1.0).count() as f64;
        let frac = ones / m.values().len() as f64;
        assert!((frac - 0.9).abs() < 0.03, "{frac}");
    }

    #[test]
    fn linear_interpolation() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert!((quantile_sorted(&v, 0.01) - 0.04).abs() < 1e-12);
    }
}
