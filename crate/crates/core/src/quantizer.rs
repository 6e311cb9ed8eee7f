//! Percentile normalization, uniform quantization to lowercase ASCII
//! symbols, flattening, and the bin-midpoint inverse.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kv::{self, KvFile};
use crate::signal_io::{default_lead_names, EcgRecord};

pub const SYMBOL_BASE: u8 = b'a';
pub const MAX_ALPHABET: usize = 26;

/// Global normalization constants shared by training and inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    pub p1: f64,
    pub p99: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub alphabet_size: usize,
}

impl NormalizationParams {
    pub const DEFAULT_EPS1: f64 = 0.5;
    pub const DEFAULT_EPS2: f64 = 1e-6;

    /// Percentiles with the default epsilons and a 26-letter alphabet.
    pub fn new(p1: f64, p99: f64) -> Result<Self> {
        Self {
            p1,
            p99,
            eps1: Self::DEFAULT_EPS1,
            eps2: Self::DEFAULT_EPS2,
            alphabet_size: MAX_ALPHABET,
        }
        .validated()
    }

    pub fn with_alphabet_size(mut self, alphabet_size: usize) -> Result<Self> {
        self.alphabet_size = alphabet_size;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let finite = [self.p1, self.p99, self.eps1, self.eps2]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("normalization constants must be finite".into()));
        }
        if self.p99 < self.p1 {
            return Err(Error::InvalidParameter(format!(
                "p99 ({}) must be >= p1 ({})",
                self.p99, self.p1
            )));
        }
        if self.eps2 <= 0.0 {
            return Err(Error::InvalidParameter("eps2 must be > 0".into()));
        }
        if !(2..=MAX_ALPHABET).contains(&self.alphabet_size) {
            return Err(Error::InvalidParameter(format!(
                "alphabet size must be in 2..=26, got {}",
                self.alphabet_size
            )));
        }
        Ok(self)
    }

    pub fn lower(&self) -> f64 {
        self.p1 - self.eps1
    }

    /// Denominator of the normalization.
    pub fn span(&self) -> f64 {
        (self.p99 + self.eps1) - (self.p1 - self.eps1) + self.eps2
    }

    /// Width of one quantization bin in signal units.
    pub fn bin_width(&self) -> f64 {
        self.span() / self.alphabet_size as f64
    }

    pub fn max_symbol(&self) -> u8 {
        SYMBOL_BASE + self.alphabet_size as u8 - 1
    }

    /// Normalized value, clipped to [0, 1].
    pub fn normalize_value(&self, x: f64) -> f64 {
        ((x - self.lower()) / self.span()).clamp(0.0, 1.0)
    }

    /// Bin index `min(floor(v * |A|), |A| - 1)` for `v` in [0, 1].
    pub fn quantize_value(&self, v: f64) -> Result<u8> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "normalized value {v} outside [0, 1]"
            )));
        }
        let n = self.alphabet_size;
        Ok(((v * n as f64).floor() as usize).min(n - 1) as u8)
    }

    /// Bin-midpoint reconstruction of a bin index.
    pub fn dequantize_index(&self, q: u8) -> f64 {
        let v = (f64::from(q) + 0.5) / self.alphabet_size as f64;
        v * self.span() + self.lower()
    }

    pub fn symbol_index(&self, b: u8) -> Result<u8> {
        if b < SYMBOL_BASE || b > self.max_symbol() {
            return Err(Error::SymbolOutOfRange(b));
        }
        Ok(b - SYMBOL_BASE)
    }

    pub fn to_kv_string(&self) -> String {
        kv::render(&[
            ("p1", self.p1.to_string()),
            ("p99", self.p99.to_string()),
            ("eps1", self.eps1.to_string()),
            ("eps2", self.eps2.to_string()),
            ("alphabet_size", self.alphabet_size.to_string()),
        ])
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        Self {
            p1: kv.require("p1")?,
            p99: kv.require("p99")?,
            eps1: kv.get("eps1")?.unwrap_or(Self::DEFAULT_EPS1),
            eps2: kv.get("eps2")?.unwrap_or(Self::DEFAULT_EPS2),
            alphabet_size: kv.get("alphabet_size")?.unwrap_or(MAX_ALPHABET),
        }
        .validated()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KvFile::read(path)?)
    }
}

/// Flat byte string over the symbol alphabet.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SymbolSequence(Vec<u8>);

impl SymbolSequence {
    /// Checks every byte against the alphabet.
    pub fn new(bytes: Vec<u8>, alphabet_size: usize) -> Result<Self> {
        let max = SYMBOL_BASE + alphabet_size.min(MAX_ALPHABET) as u8 - 1;
        if let Some(&b) = bytes.iter().find(|&&b| b < SYMBOL_BASE || b > max) {
            return Err(Error::SymbolOutOfRange(b));
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[u8]> for SymbolSequence {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

pub fn normalize(rec: &EcgRecord, params: &NormalizationParams) -> Array2<f64> {
    rec.data().mapv(|x| params.normalize_value(f64::from(x)))
}

/// Maps normalized values to symbol bytes, one row per lead.
pub fn quantize_to_symbols(norm: &Array2<f64>, params: &NormalizationParams) -> Result<Array2<u8>> {
    let mut out = Array2::zeros(norm.dim());
    for (o, &v) in out.iter_mut().zip(norm.iter()) {
        *o = SYMBOL_BASE + params.quantize_value(v)?;
    }
    Ok(out)
}

/// Lead-major flattening: all of lead 0, then lead 1, ...
pub fn flatten(symbols: &Array2<u8>) -> SymbolSequence {
    SymbolSequence(symbols.iter().copied().collect())
}

pub fn unflatten(seq: &[u8], shape: (usize, usize)) -> Result<Array2<u8>> {
    let (c, t) = shape;
    if seq.len() != c * t {
        return Err(Error::DimensionMismatch {
            expected: format!("{} symbols for {c}x{t}", c * t),
            found: format!("{} symbols", seq.len()),
        });
    }
    Ok(Array2::from_shape_vec(shape, seq.to_vec()).expect("length checked"))
}

pub fn concat_corpus<S: AsRef<[u8]>>(sequences: &[S]) -> SymbolSequence {
    let total = sequences.iter().map(|s| s.as_ref().len()).sum();
    let mut out = Vec::with_capacity(total);
    for s in sequences {
        out.extend_from_slice(s.as_ref());
    }
    SymbolSequence(out)
}

/// normalize → quantize → flatten in one step.
pub fn symbolize(rec: &EcgRecord, params: &NormalizationParams) -> SymbolSequence {
    let bytes = rec
        .data()
        .iter()
        .map(|&x| {
            let v = params.normalize_value(f64::from(x));
            SYMBOL_BASE + params.quantize_value(v).expect("normalized values are clipped")
        })
        .collect();
    SymbolSequence(bytes)
}

/// Reconstructs a C×T record from lead-major symbols using bin midpoints.
pub fn desymbolize(
    symbols: &[u8],
    params: &NormalizationParams,
    shape: (usize, usize),
    sample_rate_hz: f32,
) -> Result<EcgRecord> {
    let grid = unflatten(symbols, shape)?;
    let mut data = Array2::zeros(shape);
    for (o, &b) in data.iter_mut().zip(grid.iter()) {
        *o = params.dequantize_index(params.symbol_index(b)?) as f32;
    }
    EcgRecord::new(data, sample_rate_hz, default_lead_names(shape.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn params() -> NormalizationParams {
        NormalizationParams::new(-1.2, 2.3).unwrap()
    }

    #[test]
    fn normalization_endpoints() {
        let p = params();
        assert_eq!(p.normalize_value(p.p1 - p.eps1), 0.0);
        let top = p.normalize_value(p.p99 + p.eps1);
        let expected = (p.span() - p.eps2) / p.span();
        assert!((top - expected).abs() < 1e-15);
        assert!(top < 1.0);
        assert_eq!(p.normalize_value(p.p1 - 100.0), 0.0);
        assert_eq!(p.normalize_value(p.p99 + 100.0), 1.0);
    }

    #[test]
    fn quantization_table() {
        let p = params();
        let q = |v: f64| p.quantize_value(v).unwrap();
        assert_eq!(q(0.0), 0);
        assert_eq!(q(1.0), 25);
        assert_eq!(q(0.5), 13);
        assert_eq!(SYMBOL_BASE + q(0.0), b'a');
        assert_eq!(SYMBOL_BASE + q(1.0), b'z');
        assert_eq!(SYMBOL_BASE + q(0.5), b'n');
        assert!(p.quantize_value(1.0 + 1e-9).is_err());
        assert!(p.quantize_value(-1e-9).is_err());
    }

    #[test]
    fn flatten_is_lead_major() {
        let m = array![[b'a', b'b'], [b'c', b'd']];
        assert_eq!(flatten(&m).as_bytes(), b"abcd");
        assert_eq!(flatten(&array![[b'z']]).as_bytes(), b"z");
        assert_eq!(flatten(&Array2::from_elem((12, 500), b'a')).len(), 6000);
    }

    #[test]
    fn concatenation() {
        assert_eq!(concat_corpus(&[b"ab".to_vec(), b"cd".to_vec()]).as_bytes(), b"abcd");
        assert!(concat_corpus::<Vec<u8>>(&[]).is_empty());
    }

    #[test]
    fn desymbolize_midpoint_and_shape_errors() {
        let p = params();
        let rec = desymbolize(b"a", &p, (1, 1), 250.0).unwrap();
        let want = (0.5 / 26.0) * p.span() + p.lower();
        assert!((f64::from(rec.data()[[0, 0]]) - want).abs() < 1e-6);
        assert!(matches!(
            desymbolize(&vec![b'a'; 5999], &p, (12, 500), 250.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            desymbolize(b"{", &p, (1, 1), 250.0),
            Err(Error::SymbolOutOfRange(b'{'))
        ));
        let small = p.with_alphabet_size(4).unwrap();
        assert!(desymbolize(b"e", &small, (1, 1), 250.0).is_err());
    }

    #[test]
    fn params_validation_and_file_format() {
        assert!(NormalizationParams::new(2.0, 1.0).is_err());
        assert!(params().with_alphabet_size(1).is_err());
        assert!(params().with_alphabet_size(27).is_err());
        let text = params().to_kv_string();
        assert_eq!(text, "p1=-1.2\np99=2.3\neps1=0.5\neps2=0.000001\nalphabet_size=26\n");
        let back = NormalizationParams::from_kv(&KvFile::parse(&text).unwrap()).unwrap();
        assert_eq!(back, params());
    }

    #[test]
    fn symbol_sequence_validation() {
        assert!(SymbolSequence::new(b"abz".to_vec(), 26).is_ok());
        assert!(SymbolSequence::new(b"abz".to_vec(), 4).is_err());
        assert!(SymbolSequence::new(vec![0], 26).is_err());
    }

    proptest! {
        #[test]
        fn reconstruction_within_half_bin(x in -1.7f64..2.8) {
            let p = params();
            let q = p.quantize_value(p.normalize_value(x)).unwrap();
            let err = (p.dequantize_index(q) - x).abs();
            prop_assert!(err <= p.bin_width() / 2.0);
        }

        #[test]
        fn quantization_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let p = params();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(p.quantize_value(lo).unwrap() <= p.quantize_value(hi).unwrap());
        }

        #[test]
        fn symbols_stay_in_alphabet(values in prop::collection::vec(-50.0f32..50.0, 1..200), size in 2usize..=26) {
            let p = params().with_alphabet_size(size).unwrap();
            let n = values.len();
            let rec = EcgRecord::with_default_leads(Array2::from_shape_vec((1, n), values).unwrap(), 250.0).unwrap();
            let seq = symbolize(&rec, &p);
            prop_assert!(seq.as_bytes().iter().all(|&b| (97..=96 + size as u8).contains(&b)));
            let via_steps = flatten(&quantize_to_symbols(&normalize(&rec, &p), &p).unwrap());
            prop_assert_eq!(seq, via_steps);
        }

        #[test]
        fn unflatten_inverts_flatten(c in 1usize..6, t in 1usize..40, seed in any::<u64>()) {
            let m = Array2::from_shape_fn((c, t), |(i, j)| b'a' + ((seed as usize + i * 7 + j * 3) % 26) as u8);
            prop_assert_eq!(unflatten(flatten(&m).as_bytes(), (c, t)).unwrap(), m);
        }
    }
}
