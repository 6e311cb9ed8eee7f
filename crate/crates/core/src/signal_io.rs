//! ECG record type plus the CSV and binary (`.ecgb`) record formats.
//!
//! CSV is time-major: the header names the leads, each following line holds
//! one sample per lead. The binary format is lead-major:
//!
//! ```text
//! "ECGB" | 0x01 | C: u32 LE | T: u32 LE | fs: f32 LE | C*T f32 LE samples
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

pub const BIN_MAGIC: &[u8; 4] = b"ECGB";
pub const BIN_VERSION: u8 = 0x01;
const BIN_HEADER_LEN: usize = 4 + 1 + 4 + 4 + 4;

/// A C×T matrix of lead voltages (millivolts) with its sample rate and lead labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    data: Array2<f32>,
    sample_rate_hz: f32,
    lead_names: Vec<String>,
}

impl EcgRecord {
    pub fn new(data: Array2<f32>, sample_rate_hz: f32, lead_names: Vec<String>) -> Result<Self> {
        let (c, t) = data.dim();
        if c == 0 || t == 0 {
            return Err(Error::DimensionMismatch {
                expected: "at least 1 lead and 1 sample".into(),
                found: format!("{c}x{t}"),
            });
        }
        if lead_names.len() != c {
            return Err(Error::DimensionMismatch {
                expected: format!("{c} lead names"),
                found: format!("{} lead names", lead_names.len()),
            });
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        let mut seen = HashSet::new();
        for name in &lead_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::LeadMismatch(format!("duplicate lead label {name}")));
            }
        }
        for (lead, row) in data.axis_iter(Axis(0)).enumerate() {
            if let Some(index) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { lead, index });
            }
        }
        Ok(Self {
            data,
            sample_rate_hz,
            lead_names,
        })
    }

    /// Builds a record with default lead labels (see [`default_lead_names`]).
    pub fn with_default_leads(data: Array2<f32>, sample_rate_hz: f32) -> Result<Self> {
        let names = default_lead_names(data.nrows());
        Self::new(data, sample_rate_hz, names)
    }

    pub fn data(&self) -> &Array2<f32> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f32> {
        self.data
    }

    pub fn sample_rate_hz(&self) -> f32 {
        self.sample_rate_hz
    }

    pub fn lead_names(&self) -> &[String] {
        &self.lead_names
    }

    pub fn num_leads(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Replaces the sample matrix, keeping the lead labels. Used by stages
    /// that change T or fs but never C.
    pub(crate) fn with_data(&self, data: Array2<f32>, sample_rate_hz: f32) -> Result<Self> {
        Self::new(data, sample_rate_hz, self.lead_names.clone())
    }
}

/// PTB-XL order for 12 leads, otherwise `L0..L{C-1}`.
pub fn default_lead_names(num_leads: usize) -> Vec<String> {
    if num_leads == 12 {
        LeadOrder::ptb_xl().names
    } else {
        (0..num_leads).map(|i| format!("L{i}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeadOrder {
    pub names: Vec<String>,
}

impl LeadOrder {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    /// Canonical 12-lead order.
    pub fn ptb_xl() -> Self {
        Self::new([
            "I", "II", "III", "aVL", "aVR", "aVF", "V1", "V2", "V3", "V4", "V5", "V6",
        ])
    }

    /// Lead order of MIMIC-IV ECG exports.
    pub fn mimic() -> Self {
        Self::new([
            "I", "II", "III", "aVR", "aVF", "aVL", "V1", "V2", "V3", "V4", "V5", "V6",
        ])
    }

    pub fn is_permutation_of(&self, names: &[String]) -> bool {
        if self.names.len() != names.len() {
            return false;
        }
        let ours: HashSet<&str> = self.names.iter().map(String::as_str).collect();
        ours.len() == self.names.len() && names.iter().all(|n| ours.contains(n.as_str()))
    }
}

/// Permutes rows so that the lead labels follow `target`.
pub fn reorder_leads(rec: &EcgRecord, target: &LeadOrder) -> Result<EcgRecord> {
    if rec.lead_names.len() != target.names.len() {
        return Err(Error::LeadMismatch(format!(
            "record has {} leads, target order has {}",
            rec.lead_names.len(),
            target.names.len()
        )));
    }
    let mut rows = Vec::with_capacity(target.names.len());
    for name in &target.names {
        let src = rec
            .lead_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::LeadMismatch(format!("lead {name} missing from record")))?;
        rows.push(src);
    }
    let data = rec.data.select(Axis(0), &rows);
    EcgRecord::new(data, rec.sample_rate_hz, target.names.clone())
}

/// On-disk record format. CSV carries no sample rate, so the caller supplies it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordFormat {
    Csv { sample_rate_hz: f32 },
    Bin,
}

impl RecordFormat {
    /// Picks the format from the file extension (`.csv` or `.ecgb`).
    pub fn from_path(path: &Path, csv_sample_rate_hz: f32) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(RecordFormat::Csv {
                sample_rate_hz: csv_sample_rate_hz,
            }),
            "ecgb" | "bin" => Some(RecordFormat::Bin),
            _ => None,
        }
    }
}

pub fn load_record(path: &Path, format: RecordFormat) -> Result<EcgRecord> {
    match format {
        RecordFormat::Csv { sample_rate_hz } => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_csv(BufReader::new(file), sample_rate_hz)
        }
        RecordFormat::Bin => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_bin(&bytes)
        }
    }
}

pub fn save_record(rec: &EcgRecord, path: &Path, format: RecordFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        RecordFormat::Csv { .. } => write_csv(rec, &mut out),
        RecordFormat::Bin => out.write_all(&encode_bin(rec)),
    }
    .and_then(|_| out.flush())
    .map_err(|e| Error::io(path, e))
}

pub fn read_csv<R: BufRead>(reader: R, sample_rate_hz: f32) -> Result<EcgRecord> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::BadFormat(e.to_string()))?,
        None => return Err(Error::BadFormat("missing CSV header".into())),
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(String::is_empty) {
        return Err(Error::BadFormat("empty lead name in CSV header".into()));
    }
    if names.iter().any(|n| n.parse::<f64>().is_ok()) {
        return Err(Error::BadFormat("CSV header contains a numeric field".into()));
    }
    let c = names.len();
    let mut columns: Vec<Vec<f32>> = vec![Vec::new(); c];
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::BadFormat(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut n = 0;
        for (lead, field) in line.split(',').enumerate() {
            if lead >= c {
                n = lead + 1;
                break;
            }
            let v: f32 = field.trim().parse().map_err(|_| {
                Error::BadFormat(format!("row {}: cannot parse {field:?}", row + 2))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { lead, index: row });
            }
            columns[lead].push(v);
            n = lead + 1;
        }
        if n != c {
            return Err(Error::DimensionMismatch {
                expected: format!("{c} values per row"),
                found: format!("{n} values on row {}", row + 2),
            });
        }
    }
    let t = columns[0].len();
    let flat: Vec<f32> = columns.into_iter().flatten().collect();
    let data = Array2::from_shape_vec((c, t), flat)
        .map_err(|e| Error::BadFormat(e.to_string()))?;
    EcgRecord::new(data, sample_rate_hz, names)
}

pub fn write_csv<W: Write>(rec: &EcgRecord, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{}", rec.lead_names.join(","))?;
    for t in 0..rec.num_samples() {
        let mut first = true;
        for v in rec.data.column(t) {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            // Display for f32 is the shortest representation that round-trips.
            write!(out, "{v}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn encode_bin(rec: &EcgRecord) -> Vec<u8> {
    let (c, t) = rec.data.dim();
    let mut buf = Vec::with_capacity(BIN_HEADER_LEN + 4 * c * t);
    buf.extend_from_slice(BIN_MAGIC);
    buf.push(BIN_VERSION);
    buf.extend_from_slice(&(c as u32).to_le_bytes());
    buf.extend_from_slice(&(t as u32).to_le_bytes());
    buf.extend_from_slice(&rec.sample_rate_hz.to_le_bytes());
    // Standard layout is row-major, which is lead-major here.
    for v in rec.data.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_bin(bytes: &[u8]) -> Result<EcgRecord> {
    if bytes.len() < BIN_HEADER_LEN || &bytes[..4] != BIN_MAGIC {
        return Err(Error::BadFormat("missing ECGB header".into()));
    }
    if bytes[4] != BIN_VERSION {
        return Err(Error::VersionMismatch(format!(
            "record format version {}",
            bytes[4]
        )));
    }
    let word = |at: usize| [bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]];
    let c = u32::from_le_bytes(word(5)) as usize;
    let t = u32::from_le_bytes(word(9)) as usize;
    let fs = f32::from_le_bytes(word(13));
    let payload = &bytes[BIN_HEADER_LEN..];
    let expected = c
        .checked_mul(t)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::BadFormat("header dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::DimensionMismatch {
            expected: format!("{expected} payload bytes for {c}x{t}"),
            found: format!("{} bytes", payload.len()),
        });
    }
    let samples: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let data =
        Array2::from_shape_vec((c, t), samples).map_err(|e| Error::BadFormat(e.to_string()))?;
    EcgRecord::with_default_leads(data, fs)
}
