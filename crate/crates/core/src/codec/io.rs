//! Encoded id files and span exports.
//!
//! Text: one record per line, ids as space-separated decimals.
//! Binary: per record, `ECGT`, a little-endian u32 count, then the ids as
//! little-endian u32. Records are concatenated.
//! Spans: JSON lines `{"id":..,"start":..,"len":..}`.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::bpe::TokenId;
use crate::error::{Error, Result};

use super::TokenSpan;

pub const FRAME_MAGIC: &[u8; 4] = b"ECGT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodedFormat {
    Text,
    Bin,
}

impl EncodedFormat {
    /// `.bin` and `.ecgt` are binary, anything else text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin" | "ecgt") => Self::Bin,
            _ => Self::Text,
        }
    }
}

pub fn write_ids_text<W: Write>(out: &mut W, records: &[Vec<TokenId>]) -> std::io::Result<()> {
    for ids in records {
        let mut first = true;
        for id in ids {
            if !first {
                out.write_all(b" ")?;
            }
            write!(out, "{id}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ids_text<R: BufRead>(input: R) -> Result<Vec<Vec<TokenId>>> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::BadFormat(format!("line {}: {e}", n + 1)))?;
        let ids = line
            .split_ascii_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::BadFormat(format!("line {}: bad id {t:?}", n + 1)))
            })
            .collect::<Result<Vec<TokenId>>>()?;
        records.push(ids);
    }
    Ok(records)
}

pub fn encode_frame(ids: &[TokenId], out: &mut Vec<u8>) {
    out.extend_from_slice(FRAME_MAGIC);
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    for id in ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
}

pub fn encode_frames(records: &[Vec<TokenId>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.iter().map(|r| 8 + 4 * r.len()).sum());
    for r in records {
        encode_frame(r, &mut out);
    }
    out
}

pub fn decode_frames(mut bytes: &[u8]) -> Result<Vec<Vec<TokenId>>> {
    let mut records = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < 8 || &bytes[..4] != FRAME_MAGIC {
            return Err(Error::BadFormat(format!(
                "frame {}: missing ECGT header",
                records.len()
            )));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let body = &bytes[8..];
        if body.len() < count * 4 {
            return Err(Error::BadFormat(format!(
                "frame {}: {count} ids declared, {} bytes left",
                records.len(),
                body.len()
            )));
        }
        records.push(
            body[..count * 4]
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        );
        bytes = &body[count * 4..];
    }
    Ok(records)
}

pub fn save_encoded(path: &Path, records: &[Vec<TokenId>], format: EncodedFormat) -> Result<()> {
    let bytes = match format {
        EncodedFormat::Bin => encode_frames(records),
        EncodedFormat::Text => {
            let mut buf = Vec::new();
            write_ids_text(&mut buf, records).expect("writing to memory");
            buf
        }
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_encoded(path: &Path, format: EncodedFormat) -> Result<Vec<Vec<TokenId>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        EncodedFormat::Bin => decode_frames(&bytes),
        EncodedFormat::Text => read_ids_text(bytes.as_slice()),
    }
}

pub fn write_spans_jsonl<W: Write>(out: &mut W, spans: &[TokenSpan]) -> std::io::Result<()> {
    for s in spans {
        serde_json::to_writer(&mut *out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_spans_jsonl<R: BufRead>(input: R) -> Result<Vec<TokenSpan>> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(n, l)| {
            let l = l.map_err(|e| Error::BadFormat(format!("line {}: {e}", n + 1)))?;
            serde_json::from_str(&l).map_err(|e| Error::BadFormat(format!("line {}: {e}", n + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_keeps_empty_records() {
        let recs = vec![vec![97, 256, 3000], vec![], vec![5]];
        let mut buf = Vec::new();
        write_ids_text(&mut buf, &recs).unwrap();
        assert_eq!(buf, b"97 256 3000\n\n5\n");
        assert_eq!(read_ids_text(buf.as_slice()).unwrap(), recs);
        assert!(read_ids_text(&b"1 x\n"[..]).is_err());
    }

    #[test]
    fn frame_layout() {
        let mut out = Vec::new();
        encode_frame(&[1, 256], &mut out);
        assert_eq!(out, [b"ECGT".as_slice(), &[2, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0]].concat());
        let recs = vec![vec![1, 256], vec![], vec![70000]];
        assert_eq!(decode_frames(&encode_frames(&recs)).unwrap(), recs);
    }

    #[test]
    fn truncated_frames_fail() {
        let bytes = encode_frames(&[vec![1, 2, 3]]);
        assert!(decode_frames(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_frames(b"ECGX\0\0\0\0").is_err());
    }

    #[test]
    fn spans_jsonl() {
        let spans = vec![TokenSpan { id: 257, start: 0, len: 4 }, TokenSpan { id: 97, start: 4, len: 1 }];
        let mut buf = Vec::new();
        write_spans_jsonl(&mut buf, &spans).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "{\"id\":257,\"start\":0,\"len\":4}\n{\"id\":97,\"start\":4,\"len\":1}\n"
        );
        assert_eq!(read_spans_jsonl(buf.as_slice()).unwrap(), spans);
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(EncodedFormat::from_path(Path::new("a.bin")), EncodedFormat::Bin);
        assert_eq!(EncodedFormat::from_path(Path::new("a.txt")), EncodedFormat::Text);
    }
}
