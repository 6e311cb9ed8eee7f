//! Trained merge table and its text file format.

use std::path::Path;

use crate::error::{Error, Result};
use crate::quantizer::MAX_ALPHABET;

use super::stats::Pair;
use super::{TokenId, BASE_VOCAB};

pub const FORMAT_HEADER: &str = "ecg-byte v1";
pub const FORMAT_VERSION: u32 = 1;

const ALL_BYTES: [u8; 256] = {
    let mut t = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        t[i] = i as u8;
        i += 1;
    }
    t
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Merge {
    pub pair: Pair,
    pub new_id: TokenId,
}

/// Base ids `0..256` stand for their own byte; merge `i` defines id
/// `256 + i` as the concatenation of its pair's expansions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    alphabet_size: usize,
    merges: Vec<Merge>,
    expansions: Vec<Vec<u8>>,
}

impl Tokenizer {
    pub fn new(alphabet_size: usize) -> Result<Self> {
        if !(2..=MAX_ALPHABET).contains(&alphabet_size) {
            return Err(Error::InvalidParameter(format!(
                "alphabet size {alphabet_size} outside 2..={MAX_ALPHABET}"
            )));
        }
        Ok(Self {
            alphabet_size,
            merges: Vec::new(),
            expansions: Vec::new(),
        })
    }

    /// Validates numbering and references while rebuilding expansions.
    pub fn from_merges(alphabet_size: usize, merges: impl IntoIterator<Item = Merge>) -> Result<Self> {
        let mut tok = Self::new(alphabet_size)?;
        for m in merges {
            tok.push_merge(m.pair)
                .and_then(|id| {
                    if id == m.new_id {
                        Ok(())
                    } else {
                        Err(Error::BadFormat(format!(
                            "merge {} defines id {}, expected {id}",
                            tok.merges.len() - 1,
                            m.new_id
                        )))
                    }
                })?;
        }
        Ok(tok)
    }

    /// Appends a merge and returns its id.
    pub(crate) fn push_merge(&mut self, pair: Pair) -> Result<TokenId> {
        let new_id = self.next_id();
        for side in [pair.0, pair.1] {
            if side >= new_id {
                return Err(Error::BadFormat(format!(
                    "merge for id {new_id} references undefined id {side}"
                )));
            }
        }
        let mut exp = self.expansion(pair.0)?.to_vec();
        exp.extend_from_slice(self.expansion(pair.1)?);
        self.merges.push(Merge { pair, new_id });
        self.expansions.push(exp);
        Ok(new_id)
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    /// Number of ids: 256 base bytes plus one per merge.
    pub fn vocab_size(&self) -> usize {
        BASE_VOCAB as usize + self.merges.len()
    }

    pub fn next_id(&self) -> TokenId {
        BASE_VOCAB + self.merges.len() as TokenId
    }

    pub fn contains(&self, id: TokenId) -> bool {
        (id as usize) < self.vocab_size()
    }

    /// Base-byte string an id stands for.
    pub fn expansion(&self, id: TokenId) -> Result<&[u8]> {
        if id < BASE_VOCAB {
            Ok(std::slice::from_ref(&ALL_BYTES[id as usize]))
        } else {
            self.expansions
                .get((id - BASE_VOCAB) as usize)
                .map(Vec::as_slice)
                .ok_or(Error::UnknownToken(id))
        }
    }

    /// Expansion as base ids.
    pub fn vocab_tokens(&self, id: TokenId) -> Result<Vec<TokenId>> {
        Ok(self.expansion(id)?.iter().map(|&b| TokenId::from(b)).collect())
    }

    /// Expansion rendered as text (symbol bytes are ASCII letters).
    pub fn vocab_string(&self, id: TokenId) -> Result<String> {
        Ok(self.expansion(id)?.iter().map(|&b| char::from(b)).collect())
    }

    /// Concatenated expansions of `ids`.
    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(ids.len() * 4);
        for &id in ids {
            out.extend_from_slice(self.expansion(id)?);
        }
        Ok(out)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = format!(
            "{FORMAT_HEADER}\nalphabet_size {}\nnum_merges {}\n",
            self.alphabet_size,
            self.merges.len()
        );
        for m in &self.merges {
            s.push_str(&format!("{} {} {}\n", m.pair.0, m.pair.1, m.new_id));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != FORMAT_HEADER {
            return Err(if header.starts_with("ecg-byte ") {
                Error::VersionMismatch(format!(
                    "tokenizer file is {header:?}, this build reads {FORMAT_HEADER:?}"
                ))
            } else {
                Error::BadFormat(format!("not a tokenizer file (header {header:?})"))
            });
        }
        let alphabet_size = header_value(lines.next(), "alphabet_size")?;
        let num_merges = header_value(lines.next(), "num_merges")?;
        let mut merges = Vec::with_capacity(num_merges);
        for (i, line) in lines.enumerate() {
            if i >= num_merges {
                return Err(Error::BadFormat(format!(
                    "more than the declared {num_merges} merge lines"
                )));
            }
            let fields: Vec<&str> = line.split(' ').collect();
            let parsed: Vec<TokenId> = fields
                .iter()
                .map(|f| f.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::BadFormat(format!("merge line {}: {line:?}", i + 1)))?;
            let [left, right, new_id] = parsed[..] else {
                return Err(Error::BadFormat(format!("merge line {}: {line:?}", i + 1)));
            };
            merges.push(Merge {
                pair: (left, right),
                new_id,
            });
        }
        if merges.len() != num_merges {
            return Err(Error::BadFormat(format!(
                "declared {num_merges} merges, found {}",
                merges.len()
            )));
        }
        Self::from_merges(alphabet_size, merges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NoTokenizer(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Self::parse(&text)
    }
}

fn header_value(line: Option<&str>, key: &str) -> Result<usize> {
    line.and_then(|l| l.strip_prefix(key))
        .and_then(|rest| rest.strip_prefix(' '))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::BadFormat(format!("expected `{key} <n>` line")))
}
