//! Language-model input layout:
//! `[BOS] [SIG_START] ecg... [SIG_END] question... answer... [EOS]`.
//!
//! ECG id `e` becomes `text_vocab_size + e` in the extended vocabulary.
//! Positions are 1-indexed; supervision covers the answer and `[EOS]`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::bpe::TokenId;
use crate::error::{Error, Result};

/// Number of special tokens in every layout.
pub const NUM_SPECIAL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub bos: TokenId,
    pub sig_start: TokenId,
    pub sig_end: TokenId,
    pub eos: TokenId,
}

impl SpecialTokens {
    /// Four ids right after the extended vocabulary.
    pub fn after(text_vocab_size: TokenId, ecg_vocab_size: TokenId) -> Self {
        let base = text_vocab_size + ecg_vocab_size;
        Self {
            bos: base,
            sig_start: base + 1,
            sig_end: base + 2,
            eos: base + 3,
        }
    }

    pub fn as_array(&self) -> [TokenId; 4] {
        [self.bos, self.sig_start, self.sig_end, self.eos]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabInfo {
    pub text_vocab_size: TokenId,
    /// Tokenizer vocabulary size (256 + merges).
    pub ecg_vocab_size: TokenId,
    pub special: SpecialTokens,
}

impl VocabInfo {
    pub fn new(text_vocab_size: TokenId, ecg_vocab_size: TokenId, special: SpecialTokens) -> Result<Self> {
        let info = Self {
            text_vocab_size,
            ecg_vocab_size,
            special,
        };
        info.validate()?;
        Ok(info)
    }

    pub fn validate(&self) -> Result<()> {
        let ecg_end = self
            .text_vocab_size
            .checked_add(self.ecg_vocab_size)
            .ok_or_else(|| Error::IdCollision("extended vocabulary exceeds u32".into()))?;
        let sp = self.special.as_array();
        for (i, &a) in sp.iter().enumerate() {
            if sp[..i].contains(&a) {
                return Err(Error::IdCollision(format!("special id {a} used twice")));
            }
            if a < self.text_vocab_size {
                return Err(Error::IdCollision(format!("special id {a} is a text id")));
            }
            if a < ecg_end {
                return Err(Error::IdCollision(format!("special id {a} is an ECG id")));
            }
        }
        Ok(())
    }

    pub fn offset_ecg(&self, id: TokenId) -> Result<TokenId> {
        if id >= self.ecg_vocab_size {
            return Err(Error::UnknownToken(id));
        }
        Ok(self.text_vocab_size + id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceLayout {
    pub ids: Vec<TokenId>,
    pub l_x: usize,
    pub l_q: usize,
    pub l_s: usize,
    pub total_len: usize,
    /// First supervised position, 1-indexed.
    pub loss_start: usize,
}

pub fn assemble(
    ecg_ids: &[TokenId],
    question_ids: &[TokenId],
    answer_ids: &[TokenId],
    vocab: &VocabInfo,
) -> Result<SequenceLayout> {
    vocab.validate()?;
    for &t in question_ids.iter().chain(answer_ids) {
        if t >= vocab.text_vocab_size {
            return Err(Error::IdCollision(format!(
                "text id {t} outside the text vocabulary of {}",
                vocab.text_vocab_size
            )));
        }
    }
    let (l_x, l_q, l_s) = (ecg_ids.len(), question_ids.len(), answer_ids.len());
    let total_len = NUM_SPECIAL + l_x + l_q + l_s;
    let mut ids = Vec::with_capacity(total_len);
    ids.push(vocab.special.bos);
    ids.push(vocab.special.sig_start);
    for &e in ecg_ids {
        ids.push(vocab.offset_ecg(e)?);
    }
    ids.push(vocab.special.sig_end);
    ids.extend_from_slice(question_ids);
    ids.extend_from_slice(answer_ids);
    ids.push(vocab.special.eos);
    Ok(SequenceLayout {
        ids,
        l_x,
        l_q,
        l_s,
        total_len,
        loss_start: l_x + l_q + NUM_SPECIAL,
    })
}

/// True at 1-indexed positions `loss_start..=L`.
pub fn loss_mask(layout: &SequenceLayout) -> Vec<bool> {
    (1..=layout.total_len).map(|p| p >= layout.loss_start).collect()
}

/// One JSON line of training data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub ids: Vec<TokenId>,
    pub loss_start: usize,
    #[serde(rename = "L")]
    pub total_len: usize,
}

impl From<&SequenceLayout> for TrainingRecord {
    fn from(l: &SequenceLayout) -> Self {
        Self {
            ids: l.ids.clone(),
            loss_start: l.loss_start,
            total_len: l.total_len,
        }
    }
}

/// Pre-tokenized question/answer pair, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: Vec<TokenId>,
    pub answer: Vec<TokenId>,
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::BadFormat(format!("line {}: {e}", n + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::BadFormat(format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(out: &mut W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
