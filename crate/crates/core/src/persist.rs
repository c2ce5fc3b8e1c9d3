//! Binary model file.
//!
//! All integers and floats are little-endian. Strings are a `u32` byte
//! length followed by UTF-8 bytes.
//!
//! ```text
//! magic        8 bytes   "BIBVECMF"
//! version      u32       1
//! dim          u32
//! categories   u32       number of categories, then per category:
//!   name       string
//!   kind       u8        0 = textual, 1 = non-textual
//!   min_freq   u64
//!   size       u32       number of elements
//!   unk_index  u32       u32::MAX when absent
//! tokens       per category, `size` entries of (string token, u64 frequency)
//! parameters   per category: υ (size × dim f32), then for non-textual
//!              categories ω (size × dim f32) and β (size f32)
//! checksum     u32       CRC-32 of every preceding byte
//! ```

use std::path::Path;

use crate::corpus::vocab::{CategoryVocab, Vocabulary};
use crate::corpus::{CategoryKind, CategorySpec};
use crate::error::{Error, Result};
use crate::model::EmbeddingModel;

pub const MAGIC: &[u8; 8] = b"BIBVECMF";
pub const VERSION: u32 = 1;
const NO_UNK: u32 = u32::MAX;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

fn put_f32s(buf: &mut Vec<u8>, xs: &[f32]) {
    buf.reserve(xs.len() * 4);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

/// Serializes a model and its vocabulary.
pub fn encode_model(model: &EmbeddingModel, vocab: &Vocabulary) -> Result<Vec<u8>> {
    if model.categories().len() != vocab.categories().len() {
        return Err(Error::InvalidArgument(
            "model and vocabulary disagree on categories".into(),
        ));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION);
    put_u32(&mut buf, model.dim() as u32);
    put_u32(&mut buf, vocab.categories().len() as u32);
    for (cat, params) in vocab.categories().iter().zip(model.categories()) {
        if cat.len() != params.len() || cat.name() != params.name() {
            return Err(Error::InvalidArgument(format!(
                "model and vocabulary disagree on category {:?}",
                cat.name()
            )));
        }
        put_str(&mut buf, cat.name());
        buf.push(match cat.kind() {
            CategoryKind::Textual => 0,
            CategoryKind::NonTextual => 1,
        });
        put_u64(&mut buf, cat.spec().min_freq);
        put_u32(&mut buf, cat.len() as u32);
        put_u32(&mut buf, cat.unk_index().map_or(NO_UNK, |u| u as u32));
    }
    for cat in vocab.categories() {
        for (tok, &freq) in cat.tokens().iter().zip(cat.freqs()) {
            put_str(&mut buf, tok);
            put_u64(&mut buf, freq);
        }
    }
    for params in model.categories() {
        put_f32s(&mut buf, params.target_block());
        if params.kind() == CategoryKind::NonTextual {
            put_f32s(&mut buf, params.context_block());
            put_f32s(&mut buf, params.bias_block());
        }
    }
    let crc = crc32fast::hash(&buf);
    put_u32(&mut buf, crc);
    Ok(buf)
}

pub fn save_model(
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(model, vocab)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(EmbeddingModel, Vocabulary)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::Format("block size overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses a model file. Magic and version are checked first, then the
/// checksum, then the structure.
pub fn decode_model(bytes: &[u8]) -> Result<(EmbeddingModel, Vocabulary)> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    if bytes.len() < 12 {
        return Err(Error::Format("file too short".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if bytes.len() < 16 {
        return Err(Error::Format("file too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut r = Reader { buf: body, pos: 12 };
    let dim = r.u32()? as usize;
    let n_cats = r.u32()? as usize;
    let mut headers = Vec::new();
    for _ in 0..n_cats {
        let name = r.string()?;
        let kind = match r.u8()? {
            0 => CategoryKind::Textual,
            1 => CategoryKind::NonTextual,
            k => return Err(Error::Format(format!("unknown category kind {k}"))),
        };
        let min_freq = r.u64()?;
        let size = r.u32()? as usize;
        let unk = r.u32()?;
        let unk = (unk != NO_UNK).then_some(unk as usize);
        headers.push((
            CategorySpec {
                name,
                kind,
                min_freq,
            },
            size,
            unk,
        ));
    }
    let mut cats = Vec::with_capacity(n_cats);
    for (spec, size, unk) in &headers {
        let mut tokens = Vec::with_capacity((*size).min(body.len()));
        let mut freqs = Vec::with_capacity((*size).min(body.len()));
        for _ in 0..*size {
            tokens.push(r.string()?);
            freqs.push(r.u64()?);
        }
        cats.push(
            CategoryVocab::new(spec.clone(), tokens, freqs, *unk)
                .map_err(|e| Error::Format(e.to_string()))?,
        );
    }
    let vocab = Vocabulary::new(cats).map_err(|e| Error::Format(e.to_string()))?;
    let mut blocks = Vec::with_capacity(n_cats);
    for (spec, size, _) in &headers {
        let rows = size
            .checked_mul(dim)
            .ok_or_else(|| Error::Format("block size overflow".into()))?;
        let target = r.f32s(rows)?;
        let (context, bias) = match spec.kind {
            CategoryKind::Textual => (vec![], vec![]),
            CategoryKind::NonTextual => (r.f32s(rows)?, r.f32s(*size)?),
        };
        blocks.push((target, context, bias));
    }
    if r.pos != body.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after parameter blocks",
            body.len() - r.pos
        )));
    }
    let model = EmbeddingModel::from_blocks(&vocab, dim, blocks)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok((model, vocab))
}
