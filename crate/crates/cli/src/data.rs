//! On-disk layout of an ingested data directory.
//!
//! - `vocab.json`: the vocabulary, categories in model order
//! - `train.jsonl`, `test.jsonl`: one encoded paper per line,
//!   `{"paper_id": ..., "elements": [[indices of category 0], ...]}`
//! - `ingest.json`: the settings and counts of the ingest run

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bibvec::{EncodedPaper, Vocabulary};

pub const VOCAB: &str = "vocab.json";
pub const TRAIN: &str = "train.jsonl";
pub const TEST: &str = "test.jsonl";
pub const MANIFEST: &str = "ingest.json";

pub struct DataDir(pub PathBuf);

impl DataDir {
    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn vocab(&self) -> Result<Vocabulary> {
        let path = self.path(VOCAB);
        Vocabulary::load(&path).with_context(|| format!("reading {}", path.display()))
    }

    pub fn papers(&self, name: &str, vocab: &Vocabulary) -> Result<Vec<EncodedPaper>> {
        let path = self.path(name);
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let mut papers = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let paper: EncodedPaper = serde_json::from_str(&line)
                .with_context(|| format!("{}:{}", path.display(), i + 1))?;
            check_paper(&paper, vocab).with_context(|| format!("{}:{}", path.display(), i + 1))?;
            papers.push(paper);
        }
        Ok(papers)
    }
}

fn check_paper(paper: &EncodedPaper, vocab: &Vocabulary) -> Result<()> {
    if paper.elements.len() != vocab.categories().len() {
        bail!(
            "paper {:?} has {} categories, vocabulary has {}",
            paper.paper_id,
            paper.elements.len(),
            vocab.categories().len()
        );
    }
    for (idx, cat) in paper.elements.iter().zip(vocab.categories()) {
        if let Some(&i) = idx.iter().find(|&&i| i as usize >= cat.len()) {
            bail!(
                "paper {:?}: index {i} out of range for {}",
                paper.paper_id,
                cat.name()
            );
        }
    }
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
