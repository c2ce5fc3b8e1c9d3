//! Bibliographic records, their categories and the train/test split.

pub mod text;
pub mod vocab;

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use text::{mine_phrases, normalize_text, PhraseConfig};
pub use vocab::{build_vocabulary, build_vocabulary_with, encode_paper};

pub const TEXT: &str = "text";
pub const AUTHOR: &str = "author";
pub const REFERENCE: &str = "reference";
pub const YEAR: &str = "year";
pub const PAPER_ID: &str = "paper-id";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryKind {
    Textual,
    NonTextual,
}

impl CategoryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CategoryKind::Textual => "textual",
            CategoryKind::NonTextual => "non_textual",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    pub kind: CategoryKind,
    pub min_freq: u64,
}

impl CategorySpec {
    pub fn new(name: &str, kind: CategoryKind, min_freq: u64) -> Self {
        CategorySpec {
            name: name.to_string(),
            kind,
            min_freq,
        }
    }
}

/// The five categories with the minimum frequencies used for the ACL
/// Anthology data set: text 20, author 5, everything else 1.
pub fn default_categories() -> Vec<CategorySpec> {
    vec![
        CategorySpec::new(TEXT, CategoryKind::Textual, 20),
        CategorySpec::new(AUTHOR, CategoryKind::NonTextual, 5),
        CategorySpec::new(REFERENCE, CategoryKind::NonTextual, 1),
        CategorySpec::new(YEAR, CategoryKind::NonTextual, 1),
        CategorySpec::new(PAPER_ID, CategoryKind::NonTextual, 1),
    ]
}

/// Checks that names are unique, exactly one category is textual and every
/// minimum frequency is at least 1.
pub fn validate_categories(specs: &[CategorySpec]) -> Result<()> {
    let textual = specs
        .iter()
        .filter(|s| s.kind == CategoryKind::Textual)
        .count();
    if textual != 1 {
        return Err(Error::Config(format!(
            "exactly one textual category required, found {textual}"
        )));
    }
    let mut seen = HashSet::new();
    for spec in specs {
        if spec.min_freq == 0 {
            return Err(Error::Config(format!(
                "category {:?} has min_freq 0",
                spec.name
            )));
        }
        if !seen.insert(spec.name.as_str()) {
            return Err(Error::Config(format!("duplicate category {:?}", spec.name)));
        }
    }
    Ok(())
}

/// Reads a JSON array of category specs and validates it.
pub fn load_categories(path: impl AsRef<Path>) -> Result<Vec<CategorySpec>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let specs: Vec<CategorySpec> = serde_json::from_str(&raw)?;
    validate_categories(&specs)?;
    Ok(specs)
}

/// One paper: its id plus element tokens grouped by category name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub elements: BTreeMap<String, Vec<String>>,
}

impl PaperRecord {
    pub fn tokens(&self, category: &str) -> &[String] {
        self.elements.get(category).map_or(&[], Vec::as_slice)
    }

    pub fn year(&self) -> Option<&str> {
        self.tokens(YEAR).first().map(String::as_str)
    }
}

/// Input line schema. Every field but `id` may be omitted.
#[derive(Debug, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub id: String,
    #[serde(default)]
    pub year: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub references: Vec<String>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub r#abstract: String,
}

/// Collapses internal whitespace and lowercases an author name.
pub fn normalize_author(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn dedup_in_order(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items
        .into_iter()
        .filter(|s| !s.is_empty() && seen.insert(s.clone()))
        .collect()
}

impl From<RawRecord> for PaperRecord {
    fn from(raw: RawRecord) -> Self {
        let mut authors = dedup_in_order(raw.authors.iter().map(|a| normalize_author(a)));
        // Author order carries no meaning.
        authors.sort();
        let references = dedup_in_order(raw.references.iter().map(|r| r.trim().to_string()));
        let year = raw.year.trim();
        let mut text = normalize_text(&raw.title);
        text.extend(normalize_text(&raw.r#abstract));

        let mut elements = BTreeMap::new();
        elements.insert(TEXT.to_string(), text);
        elements.insert(AUTHOR.to_string(), authors);
        elements.insert(REFERENCE.to_string(), references);
        elements.insert(
            YEAR.to_string(),
            if year.is_empty() {
                vec![]
            } else {
                vec![year.to_string()]
            },
        );
        elements.insert(PAPER_ID.to_string(), vec![raw.id.clone()]);
        PaperRecord {
            paper_id: raw.id,
            elements,
        }
    }
}

/// Parses JSON-lines records from `reader`. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<PaperRecord>> {
    let mut papers = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.id.trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty paper id".into(),
            });
        }
        if !ids.insert(raw.id.clone()) {
            return Err(Error::DuplicateId {
                id: raw.id,
                line: line_no,
            });
        }
        papers.push(PaperRecord::from(raw));
    }
    Ok(papers)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<PaperRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(std::io::BufReader::new(file))
}

/// Runs phrase mining over the text category of every paper, in place.
pub fn apply_phrases(papers: &mut [PaperRecord], config: &PhraseConfig) -> Result<()> {
    let streams: Vec<Vec<String>> = papers.iter().map(|p| p.tokens(TEXT).to_vec()).collect();
    let merged = mine_phrases(&streams, config)?;
    for (paper, text) in papers.iter_mut().zip(merged) {
        paper.elements.insert(TEXT.to_string(), text);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitOrder {
    /// Seeded shuffle; the first `n_test` shuffled papers form the test set.
    #[default]
    Random,
    /// The `n_test` latest papers by (year, id) form the test set.
    Chronological,
}

/// Splits `papers` into `(train, test)` with `n_test` test papers.
pub fn split_dataset(
    papers: Vec<PaperRecord>,
    n_test: usize,
    seed: u64,
    order: SplitOrder,
) -> Result<(Vec<PaperRecord>, Vec<PaperRecord>)> {
    if n_test > papers.len() {
        return Err(Error::InvalidArgument(format!(
            "test size {n_test} exceeds corpus size {}",
            papers.len()
        )));
    }
    let mut papers = papers;
    match order {
        SplitOrder::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            papers.shuffle(&mut rng);
            let train = papers.split_off(n_test);
            Ok((train, papers))
        }
        SplitOrder::Chronological => {
            papers.sort_by(|a, b| {
                (a.year().unwrap_or(""), &a.paper_id).cmp(&(b.year().unwrap_or(""), &b.paper_id))
            });
            let test = papers.split_off(papers.len() - n_test);
            Ok((papers, test))
        }
    }
}
