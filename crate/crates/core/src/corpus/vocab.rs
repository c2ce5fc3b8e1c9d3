//! Per-category vocabularies and index-encoded papers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{validate_categories, CategoryKind, CategorySpec, PaperRecord};
use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";

/// What to do with a token that is not in its category's vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    #[default]
    Drop,
    /// Append an [`UNK_TOKEN`] entry to every category and map unknowns to it.
    MapToUnk,
}

/// Token/index maps for one category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CategoryVocabRepr", into = "CategoryVocabRepr")]
pub struct CategoryVocab {
    spec: CategorySpec,
    tokens: Vec<String>,
    freqs: Vec<u64>,
    unk_index: Option<usize>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CategoryVocabRepr {
    #[serde(flatten)]
    spec: CategorySpec,
    tokens: Vec<String>,
    freqs: Vec<u64>,
    unk_index: Option<usize>,
}

impl TryFrom<CategoryVocabRepr> for CategoryVocab {
    type Error = Error;

    fn try_from(r: CategoryVocabRepr) -> Result<Self> {
        CategoryVocab::new(r.spec, r.tokens, r.freqs, r.unk_index)
    }
}

impl From<CategoryVocab> for CategoryVocabRepr {
    fn from(v: CategoryVocab) -> Self {
        CategoryVocabRepr {
            spec: v.spec,
            tokens: v.tokens,
            freqs: v.freqs,
            unk_index: v.unk_index,
        }
    }
}

impl CategoryVocab {
    pub fn new(
        spec: CategorySpec,
        tokens: Vec<String>,
        freqs: Vec<u64>,
        unk_index: Option<usize>,
    ) -> Result<Self> {
        if tokens.len() != freqs.len() {
            return Err(Error::Config(format!(
                "category {:?}: {} tokens but {} frequencies",
                spec.name,
                tokens.len(),
                freqs.len()
            )));
        }
        if unk_index.is_some_and(|u| u >= tokens.len()) {
            return Err(Error::Config(format!(
                "category {:?}: unknown index out of range",
                spec.name
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(Error::Config(format!(
                    "category {:?}: duplicate token {tok:?}",
                    spec.name
                )));
            }
        }
        Ok(CategoryVocab {
            spec,
            tokens,
            freqs,
            unk_index,
            index,
        })
    }

    pub fn spec(&self) -> &CategorySpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn kind(&self) -> CategoryKind {
        self.spec.kind
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freqs
    }

    pub fn unk_index(&self) -> Option<usize> {
        self.unk_index
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }
}

/// Vocabularies for every configured category, in configuration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    categories: Vec<CategoryVocab>,
    text_category: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    categories: Vec<CategoryVocab>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Vocabulary::new(r.categories)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            categories: v.categories,
        }
    }
}

impl Vocabulary {
    pub fn new(categories: Vec<CategoryVocab>) -> Result<Self> {
        let specs: Vec<_> = categories.iter().map(|c| c.spec.clone()).collect();
        validate_categories(&specs)?;
        let text_category = categories
            .iter()
            .position(|c| c.kind() == CategoryKind::Textual)
            .expect("validated");
        Ok(Vocabulary {
            categories,
            text_category,
        })
    }

    pub fn categories(&self) -> &[CategoryVocab] {
        &self.categories
    }

    pub fn category(&self, index: usize) -> &CategoryVocab {
        &self.categories[index]
    }

    pub fn category_index(&self, name: &str) -> Result<usize> {
        self.categories
            .iter()
            .position(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownCategory(name.to_string()))
    }

    pub fn text_category(&self) -> usize {
        self.text_category
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&raw)?)
    }
}

pub fn build_vocabulary(papers: &[PaperRecord], specs: &[CategorySpec]) -> Result<Vocabulary> {
    build_vocabulary_with(papers, specs, UnknownPolicy::Drop)
}

/// Counts every element occurrence per category and keeps tokens seen at
/// least `min_freq` times. Indices are assigned by descending frequency,
/// ties broken by token order. Categories present in the papers but absent
/// from `specs` are ignored.
pub fn build_vocabulary_with(
    papers: &[PaperRecord],
    specs: &[CategorySpec],
    policy: UnknownPolicy,
) -> Result<Vocabulary> {
    validate_categories(specs)?;
    let mut categories = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for paper in papers {
            for tok in paper.tokens(&spec.name) {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut dropped = 0u64;
        let mut kept: Vec<(&str, u64)> = Vec::new();
        for (tok, n) in counts {
            if n >= spec.min_freq {
                kept.push((tok, n));
            } else {
                dropped += n;
            }
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
        let mut freqs: Vec<u64> = kept.iter().map(|(_, n)| *n).collect();
        let unk_index = match policy {
            UnknownPolicy::Drop => None,
            UnknownPolicy::MapToUnk => {
                tokens.push(UNK_TOKEN.to_string());
                freqs.push(dropped);
                Some(tokens.len() - 1)
            }
        };
        categories.push(CategoryVocab::new(spec.clone(), tokens, freqs, unk_index)?);
    }
    Vocabulary::new(categories)
}

/// A paper with its elements replaced by vocabulary indices. `elements` is
/// aligned with the vocabulary's category order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedPaper {
    pub paper_id: String,
    pub elements: Vec<Vec<u32>>,
}

impl EncodedPaper {
    pub fn category(&self, index: usize) -> &[u32] {
        &self.elements[index]
    }

    /// Maps indices back to tokens, keyed by category name.
    pub fn decode(&self, vocab: &Vocabulary) -> Vec<(String, Vec<String>)> {
        vocab
            .categories()
            .iter()
            .zip(&self.elements)
            .map(|(cat, idx)| {
                (
                    cat.name().to_string(),
                    idx.iter()
                        .map(|&i| cat.token(i as usize).to_string())
                        .collect(),
                )
            })
            .collect()
    }
}

/// Encodes `paper` against `vocab`, keeping token order. Unknown tokens are
/// dropped, or mapped to the category's unknown entry when it has one.
pub fn encode_paper(vocab: &Vocabulary, paper: &PaperRecord) -> EncodedPaper {
    let elements = vocab
        .categories()
        .iter()
        .map(|cat| {
            paper
                .tokens(cat.name())
                .iter()
                .filter_map(|tok| cat.get(tok).or(cat.unk_index()))
                .map(|i| i as u32)
                .collect()
        })
        .collect();
    EncodedPaper {
        paper_id: paper.paper_id.clone(),
        elements,
    }
}
