//! Top-k related elements under three similarity measures.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{ElementRef, EmbeddingModel};

/// Maximum number of suggestions attached to a not-found error.
pub const MAX_SUGGESTIONS: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMeasure {
    /// The model's own score `ω · υ + β`, predicting the candidate from the
    /// query (or the query from the candidate when the candidate is textual).
    #[default]
    Linear,
    /// `υ_query · υ_candidate`
    Dot,
    /// Cosine similarity of the two target vectors.
    Cosine,
}

impl SimilarityMeasure {
    pub const ALL: [SimilarityMeasure; 3] = [Self::Linear, Self::Dot, Self::Cosine];

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityMeasure::Linear => "linear",
            SimilarityMeasure::Dot => "dot",
            SimilarityMeasure::Cosine => "cosine",
        }
    }
}

impl fmt::Display for SimilarityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(SimilarityMeasure::Linear),
            "dot" => Ok(SimilarityMeasure::Dot),
            "cosine" => Ok(SimilarityMeasure::Cosine),
            other => Err(Error::InvalidArgument(format!(
                "unknown similarity measure {other:?} (expected linear, dot or cosine)"
            ))),
        }
    }
}

/// Elements ranked by descending score.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankedResult {
    pub entries: Vec<(ElementRef, f64)>,
}

impl RankedResult {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn elements(&self) -> impl Iterator<Item = ElementRef> + '_ {
        self.entries.iter().map(|(e, _)| *e)
    }
}

/// Looks up `token` in `category`. A miss carries up to
/// [`MAX_SUGGESTIONS`] tokens of that category closest by edit distance.
pub fn resolve_query(vocab: &Vocabulary, category: &str, token: &str) -> Result<ElementRef> {
    let cat = vocab.category_index(category)?;
    let cv = vocab.category(cat);
    match cv.get(token) {
        Some(i) => Ok(ElementRef::new(cat, i)),
        None => Err(Error::NotFound {
            category: category.to_string(),
            token: token.to_string(),
            suggestions: suggest(cv.tokens(), token, MAX_SUGGESTIONS),
        }),
    }
}

/// The `n` tokens closest to `query` by Levenshtein distance, ties by token.
pub fn suggest(tokens: &[String], query: &str, n: usize) -> Vec<String> {
    let mut scored: Vec<(usize, &String)> = tokens
        .iter()
        .map(|t| (strsim::levenshtein(t, query), t))
        .collect();
    scored.sort();
    scored.into_iter().take(n).map(|(_, t)| t.clone()).collect()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Score of `candidate` for `query` under `measure`.
pub fn similarity(
    model: &EmbeddingModel,
    query: ElementRef,
    candidate: ElementRef,
    measure: SimilarityMeasure,
) -> Result<f64> {
    match measure {
        SimilarityMeasure::Linear => {
            let (target, context) = if !model.is_textual(candidate.category) {
                (query, candidate)
            } else if !model.is_textual(query.category) {
                (candidate, query)
            } else {
                return Err(Error::UnsupportedMeasure { measure: "linear" });
            };
            let omega = model.context(context).expect("non-textual");
            let beta = model.bias(context).expect("non-textual") as f64;
            Ok(dot(omega, model.target(target)) + beta)
        }
        SimilarityMeasure::Dot => Ok(dot(model.target(query), model.target(candidate))),
        SimilarityMeasure::Cosine => {
            let q = model.target(query);
            let c = model.target(candidate);
            let denom = norm(q) * norm(c);
            if denom == 0.0 {
                return Err(Error::ZeroNorm);
            }
            Ok(dot(q, c) / denom)
        }
    }
}

/// Exhaustively scores `target_category` against `query` and returns the
/// best `k`. The query itself and `exclusions` are skipped; equal scores
/// are ordered by token.
pub fn top_k(
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    query: ElementRef,
    target_category: usize,
    measure: SimilarityMeasure,
    k: usize,
    exclusions: &HashSet<ElementRef>,
) -> Result<RankedResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if target_category >= model.categories().len() {
        return Err(Error::InvalidArgument(format!(
            "no category #{target_category}"
        )));
    }
    let tokens = vocab.category(target_category).tokens();
    let mut scored = Vec::with_capacity(tokens.len());
    for i in 0..model.category(target_category).len() {
        let e = ElementRef::new(target_category, i);
        if e == query || exclusions.contains(&e) {
            continue;
        }
        scored.push((e, similarity(model, query, e, measure)?));
    }
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| tokens[a.0.index].cmp(&tokens[b.0.index]))
    });
    scored.truncate(k);
    Ok(RankedResult { entries: scored })
}
