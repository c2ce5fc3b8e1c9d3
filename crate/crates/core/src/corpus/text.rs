//! Text normalization and word2phrase-style collocation mining.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Splits `raw` on whitespace, strips trailing commas and periods, drops
/// every token that still contains a non-ASCII-alphabetic character and
/// lowercases the rest.
pub fn normalize_text(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .filter_map(|tok| {
            let tok = tok.trim_end_matches([',', '.']);
            if !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_alphabetic()) {
                Some(tok.to_ascii_lowercase())
            } else {
                None
            }
        })
        .collect()
}

/// Settings for [`mine_phrases`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhraseConfig {
    pub threshold: f64,
    pub discount: f64,
    pub passes: usize,
}

impl Default for PhraseConfig {
    fn default() -> Self {
        PhraseConfig {
            threshold: 100.0,
            discount: 5.0,
            passes: 2,
        }
    }
}

impl PhraseConfig {
    fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "phrase threshold must be > 0, got {}",
                self.threshold
            )));
        }
        if self.discount.is_nan() || self.discount < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "phrase discount must be >= 0, got {}",
                self.discount
            )));
        }
        if self.passes == 0 {
            return Err(Error::InvalidArgument("phrase passes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Merges frequent adjacent token pairs into `a_b` phrase tokens.
///
/// Each pass scores every adjacent pair with
/// `(count(ab) - discount) * N / (count(a) * count(b))`, `N` being the total
/// number of tokens, and joins pairs scoring above the threshold. Merges are
/// greedy left to right and never overlap; pairs never span two streams.
/// Later passes see the merged streams, so two passes can build 3- and
/// 4-token phrases.
pub fn mine_phrases(streams: &[Vec<String>], config: &PhraseConfig) -> Result<Vec<Vec<String>>> {
    config.validate()?;
    let mut current = streams.to_vec();
    for _ in 0..config.passes {
        current = merge_pass(&current, config);
    }
    Ok(current)
}

fn merge_pass(streams: &[Vec<String>], config: &PhraseConfig) -> Vec<Vec<String>> {
    let mut unigrams: HashMap<&str, u64> = HashMap::new();
    let mut bigrams: HashMap<(&str, &str), u64> = HashMap::new();
    let mut total = 0u64;
    for stream in streams {
        total += stream.len() as u64;
        for tok in stream {
            *unigrams.entry(tok.as_str()).or_default() += 1;
        }
        for pair in stream.windows(2) {
            *bigrams
                .entry((pair[0].as_str(), pair[1].as_str()))
                .or_default() += 1;
        }
    }

    let score = |a: &str, b: &str| -> f64 {
        let ab = bigrams.get(&(a, b)).copied().unwrap_or(0) as f64;
        let ca = unigrams[a] as f64;
        let cb = unigrams[b] as f64;
        (ab - config.discount) * total as f64 / (ca * cb)
    };

    streams
        .iter()
        .map(|stream| {
            let mut out = Vec::with_capacity(stream.len());
            let mut i = 0;
            while i < stream.len() {
                if i + 1 < stream.len() && score(&stream[i], &stream[i + 1]) > config.threshold {
                    out.push(format!("{}_{}", stream[i], stream[i + 1]));
                    i += 2;
                } else {
                    out.push(stream[i].clone());
                    i += 1;
                }
            }
            out
        })
        .collect()
}
