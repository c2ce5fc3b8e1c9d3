//! Multinomial logistic regression over bag-of-elements features.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_candidate, McqQuestion};
use crate::corpus::vocab::{EncodedPaper, Vocabulary};
use crate::corpus::AUTHOR;
use crate::error::{Error, Result};
use crate::model::{softmax, ElementRef};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            epochs: 30,
            learning_rate: 0.1,
            l2: 1e-4,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Author classifier. Features are binary indicators of every element of
/// every non-author category; classes are the author vocabulary.
#[derive(Clone, Debug)]
pub struct LogisticBaseline {
    author_category: usize,
    /// First feature index of each category; `None` for the author category.
    offsets: Vec<Option<usize>>,
    n_classes: usize,
    /// Row-major `features × classes`.
    weights: Vec<f32>,
    bias: Vec<f32>,
}

impl LogisticBaseline {
    fn new(vocab: &Vocabulary) -> Result<Self> {
        let author_category = vocab.category_index(AUTHOR)?;
        let mut next = 0;
        let offsets = vocab
            .categories()
            .iter()
            .enumerate()
            .map(|(c, cat)| {
                (c != author_category).then(|| {
                    let off = next;
                    next += cat.len();
                    off
                })
            })
            .collect();
        let n_classes = vocab.category(author_category).len();
        Ok(LogisticBaseline {
            author_category,
            offsets,
            n_classes,
            weights: vec![0.0; next * n_classes],
            bias: vec![0.0; n_classes],
        })
    }

    pub fn n_features(&self) -> usize {
        self.weights.len() / self.n_classes.max(1)
    }

    /// Distinct active feature indices of `paper`, author category excluded.
    pub fn features(&self, paper: &EncodedPaper) -> Vec<usize> {
        let mut feats: Vec<usize> = paper
            .elements
            .iter()
            .zip(&self.offsets)
            .filter_map(|(idx, off)| off.map(|o| (idx, o)))
            .flat_map(|(idx, o)| idx.iter().map(move |&i| o + i as usize))
            .collect();
        feats.sort_unstable();
        feats.dedup();
        feats
    }

    /// Unnormalized class scores.
    pub fn logits(&self, features: &[usize]) -> Vec<f64> {
        let k = self.n_classes;
        let mut z: Vec<f64> = self.bias.iter().map(|&b| b as f64).collect();
        for &f in features {
            let row = &self.weights[f * k..(f + 1) * k];
            z.iter_mut().zip(row).for_each(|(z, &w)| *z += w as f64);
        }
        z
    }

    /// Fits on one example per (paper, author) pair with mini-batch gradient
    /// descent on the mean cross-entropy. The L2 term is applied to the
    /// weight rows a batch touches, which keeps updates sparse.
    pub fn fit(
        vocab: &Vocabulary,
        papers: &[EncodedPaper],
        config: &LogisticConfig,
    ) -> Result<Self> {
        if config.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        let mut model = LogisticBaseline::new(vocab)?;
        let k = model.n_classes;
        let mut examples: Vec<(Vec<usize>, usize)> = Vec::new();
        for paper in papers {
            let feats = model.features(paper);
            for &a in paper.category(model.author_category) {
                examples.push((feats.clone(), a as usize));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let lr = config.learning_rate;
        for epoch in 0..config.epochs {
            examples.shuffle(&mut rng);
            let mut loss = 0.0;
            for batch in examples.chunks(config.batch_size) {
                let scale = 1.0 / batch.len() as f64;
                let mut grad_bias = vec![0.0f64; k];
                let mut grad_rows: HashMap<usize, Vec<f64>> = HashMap::new();
                for (feats, class) in batch {
                    let mut p = softmax(&model.logits(feats));
                    loss -= p[*class].max(f64::MIN_POSITIVE).ln();
                    p[*class] -= 1.0;
                    grad_bias.iter_mut().zip(&p).for_each(|(g, d)| *g += d);
                    for &f in feats {
                        let row = grad_rows.entry(f).or_insert_with(|| vec![0.0; k]);
                        row.iter_mut().zip(&p).for_each(|(g, d)| *g += d);
                    }
                }
                for (b, g) in model.bias.iter_mut().zip(&grad_bias) {
                    *b = (*b as f64 - lr * scale * g) as f32;
                }
                for (f, g) in grad_rows {
                    let row = &mut model.weights[f * k..(f + 1) * k];
                    for (w, g) in row.iter_mut().zip(&g) {
                        let w64 = *w as f64;
                        *w = (w64 - lr * (scale * g + config.l2 * w64)) as f32;
                    }
                }
            }
            log::debug!(
                "logistic epoch {}: mean loss {:.4}",
                epoch + 1,
                loss / examples.len().max(1) as f64
            );
        }
        Ok(model)
    }

    /// Candidate with the highest posterior; ties go to the smaller token.
    pub fn answer(&self, vocab: &Vocabulary, question: &McqQuestion) -> ElementRef {
        let z = self.logits(&self.features(&question.paper));
        let scores: Vec<f64> = question.candidates.iter().map(|c| z[c.index]).collect();
        argmax_candidate(vocab, &question.candidates, &scores)
    }
}

/// Trains the baseline on `train` and answers every question.
pub fn logistic_baseline(
    vocab: &Vocabulary,
    train: &[EncodedPaper],
    questions: &[McqQuestion],
    config: &LogisticConfig,
) -> Result<Vec<ElementRef>> {
    let model = LogisticBaseline::fit(vocab, train, config)?;
    Ok(questions.iter().map(|q| model.answer(vocab, q)).collect())
}
