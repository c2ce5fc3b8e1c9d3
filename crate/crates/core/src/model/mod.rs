//! Embedding parameters and the prediction model.
//!
//! Each element has a target vector. Elements of non-textual categories also
//! have a context vector and a bias, and only they are ever predicted. For a
//! target `t` and a context element `c` of category `j` the model scores
//! `ω_c · υ_t + β_c` and normalizes with a softmax over all of category `j`.
//! A paper's text enters as one target, the mean of its tokens' `υ`.
//!
//! Parameters are stored as `f32`; every score, loss and gradient is computed
//! in `f64`.

mod nce;
mod pairs;
mod params;
mod train;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::vocab::Vocabulary;
use crate::corpus::CategoryKind;
use crate::error::{Error, Result};

pub use nce::{nce_loss_and_grads, NceGradients, NoiseSampler, OutputGradient};
pub use pairs::generate_pairs;
pub use params::{Parameters, ParametersMut};
pub use train::{train, TrainConfig, TrainReport};

/// Exponent applied to unigram counts to build the noise distribution.
pub const NOISE_POWER: f64 = 0.75;

/// One element: a category index and an index within that category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementRef {
    pub category: usize,
    pub index: usize,
}

impl ElementRef {
    pub fn new(category: usize, index: usize) -> Self {
        ElementRef { category, index }
    }
}

/// The input side of a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetRef<'a> {
    Element(ElementRef),
    /// The averaged text of a paper, given by its text-token indices
    /// (duplicates count with multiplicity).
    TextAverage(&'a [u32]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainingPair<'a> {
    pub target: TargetRef<'a>,
    pub context: ElementRef,
}

/// Parameters of one category. `context`, `bias` and `noise` are empty for
/// the textual category.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryParams {
    pub(crate) name: String,
    pub(crate) kind: CategoryKind,
    pub(crate) len: usize,
    pub(crate) target: Vec<f32>,
    pub(crate) context: Vec<f32>,
    pub(crate) bias: Vec<f32>,
    pub(crate) noise: Vec<f64>,
}

impl CategoryParams {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> CategoryKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Row-major `len × d` target vectors.
    pub fn target_block(&self) -> &[f32] {
        &self.target
    }

    pub fn context_block(&self) -> &[f32] {
        &self.context
    }

    pub fn bias_block(&self) -> &[f32] {
        &self.bias
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    categories: Vec<CategoryParams>,
    text_category: usize,
}

/// Unigram counts raised to [`NOISE_POWER`] and normalized. Zero counts are
/// floored at one so every entry stays strictly positive.
pub fn noise_distribution(freqs: &[u64]) -> Vec<f64> {
    let weights: Vec<f64> = freqs
        .iter()
        .map(|&f| (f.max(1) as f64).powf(NOISE_POWER))
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

impl EmbeddingModel {
    /// Target vectors are drawn uniformly from `[-0.5/d, 0.5/d]`; context
    /// vectors and biases start at zero.
    pub fn init(vocab: &Vocabulary, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f32;
        let uniform = Uniform::new_inclusive(-half, half).expect("finite bounds");
        let categories = vocab
            .categories()
            .iter()
            .map(|cat| {
                let n = cat.len();
                let target = (0..n * dim).map(|_| uniform.sample(&mut rng)).collect();
                let (context, bias, noise) = match cat.kind() {
                    CategoryKind::Textual => (vec![], vec![], vec![]),
                    CategoryKind::NonTextual => (
                        vec![0.0; n * dim],
                        vec![0.0; n],
                        noise_distribution(cat.freqs()),
                    ),
                };
                CategoryParams {
                    name: cat.name().to_string(),
                    kind: cat.kind(),
                    len: n,
                    target,
                    context,
                    bias,
                    noise,
                }
            })
            .collect();
        Ok(EmbeddingModel {
            dim,
            categories,
            text_category: vocab.text_category(),
        })
    }

    /// Rebuilds a model from raw parameter blocks, one `(υ, ω, β)` triple per
    /// vocabulary category. `ω` and `β` must be empty for the textual
    /// category.
    pub fn from_blocks(
        vocab: &Vocabulary,
        dim: usize,
        blocks: Vec<(Vec<f32>, Vec<f32>, Vec<f32>)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if blocks.len() != vocab.categories().len() {
            return Err(Error::InvalidArgument(format!(
                "{} parameter blocks for {} categories",
                blocks.len(),
                vocab.categories().len()
            )));
        }
        let categories = vocab
            .categories()
            .iter()
            .zip(blocks)
            .map(|(cat, (target, context, bias))| {
                let n = cat.len();
                let textual = cat.kind() == CategoryKind::Textual;
                let (ctx_len, bias_len) = if textual { (0, 0) } else { (n * dim, n) };
                if target.len() != n * dim || context.len() != ctx_len || bias.len() != bias_len {
                    return Err(Error::InvalidArgument(format!(
                        "parameter block sizes do not match category {:?}",
                        cat.name()
                    )));
                }
                Ok(CategoryParams {
                    name: cat.name().to_string(),
                    kind: cat.kind(),
                    len: n,
                    target,
                    context,
                    bias,
                    noise: if textual {
                        vec![]
                    } else {
                        noise_distribution(cat.freqs())
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EmbeddingModel {
            dim,
            categories,
            text_category: vocab.text_category(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn categories(&self) -> &[CategoryParams] {
        &self.categories
    }

    pub fn category(&self, index: usize) -> &CategoryParams {
        &self.categories[index]
    }

    pub fn text_category(&self) -> usize {
        self.text_category
    }

    pub fn is_textual(&self, category: usize) -> bool {
        self.categories[category].kind == CategoryKind::Textual
    }

    /// Total number of scalar parameters: `d` per element plus `d + 1` per
    /// non-textual element.
    pub fn parameter_count(&self) -> usize {
        self.categories
            .iter()
            .map(|c| c.target.len() + c.context.len() + c.bias.len())
            .sum()
    }

    pub fn target(&self, e: ElementRef) -> &[f32] {
        let d = self.dim;
        &self.categories[e.category].target[e.index * d..(e.index + 1) * d]
    }

    pub fn target_mut(&mut self, e: ElementRef) -> &mut [f32] {
        let d = self.dim;
        &mut self.categories[e.category].target[e.index * d..(e.index + 1) * d]
    }

    pub fn context(&self, e: ElementRef) -> Option<&[f32]> {
        let d = self.dim;
        let cat = &self.categories[e.category];
        (cat.kind == CategoryKind::NonTextual).then(|| &cat.context[e.index * d..(e.index + 1) * d])
    }

    pub fn context_mut(&mut self, e: ElementRef) -> Option<&mut [f32]> {
        let d = self.dim;
        let cat = &mut self.categories[e.category];
        (cat.kind == CategoryKind::NonTextual)
            .then(|| &mut cat.context[e.index * d..(e.index + 1) * d])
    }

    pub fn bias(&self, e: ElementRef) -> Option<f32> {
        self.categories[e.category].bias.get(e.index).copied()
    }

    pub fn bias_mut(&mut self, e: ElementRef) -> Option<&mut f32> {
        self.categories[e.category].bias.get_mut(e.index)
    }

    /// Mean of the target vectors of `text` (indices into the textual
    /// category), counting repeated tokens with multiplicity.
    pub fn text_target_vector(&self, text: &[u32]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        params::read_target_ref(self, &TargetRef::TextAverage(text), &mut out)?;
        Ok(out)
    }

    /// `υ` of an element, or the averaged text vector.
    pub fn target_vector(&self, target: &TargetRef<'_>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        params::read_target_ref(self, target, &mut out)?;
        Ok(out)
    }

    fn check_context_category(&self, category: usize) -> Result<()> {
        if self.is_textual(category) {
            Err(Error::TextualContext(
                self.categories[category].name.clone(),
            ))
        } else {
            Ok(())
        }
    }

    /// `ω_context · υ_target + β_context`.
    pub fn logit(&self, target: &TargetRef<'_>, context: ElementRef) -> Result<f64> {
        self.check_context_category(context.category)?;
        let t = self.target_vector(target)?;
        Ok(self.logit_with(&t, context))
    }

    pub(crate) fn logit_with(&self, target: &[f64], context: ElementRef) -> f64 {
        let omega = self.context(context).expect("non-textual");
        let dot: f64 = omega.iter().zip(target).map(|(&w, &t)| w as f64 * t).sum();
        dot + self.bias(context).expect("non-textual") as f64
    }

    /// Logits of every element of `category` for one target.
    pub fn logits(&self, target: &TargetRef<'_>, category: usize) -> Result<Vec<f64>> {
        self.check_context_category(category)?;
        let t = self.target_vector(target)?;
        Ok((0..self.categories[category].len)
            .map(|i| self.logit_with(&t, ElementRef::new(category, i)))
            .collect())
    }

    /// Probability of every element of `category` given `target`.
    pub fn softmax_predict(&self, target: &TargetRef<'_>, category: usize) -> Result<Vec<f64>> {
        let logits = self.logits(target, category)?;
        Ok(softmax(&logits))
    }

    /// Exact negative log-likelihood `-Σ ln p(context | target)`.
    pub fn full_softmax_loss(&self, pairs: &[TrainingPair<'_>]) -> Result<f64> {
        let mut total = 0.0;
        for pair in pairs {
            let logits = self.logits(&pair.target, pair.context.category)?;
            total += log_sum_exp(&logits) - logits[pair.context.index];
        }
        Ok(total)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
