//! Noise-contrastive estimation of the per-category softmax.
//!
//! For a pair `(t, c)` and `k` noise elements `n_1..n_k` drawn from `P_n` of
//! `c`'s category, with `s(e) = ω_e · υ_t + β_e` and
//! `Δ(e) = s(e) - ln(k · P_n(e))`, the loss is
//!
//! ```text
//! -ln σ(Δ(c)) - Σ_i ln(1 - σ(Δ(n_i)))
//! ```

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::params::{read_target_ref, Parameters, ParametersMut};
use super::{ElementRef, EmbeddingModel, TrainingPair};
use crate::error::{Error, Result};

/// Per-category samplers over the noise distributions.
#[derive(Clone, Debug)]
pub struct NoiseSampler {
    samplers: Vec<Option<WeightedIndex<f64>>>,
}

impl NoiseSampler {
    pub fn new(model: &EmbeddingModel) -> Self {
        let samplers = model
            .categories()
            .iter()
            .map(|c| WeightedIndex::new(c.noise()).ok())
            .collect();
        NoiseSampler { samplers }
    }

    /// Fills `out` with noise indices from `category`.
    pub fn sample_into<R: Rng + ?Sized>(&self, category: usize, rng: &mut R, out: &mut [usize]) {
        let dist = self.samplers[category]
            .as_ref()
            .expect("noise sampled from a textual or empty category");
        out.iter_mut().for_each(|o| *o = dist.sample(rng));
    }

    pub fn sample<R: Rng + ?Sized>(&self, category: usize, k: usize, rng: &mut R) -> Vec<usize> {
        let mut out = vec![0; k];
        self.sample_into(category, rng, &mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputGradient {
    pub element: ElementRef,
    pub context: Vec<f64>,
    pub bias: f64,
}

/// Gradients of one NCE term. Elements absent from the lists have zero
/// gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct NceGradients {
    /// With respect to the effective target vector (`υ` or the text mean).
    pub target: Vec<f64>,
    /// Target rows receiving `weight · target`. For an averaged text target
    /// each distinct token gets `multiplicity / n`.
    pub target_rows: Vec<(ElementRef, f64)>,
    /// Context and bias gradients, one entry per distinct output element.
    pub outputs: Vec<OutputGradient>,
}

impl NceGradients {
    pub fn target_row(&self, e: ElementRef) -> Option<Vec<f64>> {
        self.target_rows
            .iter()
            .find(|(r, _)| *r == e)
            .map(|(_, w)| self.target.iter().map(|g| g * w).collect())
    }

    pub fn output(&self, e: ElementRef) -> Option<&OutputGradient> {
        self.outputs.iter().find(|o| o.element == e)
    }

    /// One gradient-descent step of size `lr`.
    pub fn apply<P: ParametersMut + ?Sized>(&self, params: &mut P, lr: f64) {
        for o in &self.outputs {
            params.add_context(o.element, &o.context, -lr);
            params.add_bias(o.element, -lr * o.bias);
        }
        for &(row, w) in &self.target_rows {
            params.add_target(row, &self.target, -lr * w);
        }
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss and gradients of one training pair against the given noise
/// elements (indices into the context's category).
pub fn nce_loss_and_grads<P: Parameters + ?Sized>(
    params: &P,
    pair: &TrainingPair<'_>,
    noise: &[usize],
) -> Result<(f64, NceGradients)> {
    let d = params.dim();
    let ctx_cat = pair.context.category;
    if params.is_textual(ctx_cat) {
        return Err(Error::TextualContext(format!("#{ctx_cat}")));
    }
    let k = noise.len() as f64;

    let mut target = vec![0.0; d];
    read_target_ref(params, &pair.target, &mut target)?;

    let mut grad_target = vec![0.0; d];
    let mut outputs: Vec<OutputGradient> = Vec::with_capacity(noise.len() + 1);
    let mut omega = vec![0.0; d];
    let mut loss = 0.0;

    let outputs_iter = std::iter::once((pair.context, true))
        .chain(noise.iter().map(|&i| (ElementRef::new(ctx_cat, i), false)));
    for (e, positive) in outputs_iter {
        let p_noise = params.noise_prob(e);
        assert!(p_noise > 0.0, "noise probability must be positive");
        params.read_context(e, &mut omega);
        let score: f64 =
            omega.iter().zip(&target).map(|(w, t)| w * t).sum::<f64>() + params.read_bias(e);
        let delta = score - (k * p_noise).ln();
        // dL/dΔ
        let g = if positive {
            loss += softplus(-delta);
            sigmoid(delta) - 1.0
        } else {
            loss += softplus(delta);
            sigmoid(delta)
        };

        grad_target
            .iter_mut()
            .zip(&omega)
            .for_each(|(gt, w)| *gt += g * w);
        let slot = match outputs.iter().position(|o| o.element == e) {
            Some(pos) => pos,
            None => {
                outputs.push(OutputGradient {
                    element: e,
                    context: vec![0.0; d],
                    bias: 0.0,
                });
                outputs.len() - 1
            }
        };
        let out = &mut outputs[slot];
        out.context
            .iter_mut()
            .zip(&target)
            .for_each(|(gc, t)| *gc += g * t);
        out.bias += g;
    }

    let target_rows = match pair.target {
        super::TargetRef::Element(e) => vec![(e, 1.0)],
        super::TargetRef::TextAverage(text) => {
            let cat = params.text_category();
            let n = text.len() as f64;
            let mut rows: Vec<(ElementRef, f64)> = Vec::new();
            for &tok in text {
                let e = ElementRef::new(cat, tok as usize);
                match rows.iter_mut().find(|(r, _)| *r == e) {
                    Some((_, w)) => *w += 1.0 / n,
                    None => rows.push((e, 1.0 / n)),
                }
            }
            rows
        }
    };

    Ok((
        loss,
        NceGradients {
            target: grad_target,
            target_rows,
            outputs,
        },
    ))
}
