use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nce::{nce_loss_and_grads, NoiseSampler};
use super::pairs::generate_pairs;
use super::params::{Parameters, ParametersMut};
use super::{ElementRef, EmbeddingModel};
use crate::corpus::vocab::EncodedPaper;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Learning rate at the start of training.
    pub learning_rate: f64,
    /// Learning rate reached at the end; decay is linear in papers seen.
    pub min_learning_rate: f64,
    /// Noise samples per pair.
    pub negatives: usize,
    pub seed: u64,
    /// 1 trains deterministically; more run lock-free parallel updates.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            negatives: 5,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.negatives == 0 {
            return Err(Error::InvalidArgument("negatives must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        let lr_ok = self.learning_rate.is_finite()
            && self.min_learning_rate >= 0.0
            && self.min_learning_rate <= self.learning_rate;
        if !lr_ok {
            return Err(Error::InvalidArgument(format!(
                "learning rates must satisfy 0 <= min ({}) <= initial ({})",
                self.min_learning_rate, self.learning_rate
            )));
        }
        Ok(())
    }

    pub(crate) fn learning_rate_at(&self, progress: f64) -> f64 {
        let remaining = (1.0 - progress).clamp(0.0, 1.0);
        self.min_learning_rate + (self.learning_rate - self.min_learning_rate) * remaining
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean NCE loss per pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    pub pairs_per_epoch: usize,
}

/// Trains `model` on `papers` with per-pair SGD on the NCE loss.
pub fn train(
    model: &mut EmbeddingModel,
    papers: &[EncodedPaper],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    for p in papers {
        if p.elements.len() != model.categories().len() {
            return Err(Error::InvalidArgument(format!(
                "paper {:?} has {} categories, model has {}",
                p.paper_id,
                p.elements.len(),
                model.categories().len()
            )));
        }
        for (cat, idx) in p.elements.iter().enumerate() {
            if idx.iter().any(|&i| i as usize >= model.category(cat).len()) {
                return Err(Error::InvalidArgument(format!(
                    "paper {:?} has an out-of-range index in category {:?}",
                    p.paper_id,
                    model.category(cat).name()
                )));
            }
        }
    }

    let sampler = NoiseSampler::new(model);
    let total = papers.len() * config.epochs;
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..papers.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let progress = AtomicUsize::new(0);

    if config.workers == 1 {
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let ctx = ShardContext {
                papers,
                order: &order,
                sampler: &sampler,
                config,
                progress: &progress,
                total,
            };
            let (loss, pairs) = run_shard(model, &ctx, &mut rng);
            record_epoch(&mut report, epoch, loss, pairs);
        }
        return Ok(report);
    }

    let shared = SharedParams::from_model(model);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let chunk = order.len().div_ceil(config.workers).max(1);
        let results: Vec<(f64, usize)> = std::thread::scope(|scope| {
            let handles: Vec<_> = order
                .chunks(chunk)
                .enumerate()
                .map(|(w, shard)| {
                    let shared = &shared;
                    let sampler = &sampler;
                    let progress = &progress;
                    scope.spawn(move || {
                        let mut view = SharedView { shared };
                        let mut rng = ChaCha8Rng::seed_from_u64(
                            config.seed
                                ^ ((epoch as u64) << 32 | w as u64)
                                    .wrapping_mul(0x9E37_79B9_7F4A_7C15),
                        );
                        let ctx = ShardContext {
                            papers,
                            order: shard,
                            sampler,
                            config,
                            progress,
                            total,
                        };
                        run_shard(&mut view, &ctx, &mut rng)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        });
        let loss = results.iter().map(|r| r.0).sum();
        let pairs = results.iter().map(|r| r.1).sum();
        record_epoch(&mut report, epoch, loss, pairs);
    }
    shared.write_back(model);
    Ok(report)
}

fn record_epoch(report: &mut TrainReport, epoch: usize, loss: f64, pairs: usize) {
    let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
    log::info!(
        "epoch {}: {pairs} pairs, mean NCE loss {mean:.5}",
        epoch + 1
    );
    report.epoch_losses.push(mean);
    report.pairs_per_epoch = pairs;
}

struct ShardContext<'a> {
    papers: &'a [EncodedPaper],
    order: &'a [usize],
    sampler: &'a NoiseSampler,
    config: &'a TrainConfig,
    progress: &'a AtomicUsize,
    total: usize,
}

fn run_shard<P: ParametersMut>(
    params: &mut P,
    ctx: &ShardContext<'_>,
    rng: &mut ChaCha8Rng,
) -> (f64, usize) {
    let mut noise = vec![0usize; ctx.config.negatives];
    let mut loss_sum = 0.0;
    let mut n_pairs = 0;
    let text_category = params.text_category();
    for &pi in ctx.order {
        let done = ctx.progress.fetch_add(1, Ordering::Relaxed);
        let lr = ctx
            .config
            .learning_rate_at(done as f64 / ctx.total.max(1) as f64);
        for pair in generate_pairs(&ctx.papers[pi], text_category) {
            ctx.sampler
                .sample_into(pair.context.category, rng, &mut noise);
            let (loss, grads) =
                nce_loss_and_grads(params, &pair, &noise).expect("pairs are well formed");
            grads.apply(params, lr);
            loss_sum += loss;
            n_pairs += 1;
        }
    }
    (loss_sum, n_pairs)
}

/// Parameter blocks as relaxed atomics, updated by several workers without
/// locks. Concurrent read-modify-write of the same row may lose an update.
struct SharedParams {
    dim: usize,
    text_category: usize,
    textual: Vec<bool>,
    noise: Vec<Vec<f64>>,
    target: Vec<Vec<AtomicU32>>,
    context: Vec<Vec<AtomicU32>>,
    bias: Vec<Vec<AtomicU32>>,
}

fn to_atomic(xs: &[f32]) -> Vec<AtomicU32> {
    xs.iter().map(|x| AtomicU32::new(x.to_bits())).collect()
}

fn load(a: &AtomicU32) -> f32 {
    f32::from_bits(a.load(Ordering::Relaxed))
}

fn add(a: &AtomicU32, delta: f64) {
    let v = (load(a) as f64 + delta) as f32;
    a.store(v.to_bits(), Ordering::Relaxed);
}

impl SharedParams {
    fn from_model(model: &EmbeddingModel) -> Self {
        let cats = model.categories();
        SharedParams {
            dim: model.dim(),
            text_category: model.text_category(),
            textual: (0..cats.len()).map(|c| model.is_textual(c)).collect(),
            noise: cats.iter().map(|c| c.noise.clone()).collect(),
            target: cats.iter().map(|c| to_atomic(&c.target)).collect(),
            context: cats.iter().map(|c| to_atomic(&c.context)).collect(),
            bias: cats.iter().map(|c| to_atomic(&c.bias)).collect(),
        }
    }

    fn write_back(&self, model: &mut EmbeddingModel) {
        for (i, cat) in model.categories.iter_mut().enumerate() {
            cat.target = self.target[i].iter().map(load).collect();
            cat.context = self.context[i].iter().map(load).collect();
            cat.bias = self.bias[i].iter().map(load).collect();
        }
    }
}

struct SharedView<'a> {
    shared: &'a SharedParams,
}

impl SharedView<'_> {
    fn row<'b>(&self, block: &'b [Vec<AtomicU32>], e: ElementRef) -> &'b [AtomicU32] {
        let d = self.shared.dim;
        &block[e.category][e.index * d..(e.index + 1) * d]
    }
}

impl Parameters for SharedView<'_> {
    fn dim(&self) -> usize {
        self.shared.dim
    }

    fn text_category(&self) -> usize {
        self.shared.text_category
    }

    fn is_textual(&self, category: usize) -> bool {
        self.shared.textual[category]
    }

    fn read_target(&self, e: ElementRef, out: &mut [f64]) {
        let row = self.row(&self.shared.target, e);
        out.iter_mut()
            .zip(row)
            .for_each(|(o, a)| *o = load(a) as f64);
    }

    fn read_context(&self, e: ElementRef, out: &mut [f64]) {
        let row = self.row(&self.shared.context, e);
        out.iter_mut()
            .zip(row)
            .for_each(|(o, a)| *o = load(a) as f64);
    }

    fn read_bias(&self, e: ElementRef) -> f64 {
        load(&self.shared.bias[e.category][e.index]) as f64
    }

    fn noise_prob(&self, e: ElementRef) -> f64 {
        self.shared.noise[e.category][e.index]
    }
}

impl ParametersMut for SharedView<'_> {
    fn add_target(&mut self, e: ElementRef, delta: &[f64], scale: f64) {
        let row = self.row(&self.shared.target, e);
        row.iter().zip(delta).for_each(|(a, g)| add(a, scale * g));
    }

    fn add_context(&mut self, e: ElementRef, delta: &[f64], scale: f64) {
        let row = self.row(&self.shared.context, e);
        row.iter().zip(delta).for_each(|(a, g)| add(a, scale * g));
    }

    fn add_bias(&mut self, e: ElementRef, delta: f64) {
        add(&self.shared.bias[e.category][e.index], delta);
    }
}
