//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `BIBVEC_FULL_CORPUS` to a JSONL corpus path to run the full-scale
//! pipeline check on real data (d = 300, 2,000 held-out papers).

mod common;

use std::collections::HashSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bibvec::corpus::{
    self, build_vocabulary, default_categories, encode_paper, SplitOrder, AUTHOR,
};
use bibvec::eval::{self, make_mcq_with, synth_topic, McqStrategy, DEFAULT_CHOICES};
use bibvec::model::{generate_pairs, nce_loss_and_grads, train};
use bibvec::persist::{decode_model, encode_model, load_model, save_model};
use bibvec::search::{similarity, top_k};
use bibvec::{
    CategoryKind, CategorySpec, CategoryVocab, ElementRef, EmbeddingModel, Error,
    SimilarityMeasure, TargetRef, TrainConfig, TrainingPair, Vocabulary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let checks: [Check; 8] = [
        ("nce gradients match finite differences", gradient_check),
        (
            "softmax sums to one and ignores a common bias shift",
            softmax_contract,
        ),
        ("top_k equals a brute-force sort", top_k_oracle),
        ("linear ranking equals softmax ranking", ranking_consistency),
        ("synthetic corpus is learned", synthetic_learning),
        ("full-scale pipeline runs end to end", full_scale_pipeline),
        ("persistence is exact and checksummed", persistence),
        ("single-worker training is reproducible", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} ({secs:.2}s)");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn cat(name: &str, kind: CategoryKind, size: usize, rng: &mut impl Rng) -> CategoryVocab {
    let tokens = (0..size).map(|i| format!("{name}{i:03}")).collect();
    let freqs = (0..size).map(|_| rng.random_range(1..50)).collect();
    CategoryVocab::new(CategorySpec::new(name, kind, 1), tokens, freqs, None).unwrap()
}

/// Vocabulary of a text category and two non-textual ones.
fn random_vocab(rng: &mut impl Rng, text: usize, a: usize, b: usize) -> Vocabulary {
    Vocabulary::new(vec![
        cat("w", CategoryKind::Textual, text, rng),
        cat("a", CategoryKind::NonTextual, a, rng),
        cat("y", CategoryKind::NonTextual, b, rng),
    ])
    .unwrap()
}

fn randomize(model: &mut EmbeddingModel, rng: &mut impl Rng, scale: f32) {
    for c in 0..model.categories().len() {
        for i in 0..model.category(c).len() {
            let e = ElementRef::new(c, i);
            model
                .target_mut(e)
                .iter_mut()
                .for_each(|x| *x = rng.random_range(-scale..scale));
            if let Some(w) = model.context_mut(e) {
                w.iter_mut()
                    .for_each(|x| *x = rng.random_range(-scale..scale));
            }
            if let Some(b) = model.bias_mut(e) {
                *b = rng.random_range(-scale..scale);
            }
        }
    }
}

fn random_target<'a>(model: &EmbeddingModel, text: &'a [u32], rng: &mut impl Rng) -> TargetRef<'a> {
    if rng.random_bool(0.4) {
        TargetRef::TextAverage(text)
    } else {
        let c = rng.random_range(1..model.categories().len());
        TargetRef::Element(ElementRef::new(
            c,
            rng.random_range(0..model.category(c).len()),
        ))
    }
}

/// Independent NCE loss written straight from its definition, in f64.
fn oracle_nce_loss(model: &EmbeddingModel, pair: &TrainingPair<'_>, noise: &[usize]) -> f64 {
    let t: Vec<f64> = match pair.target {
        TargetRef::Element(e) => model.target(e).iter().map(|&x| x as f64).collect(),
        TargetRef::TextAverage(toks) => {
            let mut acc = vec![0.0; model.dim()];
            for &w in toks {
                let v = model.target(ElementRef::new(model.text_category(), w as usize));
                acc.iter_mut().zip(v).for_each(|(a, &x)| *a += x as f64);
            }
            acc.iter().map(|a| a / toks.len() as f64).collect()
        }
    };
    let k = noise.len() as f64;
    let cat = pair.context.category;
    let delta = |i: usize| {
        let e = ElementRef::new(cat, i);
        let s: f64 = model
            .context(e)
            .unwrap()
            .iter()
            .zip(&t)
            .map(|(&w, x)| w as f64 * x)
            .sum::<f64>()
            + model.bias(e).unwrap() as f64;
        s - (k * model.category(cat).noise()[i]).ln()
    };
    let sigma = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut loss = -sigma(delta(pair.context.index)).ln();
    for &n in noise {
        loss -= (1.0 - sigma(delta(n))).ln();
    }
    loss
}

#[derive(Clone, Copy)]
enum Param {
    Target(ElementRef),
    Context(ElementRef),
    Bias(ElementRef),
}

fn slot(model: &mut EmbeddingModel, p: Param, j: usize) -> &mut f32 {
    match p {
        Param::Target(e) => &mut model.target_mut(e)[j],
        Param::Context(e) => &mut model.context_mut(e).unwrap()[j],
        Param::Bias(e) => model.bias_mut(e).unwrap(),
    }
}

/// Central difference of the oracle loss. Parameters are stored as f32, so
/// the realized step is measured rather than assumed.
fn finite_difference(
    model: &mut EmbeddingModel,
    pair: &TrainingPair<'_>,
    noise: &[usize],
    p: Param,
    j: usize,
    h: f64,
) -> f64 {
    let x = *slot(model, p, j);
    let plus = (x as f64 + h) as f32;
    let minus = (x as f64 - h) as f32;
    *slot(model, p, j) = plus;
    let lp = oracle_nce_loss(model, pair, noise);
    *slot(model, p, j) = minus;
    let lm = oracle_nce_loss(model, pair, noise);
    *slot(model, p, j) = x;
    (lp - lm) / (plus as f64 - minus as f64)
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = scale(a).max(scale(b));
    if denom < 1e-12 {
        diff
    } else {
        diff / denom
    }
}

fn gradient_check() -> Outcome {
    const STEP: f64 = 1e-4;
    const TOL: f64 = 1e-4;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut blocks = 0;
    for instance in 0..100 {
        let dim = if instance % 2 == 0 { 2 } else { 5 };
        let (a, b) = (rng.random_range(1..8), rng.random_range(1..5));
        let vocab = random_vocab(&mut rng, 6, a, b);
        let mut model = EmbeddingModel::init(&vocab, dim, instance).unwrap();
        randomize(&mut model, &mut rng, 1.0);
        let text: Vec<u32> = (0..rng.random_range(1..6))
            .map(|_| rng.random_range(0..6))
            .collect();
        let target = random_target(&model, &text, &mut rng);
        let ccat = rng.random_range(1..3);
        let context = ElementRef::new(ccat, rng.random_range(0..model.category(ccat).len()));
        let pair = TrainingPair { target, context };
        let noise: Vec<usize> = (0..rng.random_range(1..6))
            .map(|_| rng.random_range(0..model.category(ccat).len()))
            .collect();

        let (loss, grads) = nce_loss_and_grads(&model, &pair, &noise).map_err(|e| e.to_string())?;
        let oracle = oracle_nce_loss(&model, &pair, &noise);
        ensure(
            (loss - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
            || format!("instance {instance}: loss {loss} vs oracle {oracle}"),
        )?;

        let target_rows: Vec<ElementRef> = match pair.target {
            TargetRef::Element(e) => vec![e],
            TargetRef::TextAverage(toks) => {
                let set: HashSet<u32> = toks.iter().copied().collect();
                set.into_iter()
                    .map(|w| ElementRef::new(0, w as usize))
                    .collect()
            }
        };
        let outputs: HashSet<ElementRef> = noise
            .iter()
            .map(|&i| ElementRef::new(ccat, i))
            .chain([context])
            .collect();

        let mut check = |name: &str, p: Param, analytic: Vec<f64>| -> Result<(), String> {
            let fd: Vec<f64> = (0..analytic.len())
                .map(|j| finite_difference(&mut model, &pair, &noise, p, j, STEP))
                .collect();
            let err = relative_error(&analytic, &fd);
            worst = worst.max(err);
            blocks += 1;
            ensure(err <= TOL, || {
                format!(
                    "instance {instance} {name}: relative error {err:.2e} ({analytic:?} vs {fd:?})"
                )
            })
        };
        for &e in &target_rows {
            let a = grads.target_row(e).unwrap_or_else(|| vec![0.0; dim]);
            check("υ", Param::Target(e), a)?;
        }
        for &e in &outputs {
            let o = grads
                .output(e)
                .ok_or_else(|| format!("instance {instance}: no gradient for {e:?}"))?;
            check("ω", Param::Context(e), o.context.clone())?;
            check("β", Param::Bias(e), vec![o.bias])?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}, limit 10s")
    })?;
    Ok(format!(
        "100 instances, {blocks} parameter blocks, worst relative error {worst:.2e} (limit {TOL:e})"
    ))
}

/// A dyadic value in [-4, 4), exactly representable in f32 and f64.
fn dyadic(rng: &mut impl Rng) -> f32 {
    rng.random_range(-4096..4096) as f32 / 1024.0
}

fn softmax_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let sizes = [1, 2, 17, 40];
    let mut worst_sum: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    for case in 0..1000 {
        let size = sizes[case % sizes.len()];
        let dim = rng.random_range(1..9);
        let vocab = random_vocab(&mut rng, 5, size, 3);
        let mut model = EmbeddingModel::init(&vocab, dim, case as u64).unwrap();
        randomize(&mut model, &mut rng, 2.0);
        for i in 0..size {
            *model.bias_mut(ElementRef::new(1, i)).unwrap() = dyadic(&mut rng);
        }
        let text: Vec<u32> = (0..rng.random_range(1..5))
            .map(|_| rng.random_range(0..5))
            .collect();
        let target = random_target(&model, &text, &mut rng);

        let p = model
            .softmax_predict(&target, 1)
            .map_err(|e| e.to_string())?;
        let sum: f64 = p.iter().sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
        ensure((sum - 1.0).abs() <= 1e-9, || {
            format!("case {case}: sum {sum}")
        })?;
        ensure(p.iter().all(|&x| x > 0.0 && x <= 1.0), || {
            format!("case {case}: {p:?}")
        })?;

        let shift = dyadic(&mut rng);
        for i in 0..size {
            *model.bias_mut(ElementRef::new(1, i)).unwrap() += shift;
        }
        let q = model
            .softmax_predict(&target, 1)
            .map_err(|e| e.to_string())?;
        let diff = p
            .iter()
            .zip(&q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_shift = worst_shift.max(diff);
        ensure(argmax(&p) == argmax(&q), || {
            format!("case {case}: argmax moved under shift {shift}")
        })?;
        ensure(diff <= 1e-12, || {
            format!("case {case}: vector moved by {diff:e} under shift {shift}")
        })?;
    }
    Ok(format!(
        "1000 cases, max |sum - 1| {worst_sum:.1e} (limit 1e-9), max change under shift {worst_shift:.1e}"
    ))
}

fn argmax(xs: &[f64]) -> usize {
    (0..xs.len())
        .max_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(b.cmp(&a)))
        .unwrap()
}

fn top_k_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let vocab = random_vocab(&mut rng, 30, 200, 6);
    let mut model = EmbeddingModel::init(&vocab, 8, 3).unwrap();
    randomize(&mut model, &mut rng, 1.0);
    // Duplicate some rows so that the tie rule is exercised.
    for i in (0..200).step_by(10) {
        let src = ElementRef::new(1, i);
        let (t, w, b) = (
            model.target(src).to_vec(),
            model.context(src).unwrap().to_vec(),
            model.bias(src).unwrap(),
        );
        for j in [i + 3, i + 7] {
            let dst = ElementRef::new(1, j);
            model.target_mut(dst).copy_from_slice(&t);
            model.context_mut(dst).unwrap().copy_from_slice(&w);
            *model.bias_mut(dst).unwrap() = b;
        }
    }
    let mut compared = 0;
    for q in 0..20 {
        let query = match q % 3 {
            0 => ElementRef::new(0, rng.random_range(0..30)),
            1 => ElementRef::new(1, rng.random_range(0..200)),
            _ => ElementRef::new(2, rng.random_range(0..6)),
        };
        let excluded: HashSet<ElementRef> = (0..rng.random_range(0..5))
            .map(|_| ElementRef::new(1, rng.random_range(0..200)))
            .collect();
        for measure in SimilarityMeasure::ALL {
            let mut brute: Vec<(ElementRef, f64)> = (0..200)
                .map(|i| ElementRef::new(1, i))
                .filter(|e| *e != query && !excluded.contains(e))
                .map(|e| (e, similarity(&model, query, e, measure).unwrap()))
                .collect();
            brute.sort_by(|(a, sa), (b, sb)| {
                sb.total_cmp(sa).then_with(|| {
                    vocab
                        .category(1)
                        .token(a.index)
                        .cmp(vocab.category(1).token(b.index))
                })
            });
            for k in [1, 10, 200] {
                let got = top_k(&model, &vocab, query, 1, measure, k, &excluded)
                    .map_err(|e| e.to_string())?;
                let want = &brute[..k.min(brute.len())];
                ensure(got.entries == want, || {
                    format!("query {query:?}, {measure}, k={k}: top_k differs from brute force")
                })?;
                compared += 1;
            }
        }
    }
    Ok(format!(
        "{compared} rankings over a 200-element category, ties included"
    ))
}

fn ranking_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let vocab = random_vocab(&mut rng, 20, 60, 15);
    let mut model = EmbeddingModel::init(&vocab, 16, 4).unwrap();
    randomize(&mut model, &mut rng, 1.0);
    let token = |e: ElementRef| vocab.category(e.category).token(e.index).to_string();
    for q in 0..50 {
        let query = ElementRef::new(
            1 + q % 2,
            rng.random_range(0..vocab.category(1 + q % 2).len()),
        );
        let target_cat = if q % 4 < 2 { 1 } else { 2 };
        let n = vocab.category(target_cat).len();
        let ranked = top_k(
            &model,
            &vocab,
            query,
            target_cat,
            SimilarityMeasure::Linear,
            n,
            &HashSet::new(),
        )
        .map_err(|e| e.to_string())?;
        let probs = model
            .softmax_predict(&TargetRef::Element(query), target_cat)
            .map_err(|e| e.to_string())?;
        let mut by_prob: Vec<ElementRef> = (0..n)
            .map(|i| ElementRef::new(target_cat, i))
            .filter(|&e| e != query)
            .collect();
        by_prob.sort_by(|&a, &b| {
            probs[b.index]
                .total_cmp(&probs[a.index])
                .then_with(|| token(a).cmp(&token(b)))
        });
        let linear: Vec<ElementRef> = ranked.elements().collect();
        ensure(linear == by_prob, || format!("query {q}: rankings differ"))?;
    }
    Ok("50 queries, argsorts identical".into())
}

struct SynthOutcome {
    ratio: f64,
    accuracy: f64,
    questions: usize,
    same_topic: Vec<usize>,
}

impl SynthOutcome {
    fn passes(&self) -> bool {
        self.ratio < 0.5 && self.accuracy >= 0.90 && self.same_topic.iter().all(|&n| n >= 3)
    }

    fn describe(&self) -> String {
        format!(
            "loss ratio {:.3} (limit 0.5), cross-topic MCQ {:.3} on {} questions (limit 0.90), \
             same-topic authors in top-5 cosine {:?} (limit 3)",
            self.ratio, self.accuracy, self.questions, self.same_topic
        )
    }
}

fn synthetic_run(config: &TrainConfig) -> Result<SynthOutcome, String> {
    let data = common::synth_data(&common::synth_spec(0.05), 7, 40);
    let mut model = EmbeddingModel::init(&data.vocab, 32, 7).map_err(|e| e.to_string())?;
    let text = model.text_category();
    let pairs: Vec<TrainingPair> = data
        .train
        .iter()
        .flat_map(|p| generate_pairs(p, text))
        .collect();
    let initial = model.full_softmax_loss(&pairs).map_err(|e| e.to_string())?;
    train(&mut model, &data.train, config).map_err(|e| e.to_string())?;
    let trained = model.full_softmax_loss(&pairs).map_err(|e| e.to_string())?;

    let authors = data.vocab.category_index(AUTHOR).unwrap();
    let topic = |e: ElementRef| synth_topic(data.vocab.category(e.category).token(e.index));
    let questions = make_mcq_with(&data.test, &data.vocab, DEFAULT_CHOICES, 7, |c, e| {
        topic(c) != topic(e)
    })
    .map_err(|e| e.to_string())?;
    let answers = questions
        .iter()
        .map(|q| eval::answer_mcq(&model, &data.vocab, q, McqStrategy::default()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let accuracy = eval::accuracy(&questions, &answers).map_err(|e| e.to_string())?;

    let mut same_topic = Vec::new();
    for t in 0..4 {
        let query = (0..data.vocab.category(authors).len())
            .map(|i| ElementRef::new(authors, i))
            .find(|&e| topic(e) == Some(t))
            .ok_or_else(|| format!("no author for topic {t}"))?;
        let near = top_k(
            &model,
            &data.vocab,
            query,
            authors,
            SimilarityMeasure::Cosine,
            5,
            &HashSet::new(),
        )
        .map_err(|e| e.to_string())?;
        same_topic.push(near.elements().filter(|&e| topic(e) == Some(t)).count());
    }
    Ok(SynthOutcome {
        ratio: trained / initial,
        accuracy,
        questions: questions.len(),
        same_topic,
    })
}

/// Runs with the default training configuration. On failure a longer,
/// faster schedule is also run and reported for diagnosis only; it does
/// not change the verdict.
fn synthetic_learning() -> Outcome {
    let start = Instant::now();
    let outcome = synthetic_run(&TrainConfig::default())?;
    let elapsed = start.elapsed();
    if outcome.passes() && elapsed < Duration::from_secs(120) {
        return Ok(outcome.describe());
    }
    let longer = TrainConfig {
        epochs: 300,
        learning_rate: 0.1,
        ..TrainConfig::default()
    };
    let reference = synthetic_run(&longer)?;
    Err(format!(
        "default training: {}; runtime {elapsed:.2?} (limit 2 min). \
         For reference, 300 epochs at learning rate 0.1: {}",
        outcome.describe(),
        reference.describe()
    ))
}

/// With `BIBVEC_FULL_CORPUS` unset, a 2,000-paper synthetic stand-in goes
/// through the same steps as a real corpus would.
fn full_scale_pipeline() -> Outcome {
    let (papers, categories, dim, n_test, label) = match std::env::var_os("BIBVEC_FULL_CORPUS") {
        Some(path) => (
            corpus::load_corpus(&path).map_err(|e| e.to_string())?,
            default_categories(),
            300,
            2000,
            format!("{}", path.to_string_lossy()),
        ),
        None => {
            let spec = eval::SyntheticSpec {
                n_topics: 20,
                authors_per_topic: 15,
                words_per_topic: 80,
                papers_per_topic: 100,
                noise_rate: 0.1,
            };
            (
                eval::synth_corpus(&spec, 11).map_err(|e| e.to_string())?,
                common::synth_categories(),
                64,
                200,
                "synthetic stand-in, no real corpus supplied".to_string(),
            )
        }
    };
    let n_papers = papers.len();
    let (train_raw, test_raw) =
        corpus::split_dataset(papers, n_test, 0, SplitOrder::Random).map_err(|e| e.to_string())?;
    let vocab = build_vocabulary(&train_raw, &categories).map_err(|e| e.to_string())?;
    let train_set: Vec<_> = train_raw.iter().map(|p| encode_paper(&vocab, p)).collect();
    let test_set: Vec<_> = test_raw.iter().map(|p| encode_paper(&vocab, p)).collect();
    let mut model = EmbeddingModel::init(&vocab, dim, 0).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..TrainConfig::default()
    };
    let report = train(&mut model, &train_set, &config).map_err(|e| e.to_string())?;
    let questions =
        eval::make_mcq(&test_set, &vocab, DEFAULT_CHOICES, 0).map_err(|e| e.to_string())?;
    let answers: Vec<ElementRef> = questions
        .iter()
        .filter_map(|q| eval::answer_mcq(&model, &vocab, q, McqStrategy::default()).ok())
        .collect();
    ensure(answers.len() == questions.len(), || {
        "some questions were unanswerable".into()
    })?;
    let acc = eval::accuracy(&questions, &answers).map_err(|e| e.to_string())?;
    let correct = answers
        .iter()
        .zip(&questions)
        .filter(|(a, q)| **a == q.correct)
        .count();
    let first = report.epoch_losses.first().copied().unwrap_or(f64::NAN);
    let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    Ok(format!(
        "{label}: {n_papers} papers, d = {dim}, {} parameters, NCE loss {first:.3} -> {last:.3}, \
         accuracy {acc:.3} ({correct} / {}); no numeric target",
        model.parameter_count(),
        questions.len()
    ))
}

fn small_trained_model() -> (EmbeddingModel, Vocabulary) {
    let data = common::synth_data(&common::synth_spec(0.1), 3, 20);
    let mut model = EmbeddingModel::init(&data.vocab, 12, 3).unwrap();
    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    train(&mut model, &data.train, &config).unwrap();
    (model, data.vocab)
}

fn bits(model: &EmbeddingModel) -> Vec<Vec<u32>> {
    model
        .categories()
        .iter()
        .flat_map(|c| [c.target_block(), c.context_block(), c.bias_block()])
        .map(|b| b.iter().map(|x| x.to_bits()).collect())
        .collect()
}

fn persistence() -> Outcome {
    let (model, vocab) = small_trained_model();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.bv");
    save_model(&model, &vocab, &path).map_err(|e| e.to_string())?;
    let (loaded, loaded_vocab) = load_model(&path).map_err(|e| e.to_string())?;
    ensure(bits(&loaded) == bits(&model), || {
        "parameters differ after reload".into()
    })?;
    ensure(loaded_vocab == vocab, || {
        "vocabulary differs after reload".into()
    })?;
    ensure(loaded.dim() == model.dim(), || "dimension differs".into())?;

    let bytes = encode_model(&model, &vocab).map_err(|e| e.to_string())?;
    let mut rejected = 0;
    // Header damage is caught earlier by the magic and version checks.
    for pos in [40, bytes.len() / 3, bytes.len() / 2, bytes.len() - 5] {
        let mut bad = bytes.clone();
        bad[pos] ^= 0x10;
        match decode_model(&bad) {
            Err(Error::Checksum { .. }) => rejected += 1,
            other => {
                return Err(format!(
                    "byte {pos} flipped: expected checksum error, got {other:?}"
                ))
            }
        }
    }
    match decode_model(&bytes[..bytes.len() - 100]) {
        Err(Error::Checksum { .. }) => rejected += 1,
        other => {
            return Err(format!(
                "truncated file: expected checksum error, got {other:?}"
            ))
        }
    }
    Ok(format!(
        "{} parameters bit-identical after reload, {rejected} of 5 corrupted copies rejected by checksum",
        model.parameter_count()
    ))
}

fn determinism() -> Outcome {
    let data = common::synth_data(&common::synth_spec(0.05), 5, 20);
    let run = || {
        let mut model = EmbeddingModel::init(&data.vocab, 16, 99).unwrap();
        let config = TrainConfig {
            epochs: 5,
            seed: 99,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &data.train, &config).unwrap();
        (encode_model(&model, &data.vocab).unwrap(), report)
    };
    let (a, ra) = run();
    let (b, rb) = run();
    ensure(a == b, || {
        "model bytes differ between identical runs".into()
    })?;
    ensure(ra == rb, || {
        "loss traces differ between identical runs".into()
    })?;
    Ok(format!(
        "two seeded runs produced identical {}-byte models and loss traces",
        a.len()
    ))
}
