//! Multiple-choice author prediction.
//!
//! One author is removed from each test paper and the model has to pick it
//! out of `n_choices` candidates using the paper's remaining elements.

mod logreg;
mod synth;

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::vocab::{EncodedPaper, Vocabulary};
use crate::corpus::AUTHOR;
use crate::error::{Error, Result};
use crate::model::{log_sum_exp, ElementRef, EmbeddingModel, TargetRef};

pub use logreg::{logistic_baseline, LogisticBaseline, LogisticConfig};
pub use synth::{synth_corpus, synth_raw_records, synth_topic, SyntheticSpec};

pub const DEFAULT_CHOICES: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct McqQuestion {
    /// The test paper with the held-out author removed.
    pub paper: EncodedPaper,
    pub correct: ElementRef,
    /// The correct author and the distractors, shuffled.
    pub candidates: Vec<ElementRef>,
}

/// Builds one question per test paper with at least one known author.
pub fn make_mcq(
    papers: &[EncodedPaper],
    vocab: &Vocabulary,
    n_choices: usize,
    seed: u64,
) -> Result<Vec<McqQuestion>> {
    make_mcq_with(papers, vocab, n_choices, seed, |_, _| true)
}

/// Like [`make_mcq`], but distractors are restricted to authors for which
/// `allow(correct, candidate)` holds.
pub fn make_mcq_with(
    papers: &[EncodedPaper],
    vocab: &Vocabulary,
    n_choices: usize,
    seed: u64,
    allow: impl Fn(ElementRef, ElementRef) -> bool,
) -> Result<Vec<McqQuestion>> {
    if n_choices < 2 {
        return Err(Error::InvalidArgument("n_choices must be >= 2".into()));
    }
    let author_cat = vocab.category_index(AUTHOR)?;
    let authors = vocab.category(author_cat);
    let unk = authors.unk_index();
    let known = authors.len() - usize::from(unk.is_some());
    if known < n_choices {
        return Err(Error::TooFewAuthors {
            available: known,
            requested: n_choices,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut questions = Vec::new();
    for paper in papers {
        let own: HashSet<u32> = paper.category(author_cat).iter().copied().collect();
        let mut eligible: Vec<u32> = own
            .iter()
            .copied()
            .filter(|&a| Some(a as usize) != unk)
            .collect();
        if eligible.is_empty() {
            continue;
        }
        eligible.sort_unstable();
        let held = *eligible.choose(&mut rng).expect("nonempty");
        let correct = ElementRef::new(author_cat, held as usize);

        let pool: Vec<ElementRef> = (0..authors.len())
            .filter(|&i| Some(i) != unk && !own.contains(&(i as u32)))
            .map(|i| ElementRef::new(author_cat, i))
            .filter(|&e| allow(correct, e))
            .collect();
        if pool.len() < n_choices - 1 {
            return Err(Error::InvalidArgument(format!(
                "paper {:?}: only {} distractors available for {} choices",
                paper.paper_id,
                pool.len(),
                n_choices
            )));
        }
        let mut candidates: Vec<ElementRef> = pool
            .choose_multiple(&mut rng, n_choices - 1)
            .copied()
            .collect();
        candidates.push(correct);
        candidates.shuffle(&mut rng);

        let mut reduced = paper.clone();
        let slot = &mut reduced.elements[author_cat];
        let pos = slot
            .iter()
            .position(|&a| a == held)
            .expect("held author present");
        slot.remove(pos);
        questions.push(McqQuestion {
            paper: reduced,
            correct,
            candidates,
        });
    }
    Ok(questions)
}

/// How a candidate author is scored from a paper's remaining elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McqStrategy {
    /// Sum of `ω_a · υ_t + β_a` over every remaining target `t`.
    #[default]
    SummedLogits,
    /// Sum of `ln p(a | t)` over every remaining target `t`.
    SummedLogProbs,
}

fn remaining_targets<'a>(model: &EmbeddingModel, paper: &'a EncodedPaper) -> Vec<TargetRef<'a>> {
    let text_cat = model.text_category();
    let mut targets: Vec<TargetRef<'a>> = paper
        .elements
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != text_cat)
        .flat_map(|(c, idx)| {
            idx.iter()
                .map(move |&i| TargetRef::Element(ElementRef::new(c, i as usize)))
        })
        .collect();
    let text = paper.category(text_cat);
    if !text.is_empty() {
        targets.push(TargetRef::TextAverage(text));
    }
    targets
}

/// Scores of every candidate, in candidate order.
pub fn candidate_scores(
    model: &EmbeddingModel,
    question: &McqQuestion,
    strategy: McqStrategy,
) -> Result<Vec<f64>> {
    let targets = remaining_targets(model, &question.paper);
    if targets.is_empty() {
        return Err(Error::Unanswerable(question.paper.paper_id.clone()));
    }
    let author_cat = question.correct.category;
    let mut scores = vec![0.0; question.candidates.len()];
    for target in &targets {
        match strategy {
            McqStrategy::SummedLogits => {
                let t = model.target_vector(target)?;
                for (s, &cand) in scores.iter_mut().zip(&question.candidates) {
                    *s += model.logit_with(&t, cand);
                }
            }
            McqStrategy::SummedLogProbs => {
                let logits = model.logits(target, author_cat)?;
                let lse = log_sum_exp(&logits);
                for (s, cand) in scores.iter_mut().zip(&question.candidates) {
                    *s += logits[cand.index] - lse;
                }
            }
        }
    }
    Ok(scores)
}

/// Highest-scoring candidate; equal scores go to the smaller token.
pub fn argmax_candidate(
    vocab: &Vocabulary,
    candidates: &[ElementRef],
    scores: &[f64],
) -> ElementRef {
    let token = |e: &ElementRef| vocab.category(e.category).token(e.index);
    candidates
        .iter()
        .zip(scores)
        .max_by(|(a, sa), (b, sb)| sa.total_cmp(sb).then_with(|| token(b).cmp(token(a))))
        .map(|(e, _)| *e)
        .expect("at least two candidates")
}

pub fn answer_mcq(
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    question: &McqQuestion,
    strategy: McqStrategy,
) -> Result<ElementRef> {
    let scores = candidate_scores(model, question, strategy)?;
    Ok(argmax_candidate(vocab, &question.candidates, &scores))
}

/// Fraction of answers equal to the correct author.
pub fn accuracy(questions: &[McqQuestion], answers: &[ElementRef]) -> Result<f64> {
    if questions.len() != answers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} questions but {} answers",
            questions.len(),
            answers.len()
        )));
    }
    if questions.is_empty() {
        return Err(Error::InvalidArgument(
            "accuracy of an empty question set is undefined".into(),
        ));
    }
    let correct = questions
        .iter()
        .zip(answers)
        .filter(|(q, a)| q.correct == **a)
        .count();
    Ok(correct as f64 / questions.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub paper_id: String,
    pub correct: String,
    pub candidates: Vec<String>,
    pub chosen: String,
    pub is_correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub questions: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub records: Vec<QuestionRecord>,
}

impl EvalReport {
    pub fn new(
        method: &str,
        vocab: &Vocabulary,
        questions: &[McqQuestion],
        answers: &[ElementRef],
    ) -> Result<Self> {
        let acc = accuracy(questions, answers)?;
        let token = |e: &ElementRef| vocab.category(e.category).token(e.index).to_string();
        let records: Vec<QuestionRecord> = questions
            .iter()
            .zip(answers)
            .map(|(q, a)| QuestionRecord {
                paper_id: q.paper.paper_id.clone(),
                correct: token(&q.correct),
                candidates: q.candidates.iter().map(token).collect(),
                chosen: token(a),
                is_correct: q.correct == *a,
            })
            .collect();
        Ok(EvalReport {
            method: method.to_string(),
            questions: questions.len(),
            correct: records.iter().filter(|r| r.is_correct).count(),
            accuracy: acc,
            records,
        })
    }
}
