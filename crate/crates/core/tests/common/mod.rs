#![allow(dead_code)]

use bibvec::corpus::{self, build_vocabulary, encode_paper, SplitOrder, AUTHOR, TEXT};
use bibvec::eval::{synth_corpus, SyntheticSpec};
use bibvec::{CategoryKind, CategorySpec, EncodedPaper, Vocabulary};

pub struct SynthData {
    pub vocab: Vocabulary,
    pub train: Vec<EncodedPaper>,
    pub test: Vec<EncodedPaper>,
}

pub fn synth_spec(noise: f64) -> SyntheticSpec {
    SyntheticSpec {
        n_topics: 4,
        authors_per_topic: 5,
        words_per_topic: 50,
        papers_per_topic: 50,
        noise_rate: noise,
    }
}

/// Category setup for synthetic corpora: every observed token is kept.
pub fn synth_categories() -> Vec<CategorySpec> {
    vec![
        CategorySpec::new(TEXT, CategoryKind::Textual, 1),
        CategorySpec::new(AUTHOR, CategoryKind::NonTextual, 1),
        CategorySpec::new(corpus::PAPER_ID, CategoryKind::NonTextual, 1),
    ]
}

pub fn synth_data(spec: &SyntheticSpec, seed: u64, n_test: usize) -> SynthData {
    let papers = synth_corpus(spec, seed).unwrap();
    let (train, test) = corpus::split_dataset(papers, n_test, seed, SplitOrder::Random).unwrap();
    let vocab = build_vocabulary(&train, &synth_categories()).unwrap();
    SynthData {
        train: train.iter().map(|p| encode_paper(&vocab, p)).collect(),
        test: test.iter().map(|p| encode_paper(&vocab, p)).collect(),
        vocab,
    }
}
