//! Topic-clustered synthetic corpus with a known answer structure.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{PaperRecord, RawRecord};
use crate::error::{Error, Result};

const AUTHORS_PER_PAPER: usize = 2;
const WORDS_PER_PAPER: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_topics: usize,
    pub authors_per_topic: usize,
    pub words_per_topic: usize,
    pub papers_per_topic: usize,
    /// Probability that a sampled author or word is swapped for one of
    /// another topic.
    pub noise_rate: f64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let counts = [
            self.n_topics,
            self.authors_per_topic,
            self.words_per_topic,
            self.papers_per_topic,
        ];
        if counts.contains(&0) {
            return Err(Error::InvalidArgument(
                "synthetic corpus counts must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::InvalidArgument(format!(
                "noise rate must be in [0, 1), got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }
}

/// Letters-only encoding of `n` (a, b, ..., z, ba, bb, ...), so that words
/// survive text normalization.
fn letters(mut n: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

fn from_letters(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_lowercase()) {
        return None;
    }
    s.bytes().try_fold(0usize, |acc, b| {
        acc.checked_mul(26)?.checked_add((b - b'a') as usize)
    })
}

fn author_token(topic: usize, j: usize) -> String {
    format!("topic{topic} author{j}")
}

fn word_token(topic: usize, j: usize) -> String {
    format!("t{}x{}", letters(topic), letters(j))
}

/// Topic of a synthetic author or word token.
pub fn synth_topic(token: &str) -> Option<usize> {
    if let Some(rest) = token.strip_prefix("topic") {
        return rest.split(' ').next()?.parse().ok();
    }
    let rest = token.strip_prefix('t')?;
    let (topic, _) = rest.split_once('x')?;
    from_letters(topic)
}

/// Raw input records of a synthetic corpus. Each paper draws two authors
/// and ten words (without replacement) from its topic's pools; with
/// probability `noise_rate` each draw is replaced by a random element of
/// another topic.
pub fn synth_raw_records(spec: &SyntheticSpec, seed: u64) -> Result<Vec<RawRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(spec.n_topics * spec.papers_per_topic);

    let draw = |rng: &mut ChaCha8Rng,
                topic: usize,
                pool: usize,
                n: usize,
                token: fn(usize, usize) -> String| {
        let mut picks: Vec<usize> = (0..pool).collect();
        picks.shuffle(rng);
        picks.truncate(n.min(pool));
        picks
            .into_iter()
            .map(|j| {
                if spec.n_topics > 1 && rng.random_bool(spec.noise_rate) {
                    let others: Vec<usize> = (0..spec.n_topics).filter(|&t| t != topic).collect();
                    let t = *others.choose(rng).expect("at least one other topic");
                    token(t, rng.random_range(0..pool))
                } else {
                    token(topic, j)
                }
            })
            .collect::<Vec<_>>()
    };

    for topic in 0..spec.n_topics {
        for i in 0..spec.papers_per_topic {
            let authors = draw(
                &mut rng,
                topic,
                spec.authors_per_topic,
                AUTHORS_PER_PAPER,
                author_token,
            );
            let words = draw(
                &mut rng,
                topic,
                spec.words_per_topic,
                WORDS_PER_PAPER,
                word_token,
            );
            records.push(RawRecord {
                id: format!("synth-{topic}-{i}"),
                authors,
                r#abstract: words.join(" "),
                ..Default::default()
            });
        }
    }
    Ok(records)
}

pub fn synth_corpus(spec: &SyntheticSpec, seed: u64) -> Result<Vec<PaperRecord>> {
    Ok(synth_raw_records(spec, seed)?
        .into_iter()
        .map(PaperRecord::from)
        .collect())
}
