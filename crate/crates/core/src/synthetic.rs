//! Generated corpora with known structure, used by tests, benchmarks and
//! the `semtag` acceptance checks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AuthorMeta, Form, GoldSpan, Label, SentenceRecord, Style};
use crate::features::ExternalEntry;

/// Lemma that marks every positive sentence of [`planted_signal_corpus`].
pub const PLANTED_LEMMA: &str = "basium";

const FILLER_LEMMAS: [&str; 32] = [
    "res", "uir", "dies", "manus", "uideo", "dico", "facio", "magnus", "bonus", "urbs", "domus", "rex", "bellum",
    "terra", "aqua", "uia", "tempus", "nox", "lux", "pater", "filius", "mons", "nauis", "porta", "liber", "populus",
    "animus", "ignis", "campus", "lapis", "uerbum", "caelum",
];

const ENDINGS: [&str; 4] = ["", "um", "is", "a"];

const PUNCTUATION: [&str; 3] = [".", ";", "?"];

/// A minimal valid record: three tokens, one gold span when positive.
pub fn labelled_stub(id: &str, positive: bool) -> SentenceRecord {
    let tokens: Vec<String> = ["arma", "uirum", "cano"].iter().map(|s| s.to_string()).collect();
    SentenceRecord {
        id: id.to_string(),
        work_id: "work".into(),
        lemmas: vec!["arma".into(), "uir".into(), "cano".into()],
        tokens,
        pos: None,
        label: if positive { Label::Positive } else { Label::Negative },
        gold_spans: if positive {
            vec![GoldSpan {
                index: 1,
                style: Style::Literal,
            }]
        } else {
            Vec::new()
        },
        metadata: persona("Vergilius", -1, Form::Verse, "book/line"),
    }
}

pub fn persona(author: &str, century: i32, form: Form, structure: &str) -> AuthorMeta {
    AuthorMeta {
        author: author.into(),
        century_of_birth: century,
        form,
        structure: structure.into(),
    }
}

fn neutral_personas() -> [AuthorMeta; 4] {
    [
        persona("Vergilius", -1, Form::Verse, "book/line"),
        persona("Cicero", -2, Form::Prose, "book/chapter"),
        persona("Ovidius", -1, Form::Verse, "book/poem"),
        persona("Seneca", 1, Form::Prose, "letter"),
    ]
}

fn filler_sentence<R: Rng>(rng: &mut R, len: usize) -> (Vec<String>, Vec<String>) {
    let mut tokens = Vec::with_capacity(len + 1);
    let mut lemmas = Vec::with_capacity(len + 1);
    for _ in 0..len {
        let lemma = *FILLER_LEMMAS.choose(rng).expect("non-empty");
        let ending = *ENDINGS.choose(rng).expect("non-empty");
        tokens.push(format!("{lemma}{ending}"));
        lemmas.push(lemma.to_string());
    }
    let mark = *PUNCTUATION.choose(rng).expect("non-empty");
    tokens.push(mark.into());
    lemmas.push(mark.into());
    (tokens, lemmas)
}

/// `n` sentences, alternating positive and negative. Positives contain
/// [`PLANTED_LEMMA`] exactly once (marked as a literal gold span); negatives
/// never do. Metadata is independent of the label.
pub fn planted_signal_corpus(n: usize, seed: u64) -> Vec<SentenceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let personas = neutral_personas();
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let len = rng.random_range(3..9);
            let (mut tokens, mut lemmas) = filler_sentence(&mut rng, len);
            let mut gold_spans = Vec::new();
            if positive {
                let at = rng.random_range(0..len);
                let ending = *ENDINGS.choose(&mut rng).expect("non-empty");
                tokens[at] = format!("{PLANTED_LEMMA}{ending}");
                lemmas[at] = PLANTED_LEMMA.into();
                gold_spans.push(GoldSpan {
                    index: at,
                    style: Style::Literal,
                });
            }
            SentenceRecord {
                id: format!("planted-{i:05}"),
                work_id: format!("work-{}", i % 10),
                tokens,
                lemmas,
                pos: None,
                label: if positive { Label::Positive } else { Label::Negative },
                gold_spans,
                metadata: personas[rng.random_range(0..personas.len())].clone(),
            }
        })
        .collect()
}

/// Two authors whose sentences share one vocabulary distribution; the label
/// depends only on the author (mostly positive for the first persona,
/// mostly negative for the second). Text alone carries no signal.
pub fn metadata_biased_corpus(n: usize, seed: u64) -> (Vec<SentenceRecord>, [AuthorMeta; 2]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let personas = [
        persona("Martialis", 1, Form::Verse, "book/poem"),
        persona("Caesar", -1, Form::Prose, "book/chapter"),
    ];
    let records = (0..n)
        .map(|i| {
            let which = i % 2;
            let positive = if which == 0 {
                rng.random_bool(0.9)
            } else {
                rng.random_bool(0.1)
            };
            let len = rng.random_range(3..8);
            let (tokens, lemmas) = filler_sentence(&mut rng, len);
            SentenceRecord {
                id: format!("biased-{i:05}"),
                work_id: format!("work-{which}"),
                tokens,
                lemmas,
                pos: None,
                label: if positive { Label::Positive } else { Label::Negative },
                gold_spans: Vec::new(),
                metadata: personas[which].clone(),
            }
        })
        .collect();
    (records, personas)
}

/// Number of leading coordinates that carry the planted signal in the
/// generated vectors.
pub const SIGNAL_WIDTH: usize = 8;

// FNV-1a, so per-word vectors depend only on the word and the seed.
fn word_seed(word: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in word.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stand-in for a pretrained vector: uniform ±0.5, with the signal block
/// raised to 2.0 for [`PLANTED_LEMMA`] (and its inflected forms).
pub fn word_vector(word: &str, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(word_seed(word, seed));
    let mut v: Vec<f32> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
    if word.starts_with(PLANTED_LEMMA) {
        v.iter_mut().take(SIGNAL_WIDTH).for_each(|x| *x = 2.0);
    }
    v
}

/// word2vec-style rows for every distinct surface of `field` in `records`.
pub fn word_vectors<'a>(
    records: impl IntoIterator<Item = &'a SentenceRecord>,
    lemmas: bool,
    dim: usize,
    seed: u64,
) -> Vec<(String, Vec<f32>)> {
    let mut words: Vec<&str> = records
        .into_iter()
        .flat_map(|r| if lemmas { &r.lemmas } else { &r.tokens }.iter().map(String::as_str))
        .collect();
    words.sort_unstable();
    words.dedup();
    words
        .into_iter()
        .map(|w| (w.to_string(), word_vector(w, dim, seed)))
        .collect()
}

/// Stand-in for contextual encoder output. Each token row is its lemma's
/// [`word_vector`] plus small noise; every row of a sentence containing
/// [`PLANTED_LEMMA`] is also shifted along the signal block, as contextual
/// vectors carry sentence-level information. With `bos` a sentence-start
/// row (the mean of the token rows) comes first.
pub fn contextual_vectors(records: &[SentenceRecord], dim: usize, bos: bool, seed: u64) -> Vec<ExternalEntry> {
    records
        .iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(word_seed(&r.id, seed));
            let planted = r.lemmas.iter().any(|l| l == PLANTED_LEMMA);
            let mut rows: Vec<Vec<f32>> = r
                .lemmas
                .iter()
                .map(|l| {
                    let mut v = word_vector(l, dim, seed);
                    for (j, x) in v.iter_mut().enumerate() {
                        *x += rng.random_range(-0.05..0.05);
                        if planted && j < SIGNAL_WIDTH {
                            *x += 1.0;
                        }
                    }
                    v
                })
                .collect();
            if bos {
                let t = rows.len() as f32;
                let mean: Vec<f32> = (0..dim)
                    .map(|j| rows.iter().map(|row| row[j]).sum::<f32>() / t)
                    .collect();
                rows.insert(0, mean);
            }
            ExternalEntry {
                id: r.id.clone(),
                vectors: rows,
            }
        })
        .collect()
}
