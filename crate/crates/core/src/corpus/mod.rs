//! Annotated sentence corpora: records, splits, negative sampling,
//! descriptive statistics and vocabularies.

mod negatives;
mod record;
mod split;
mod stats;
mod vocab;

pub use negatives::{group_by_work, sample_negatives};
pub use record::{load_corpus, save_corpus, AuthorMeta, Form, GoldSpan, Label, SentenceRecord, Style};
pub use split::{build_splits, CorpusSplit, SplitName, SplitTargets};
pub use stats::{corpus_stats, write_stats_csv, StatsRow};
pub use vocab::{build_vocab, VocabField, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
