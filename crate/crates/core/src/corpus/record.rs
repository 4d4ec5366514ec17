use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{jsonl, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// Class index used by the classifier head.
    pub fn class(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }
}

/// How a gold token carries the target sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    Literal,
    Metaphor,
    Metonymy,
    OtherFigurative,
}

impl Style {
    /// Metonymy counts as non-figurative.
    pub fn is_figurative(self) -> bool {
        matches!(self, Style::Metaphor | Style::OtherFigurative)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSpan {
    pub index: usize,
    pub style: Style,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Verse,
    Prose,
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Verse => "verse",
            Form::Prose => "prose",
        })
    }
}

/// Extra-textual metadata: author, century of birth (negative is BCE),
/// verse or prose, and editorial structure such as `book/poem`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuthorMeta {
    pub author: String,
    pub century_of_birth: i32,
    pub form: Form,
    pub structure: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub work_id: String,
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Vec<String>>,
    pub label: Label,
    #[serde(default)]
    pub gold_spans: Vec<GoldSpan>,
    pub metadata: AuthorMeta,
}

impl SentenceRecord {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(format!("sentence {}: {msg}", self.id)));
        if self.tokens.is_empty() {
            return fail("no tokens".into());
        }
        if self.lemmas.len() != self.tokens.len() {
            return fail(format!("{} lemmas for {} tokens", self.lemmas.len(), self.tokens.len()));
        }
        if let Some(pos) = &self.pos {
            if pos.len() != self.tokens.len() {
                return fail(format!("{} POS tags for {} tokens", pos.len(), self.tokens.len()));
            }
        }
        if let Some(span) = self.gold_spans.iter().find(|s| s.index >= self.tokens.len()) {
            return fail(format!(
                "gold span index {} out of range for {} tokens",
                span.index,
                self.tokens.len()
            ));
        }
        if self.label == Label::Negative && !self.gold_spans.is_empty() {
            return fail("negative sentence carries gold spans".into());
        }
        Ok(())
    }
}

/// Reads a JSON-lines corpus, validating every record and rejecting
/// duplicate ids. Order is preserved.
pub fn load_corpus(path: &Path) -> Result<Vec<SentenceRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, record) in jsonl::read::<SentenceRecord>(path)? {
        record.validate().map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("{}:{line}: {msg}", path.display())),
            other => other,
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::Validation(format!(
                "{}:{line}: duplicate sentence id {}",
                path.display(),
                record.id
            )));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn save_corpus(path: &Path, records: &[SentenceRecord]) -> Result<()> {
    jsonl::write(path, records)
}
