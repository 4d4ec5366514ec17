use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SentenceRecord;
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Which surface a vocabulary is built over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VocabField {
    Tokens,
    Lemmas,
    TokenChars,
    LemmaChars,
}

/// Bijective string/index map with `PAD = 0` and `UNK = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds from surfaces that exclude the reserved entries.
    pub fn from_surfaces<I: IntoIterator<Item = String>>(surfaces: I) -> Self {
        let mut entries = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut index: HashMap<String, usize> = entries.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        for s in surfaces {
            if !index.contains_key(&s) {
                index.insert(s.clone(), entries.len());
                entries.push(s);
            }
        }
        Vocabulary { entries, index }
    }

    fn from_entries(entries: Vec<String>) -> Result<Self> {
        if entries.len() < 2 || entries[PAD] != PAD_TOKEN || entries[UNK] != UNK_TOKEN {
            return Err(Error::Validation(
                "vocabulary must start with the PAD and UNK entries".into(),
            ));
        }
        let index: HashMap<String, usize> = entries.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        if index.len() != entries.len() {
            return Err(Error::Validation("vocabulary has repeated entries".into()));
        }
        Ok(Vocabulary { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `surface`, or [`UNK`].
    pub fn encode(&self, surface: &str) -> usize {
        self.index.get(surface).copied().unwrap_or(UNK)
    }

    pub fn get(&self, surface: &str) -> Option<usize> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, index: usize) -> Option<&str> {
        self.entries.get(index).map(String::as_str)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<String>::deserialize(d)?;
        Vocabulary::from_entries(entries).map_err(serde::de::Error::custom)
    }
}

/// Vocabulary of one field over (training) records, ordered by descending
/// frequency then lexicographically.
pub fn build_vocab<'a, I>(records: I, field: VocabField) -> Vocabulary
where
    I: IntoIterator<Item = &'a SentenceRecord>,
{
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut bump = |s: String| *counts.entry(s).or_default() += 1;
    for r in records {
        match field {
            VocabField::Tokens => r.tokens.iter().cloned().for_each(&mut bump),
            VocabField::Lemmas => r.lemmas.iter().cloned().for_each(&mut bump),
            VocabField::TokenChars => r
                .tokens
                .iter()
                .flat_map(|t| t.chars())
                .for_each(|c| bump(c.to_string())),
            VocabField::LemmaChars => r
                .lemmas
                .iter()
                .flat_map(|t| t.chars())
                .for_each(|c| bump(c.to_string())),
        }
    }
    counts.remove(PAD_TOKEN);
    counts.remove(UNK_TOKEN);
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_surfaces(ranked.into_iter().map(|(s, _)| s))
}
