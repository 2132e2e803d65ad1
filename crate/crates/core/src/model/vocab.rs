use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const UNKNOWN: &str = "<unk>";

/// Word → row index for the lookup encoder. Row 0 is the shared unknown word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Words with at least `min_count` occurrences, sorted for stable indices.
    pub fn build<'a, I>(words: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for w in words {
            *counts.entry(w).or_default() += 1;
        }
        Vocab::from_words(
            counts
                .into_iter()
                .filter(|&(w, c)| c >= min_count && w != UNKNOWN && !w.is_empty() && !w.contains(char::is_whitespace))
                .map(|(w, _)| w.to_string()),
        )
    }

    /// `words` excludes the unknown entry, which is always prepended.
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut all = vec![UNKNOWN.to_string()];
        all.extend(words);
        let index = all.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words: all, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lookup(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Known words, without the unknown entry.
    pub fn words(&self) -> &[String] {
        &self.words[1..]
    }
}

/// Reads `word v1 ... vd` lines and copies the vectors of in-vocabulary
/// words into `table` (`[vocab × d]`). Returns how many rows were filled.
pub fn load_word_vectors<T: Real, R: BufRead>(
    reader: R,
    vocab: &Vocab,
    table: &mut Tensor<T>,
) -> Result<usize> {
    let dim = table.cols();
    let mut filled = 0;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format {
                what: "word vectors",
                msg: format!("line {}: {e}", n + 1),
            })?;
        if values.len() != dim {
            return Err(Error::Format {
                what: "word vectors",
                msg: format!("line {}: expected {dim} values, found {}", n + 1, values.len()),
            });
        }
        if let Some(&row) = vocab.index.get(word) {
            let dst = &mut table.data_mut()[row * dim..(row + 1) * dim];
            for (d, v) in dst.iter_mut().zip(values) {
                *d = T::of(v);
            }
            filled += 1;
        }
    }
    Ok(filled)
}
