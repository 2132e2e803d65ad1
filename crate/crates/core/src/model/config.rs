use std::fmt;
use std::str::FromStr;

use crate::config::{parse_bool, parse_value, KeyValue};
use crate::error::{Error, Result};
use crate::label::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    /// Trainable character CNN over UTF-8 bytes; never sees an unknown word.
    CharCnn,
    /// Per-word vector table with one shared unknown-word row.
    EmbeddingLookup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    Max,
    /// `[max; mean; last valid state]`.
    ConcatMaxMeanLast,
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::CharCnn => "char_cnn",
            EncoderKind::EmbeddingLookup => "embedding_lookup",
        })
    }
}

impl FromStr for EncoderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "char_cnn" => Ok(EncoderKind::CharCnn),
            "embedding_lookup" | "lookup" => Ok(EncoderKind::EmbeddingLookup),
            _ => Err("expected char_cnn or embedding_lookup".into()),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Max => "max",
            Pooling::ConcatMaxMeanLast => "concat",
        })
    }
}

impl FromStr for Pooling {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "max" => Ok(Pooling::Max),
            "concat" | "concat_max_mean_last" => Ok(Pooling::ConcatMaxMeanLast),
            _ => Err("expected max or concat".into()),
        }
    }
}

/// Architecture and text-handling settings. Saved inside checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub char_emb_dim: usize,
    /// `(width, count)` pairs.
    pub cnn_filters: Vec<(usize, usize)>,
    /// Longer words are truncated to this many characters.
    pub max_word_chars: usize,
    pub word_dim: usize,
    /// Hidden size of each LSTM direction.
    pub lstm_hidden: usize,
    pub pooling: Pooling,
    pub fc_hidden: usize,
    pub num_classes: usize,
    pub dropout_word: f64,
    pub dropout_sentence: f64,
    pub dropout_fc: f64,
    pub lowercase: bool,
    pub strip_emoji: bool,
    /// Lookup encoder only: words seen fewer times map to the unknown row.
    pub min_word_count: usize,
}

impl Default for ModelConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderKind::CharCnn,
            char_emb_dim: 16,
            cnn_filters: vec![(1, 16), (2, 16), (3, 32), (4, 32), (5, 32)],
            max_word_chars: 64,
            word_dim: 64,
            lstm_hidden: 128,
            pooling: Pooling::Max,
            fc_hidden: 64,
            num_classes: NUM_CLASSES,
            dropout_word: 0.5,
            dropout_sentence: 0.1,
            dropout_fc: 0.5,
            lowercase: false,
            strip_emoji: false,
            min_word_count: 1,
        }
    }
}

impl ModelConfig {
    /// Word 1024, 2048 per LSTM direction, 512 hidden units in the head.
    pub fn full_scale() -> Self {
        ModelConfig {
            word_dim: 1024,
            lstm_hidden: 2048,
            fc_hidden: 512,
            ..ModelConfig::default()
        }
    }

    /// Tiny dimensions for gradient checks and fast tests.
    pub fn toy() -> Self {
        ModelConfig {
            char_emb_dim: 8,
            cnn_filters: vec![(1, 8), (2, 8), (3, 16), (4, 16)],
            word_dim: 16,
            lstm_hidden: 16,
            fc_hidden: 16,
            dropout_word: 0.1,
            dropout_sentence: 0.1,
            dropout_fc: 0.1,
            ..ModelConfig::default()
        }
    }

    pub fn bilstm_dim(&self) -> usize {
        2 * self.lstm_hidden
    }

    pub fn pooled_dim(&self) -> usize {
        match self.pooling {
            Pooling::Max => self.bilstm_dim(),
            Pooling::ConcatMaxMeanLast => 3 * self.bilstm_dim(),
        }
    }

    pub fn total_filters(&self) -> usize {
        self.cnn_filters.iter().map(|&(_, n)| n).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_classes != NUM_CLASSES {
            return bad(format!("num_classes must be {NUM_CLASSES}, got {}", self.num_classes));
        }
        let extents = [
            ("char_emb_dim", self.char_emb_dim),
            ("max_word_chars", self.max_word_chars),
            ("word_dim", self.word_dim),
            ("lstm_hidden", self.lstm_hidden),
            ("fc_hidden", self.fc_hidden),
            ("min_word_count", self.min_word_count),
        ];
        if let Some((k, _)) = extents.iter().find(|(_, v)| *v == 0) {
            return bad(format!("`{k}` must be positive"));
        }
        if self.cnn_filters.is_empty() || self.cnn_filters.iter().any(|&(w, n)| w == 0 || n == 0) {
            return bad("cnn_filters needs at least one positive width:count pair".into());
        }
        for (k, p) in [
            ("dropout_word", self.dropout_word),
            ("dropout_sentence", self.dropout_sentence),
            ("dropout_fc", self.dropout_fc),
        ] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("`{k}` must be in [0, 1), got {p}"));
            }
        }
        Ok(())
    }
}

fn parse_filters(value: &str) -> Result<Vec<(usize, usize)>> {
    value
        .split(',')
        .map(|pair| {
            let (w, n) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("cnn_filters: expected width:count, got `{pair}`")))?;
            Ok((parse_value("cnn_filters", w)?, parse_value("cnn_filters", n)?))
        })
        .collect()
}

impl KeyValue for ModelConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "encoder" => self.encoder = parse_value(key, value)?,
            "char_emb_dim" => self.char_emb_dim = parse_value(key, value)?,
            "cnn_filters" => self.cnn_filters = parse_filters(value)?,
            "max_word_chars" => self.max_word_chars = parse_value(key, value)?,
            "word_dim" => self.word_dim = parse_value(key, value)?,
            "lstm_hidden" => self.lstm_hidden = parse_value(key, value)?,
            "pooling" => self.pooling = parse_value(key, value)?,
            "fc_hidden" => self.fc_hidden = parse_value(key, value)?,
            "num_classes" => self.num_classes = parse_value(key, value)?,
            "dropout_word" => self.dropout_word = parse_value(key, value)?,
            "dropout_sentence" => self.dropout_sentence = parse_value(key, value)?,
            "dropout_fc" => self.dropout_fc = parse_value(key, value)?,
            "lowercase" => self.lowercase = parse_bool(key, value)?,
            "strip_emoji" => self.strip_emoji = parse_bool(key, value)?,
            "min_word_count" => self.min_word_count = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let filters = self
            .cnn_filters
            .iter()
            .map(|(w, n)| format!("{w}:{n}"))
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("encoder", self.encoder.to_string()),
            ("char_emb_dim", self.char_emb_dim.to_string()),
            ("cnn_filters", filters),
            ("max_word_chars", self.max_word_chars.to_string()),
            ("word_dim", self.word_dim.to_string()),
            ("lstm_hidden", self.lstm_hidden.to_string()),
            ("pooling", self.pooling.to_string()),
            ("fc_hidden", self.fc_hidden.to_string()),
            ("num_classes", self.num_classes.to_string()),
            ("dropout_word", self.dropout_word.to_string()),
            ("dropout_sentence", self.dropout_sentence.to_string()),
            ("dropout_fc", self.dropout_fc.to_string()),
            ("lowercase", self.lowercase.to_string()),
            ("strip_emoji", self.strip_emoji.to_string()),
            ("min_word_count", self.min_word_count.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_dimensions() {
        let full = ModelConfig::full_scale();
        assert_eq!(full.bilstm_dim(), 4096);
        assert_eq!(full.pooled_dim(), 4096);
        let concat = ModelConfig {
            pooling: Pooling::ConcatMaxMeanLast,
            ..full
        };
        assert_eq!(concat.pooled_dim(), 12_288);
    }

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::toy().validate().unwrap();
        let mut c = ModelConfig::toy();
        c.cnn_filters.clear();
        assert!(c.validate().is_err());
    }
}
