use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/emoji.tsv");

/// Set of emoji codepoint sequences with their alias names.
///
/// Matching is longest-first, so `U+0023 U+FE0F U+20E3` wins over any
/// shorter prefix. With conflict resolution enabled, single codepoints below
/// `U+00FF` (`#`, `*`, digits, `©`, `®`) are dropped so that ordinary text
/// glyphs are never read as emoji; multi-codepoint sequences that start with
/// them (keycaps) are kept.
#[derive(Debug, Clone)]
pub struct EmojiDatabase {
    entries: HashMap<Vec<char>, String>,
    starters: HashSet<char>,
    max_len: usize,
    conflict_resolved: bool,
}

impl EmojiDatabase {
    /// The shipped snapshot, conflict-resolved.
    pub fn bundled() -> &'static EmojiDatabase {
        static DB: OnceLock<EmojiDatabase> = OnceLock::new();
        DB.get_or_init(|| {
            EmojiDatabase::parse(BUNDLED, true).expect("bundled emoji table is well-formed")
        })
    }

    /// Parses `HEX [HEX...]<TAB>alias` records. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn parse(source: &str, resolve_conflicts: bool) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in source.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Format {
                what: "emoji table",
                msg: format!("line {}: {msg}", n + 1),
            };
            let (codes, alias) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let seq = codes
                .split_whitespace()
                .map(|h| {
                    u32::from_str_radix(h, 16)
                        .ok()
                        .and_then(char::from_u32)
                        .ok_or_else(|| bad("bad codepoint"))
                })
                .collect::<Result<Vec<char>>>()?;
            if seq.is_empty() || alias.trim().is_empty() {
                return Err(bad("empty field"));
            }
            records.push((seq, alias.trim().to_string()));
        }
        Ok(Self::from_records(records, resolve_conflicts))
    }

    pub fn from_records<I>(records: I, resolve_conflicts: bool) -> Self
    where
        I: IntoIterator<Item = (Vec<char>, String)>,
    {
        let mut entries = HashMap::new();
        for (seq, alias) in records {
            if resolve_conflicts && seq.len() == 1 && (seq[0] as u32) < 0xFF {
                continue;
            }
            entries.entry(seq).or_insert(alias);
        }
        let starters = entries.keys().map(|s| s[0]).collect();
        let max_len = entries.keys().map(Vec::len).max().unwrap_or(0);
        EmojiDatabase {
            entries,
            starters,
            max_len,
            conflict_resolved: resolve_conflicts,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn conflict_resolved(&self) -> bool {
        self.conflict_resolved
    }

    pub fn contains(&self, seq: &str) -> bool {
        self.alias(seq).is_some()
    }

    pub fn alias(&self, seq: &str) -> Option<&str> {
        let key: Vec<char> = seq.chars().collect();
        self.entries.get(&key).map(String::as_str)
    }

    /// All sequences registered under `alias`, as strings.
    pub fn sequences_for(&self, alias: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, a)| a.as_str() == alias)
            .map(|(s, _)| s.iter().collect())
            .collect();
        out.sort();
        out
    }

    /// Length in chars of the longest entry starting at `chars[at]`.
    pub fn longest_match(&self, chars: &[char], at: usize) -> Option<usize> {
        if !self.starters.contains(chars.get(at)?) {
            return None;
        }
        let avail = (chars.len() - at).min(self.max_len);
        (1..=avail)
            .rev()
            .find(|&len| self.entries.contains_key(&chars[at..at + len]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_resolves_ascii_conflicts() {
        let db = EmojiDatabase::bundled();
        assert!(db.conflict_resolved());
        assert!(!db.contains("#"));
        assert!(!db.contains("©"));
        assert!(!db.contains("1"));
        assert!(db.contains("\u{0023}\u{FE0F}\u{20E3}"));
        assert!(db.contains("\u{00A9}\u{FE0F}"));
        assert_eq!(db.alias("😷"), Some("mask"));
        assert_eq!(db.alias("😭"), Some("sob"));
        assert_eq!(db.alias("💕"), Some("two_hearts"));
    }

    #[test]
    fn unresolved_table_keeps_single_glyphs() {
        let db = EmojiDatabase::parse("0023\thash\n0023 FE0F 20E3\thash\n", false).unwrap();
        assert!(db.contains("#"));
        let db = EmojiDatabase::parse("0023\thash\n0023 FE0F 20E3\thash\n", true).unwrap();
        assert!(!db.contains("#"));
        assert_eq!(db.len(), 1);
    }

    #[test]
    fn every_bundled_entry_obeys_the_conflict_rule() {
        let db = EmojiDatabase::bundled();
        for seq in db.entries.keys() {
            assert!(seq.len() > 1 || seq[0] as u32 >= 0xFF, "{seq:?}");
        }
    }

    #[test]
    fn longest_match_prefers_full_sequence() {
        let db = EmojiDatabase::bundled();
        let chars: Vec<char> = "x❤️y".chars().collect();
        assert_eq!(db.longest_match(&chars, 1), Some(2));
        assert_eq!(db.longest_match(&chars, 0), None);
        assert_eq!(db.longest_match(&chars, 9), None);
    }

    #[test]
    fn malformed_records_are_rejected() {
        assert!(EmojiDatabase::parse("1F600 smile\n", true).is_err());
        assert!(EmojiDatabase::parse("ZZZZ\tbad\n", true).is_err());
    }
}
