//! Synthetic IEST-style tweets.
//!
//! Every tweet holds one `[#TRIGGERWORD#]` placeholder among neutral filler
//! words. Class signal comes from cue words and emoji injected at
//! configurable rates. A share of tweets follows the `un [#TRIGGERWORD#]`
//! pattern; those carry no other cue and are labeled joy with probability
//! `pattern_purity`.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use crate::config::{parse_lines, parse_value, KeyValue};
use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::label::{Emotion, NUM_CLASSES};
use crate::rng::{stream, Purpose, Rng};

pub const CUE_WORDS: [[&str; 3]; NUM_CLASSES] = [
    ["furious", "outraged", "livid"],
    ["gross", "revolting", "nasty"],
    ["scared", "terrified", "nervous"],
    ["delighted", "thrilled", "grateful"],
    ["heartbroken", "lonely", "miserable"],
    ["shocked", "unexpected", "astonished"],
];

pub const CUE_EMOJI: [[&str; 2]; NUM_CLASSES] = [
    ["😡", "🤬"],
    ["🤢", "🤮"],
    ["😱", "😨"],
    ["😂", "😍"],
    ["😭", "😢"],
    ["😮", "😲"],
];

const FILLER: &[&str] = &[
    "the", "a", "my", "your", "this", "that", "it", "is", "was", "be", "to", "of", "and", "in", "on", "at", "for",
    "with", "when", "so", "just", "really", "today", "tonight", "morning", "week", "day", "time", "people", "friend",
    "friends", "mom", "dad", "work", "school", "game", "phone", "car", "home", "house", "coffee", "music", "movie",
    "show", "news", "weather", "city", "team", "class", "bus", "train", "dinner", "lunch", "weekend", "year", "feel",
    "felt", "made", "make", "get", "got", "see", "saw", "think", "know", "went", "going", "still", "again", "about",
    "after", "before", "all", "some", "what", "how", "i", "me", "we", "they", "he", "she", "you", "im", "dont",
    "cant", "lol", "omg", "ok", "yeah", "right", "now", "then", "there", "here", "last", "first", "new", "old",
];

const HASHTAG_STEMS: &[&str] = &["monday", "life", "tbt", "mood", "weekend", "news", "sports", "family"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub examples: usize,
    /// Probability that a tweet carries one of its class cue words.
    pub cue_rate: f64,
    /// Probability that a tweet carries one of its class emoji.
    pub emoji_rate: f64,
    /// Probability that an injected cue word or emoji belongs to the
    /// tweet's own class rather than a uniformly chosen other class.
    pub cue_purity: f64,
    /// Share of joy tweets that follow the pattern.
    pub pattern_rate: f64,
    /// Fraction of pattern tweets labeled joy.
    pub pattern_purity: f64,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            examples: 600,
            cue_rate: 0.6,
            emoji_rate: 0.3,
            cue_purity: 1.0,
            pattern_rate: 0.0,
            pattern_purity: 0.99,
            min_words: 4,
            max_words: 12,
        }
    }
}

impl KeyValue for SynthSpec {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "examples" => self.examples = parse_value(key, value)?,
            "cue_rate" => self.cue_rate = parse_value(key, value)?,
            "emoji_rate" => self.emoji_rate = parse_value(key, value)?,
            "cue_purity" => self.cue_purity = parse_value(key, value)?,
            "pattern_rate" => self.pattern_rate = parse_value(key, value)?,
            "pattern_purity" => self.pattern_purity = parse_value(key, value)?,
            "min_words" => self.min_words = parse_value(key, value)?,
            "max_words" => self.max_words = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("examples", self.examples.to_string()),
            ("cue_rate", self.cue_rate.to_string()),
            ("emoji_rate", self.emoji_rate.to_string()),
            ("cue_purity", self.cue_purity.to_string()),
            ("pattern_rate", self.pattern_rate.to_string()),
            ("pattern_purity", self.pattern_purity.to_string()),
            ("min_words", self.min_words.to_string()),
            ("max_words", self.max_words.to_string()),
        ]
    }
}

impl SynthSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = SynthSpec::default();
        for (line, k, v) in parse_lines(text)? {
            if !s.set(&k, &v)? {
                return Err(Error::Config(format!("line {line}: unknown key `{k}`")));
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.examples < NUM_CLASSES {
            return Err(Error::Config(format!("examples must be at least {NUM_CLASSES}")));
        }
        if !unit(self.cue_rate) || !unit(self.emoji_rate) || !unit(self.cue_purity) || !unit(self.pattern_rate) {
            return Err(Error::Config("rates must lie in [0, 1]".into()));
        }
        if !(self.pattern_purity > 0.0 && self.pattern_purity <= 1.0) {
            return Err(Error::Config("pattern_purity must lie in (0, 1]".into()));
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(Error::Config("need 1 <= min_words <= max_words".into()));
        }
        if self.other_pattern_rate() > 1.0 {
            return Err(Error::Config("pattern_rate and pattern_purity imply a share above 1".into()));
        }
        Ok(())
    }

    /// Pattern share for each non-joy class, so that joy makes up
    /// `pattern_purity` of all pattern tweets.
    pub fn other_pattern_rate(&self) -> f64 {
        self.pattern_rate * (1.0 - self.pattern_purity) / (5.0 * self.pattern_purity)
    }
}

fn cue_class(label: Emotion, spec: &SynthSpec, rng: &mut Rng) -> usize {
    if rng.random_bool(spec.cue_purity) {
        label.index()
    } else {
        (label.index() + rng.random_range(1..NUM_CLASSES)) % NUM_CLASSES
    }
}

fn tweet(label: Emotion, spec: &SynthSpec, rng: &mut Rng) -> String {
    let n = rng.random_range(spec.min_words..=spec.max_words);
    let mut words: Vec<String> = (0..n).map(|_| FILLER.choose(rng).expect("filler").to_string()).collect();
    let rate = if label == Emotion::Joy {
        spec.pattern_rate
    } else {
        spec.other_pattern_rate()
    };
    let pattern = rng.random_bool(rate);
    let at = rng.random_range(0..=words.len());
    words.insert(at, if pattern { "un [#TRIGGERWORD#]" } else { "[#TRIGGERWORD#]" }.to_string());
    if !pattern {
        if rng.random_bool(spec.cue_rate) {
            let c = cue_class(label, spec, rng);
            let at = rng.random_range(0..=words.len());
            words.insert(at, CUE_WORDS[c].choose(rng).expect("cue").to_string());
        }
        if rng.random_bool(spec.emoji_rate) {
            let c = cue_class(label, spec, rng);
            let e = CUE_EMOJI[c].choose(rng).expect("emoji");
            let run = rng.random_range(1..=2);
            words.push(e.repeat(run));
        }
    }
    if rng.random_bool(0.2) {
        words.push(format!("#{}", HASHTAG_STEMS.choose(rng).expect("stem")));
    }
    if rng.random_bool(0.3) {
        words.insert(0, "@USERNAME".into());
    }
    if rng.random_bool(0.1) {
        let at = rng.random_range(1..=words.len());
        words.insert(at, "[NEWLINE]".into());
    }
    if rng.random_bool(0.1) {
        words.push("http://url.removed".into());
    }
    words.join(" ")
}

/// Balanced labels (class counts differ by at most one) in seeded order.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<Vec<Record>> {
    spec.validate()?;
    let mut rng = stream(seed, Purpose::Data);
    let mut labels: Vec<Emotion> = (0..spec.examples).map(|i| Emotion::ALL[i % NUM_CLASSES]).collect();
    labels.shuffle(&mut rng);
    Ok(labels
        .into_iter()
        .map(|l| Record::labeled(l, tweet(l, spec, &mut rng)))
        .collect())
}
