//! Tweet preprocessing: placeholder substitution, emoji-aware tokenization,
//! emoji stripping and per-tweet feature flags.
//!
//! The scanner walks each whitespace-separated chunk left to right and, at
//! every position, takes the first rule that matches:
//!
//! 1. a placeholder literal (`__TRIGGERWORD__`, `__USERNAME__`, ...);
//! 2. the longest emoji sequence in the [`EmojiDatabase`];
//! 3. a hashtag, `#` followed by word characters;
//! 4. a URL-like remnant (`http://`, `https://`, `www.`);
//! 5. a word (letters, digits, `_`, with inner `'`, `’` or `-`), or an
//!    `@mention`;
//! 6. punctuation, a run of one repeated symbol.
//!
//! Words, hashtags and URLs stop wherever a placeholder or emoji begins, so
//! `un__TRIGGERWORD__` splits into `un` and the placeholder.

mod emoji;

use std::collections::BTreeMap;

pub use emoji::EmojiDatabase;

/// Substitutions applied before tokenization, original → replacement.
pub const SUBSTITUTIONS: [(&str, &str); 4] = [
    ("[#TRIGGERWORD#]", "__TRIGGERWORD__"),
    ("@USERNAME", "__USERNAME__"),
    ("[NEWLINE]", "__NEWLINE__"),
    ("http://url.removed", "__URL__"),
];

pub const TRIGGER: &str = "__TRIGGERWORD__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Emoji,
    Hashtag,
    PlaceholderTrigger,
    PlaceholderUsername,
    PlaceholderNewline,
    PlaceholderUrl,
    Punctuation,
}

impl TokenKind {
    pub fn is_placeholder(self) -> bool {
        matches!(
            self,
            TokenKind::PlaceholderTrigger
                | TokenKind::PlaceholderUsername
                | TokenKind::PlaceholderNewline
                | TokenKind::PlaceholderUrl
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TokenKind::Word => "word",
            TokenKind::Emoji => "emoji",
            TokenKind::Hashtag => "hashtag",
            TokenKind::PlaceholderTrigger => "placeholder_trigger",
            TokenKind::PlaceholderUsername => "placeholder_username",
            TokenKind::PlaceholderNewline => "placeholder_newline",
            TokenKind::PlaceholderUrl => "placeholder_url",
            TokenKind::Punctuation => "punctuation",
        }
    }
}

const PLACEHOLDERS: [(&str, TokenKind); 4] = [
    ("__TRIGGERWORD__", TokenKind::PlaceholderTrigger),
    ("__USERNAME__", TokenKind::PlaceholderUsername),
    ("__NEWLINE__", TokenKind::PlaceholderNewline),
    ("__URL__", TokenKind::PlaceholderUrl),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn new(text: impl Into<String>, kind: TokenKind) -> Self {
        Token {
            text: text.into(),
            kind,
        }
    }

    pub fn word(text: impl Into<String>) -> Self {
        Token::new(text, TokenKind::Word)
    }

    pub fn emoji(text: impl Into<String>) -> Self {
        Token::new(text, TokenKind::Emoji)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TokenizerOptions {
    /// Fold words and hashtags to lowercase. Off by default.
    pub lowercase: bool,
}

/// Replaces every placeholder original with its replacement. Idempotent.
pub fn preprocess_substitute(text: &str) -> String {
    SUBSTITUTIONS
        .iter()
        .fold(text.to_string(), |acc, (from, to)| acc.replace(from, to))
}

pub fn tokenize(text: &str, db: &EmojiDatabase) -> Vec<Token> {
    tokenize_with(text, db, TokenizerOptions::default())
}

pub fn tokenize_with(text: &str, db: &EmojiDatabase, opts: TokenizerOptions) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in text.split(char::is_whitespace).filter(|c| !c.is_empty()) {
        let chars: Vec<char> = chunk.chars().collect();
        Scanner {
            chars: &chars,
            db,
            out: &mut out,
        }
        .run();
    }
    if opts.lowercase {
        for tok in &mut out {
            if matches!(tok.kind, TokenKind::Word | TokenKind::Hashtag) {
                tok.text = tok.text.to_lowercase();
            }
        }
    }
    out
}

/// Convenience: substitution followed by tokenization.
pub fn preprocess(text: &str, db: &EmojiDatabase, opts: TokenizerOptions) -> Vec<Token> {
    tokenize_with(&preprocess_substitute(text), db, opts)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

struct Scanner<'a> {
    chars: &'a [char],
    db: &'a EmojiDatabase,
    out: &'a mut Vec<Token>,
}

impl Scanner<'_> {
    fn run(&mut self) {
        let n = self.chars.len();
        let mut i = 0;
        while i < n {
            let (len, kind) = self.next_token(i);
            debug_assert!(len > 0);
            self.out
                .push(Token::new(self.chars[i..i + len].iter().collect::<String>(), kind));
            i += len;
        }
    }

    fn placeholder_at(&self, i: usize) -> Option<(usize, TokenKind)> {
        PLACEHOLDERS.iter().find_map(|(lit, kind)| {
            let len = lit.len();
            (self.chars.len() - i >= len && lit.chars().zip(&self.chars[i..]).all(|(a, &b)| a == b))
                .then_some((len, *kind))
        })
    }

    fn starts_url(&self, i: usize) -> bool {
        ["http://", "https://", "www."].iter().any(|p| {
            self.chars.len() - i >= p.len()
                && p.chars()
                    .zip(&self.chars[i..])
                    .all(|(a, &b)| a == b.to_ascii_lowercase())
        })
    }

    /// A placeholder or emoji begins at `i`.
    fn boundary(&self, i: usize) -> bool {
        self.placeholder_at(i).is_some() || self.db.longest_match(self.chars, i).is_some()
    }

    fn run_while(&self, mut j: usize, pred: impl Fn(char) -> bool) -> usize {
        while j < self.chars.len() && pred(self.chars[j]) && !self.boundary(j) {
            j += 1;
        }
        j
    }

    fn word_end(&self, start: usize) -> usize {
        let n = self.chars.len();
        let mut j = self.run_while(start, is_word_char);
        while j + 1 < n
            && matches!(self.chars[j], '\'' | '’' | '-')
            && is_word_char(self.chars[j + 1])
            && !self.boundary(j + 1)
        {
            j = self.run_while(j + 1, is_word_char);
        }
        j
    }

    fn next_token(&self, i: usize) -> (usize, TokenKind) {
        let chars = self.chars;
        let n = chars.len();
        if let Some(hit) = self.placeholder_at(i) {
            return hit;
        }
        if let Some(len) = self.db.longest_match(chars, i) {
            return (len, TokenKind::Emoji);
        }
        let c = chars[i];
        let word_follows = i + 1 < n && is_word_char(chars[i + 1]) && !self.boundary(i + 1);
        if c == '#' && word_follows {
            return (self.run_while(i + 1, is_word_char) - i, TokenKind::Hashtag);
        }
        if self.starts_url(i) {
            return (self.run_while(i, |_| true) - i, TokenKind::Word);
        }
        if c == '@' && word_follows {
            return (self.run_while(i + 1, is_word_char) - i, TokenKind::Word);
        }
        if is_word_char(c) {
            return (self.word_end(i) - i, TokenKind::Word);
        }
        (self.run_while(i + 1, |x| x == c) - i, TokenKind::Punctuation)
    }
}

pub fn strip_emoji(tokens: &[Token]) -> Vec<Token> {
    tokens
        .iter()
        .filter(|t| t.kind != TokenKind::Emoji)
        .cloned()
        .collect()
}

/// Removes only the emoji tokens whose alias is `alias`.
pub fn strip_alias(tokens: &[Token], alias: &str, db: &EmojiDatabase) -> Vec<Token> {
    tokens
        .iter()
        .filter(|t| !(t.kind == TokenKind::Emoji && db.alias(&t.text) == Some(alias)))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TweetFeatures {
    pub has_emoji: bool,
    pub has_hashtag: bool,
    pub has_un_trigger: bool,
    /// Alias → occurrence count.
    pub emoji_aliases: BTreeMap<String, usize>,
}

/// `has_un_trigger` matches the word `un` in any letter case directly before
/// the trigger placeholder.
pub fn extract_features(tokens: &[Token], db: &EmojiDatabase) -> TweetFeatures {
    let mut f = TweetFeatures::default();
    for tok in tokens {
        match tok.kind {
            TokenKind::Emoji => {
                let alias = db.alias(&tok.text).unwrap_or(tok.text.as_str());
                *f.emoji_aliases.entry(alias.to_string()).or_default() += 1;
            }
            TokenKind::Hashtag => f.has_hashtag = true,
            _ => {}
        }
    }
    f.has_emoji = !f.emoji_aliases.is_empty();
    f.has_un_trigger = tokens.windows(2).any(|w| {
        w[0].kind == TokenKind::Word
            && w[0].text.eq_ignore_ascii_case("un")
            && w[1].kind == TokenKind::PlaceholderTrigger
    });
    f
}

/// Tokens joined by single spaces, the on-disk form of a preprocessed tweet.
pub fn join_tokens(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&t.text);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn db() -> &'static EmojiDatabase {
        EmojiDatabase::bundled()
    }

    fn kinds(tokens: &[Token]) -> Vec<(&str, TokenKind)> {
        tokens.iter().map(|t| (t.text.as_str(), t.kind)).collect()
    }

    #[test]
    fn substitutes_every_placeholder() {
        assert_eq!(
            preprocess_substitute("I feel [#TRIGGERWORD#] today"),
            "I feel __TRIGGERWORD__ today"
        );
        assert_eq!(
            preprocess_substitute("@USERNAME check http://url.removed"),
            "__USERNAME__ check __URL__"
        );
        assert_eq!(preprocess_substitute("a[NEWLINE]b"), "a__NEWLINE__b");
        assert_eq!(preprocess_substitute(""), "");
    }

    #[test]
    fn hashtag_emoji_versus_hashtag() {
        let toks = tokenize("#happy \u{0023}\u{FE0F}\u{20E3}", db());
        assert_eq!(
            kinds(&toks),
            vec![
                ("#happy", TokenKind::Hashtag),
                ("\u{0023}\u{FE0F}\u{20E3}", TokenKind::Emoji)
            ]
        );
    }

    #[test]
    fn un_trigger_pattern() {
        let toks = tokenize("un __TRIGGERWORD__", db());
        assert_eq!(
            kinds(&toks),
            vec![("un", TokenKind::Word), ("__TRIGGERWORD__", TokenKind::PlaceholderTrigger)]
        );
        let glued = tokenize("un__TRIGGERWORD__!", db());
        assert_eq!(
            kinds(&glued),
            vec![
                ("un", TokenKind::Word),
                ("__TRIGGERWORD__", TokenKind::PlaceholderTrigger),
                ("!", TokenKind::Punctuation)
            ]
        );
    }

    #[test]
    fn adjacent_emoji_are_separate() {
        // Same split as emoji.emoji_list("😭😭") in the Python emoji package.
        let toks = tokenize("😭😭", db());
        assert_eq!(kinds(&toks), vec![("😭", TokenKind::Emoji), ("😭", TokenKind::Emoji)]);
    }

    #[test]
    fn zwj_and_skin_tone_sequences_stay_whole() {
        let family = "👨\u{200D}👩\u{200D}👧";
        let toks = tokenize(&format!("so{family}👍🏽"), db());
        assert_eq!(
            kinds(&toks),
            vec![
                ("so", TokenKind::Word),
                (family, TokenKind::Emoji),
                ("👍🏽", TokenKind::Emoji)
            ]
        );
    }

    #[test]
    fn words_urls_mentions_punctuation() {
        let toks = tokenize("Don't go!!! @bob https://t.co/x ... 3pm #1 #", db());
        assert_eq!(
            kinds(&toks),
            vec![
                ("Don't", TokenKind::Word),
                ("go", TokenKind::Word),
                ("!!!", TokenKind::Punctuation),
                ("@bob", TokenKind::Word),
                ("https://t.co/x", TokenKind::Word),
                ("...", TokenKind::Punctuation),
                ("3pm", TokenKind::Word),
                ("#1", TokenKind::Hashtag),
                ("#", TokenKind::Punctuation),
            ]
        );
    }

    #[test]
    fn keycap_digit_is_emoji_but_plain_digit_is_not() {
        let toks = tokenize("1️⃣ 1", db());
        assert_eq!(kinds(&toks), vec![("1️⃣", TokenKind::Emoji), ("1", TokenKind::Word)]);
    }

    #[test]
    fn lowercase_option_leaves_placeholders() {
        let opts = TokenizerOptions { lowercase: true };
        let toks = tokenize_with("WOW __URL__ #Yes", db(), opts);
        assert_eq!(
            kinds(&toks),
            vec![
                ("wow", TokenKind::Word),
                ("__URL__", TokenKind::PlaceholderUrl),
                ("#yes", TokenKind::Hashtag)
            ]
        );
    }

    #[test]
    fn strip_emoji_examples() {
        let toks = vec![Token::word("so"), Token::word("sad"), Token::emoji("😭")];
        assert_eq!(strip_emoji(&toks), vec![Token::word("so"), Token::word("sad")]);
        let plain = vec![Token::word("hi")];
        assert_eq!(strip_emoji(&plain), plain);
    }

    #[test]
    fn strip_alias_removes_one_alias_only() {
        let toks = tokenize("x 😷 😭 😷", db());
        let out = strip_alias(&toks, "mask", db());
        assert_eq!(join_tokens(&out), "x 😭");
    }

    #[test]
    fn feature_flags() {
        let f = extract_features(&[Token::word("un"), Token::new(TRIGGER, TokenKind::PlaceholderTrigger)], db());
        assert!(f.has_un_trigger);
        let f = extract_features(&[Token::word("hello")], db());
        assert_eq!(f, TweetFeatures::default());
        let f = extract_features(&tokenize("sick 😷 #flu 😷", db()), db());
        assert!(f.has_emoji && f.has_hashtag && !f.has_un_trigger);
        assert_eq!(f.emoji_aliases.get("mask"), Some(&2));
    }

    fn tweet_strategy() -> impl Strategy<Value = String> {
        let pieces = prop::sample::select(vec![
            "un", "__TRIGGERWORD__", "[#TRIGGERWORD#]", "@USERNAME", "[NEWLINE]",
            "http://url.removed", "#happy", "#", "#️⃣", "😭", "😷", "❤️", "\u{FE0F}",
            "\u{200D}", "don't", "!!", "?", "1", "1️⃣", "é", "日本", " ", "  ", "\t", "_", "www.x",
            "@bob", "-", "'", "©", "©️",
        ]);
        prop::collection::vec(pieces, 0..24).prop_map(|v| v.concat())
    }

    fn non_ws_sorted(s: &str) -> Vec<char> {
        let mut v: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        v.sort_unstable();
        v
    }

    proptest! {
        #[test]
        fn substitution_is_idempotent(s in tweet_strategy()) {
            let once = preprocess_substitute(&s);
            prop_assert_eq!(preprocess_substitute(&once), once);
        }

        #[test]
        fn tokenization_conserves_codepoints(s in tweet_strategy()) {
            let s = preprocess_substitute(&s);
            let toks = tokenize(&s, db());
            for t in &toks {
                prop_assert!(!t.text.is_empty());
                prop_assert!(!t.text.chars().any(char::is_whitespace));
                match t.kind {
                    TokenKind::Emoji => prop_assert!(db().contains(&t.text)),
                    TokenKind::Hashtag => prop_assert!(t.text.starts_with('#') && t.text.chars().count() > 1),
                    k if k.is_placeholder() => {
                        prop_assert!(PLACEHOLDERS.iter().any(|(lit, pk)| *lit == t.text && *pk == k))
                    }
                    _ => {}
                }
            }
            prop_assert_eq!(non_ws_sorted(&s), non_ws_sorted(&join_tokens(&toks)));
        }

        #[test]
        fn strip_is_idempotent_and_matches_filter(s in tweet_strategy()) {
            let toks = tokenize(&preprocess_substitute(&s), db());
            let once = strip_emoji(&toks);
            prop_assert_eq!(&strip_emoji(&once), &once);
            let expected: Vec<Token> = toks.iter().filter(|t| t.kind != TokenKind::Emoji).cloned().collect();
            prop_assert_eq!(&once, &expected);
            let f = extract_features(&toks, db());
            prop_assert_eq!(f.has_emoji, !f.emoji_aliases.is_empty());
        }
    }
}
