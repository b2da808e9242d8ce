//! Tweet normalization and tokenization.

use serde::{Deserialize, Serialize};

pub const URL_TOKEN: &str = "<url>";
pub const MENTION_TOKEN: &str = "<usr>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Mention,
    Url,
    Hashtag,
    Number,
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
}

impl Token {
    /// Words, hashtag bodies and numbers; the tokens lexicon matching,
    /// TFIDF and frequency analysis operate on.
    pub fn is_word(&self) -> bool {
        matches!(self.kind, TokenKind::Word | TokenKind::Hashtag | TokenKind::Number)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub source_id: String,
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens
            .iter()
            .filter(|t| t.is_word())
            .map(|t| t.surface.as_str())
    }

    pub fn word_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_word()).count()
    }
}

// `*` counts as a word character so censored forms like "f***" survive.
fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '*' || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Non-ASCII, non-alphanumeric characters outside the general punctuation
/// block are kept as single symbol tokens (emoji and the like).
fn is_symbol(c: char) -> bool {
    !c.is_ascii()
        && !c.is_alphanumeric()
        && !c.is_whitespace()
        && !('\u{2000}'..='\u{206F}').contains(&c)
        && !('\u{FE00}'..='\u{FE0F}').contains(&c)
        && !is_apostrophe(c)
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn classify_word(surface: &str) -> TokenKind {
    if surface.chars().all(|c| c.is_numeric()) {
        TokenKind::Number
    } else {
        TokenKind::Word
    }
}

/// Splits a whitespace-free chunk into word and symbol tokens. Apostrophes
/// are kept only between word characters.
fn split_chunk(chunk: &str, hashtag: bool, out: &mut Vec<Token>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut current = String::new();
    let mut first_word = true;
    let mut flush = |current: &mut String, out: &mut Vec<Token>| {
        if !current.is_empty() {
            let kind = if hashtag && first_word {
                TokenKind::Hashtag
            } else {
                classify_word(current)
            };
            first_word = false;
            out.push(Token {
                surface: std::mem::take(current),
                kind,
            });
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        if is_word_char(c) {
            current.extend(c.to_lowercase());
        } else if is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|&n| is_word_char(n))
        {
            current.push('\'');
        } else {
            flush(&mut current, out);
            if is_symbol(c) {
                out.push(Token {
                    surface: c.to_string(),
                    kind: TokenKind::Symbol,
                });
            }
        }
    }
    flush(&mut current, out);
}

/// Lowercases and tokenizes tweet text.
///
/// URLs become `<url>`, @-mentions become `<usr>`, hashtags keep their body,
/// and punctuation at word boundaries is dropped.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            tokens.push(Token {
                surface: URL_TOKEN.to_string(),
                kind: TokenKind::Url,
            });
            continue;
        }
        let trimmed = chunk.trim_start_matches(['\\', '(', '"']);
        if let Some(rest) = trimmed.strip_prefix('@') {
            if rest.starts_with(is_word_char) {
                tokens.push(Token {
                    surface: MENTION_TOKEN.to_string(),
                    kind: TokenKind::Mention,
                });
                // keep anything glued after the handle, e.g. "@bob's" or "@bob:)"
                let tail = rest.trim_start_matches(is_word_char);
                let tail = tail.strip_prefix(is_apostrophe).map_or(tail, |t| {
                    t.trim_start_matches(|c: char| c.is_alphanumeric())
                });
                split_chunk(tail, false, &mut tokens);
                continue;
            }
        }
        if chunk == MENTION_TOKEN || chunk == URL_TOKEN {
            let kind = if chunk == URL_TOKEN {
                TokenKind::Url
            } else {
                TokenKind::Mention
            };
            tokens.push(Token {
                surface: chunk.to_string(),
                kind,
            });
            continue;
        }
        let hashtag = trimmed.starts_with('#');
        split_chunk(trimmed, hashtag, &mut tokens);
    }
    tokens
}

pub fn tokenize_stream(source_id: impl Into<String>, text: &str) -> TokenStream {
    TokenStream {
        source_id: source_id.into(),
        tokens: tokenize(text),
    }
}

/// Boundary-wrapped character n-grams of a word, fastText style.
///
/// The token is wrapped as `<token>`; every contiguous n-gram for `n` in
/// `n_min..=n_max` is listed by increasing `n` then position, followed by the
/// whole wrapped token. An n-gram spanning the whole wrapped token is not
/// repeated.
pub fn character_ngrams(token: &str, n_min: usize, n_max: usize) -> Vec<String> {
    assert!(n_min >= 1 && n_min <= n_max, "invalid n-gram range {n_min}..={n_max}");
    let wrapped: Vec<char> = std::iter::once('<')
        .chain(token.chars())
        .chain(std::iter::once('>'))
        .collect();
    let len = wrapped.len();
    let mut grams = Vec::new();
    for n in n_min..=n_max.min(len.saturating_sub(1)) {
        for start in 0..=len - n {
            grams.push(wrapped[start..start + n].iter().collect());
        }
    }
    grams.push(wrapped.iter().collect());
    grams
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(surfaces("@usr You're DUMB!!"), ["<usr>", "you're", "dumb"]);
        assert!(surfaces("").is_empty());
        assert_eq!(
            surfaces("check https://t.co/xyz \\#feminazi"),
            ["check", "<url>", "feminazi"]
        );
    }

    #[test]
    fn token_kinds() {
        let toks = tokenize("#MAGA 2016 rocks @bob's f*** 'quoted' 😡");
        let kinds: Vec<_> = toks.iter().map(|t| (t.surface.as_str(), t.kind)).collect();
        assert_eq!(
            kinds,
            [
                ("maga", TokenKind::Hashtag),
                ("2016", TokenKind::Number),
                ("rocks", TokenKind::Word),
                ("<usr>", TokenKind::Mention),
                ("f***", TokenKind::Word),
                ("quoted", TokenKind::Word),
                ("😡", TokenKind::Symbol),
            ]
        );
        assert_eq!(surfaces("dumb,stupid...idiot"), ["dumb", "stupid", "idiot"]);
        assert_eq!(surfaces("don’t"), ["don't"]);
    }

    #[test]
    fn ngram_examples() {
        assert_eq!(character_ngrams("cat", 3, 3), ["<ca", "cat", "at>", "<cat>"]);
        assert_eq!(character_ngrams("a", 3, 3), ["<a>"]);
        assert_eq!(
            character_ngrams("cat", 2, 3),
            ["<c", "ca", "at", "t>", "<ca", "cat", "at>", "<cat>"]
        );
    }

    #[test]
    fn ngram_counts_match_enumeration() {
        for len in 0..=10usize {
            let token: String = "abcdefghij".chars().take(len).collect();
            for n in 1..=8usize {
                let wrapped = len + 2;
                // n-grams strictly shorter than the wrapped token, plus the token itself
                let expected = if n < wrapped { wrapped - n + 1 } else { 0 } + 1;
                assert_eq!(character_ngrams(&token, n, n).len(), expected, "len {len} n {n}");
            }
        }
    }

    proptest! {
        #[test]
        fn tokenize_idempotent_on_words(words in prop::collection::vec("[a-z][a-z0-9*]{0,8}", 0..12)) {
            let joined = words.join(" ");
            let first = tokenize(&joined);
            let rejoined: Vec<&str> = first.iter().map(|t| t.surface.as_str()).collect();
            prop_assert_eq!(tokenize(&rejoined.join(" ")), first);
        }

        #[test]
        fn tokens_are_nonempty_and_lowercase(text in "\\PC{0,60}") {
            for t in tokenize(&text) {
                prop_assert!(!t.surface.is_empty());
                prop_assert!(!t.surface.chars().any(char::is_whitespace));
                prop_assert_eq!(t.surface.to_lowercase(), t.surface.clone());
            }
        }
    }
}
