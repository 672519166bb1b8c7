use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

// ASCII punctuation (which includes a few Unicode symbols such as `$`, `+`, `<`)
// plus every Unicode punctuation category.
static PUNCTUATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[\p{P}\x21-\x2F\x3A-\x40\x5B-\x60\x7B-\x7E]").expect("static regex"));

/// Lowercase, blank out punctuation, collapse whitespace, trim.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped = PUNCTUATION.replace_all(&lowered, " ");
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// An ordered list of lowercase word tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Applies `f` to every token, dropping any that come back empty.
    pub fn map_tokens(self, f: impl Fn(&str) -> String) -> TokenSeq {
        TokenSeq(self.0.iter().map(|t| f(t)).filter(|t| !t.is_empty()).collect())
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// `normalize` followed by a whitespace split.
pub fn tokenize(text: &str) -> TokenSeq {
    TokenSeq(normalize(text).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect())
}
