/// Reduces an inflected lowercase token to a base form.
///
/// Implementations must be deterministic and idempotent on their own output.
pub trait Lemmatizer: Send + Sync {
    fn lemmatize(&self, token: &str) -> String;
}

/// Dictionary-free suffix reducer.
///
/// Rules are tried in order and the first applicable one fires; the step is
/// repeated until nothing changes, which makes the reducer idempotent.
///
/// | suffix | result | condition |
/// |--------|--------|-----------|
/// | `ied`, `ies` | `y` | |
/// | `ing`, `ed` | stripped | stem contains a vowel; a doubled final consonant (other than l, s, z) is undone |
/// | `es` | stripped | stem ends in ss, x, z, ch or sh |
/// | `s` | stripped | word does not end in ss, us or is |
///
/// No rule may leave fewer than three characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuffixLemmatizer;

const MIN_LEN: usize = 3;

impl Lemmatizer for SuffixLemmatizer {
    fn lemmatize(&self, token: &str) -> String {
        let mut current = token.to_owned();
        // Every rule shortens the word, so this terminates.
        while let Some(next) = reduce_once(&current) {
            current = next;
        }
        current
    }
}

/// Convenience wrapper over [`SuffixLemmatizer`].
pub fn lemmatize(token: &str) -> String {
    SuffixLemmatizer.lemmatize(token)
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

fn undo_doubling(stem: &str) -> &str {
    let mut rev = stem.chars().rev();
    match (rev.next(), rev.next()) {
        (Some(a), Some(b))
            if a == b
                && a.is_ascii_alphabetic()
                && !matches!(a, 'a' | 'e' | 'i' | 'o' | 'u' | 'l' | 's' | 'z')
                && char_len(stem) - 1 >= MIN_LEN =>
        {
            &stem[..stem.len() - a.len_utf8()]
        }
        _ => stem,
    }
}

fn reduce_once(word: &str) -> Option<String> {
    if char_len(word) <= MIN_LEN {
        return None;
    }

    for suffix in ["ied", "ies"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if char_len(stem) + 1 >= MIN_LEN {
                return Some(format!("{stem}y"));
            }
            return None;
        }
    }

    for suffix in ["ing", "ed"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if char_len(stem) >= MIN_LEN && has_vowel(stem) {
                return Some(undo_doubling(stem).to_owned());
            }
            return None;
        }
    }

    if let Some(stem) = word.strip_suffix("es") {
        let sibilant = ["ss", "x", "z", "ch", "sh"].iter().any(|s| stem.ends_with(s));
        if sibilant && char_len(stem) >= MIN_LEN {
            return Some(stem.to_owned());
        }
    }

    if let Some(stem) = word.strip_suffix('s') {
        let protected = ["ss", "us", "is"].iter().any(|s| word.ends_with(s));
        if !protected && char_len(stem) >= MIN_LEN {
            return Some(stem.to_owned());
        }
    }

    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_family_reduces_to_add() {
        assert_eq!(lemmatize("adding"), "add");
        assert_eq!(lemmatize("added"), "add");
        assert_eq!(lemmatize("adds"), "add");
        assert_eq!(lemmatize("add"), "add");
    }

    #[test]
    fn plural_rules() {
        assert_eq!(lemmatize("courses"), "course");
        assert_eq!(lemmatize("classes"), "class");
        assert_eq!(lemmatize("boxes"), "box");
        assert_eq!(lemmatize("churches"), "church");
        assert_eq!(lemmatize("studies"), "study");
        assert_eq!(lemmatize("hours"), "hour");
        assert_eq!(lemmatize("status"), "status");
        assert_eq!(lemmatize("analysis"), "analysis");
        assert_eq!(lemmatize("class"), "class");
    }

    #[test]
    fn doubling_is_undone_except_for_l_s_z() {
        assert_eq!(lemmatize("running"), "run");
        assert_eq!(lemmatize("planned"), "plan");
        assert_eq!(lemmatize("called"), "call");
        assert_eq!(lemmatize("passing"), "pass");
    }

    #[test]
    fn vowelless_stems_are_kept() {
        assert_eq!(lemmatize("string"), "string");
        assert_eq!(lemmatize("bring"), "bring");
        assert_eq!(lemmatize("thing"), "thing");
    }

    #[test]
    fn short_words_untouched() {
        assert_eq!(lemmatize("is"), "is");
        assert_eq!(lemmatize("bed"), "bed");
        assert_eq!(lemmatize("ies"), "ies");
        assert_eq!(lemmatize("a"), "a");
    }

    #[test]
    fn never_shorter_than_three_when_reduced() {
        for w in ["lies", "dies", "used", "need", "kings", "sings"] {
            let out = lemmatize(w);
            assert!(char_len(&out) >= MIN_LEN, "{w} -> {out}");
        }
    }

    #[test]
    fn non_ascii_is_safe() {
        assert_eq!(lemmatize("cafés"), "café");
        assert_eq!(lemmatize("ññing"), "ññing");
    }
}
