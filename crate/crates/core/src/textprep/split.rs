use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CHUNK_SIZE: usize = 1000;
pub const DEFAULT_CHUNK_OVERLAP: usize = 200;

/// Break points in order of preference. Patterns on the same level compete on
/// position only.
const SEPARATOR_LEVELS: &[&[&str]] = &[&["\n\n"], &["\n"], &[". ", "? ", "! "], &[" "]];

#[derive(Debug, Error, PartialEq, Eq)]
#[error("chunk overlap ({overlap}) must be smaller than chunk size ({chunk_size})")]
pub struct ChunkParamsError {
    pub chunk_size: usize,
    pub overlap: usize,
}

/// Validated splitter parameters, measured in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawChunkParams")]
pub struct ChunkParams {
    chunk_size: usize,
    overlap: usize,
}

#[derive(Deserialize)]
struct RawChunkParams {
    chunk_size: usize,
    overlap: usize,
}

impl TryFrom<RawChunkParams> for ChunkParams {
    type Error = ChunkParamsError;

    fn try_from(raw: RawChunkParams) -> Result<Self, Self::Error> {
        ChunkParams::new(raw.chunk_size, raw.overlap)
    }
}

impl ChunkParams {
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self, ChunkParamsError> {
        if chunk_size == 0 || overlap >= chunk_size {
            return Err(ChunkParamsError { chunk_size, overlap });
        }
        Ok(Self { chunk_size, overlap })
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }
}

impl Default for ChunkParams {
    fn default() -> Self {
        Self { chunk_size: DEFAULT_CHUNK_SIZE, overlap: DEFAULT_CHUNK_OVERLAP }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub text: String,
    /// Character (not byte) offset into the source.
    pub start_offset: usize,
    pub chunk_index: usize,
}

/// Splits `text` into chunks of at most `chunk_size` characters.
///
/// Each chunk ends at the last paragraph break, newline, sentence end or space
/// that fits in the window (in that order of preference), falling back to a
/// hard character cut. Consecutive chunks share exactly `overlap` characters,
/// so dropping the first `overlap` characters of every chunk after the first
/// and concatenating reproduces the source.
pub fn split_recursive(text: &str, params: ChunkParams) -> Vec<Chunk> {
    let chars: Vec<char> = text.chars().collect();
    let total = chars.len();
    let mut chunks = Vec::new();
    let mut start = 0;

    while start < total {
        let end = if total - start <= params.chunk_size { total } else { choose_cut(&chars, start, params) };
        chunks.push(Chunk { text: chars[start..end].iter().collect(), start_offset: start, chunk_index: chunks.len() });
        if end == total {
            break;
        }
        start = end - params.overlap;
    }
    chunks
}

/// Picks the exclusive end of the chunk starting at `start`. The result lies in
/// `(start + overlap, start + chunk_size]` so the next start always advances.
fn choose_cut(chars: &[char], start: usize, params: ChunkParams) -> usize {
    let lo = start + params.overlap + 1;
    let hi = start + params.chunk_size;

    for level in SEPARATOR_LEVELS {
        let best = level.iter().filter_map(|sep| last_cut_after(chars, sep, lo, hi)).max();
        if let Some(end) = best {
            return end;
        }
    }
    hi
}

/// Largest `e` in `[lo, hi]` such that `chars[e - sep.len()..e]` equals `sep`.
fn last_cut_after(chars: &[char], sep: &str, lo: usize, hi: usize) -> Option<usize> {
    let pattern: Vec<char> = sep.chars().collect();
    let n = pattern.len();
    (lo.max(n)..=hi).rev().find(|&e| chars[e - n..e] == pattern[..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(size: usize, overlap: usize) -> ChunkParams {
        ChunkParams::new(size, overlap).unwrap()
    }

    fn reassemble(chunks: &[Chunk], overlap: usize) -> String {
        let mut out = String::new();
        for (i, c) in chunks.iter().enumerate() {
            if i == 0 {
                out.push_str(&c.text);
            } else {
                out.extend(c.text.chars().skip(overlap));
            }
        }
        out
    }

    #[test]
    fn short_text_is_single_chunk() {
        let text = "x".repeat(900);
        let chunks = split_recursive(&text, ChunkParams::default());
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].start_offset, 0);
        assert_eq!(chunks[0].text, text);
    }

    #[test]
    fn no_separator_text_cuts_on_characters() {
        let text = "y".repeat(1500);
        let chunks = split_recursive(&text, ChunkParams::default());
        let spans: Vec<_> = chunks.iter().map(|c| (c.start_offset, c.start_offset + c.text.chars().count())).collect();
        assert_eq!(spans, vec![(0, 1000), (800, 1500)]);
    }

    #[test]
    fn empty_text_yields_nothing() {
        assert!(split_recursive("", ChunkParams::default()).is_empty());
    }

    #[test]
    fn prefers_paragraph_breaks_over_spaces() {
        let text = format!("{}\n\n{}", "a b ".repeat(10), "c d ".repeat(10));
        let chunks = split_recursive(&text, params(50, 5));
        assert!(chunks[0].text.ends_with("\n\n"), "{:?}", chunks[0].text);
        assert_eq!(reassemble(&chunks, 5), text);
    }

    #[test]
    fn prefers_sentence_end_over_space() {
        let text = "One two three. Four five six seven eight nine ten eleven twelve";
        let chunks = split_recursive(text, params(30, 4));
        assert_eq!(chunks[0].text, "One two three. ");
        assert_eq!(reassemble(&chunks, 4), text);
    }

    #[test]
    fn multibyte_offsets_are_in_characters() {
        let text = "é".repeat(25);
        let chunks = split_recursive(&text, params(10, 3));
        assert_eq!(chunks[1].start_offset, 7);
        assert!(chunks.iter().all(|c| c.text.chars().count() <= 10));
        assert_eq!(reassemble(&chunks, 3), text);
    }

    #[test]
    fn indices_are_sequential() {
        let text = "word ".repeat(700);
        let chunks = split_recursive(&text, ChunkParams::default());
        for (i, c) in chunks.iter().enumerate() {
            assert_eq!(c.chunk_index, i);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ChunkParams::new(100, 100).is_err());
        assert!(ChunkParams::new(0, 0).is_err());
        assert!(ChunkParams::new(100, 0).is_ok());
    }
}
