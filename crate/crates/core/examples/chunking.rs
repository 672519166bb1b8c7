//! Splits a long document into overlapping chunks and reassembles it.
//!
//! cargo run --example chunking

use unirag::textprep::{split_recursive, ChunkParams};

const HANDBOOK: &str = "Students must complete advising before preregistration opens. \
Advisers review the degree plan and approve at most five courses.\n\n\
Late registration carries a fee. Students who miss the window must apply to the registrar \
with a written explanation, and approval is not guaranteed.\n\n\
Course withdrawals are allowed until the ninth week. A withdrawn course appears as W on the transcript.";

pub fn run() -> anyhow::Result<()> {
    let params = ChunkParams::new(120, 20)?;
    let chunks = split_recursive(HANDBOOK, params);
    for c in &chunks {
        println!("#{} @{:>3} ({:>3} chars) {:?}", c.chunk_index, c.start_offset, c.text.chars().count(), c.text);
    }

    let mut rebuilt = String::new();
    for (i, c) in chunks.iter().enumerate() {
        let skip = if i == 0 { 0 } else { params.overlap() };
        rebuilt.extend(c.text.chars().skip(skip));
    }
    assert_eq!(rebuilt, HANDBOOK);
    println!("{} chunks reassemble to the source", chunks.len());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run()
}
