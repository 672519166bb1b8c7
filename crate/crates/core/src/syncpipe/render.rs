use serde::{Deserialize, Serialize};

use crate::ingest::{content_hash, SourceRow, WebSnapshot, WEB_TABLE};
use crate::textprep::{split_recursive, ChunkParams};
use crate::vecstore::RecordMetadata;

/// One short text unit ready to embed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedDoc {
    /// `<table>:<row_key>:<facet>:<chunk_index>`
    pub id: String,
    pub text: String,
    pub metadata: RecordMetadata,
}

/// A facet: a name and a template whose `{Column}` placeholders are filled
/// from the row. `{A|B}` reads column `A`, falling back to `B`.
struct Facet {
    name: &'static str,
    template: &'static str,
}

const FACULTY: &[Facet] = &[
    Facet { name: "role", template: "{Name} ({Initial}) is a {Designation} ({Status}) with office in room {Room}." },
    Facet { name: "email", template: "The email address of {Name} ({Initial}) is {Email}." },
];

const PREREQUISITES: &[Facet] = &[
    Facet { name: "direct", template: "Course {Course} has prerequisite {Pre-Requisite|Prerequisite}." },
    Facet { name: "chain", template: "Full prerequisite chain for {Course}: {Full Chain|Full Chain Pre-Requisite}." },
];

const SCHEDULE: &[Facet] = &[
    Facet { name: "section", template: "{Course} section {Section} is taught by {Faculty} on {Day} at {Time}." },
    Facet { name: "room", template: "{Course} section {Section} meets in room {Room}." },
];

const QA: &[Facet] = &[Facet { name: "qa", template: "Question: {Question} Answer: {Answer}" }];

fn facets_for(table: &str) -> Option<&'static [Facet]> {
    match table.to_ascii_lowercase().as_str() {
        "faculty" => Some(FACULTY),
        "prerequisites" | "prerequisite" => Some(PREREQUISITES),
        "schedule" => Some(SCHEDULE),
        "qa" | "englishqa" => Some(QA),
        _ => None,
    }
}

/// Values that mean "no value" in the source sheets.
fn is_blank(value: &str) -> bool {
    let v = value.trim();
    v.is_empty() || ["none", "n/a", "na", "null", "-"].iter().any(|b| v.eq_ignore_ascii_case(b))
}

/// Fills `template`; `None` if any placeholder is missing or blank.
fn fill(template: &str, row: &SourceRow) -> Option<String> {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..].find('}')? + open;
        let value =
            rest[open + 1..close].split('|').find_map(|col| row.fields.get(col.trim()).filter(|v| !is_blank(v)))?;
        out.push_str(value.trim());
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Some(out)
}

fn generic(row: &SourceRow) -> String {
    row.fields.iter().map(|(k, v)| format!("{k}: {}", v.trim())).collect::<Vec<_>>().join("; ")
}

fn push_chunks(
    out: &mut Vec<RenderedDoc>,
    table: &str,
    source_id: &str,
    facet: &str,
    text: &str,
    params: ChunkParams,
    rendered_at: i64,
) {
    for chunk in split_recursive(text, params) {
        out.push(RenderedDoc {
            id: format!("{table}:{source_id}:{facet}:{}", chunk.chunk_index),
            text: chunk.text,
            metadata: RecordMetadata {
                table: table.to_owned(),
                source_id: source_id.to_owned(),
                facet: facet.to_owned(),
                chunk_index: chunk.chunk_index,
                rendered_at,
            },
        });
    }
}

/// Renders a row into one short document per facet, chunking any that
/// exceed the chunk size.
///
/// Known tables use per-facet sentence templates; a facet whose values are
/// blank is omitted. Other tables (or rows where every facet is blank) get a
/// single `col: value; col: value` document.
pub fn render_row(row: &SourceRow, params: ChunkParams, rendered_at: i64) -> Vec<RenderedDoc> {
    let mut out = Vec::new();
    if let Some(facets) = facets_for(&row.table) {
        for f in facets {
            if let Some(text) = fill(f.template, row) {
                push_chunks(&mut out, &row.table, &row.row_key, f.name, &text, params, rendered_at);
            }
        }
    }
    if out.is_empty() {
        push_chunks(&mut out, &row.table, &row.row_key, "row", &generic(row), params, rendered_at);
    }
    out
}

/// Row key used for a URL in the `web` pseudo-table.
pub fn web_row_key(url: &str) -> String {
    content_hash(url)
}

/// Renders the text of a web snapshot as chunked `page` documents. The
/// version is not part of the id, so a newer version replaces older chunks.
pub fn render_snapshot(snapshot: &WebSnapshot, params: ChunkParams, rendered_at: i64) -> Vec<RenderedDoc> {
    let key = web_row_key(&snapshot.url);
    let text = if snapshot.text.trim().is_empty() { snapshot.url.as_str() } else { snapshot.text.as_str() };
    let mut out = Vec::new();
    push_chunks(&mut out, WEB_TABLE, &key, "page", text, params, rendered_at);
    out
}
