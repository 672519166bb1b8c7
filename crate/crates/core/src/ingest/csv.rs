use std::collections::HashSet;

use super::IngestError;

/// Column names the store keeps for itself.
pub(crate) const RESERVED_COLUMNS: &[&str] = &["_row_key", "_row_hash", "_ingested_at"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvRecord {
    /// 1-based physical line where the record starts.
    pub line: u64,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCsv {
    pub columns: Vec<String>,
    pub records: Vec<CsvRecord>,
}

/// Parses a UTF-8, RFC 4180 CSV file with a header row.
///
/// A leading BOM is ignored. Ragged rows, unterminated quotes, invalid UTF-8
/// and bad headers are rejected with the offending line number.
pub fn parse_csv(bytes: &[u8]) -> Result<ParsedCsv, IngestError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    check_quotes(bytes)?;

    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(bytes);

    let header = reader.byte_headers().map_err(|e| csv_error(&e, 1))?.clone();
    let mut columns = Vec::with_capacity(header.len());
    for field in header.iter() {
        let name = std::str::from_utf8(field)
            .map_err(|_| IngestError::MalformedCsv { line: 1, message: "header is not UTF-8".into() })?
            .trim()
            .to_owned();
        columns.push(name);
    }
    validate_header(&columns)?;

    let mut records = Vec::new();
    for result in reader.byte_records() {
        let record = result.map_err(|e| csv_error(&e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let values = record
            .iter()
            .map(|f| {
                std::str::from_utf8(f)
                    .map(str::to_owned)
                    .map_err(|_| IngestError::MalformedCsv { line, message: "field is not valid UTF-8".into() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        records.push(CsvRecord { line, values });
    }
    Ok(ParsedCsv { columns, records })
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("row has {len} fields, header has {expected_len}")
        }
        _ => e.to_string(),
    };
    IngestError::MalformedCsv { line, message }
}

fn validate_header(columns: &[String]) -> Result<(), IngestError> {
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Err(IngestError::MalformedCsv { line: 1, message: "missing header row".into() });
    }
    let mut seen = HashSet::new();
    for c in columns {
        if c.is_empty() {
            return Err(IngestError::MalformedCsv { line: 1, message: "empty column name".into() });
        }
        if RESERVED_COLUMNS.contains(&c.as_str()) {
            return Err(IngestError::MalformedCsv { line: 1, message: format!("column name {c:?} is reserved") });
        }
        if !seen.insert(c.as_str()) {
            return Err(IngestError::MalformedCsv { line: 1, message: format!("duplicate column {c:?}") });
        }
    }
    Ok(())
}

/// The csv reader silently closes a quote left open at end of input; catch it.
fn check_quotes(bytes: &[u8]) -> Result<(), IngestError> {
    let mut in_quotes = false;
    let mut line: u64 = 1;
    let mut opened_at = 1;
    for &b in bytes {
        match b {
            b'"' => {
                in_quotes = !in_quotes;
                if in_quotes {
                    opened_at = line;
                }
            }
            b'\n' => line += 1,
            _ => {}
        }
    }
    if in_quotes {
        return Err(IngestError::MalformedCsv { line: opened_at, message: "unterminated quoted field".into() });
    }
    Ok(())
}
