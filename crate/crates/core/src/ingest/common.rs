//! Shared parsing plumbing: the error type, line filtering, field helpers.

use std::path::Path;

/// Any failure while reading, parsing, or aligning the versioned formats.
#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    /// Structurally malformed content at a specific line.
    #[error("{path}:{line}: {message}")]
    Schema { path: String, line: usize, message: String },
    /// Shapes disagree: grid rows vs sentences, logit dims vs paragraph, ...
    #[error("{path}:{line}: dimension mismatch: {message}")]
    Dimension { path: String, line: usize, message: String },
    /// Cross-file disagreement (predictions vs dataset, etc.); no single
    /// line is at fault.
    #[error("alignment: {message}")]
    Alignment { message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn schema(path: &str, line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Schema { path: path.to_string(), line, message: message.into() }
}

pub(crate) fn dimension(path: &str, line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Dimension { path: path.to_string(), line, message: message.into() }
}

pub(crate) fn read_file(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// Content lines of a document: (1-based line number, text), with blank and
/// `#`-comment lines dropped, and the leading version line checked against
/// `version`.
pub(crate) fn content_lines<'a>(
    text: &'a str,
    path: &str,
    version: &str,
) -> Result<Vec<(usize, &'a str)>, IngestError> {
    let mut out = Vec::new();
    // Split on '\n' rather than str::lines(), which would silently swallow
    // the '\r' of a CRLF ending before it could be rejected.
    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        if raw.contains('\r') {
            return Err(schema(path, line_no, "carriage return found; files are LF-only"));
        }
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        out.push((line_no, raw));
    }
    match out.first() {
        Some(&(_, first)) if first == version => {}
        Some(&(line, first)) => {
            return Err(schema(
                path,
                line,
                format!("expected version line {version:?}, found {first:?}"),
            ));
        }
        None => return Err(schema(path, 1, format!("empty document; expected {version:?}"))),
    }
    out.remove(0);
    Ok(out)
}

/// Require an exact field count.
pub(crate) fn fields<'a>(
    line: &'a str,
    expected: usize,
    path: &str,
    line_no: usize,
    what: &str,
) -> Result<Vec<&'a str>, IngestError> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() != expected {
        return Err(schema(
            path,
            line_no,
            format!("{what} takes {expected} tab-separated fields, found {}", parts.len()),
        ));
    }
    Ok(parts)
}

pub(crate) fn parse_f64(field: &str, path: &str, line: usize, what: &str) -> Result<f64, IngestError> {
    let v: f64 = field
        .parse()
        .map_err(|_| schema(path, line, format!("{what} must be a number, found {field:?}")))?;
    if !v.is_finite() {
        return Err(schema(path, line, format!("{what} must be finite, found {field:?}")));
    }
    Ok(v)
}

pub(crate) fn parse_u64(field: &str, path: &str, line: usize, what: &str) -> Result<u64, IngestError> {
    field
        .parse()
        .map_err(|_| schema(path, line, format!("{what} must be a non-negative integer, found {field:?}")))
}

pub(crate) fn parse_index(
    field: &str,
    path: &str,
    line: usize,
    what: &str,
) -> Result<usize, IngestError> {
    field
        .parse()
        .map_err(|_| schema(path, line, format!("{what} must be a non-negative integer, found {field:?}")))
}

/// Canonical float rendering: Rust's shortest round-trip representation.
pub(crate) fn fmt_f64(v: f64) -> String {
    debug_assert!(v.is_finite(), "writers only emit finite numbers");
    format!("{v:?}")
}
