//! MQM error spans to token labels.
//!
//! Input rows are tab-separated with a header:
//!
//! ```text
//! system  doc  seg_id  source  target  category  severity
//! ```
//!
//! Error spans are marked inline in `target` as `<v>…</v>`. Offsets are in
//! Unicode scalar values of the marker-free target. Rows that mark spans in
//! the source are skipped.
//!
//! Labeling: tokens overlapping a merged span are MASK, except the last one,
//! which is BAD. Everything else is GOOD. Severity and category are kept but
//! never change labels.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorers::LabeledExample;

const OPEN: &str = "<v>";
const CLOSE: &str = "</v>";
const COLUMNS: [&str; 7] = ["system", "doc", "seg_id", "source", "target", "category", "severity"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TokenLabel {
    Good,
    Bad,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSpan {
    pub start: usize,
    pub end: usize,
    pub severity: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MqmRecord {
    pub system: String,
    pub doc: String,
    pub seg_id: String,
    pub source: String,
    pub target_raw: String,
    pub target_clean: String,
    pub spans: Vec<ErrorSpan>,
}

impl MqmRecord {
    pub fn char_len(&self) -> usize {
        self.target_clean.chars().count()
    }

    /// Span ranges merged into sorted, disjoint, non-touching intervals.
    pub fn merged_spans(&self) -> Vec<(usize, usize)> {
        merge_spans(&self.spans.iter().map(|s| (s.start, s.end)).collect::<Vec<_>>())
    }
}

fn is_no_error(severity: &str) -> bool {
    let s = severity.trim().to_ascii_lowercase();
    s == "no-error" || s == "no error" || s.is_empty()
}

/// Strips `<v>…</v>` markers, returning the clean text and the marked ranges.
fn strip_markers(raw: &str, line: usize) -> Result<(String, Vec<(usize, usize)>)> {
    let mut clean = String::with_capacity(raw.len());
    let mut chars = 0usize;
    let mut open: Option<usize> = None;
    let mut spans = Vec::new();
    let mut rest = raw;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix(OPEN) {
            if open.is_some() {
                return Err(Error::Parse { line, msg: "nested <v> marker".into() });
            }
            open = Some(chars);
            rest = r;
        } else if let Some(r) = rest.strip_prefix(CLOSE) {
            let start = open
                .take()
                .ok_or_else(|| Error::Parse { line, msg: "</v> without matching <v>".into() })?;
            spans.push((start, chars));
            rest = r;
        } else {
            let c = rest.chars().next().expect("non-empty");
            clean.push(c);
            chars += 1;
            rest = &rest[c.len_utf8()..];
        }
    }
    if open.is_some() {
        return Err(Error::Parse { line, msg: "unclosed <v> marker".into() });
    }
    Ok((clean, spans))
}

/// Parses one data row. `line` is the 1-based line number used in errors.
pub fn parse_mqm(row: &str, line: usize) -> Result<MqmRecord> {
    let cols: Vec<&str> = row.split('\t').collect();
    if cols.len() != COLUMNS.len() {
        return Err(Error::Parse {
            line,
            msg: format!("expected {} columns, found {}", COLUMNS.len(), cols.len()),
        });
    }
    let [system, doc, seg_id, source, target, category, severity] = cols[..] else {
        unreachable!()
    };
    if source.contains(OPEN) || source.contains(CLOSE) {
        return Err(Error::SourceSpan { line });
    }
    let (target_clean, ranges) = strip_markers(target, line)?;
    let spans = if is_no_error(severity) {
        Vec::new()
    } else {
        ranges
            .into_iter()
            .filter(|(s, e)| e > s)
            .map(|(start, end)| ErrorSpan {
                start,
                end,
                severity: severity.to_string(),
                category: category.to_string(),
            })
            .collect()
    };
    Ok(MqmRecord {
        system: system.to_string(),
        doc: doc.to_string(),
        seg_id: seg_id.to_string(),
        source: source.to_string(),
        target_raw: target.to_string(),
        target_clean,
        spans,
    })
}

/// Parses a whole TSV file (header included). Source-side rows are skipped
/// with a warning; any other malformed row is an error.
pub fn parse_mqm_file<R: BufRead>(reader: R) -> Result<Vec<MqmRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
        let line = line.trim_end_matches('\r');
        if i == 0 {
            let header: Vec<&str> = line.split('\t').map(str::trim).collect();
            if header != COLUMNS {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header {}", COLUMNS.join(",")),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match parse_mqm(line, line_no) {
            Ok(r) => records.push(r),
            Err(Error::SourceSpan { line }) => {
                log::warn!("line {line}: skipping row with a source-side error span");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(records)
}

/// Folds rows of the same `(system, doc, seg_id)` into one record holding
/// every span. Order follows first appearance.
pub fn group_by_segment(rows: Vec<MqmRecord>) -> Result<Vec<MqmRecord>> {
    let mut index: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    let mut out: Vec<MqmRecord> = Vec::new();
    for row in rows {
        let key = (row.system.clone(), row.doc.clone(), row.seg_id.clone());
        match index.get(&key) {
            Some(&i) => {
                if out[i].target_clean != row.target_clean {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("segment {:?} has differing targets", key),
                    });
                }
                out[i].spans.extend(row.spans);
            }
            None => {
                index.insert(key, out.len());
                out.push(row);
            }
        }
    }
    Ok(out)
}

/// Merges overlapping or touching ranges; output is sorted.
pub fn merge_spans(spans: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<(usize, usize)> = spans.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(sorted.len());
    for (s, e) in sorted {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Labels tokens given their character offsets into `target_clean`.
pub fn label_tokens(record: &MqmRecord, token_offsets: &[(usize, usize)]) -> Result<Vec<TokenLabel>> {
    let len = record.char_len();
    if let Some(&(start, end)) = token_offsets.iter().find(|(s, e)| s > e || *e > len) {
        return Err(Error::OffsetOutOfBounds { start, end, len });
    }
    let mut labels = vec![TokenLabel::Good; token_offsets.len()];
    let mut last_tokens = Vec::new();
    for (a, b) in record.merged_spans() {
        let inside: Vec<usize> = token_offsets
            .iter()
            .enumerate()
            .filter(|(_, &(s, e))| s < b && a < e)
            .map(|(i, _)| i)
            .collect();
        for &i in &inside {
            labels[i] = TokenLabel::Mask;
        }
        if let Some(&last) = inside.last() {
            last_tokens.push(last);
        }
    }
    for i in last_tokens {
        labels[i] = TokenLabel::Bad;
    }
    Ok(labels)
}

/// Whitespace tokenizer that further cuts each word into pieces of at most
/// `chunk` characters (`chunk == 0` keeps whole words). Returns tokens with
/// their character offsets.
pub fn tokenize(text: &str, chunk: usize) -> Vec<(String, (usize, usize))> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut word_start = 0;
    let flush = |word: &mut String, start: usize, out: &mut Vec<(String, (usize, usize))>| {
        if word.is_empty() {
            return;
        }
        let chars: Vec<char> = word.chars().collect();
        let size = if chunk == 0 { chars.len() } else { chunk };
        for (k, piece) in chars.chunks(size).enumerate() {
            let s = start + k * size;
            out.push((piece.iter().collect(), (s, s + piece.len())));
        }
        word.clear();
    };
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            flush(&mut word, word_start, &mut out);
        } else {
            if word.is_empty() {
                word_start = i;
            }
            word.push(c);
        }
    }
    flush(&mut word, word_start, &mut out);
    out
}

/// Tokenizes and labels one (grouped) record.
pub fn annotate(record: &MqmRecord, chunk: usize) -> Result<LabeledExample> {
    let target = tokenize(&record.target_clean, chunk);
    let offsets: Vec<(usize, usize)> = target.iter().map(|(_, o)| *o).collect();
    let labels = label_tokens(record, &offsets)?;
    LabeledExample::new(
        tokenize(&record.source, chunk).into_iter().map(|(t, _)| t).collect(),
        target.into_iter().map(|(t, _)| t).collect(),
        labels,
    )
}

/// Writes one JSON object per example:
/// `{"source_tokens": [...], "target_tokens": [...], "labels": ["GOOD", ...]}`.
pub fn export_labeled<W: Write>(mut writer: W, examples: &[LabeledExample]) -> Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut writer, ex)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<labeled output>", e))?;
    }
    Ok(())
}

pub fn read_labeled<R: BufRead>(reader: R) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: LabeledExample = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        if ex.labels.len() != ex.target_tokens.len() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "labels and target_tokens differ in length".into(),
            });
        }
        out.push(ex);
    }
    Ok(out)
}

pub fn write_labeled_file(path: &Path, examples: &[LabeledExample]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    export_labeled(&mut w, examples)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_labeled_file(path: &Path) -> Result<Vec<LabeledExample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled(std::io::BufReader::new(file))
}

/// Counts of (GOOD, BAD, MASK) labels.
pub fn label_histogram(examples: &[LabeledExample]) -> (usize, usize, usize) {
    examples
        .iter()
        .flat_map(|e| &e.labels)
        .fold((0, 0, 0), |(g, b, m), l| match l {
            TokenLabel::Good => (g + 1, b, m),
            TokenLabel::Bad => (g, b + 1, m),
            TokenLabel::Mask => (g, b, m + 1),
        })
}
