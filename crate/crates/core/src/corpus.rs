//! In-memory model of parser output and ground-truth annotations.
//!
//! Files follow the Loghub structured-log layout: an RFC-4180 CSV with a
//! header row carrying `LineId`, `Content`, `EventId` and `EventTemplate`.
//! Templates may instead come from a separate `EventId,EventTemplate` file.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One log message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub line_id: u64,
    pub content: String,
    pub parsed_event: Option<String>,
    pub truth_event: Option<String>,
}

impl LogRecord {
    pub fn new(line_id: u64, content: impl Into<String>, parsed_event: Option<String>) -> Self {
        LogRecord {
            line_id,
            content: content.into(),
            parsed_event,
            truth_event: None,
        }
    }
}

/// An event id and its raw template string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventTemplate {
    pub event_id: String,
    pub template: String,
}

/// Templates keyed by event id, kept in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateSet {
    entries: Vec<EventTemplate>,
    index: HashMap<String, usize>,
}

impl TemplateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from `(event_id, template)` pairs, rejecting an id bound
    /// to two different strings. Repeating an identical pair is fine.
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut set = TemplateSet::new();
        let mut first_rows = HashMap::new();
        for (row, (id, template)) in pairs.into_iter().enumerate() {
            set.insert_row(id.into(), template.into(), row + 1, &mut first_rows)?;
        }
        Ok(set)
    }

    fn insert_row(
        &mut self,
        event_id: String,
        template: String,
        row: usize,
        first_rows: &mut HashMap<String, usize>,
    ) -> Result<()> {
        match self.index.get(&event_id) {
            Some(&i) => {
                let existing = &self.entries[i].template;
                if *existing != template {
                    return Err(Error::TemplateConflict {
                        first: existing.clone(),
                        first_row: first_rows.get(&event_id).copied().unwrap_or(0),
                        second: template,
                        second_row: row,
                        event_id,
                    });
                }
            }
            None => {
                first_rows.insert(event_id.clone(), row);
                self.index.insert(event_id.clone(), self.entries.len());
                self.entries.push(EventTemplate { event_id, template });
            }
        }
        Ok(())
    }

    pub fn get(&self, event_id: &str) -> Option<&str> {
        self.index
            .get(event_id)
            .map(|&i| self.entries[i].template.as_str())
    }

    pub fn contains(&self, event_id: &str) -> bool {
        self.index.contains_key(event_id)
    }

    pub fn position(&self, event_id: &str) -> Option<usize> {
        self.index.get(event_id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EventTemplate> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[EventTemplate] {
        &self.entries
    }
}

impl<'a> IntoIterator for &'a TemplateSet {
    type Item = &'a EventTemplate;
    type IntoIter = std::slice::Iter<'a, EventTemplate>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// Column names used when reading structured-log and template files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub line_id: String,
    pub content: String,
    pub event_id: String,
    pub event_template: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            line_id: "LineId".into(),
            content: "Content".into(),
            event_id: "EventId".into(),
            event_template: "EventTemplate".into(),
        }
    }
}

/// Parser output (and optionally ground truth) for one log file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<LogRecord>,
    parsed_templates: TemplateSet,
    truth_templates: Option<TemplateSet>,
}

impl Corpus {
    /// Validates the record/template invariants and builds a corpus.
    pub fn new(
        records: Vec<LogRecord>,
        parsed_templates: TemplateSet,
        truth_templates: Option<TemplateSet>,
    ) -> Result<Self> {
        validate_records(Path::new("<memory>"), &records)?;
        for r in &records {
            if let Some(e) = &r.parsed_event {
                if !parsed_templates.contains(e) {
                    return Err(Error::UnknownEvent {
                        event_id: e.clone(),
                    });
                }
            }
            if let Some(e) = &r.truth_event {
                let known = truth_templates.as_ref().is_some_and(|t| t.contains(e));
                if !known {
                    return Err(Error::UnknownEvent {
                        event_id: e.clone(),
                    });
                }
            }
        }
        Ok(Corpus {
            records,
            parsed_templates,
            truth_templates,
        })
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn parsed_templates(&self) -> &TemplateSet {
        &self.parsed_templates
    }

    pub fn truth_templates(&self) -> Option<&TemplateSet> {
        self.truth_templates.as_ref()
    }

    pub fn has_ground_truth(&self) -> bool {
        self.truth_templates.is_some() && self.records.iter().all(|r| r.truth_event.is_some())
    }

    /// Template string currently assigned to `record` by the parser.
    pub fn parsed_template_of(&self, record: &LogRecord) -> Option<&str> {
        record
            .parsed_event
            .as_deref()
            .and_then(|e| self.parsed_templates.get(e))
    }

    pub fn truth_template_of(&self, record: &LogRecord) -> Option<&str> {
        let truth = self.truth_templates.as_ref()?;
        record.truth_event.as_deref().and_then(|e| truth.get(e))
    }

    pub fn into_parts(self) -> (Vec<LogRecord>, TemplateSet, Option<TemplateSet>) {
        (self.records, self.parsed_templates, self.truth_templates)
    }
}

fn validate_records(path: &Path, records: &[LogRecord]) -> Result<()> {
    let n = records.len();
    let mut seen = vec![false; n];
    for r in records {
        if r.content.trim().is_empty() {
            return Err(Error::EmptyContent {
                path: path.to_path_buf(),
                line_id: r.line_id,
            });
        }
        let slot = r.line_id as usize;
        if slot == 0 || slot > n {
            // Out of range ids show up as a gap somewhere in 1..n.
            continue;
        }
        if seen[slot - 1] {
            return Err(Error::DuplicateLineId {
                path: path.to_path_buf(),
                line_id: r.line_id,
            });
        }
        seen[slot - 1] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        // Duplicates outside 1..n are still duplicates; report those first.
        let mut ids: Vec<u64> = records.iter().map(|r| r.line_id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLineId {
                path: path.to_path_buf(),
                line_id: w[0],
            });
        }
        return Err(Error::NonContiguousLineIds {
            path: path.to_path_buf(),
            expected_max: n,
            missing: missing as u64 + 1,
        });
    }
    Ok(())
}

/// Reads a file as UTF-8 text, transparently inflating `.gz` files.
pub fn read_text(path: &Path) -> Result<String> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if path.extension().is_some_and(|ext| ext == "gz") {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        out
    } else {
        raw
    };
    String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn column(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes())
}

/// Loads a structured log whose rows carry both event ids and templates.
pub fn load_structured_log(path: &Path, columns: &ColumnMap) -> Result<Corpus> {
    let text = read_text(path)?;
    parse_structured_log(path, &text, columns, None)
}

/// Loads a structured log whose templates live in a separate file. An
/// `EventTemplate` column in the log, if present, must agree with that file.
pub fn load_structured_log_with_templates(
    path: &Path,
    templates_path: &Path,
    columns: &ColumnMap,
) -> Result<Corpus> {
    let templates = load_templates(templates_path, columns)?;
    let text = read_text(path)?;
    parse_structured_log(path, &text, columns, Some(templates))
}

/// Parses structured-log CSV text. `path` is used for diagnostics only.
pub fn parse_structured_log(
    path: &Path,
    text: &str,
    columns: &ColumnMap,
    templates: Option<TemplateSet>,
) -> Result<Corpus> {
    let mut reader = csv_reader(text);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let line_col = column(path, &headers, &columns.line_id)?;
    let content_col = column(path, &headers, &columns.content)?;
    let event_col = column(path, &headers, &columns.event_id)?;
    let template_col = match templates {
        Some(_) => headers.iter().position(|h| h == columns.event_template),
        None => Some(column(path, &headers, &columns.event_template)?),
    };

    let external = templates.is_some();
    let mut set = templates.unwrap_or_default();
    let mut first_rows = HashMap::new();
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let row_no = i + 1;
        let raw_id = row.get(line_col).unwrap_or("");
        let line_id: u64 = raw_id.trim().parse().map_err(|_| Error::InvalidLineId {
            path: path.to_path_buf(),
            row: row_no,
            value: raw_id.to_string(),
        })?;
        let content = row.get(content_col).unwrap_or("").to_string();
        let event = row.get(event_col).unwrap_or("");
        let parsed_event = (!event.is_empty()).then(|| event.to_string());
        if let (Some(e), Some(tc)) = (&parsed_event, template_col) {
            let template = row.get(tc).unwrap_or("").to_string();
            if external {
                if let Some(known) = set.get(e) {
                    if known != template {
                        return Err(Error::TemplateConflict {
                            event_id: e.clone(),
                            first: known.to_string(),
                            first_row: 0,
                            second: template,
                            second_row: row_no,
                        });
                    }
                }
            } else {
                set.insert_row(e.clone(), template, row_no, &mut first_rows)?;
            }
        }
        records.push(LogRecord {
            line_id,
            content,
            parsed_event,
            truth_event: None,
        });
    }

    validate_records(path, &records)?;
    for r in &records {
        if let Some(e) = &r.parsed_event {
            if !set.contains(e) {
                return Err(Error::UnknownEvent {
                    event_id: e.clone(),
                });
            }
        }
    }
    Ok(Corpus {
        records,
        parsed_templates: set,
        truth_templates: None,
    })
}

/// Loads an `EventId,EventTemplate` file.
pub fn load_templates(path: &Path, columns: &ColumnMap) -> Result<TemplateSet> {
    let text = read_text(path)?;
    let mut reader = csv_reader(&text);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let event_col = column(path, &headers, &columns.event_id)?;
    let template_col = column(path, &headers, &columns.event_template)?;
    let mut set = TemplateSet::new();
    let mut first_rows = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let id = row.get(event_col).unwrap_or("").to_string();
        let template = row.get(template_col).unwrap_or("").to_string();
        set.insert_row(id, template, i + 1, &mut first_rows)?;
    }
    Ok(set)
}

/// Returns `corpus` with ground-truth events and templates taken from the
/// parsed side of `truth`. Both must describe the same lines.
pub fn attach_ground_truth(corpus: &Corpus, truth: &Corpus) -> Result<Corpus> {
    if corpus.len() != truth.len() {
        return Err(Error::LengthMismatch {
            parsed: corpus.len(),
            truth: truth.len(),
        });
    }
    let mut by_line: Vec<Option<&LogRecord>> = vec![None; truth.len()];
    for r in truth.records() {
        by_line[r.line_id as usize - 1] = Some(r);
    }
    let mut records = corpus.records.clone();
    let mut sorted: Vec<&mut LogRecord> = records.iter_mut().collect();
    sorted.sort_by_key(|r| r.line_id);
    for r in sorted {
        let t = by_line[r.line_id as usize - 1].expect("line ranges are both 1..n");
        if t.content != r.content {
            return Err(Error::ContentMismatch { line_id: r.line_id });
        }
        r.truth_event = t.parsed_event.clone();
    }
    Ok(Corpus {
        records,
        parsed_templates: corpus.parsed_templates.clone(),
        truth_templates: Some(truth.parsed_templates.clone()),
    })
}

/// Writes the parsed side of `corpus` as a structured-log CSV with the
/// default Loghub header.
pub fn write_structured_log<W: Write>(corpus: &Corpus, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let cols = ColumnMap::default();
    let io = |e: csv::Error| Error::Csv {
        path: "<output>".into(),
        message: e.to_string(),
    };
    writer
        .write_record([&cols.line_id, &cols.content, &cols.event_id, &cols.event_template])
        .map_err(io)?;
    for r in &corpus.records {
        let event = r.parsed_event.as_deref().unwrap_or("");
        let template = corpus.parsed_template_of(r).unwrap_or("");
        writer
            .write_record([r.line_id.to_string().as_str(), &r.content, event, template])
            .map_err(io)?;
    }
    writer.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Writes an `EventId,EventTemplate` file in set order.
pub fn write_templates<W: Write>(templates: &TemplateSet, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Csv {
        path: "<output>".into(),
        message: e.to_string(),
    };
    writer.write_record(["EventId", "EventTemplate"]).map_err(io)?;
    for t in templates {
        writer
            .write_record([t.event_id.as_str(), t.template.as_str()])
            .map_err(io)?;
    }
    writer.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Corpus> {
        parse_structured_log(Path::new("t.csv"), text, &ColumnMap::default(), None)
    }

    const THREE_ROWS: &str = "LineId,Content,EventId,EventTemplate\n\
        1,open a,E1,open <*>\n\
        2,open b,E1,open <*>\n\
        3,close,E2,close\n";

    #[test]
    fn loads_records_and_dedups_templates() {
        let c = parse(THREE_ROWS).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.parsed_templates().len(), 2);
        assert_eq!(c.parsed_templates().get("E1"), Some("open <*>"));
        assert_eq!(c.records()[2].parsed_event.as_deref(), Some("E2"));
    }

    #[test]
    fn template_conflict_names_event_and_rows() {
        let text = "LineId,Content,EventId,EventTemplate\n1,a,E1,x <*>\n2,b,E1,y <*>\n";
        match parse(text) {
            Err(Error::TemplateConflict {
                event_id,
                first,
                second,
                first_row,
                second_row,
            }) => {
                assert_eq!(event_id, "E1");
                assert_eq!((first.as_str(), second.as_str()), ("x <*>", "y <*>"));
                assert_eq!((first_row, second_row), (1, 2));
            }
            other => panic!("expected conflict, got {other:?}"),
        }
    }

    #[test]
    fn missing_column() {
        let err = parse("LineId,Content,EventId\n1,a,E1\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn { column, .. } if column == "EventTemplate"));
    }

    #[test]
    fn duplicate_and_gapped_line_ids() {
        let dup = "LineId,Content,EventId,EventTemplate\n1,a,E1,a\n1,b,E1,a\n";
        assert!(matches!(
            parse(dup).unwrap_err(),
            Error::DuplicateLineId { line_id: 1, .. }
        ));
        let gap = "LineId,Content,EventId,EventTemplate\n1,a,E1,a\n3,b,E1,a\n";
        assert!(matches!(
            parse(gap).unwrap_err(),
            Error::NonContiguousLineIds { missing: 2, .. }
        ));
    }

    #[test]
    fn empty_content_rejected() {
        let text = "LineId,Content,EventId,EventTemplate\n1,\"  \",E1,a\n";
        assert!(matches!(
            parse(text).unwrap_err(),
            Error::EmptyContent { line_id: 1, .. }
        ));
    }

    #[test]
    fn custom_column_names() {
        let cols = ColumnMap {
            line_id: "id".into(),
            content: "msg".into(),
            event_id: "ev".into(),
            event_template: "tpl".into(),
        };
        let text = "id,msg,ev,tpl\n1,hello,A,hello\n";
        let c = parse_structured_log(Path::new("m.csv"), text, &cols, None).unwrap();
        assert_eq!(c.parsed_templates().get("A"), Some("hello"));
    }

    #[test]
    fn invalid_utf8_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        let mut bytes = b"LineId,Content\n1,ab".to_vec();
        bytes.push(0xff);
        fs::write(&p, &bytes).unwrap();
        match read_text(&p) {
            Err(Error::InvalidUtf8 { offset, .. }) => assert_eq!(offset, 19),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reads_gzip() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv.gz");
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(THREE_ROWS.as_bytes()).unwrap();
        fs::write(&p, enc.finish().unwrap()).unwrap();
        let c = load_structured_log(&p, &ColumnMap::default()).unwrap();
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn attach_truth() {
        let parsed = parse(THREE_ROWS).unwrap();
        let joined = attach_ground_truth(&parsed, &parsed).unwrap();
        assert!(joined.has_ground_truth());
        assert!(joined
            .records()
            .iter()
            .all(|r| r.parsed_event.is_some() && r.truth_event == r.parsed_event));
    }

    #[test]
    fn attach_truth_length_mismatch() {
        let parsed = parse(THREE_ROWS).unwrap();
        let short = parse("LineId,Content,EventId,EventTemplate\n1,open a,E1,open <*>\n2,open b,E1,open <*>\n")
            .unwrap();
        assert!(matches!(
            attach_ground_truth(&parsed, &short).unwrap_err(),
            Error::LengthMismatch { parsed: 3, truth: 2 }
        ));
    }

    #[test]
    fn attach_truth_content_mismatch_at_line_7() {
        let mut text = String::from("LineId,Content,EventId,EventTemplate\n");
        let mut edited = text.clone();
        for i in 1..=10 {
            text.push_str(&format!("{i},msg {i},E1,msg <*>\n"));
            let content = if i == 7 { "msg seven".to_string() } else { format!("msg {i}") };
            edited.push_str(&format!("{i},{content},E1,msg <*>\n"));
        }
        let parsed = parse(&text).unwrap();
        let truth = parse(&edited).unwrap();
        assert!(matches!(
            attach_ground_truth(&parsed, &truth).unwrap_err(),
            Error::ContentMismatch { line_id: 7 }
        ));
    }

    #[test]
    fn write_round_trip_with_quoting() {
        let text = "LineId,Content,EventId,EventTemplate\n\
            1,\"a, b\",E1,\"a, <*>\"\n\
            2,\"say \"\"hi\"\"\",E2,\"say \"\"<*>\"\"\"\n";
        let c = parse(text).unwrap();
        let mut out = Vec::new();
        write_structured_log(&c, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }
}
