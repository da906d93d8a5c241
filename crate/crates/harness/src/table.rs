//! Versioned CSV tables: a `# schema=1` comment line, a header row, then
//! records. Floats are written with `Display`, which round-trips exactly.

use std::fs;
use std::path::Path;

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Text of a table file.
pub fn render(header: &[String], rows: &[Vec<String>]) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut write = |record: &[String]| {
        writer
            .write_record(record)
            .expect("writing to memory cannot fail");
    };
    write(header);
    for row in rows {
        write(row);
    }
    let body = writer.into_inner().expect("flushing to memory cannot fail");
    let mut out = format!("# schema={SCHEMA_VERSION}\n");
    out.push_str(std::str::from_utf8(&body).expect("fields are UTF-8"));
    out
}

pub fn write(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, render(header, rows)).map_err(|e| HarnessError::io(path, e))
}

pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn strings<const N: usize>(names: [&str; N]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// 1-based line number in the source text.
    pub line: u64,
    pub fields: Vec<String>,
}

/// A parsed table with column lookup by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub source: String,
    pub header: Vec<String>,
    pub header_line: u64,
    pub records: Vec<Record>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Table::parse(&path.display().to_string(), &text)
    }

    /// Parses table text. The schema line is optional; when present it must
    /// name a supported version.
    pub fn parse(source: &str, text: &str) -> Result<Table> {
        let perr = |line: u64, message: String| HarnessError::Parse {
            path: source.to_string(),
            line,
            message,
        };
        if let Some(first) = text.lines().next() {
            if let Some(comment) = first.strip_prefix('#') {
                let version = comment
                    .trim()
                    .strip_prefix("schema=")
                    .and_then(|v| v.trim().parse::<u32>().ok());
                match version {
                    Some(SCHEMA_VERSION) => {}
                    Some(v) => return Err(perr(1, format!("unsupported schema version {v}"))),
                    None => return Err(perr(1, format!("malformed schema line {first:?}"))),
                }
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for result in reader.records() {
            let record = result.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                perr(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push(Record {
                line,
                fields: record.iter().map(|f| f.trim().to_string()).collect(),
            });
        }
        let mut rows = rows.into_iter();
        let mut head = rows.next().ok_or_else(|| perr(1, "missing header row".into()))?;
        // the reader positions the first record before any skipped comments
        let leading_comments = text.lines().take_while(|l| l.starts_with('#')).count() as u64;
        head.line = head.line.max(leading_comments + 1);
        let records: Vec<Record> = rows.collect();
        for r in &records {
            if r.fields.len() != head.fields.len() {
                return Err(perr(
                    r.line,
                    format!("expected {} fields, found {}", head.fields.len(), r.fields.len()),
                ));
            }
        }
        Ok(Table {
            source: source.to_string(),
            header: head.fields,
            header_line: head.line,
            records,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Parse {
                path: self.source.clone(),
                line: self.header_line,
                message: format!("missing column {name:?}"),
            })
    }

    pub fn require(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.column(n)).collect()
    }

    fn parse_err(&self, record: &Record, col: usize, what: &str) -> HarnessError {
        HarnessError::Parse {
            path: self.source.clone(),
            line: record.line,
            message: format!(
                "column {:?}: expected {what}, found {:?}",
                self.header[col], record.fields[col]
            ),
        }
    }

    pub fn f64(&self, record: &Record, col: usize) -> Result<f64> {
        record.fields[col]
            .parse::<f64>()
            .map_err(|_| self.parse_err(record, col, "a number"))
    }

    /// A number that must be finite.
    pub fn finite(&self, record: &Record, col: usize) -> Result<f64> {
        let v = self.f64(record, col)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.parse_err(record, col, "a finite number"))
        }
    }

    pub fn u64(&self, record: &Record, col: usize) -> Result<u64> {
        record.fields[col]
            .parse::<u64>()
            .map_err(|_| self.parse_err(record, col, "a non-negative integer"))
    }

    pub fn text<'a>(&self, record: &'a Record, col: usize) -> &'a str {
        &record.fields[col]
    }

    pub fn error_at(&self, record: &Record, message: impl Into<String>) -> HarnessError {
        HarnessError::Parse {
            path: self.source.clone(),
            line: record.line,
            message: message.into(),
        }
    }
}
