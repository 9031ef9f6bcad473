use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{Resource, ResourceIterator, SourceColumns, SourceError};
use crate::value::Value;

/// Strict RFC-4180 record reader. Quotes inside unquoted fields, stray
/// characters after a closing quote and unterminated quoted fields are errors.
struct RecordReader<R> {
    inner: R,
    line: u64,
    buf: String,
}

#[derive(Clone, Copy, PartialEq)]
enum State {
    FieldStart,
    Unquoted,
    Quoted,
    QuoteInQuoted,
}

impl<R: BufRead> RecordReader<R> {
    fn new(inner: R) -> Self {
        RecordReader {
            inner,
            line: 0,
            buf: String::new(),
        }
    }

    /// Returns the next record with the line number it starts on.
    fn next_record(&mut self) -> Result<Option<(u64, Vec<String>)>, (u64, String)> {
        let mut fields = Vec::new();
        let mut field = String::new();
        let mut state = State::FieldStart;
        let mut start_line = 0;

        loop {
            self.buf.clear();
            let n = self
                .inner
                .read_line(&mut self.buf)
                .map_err(|e| (self.line + 1, e.to_string()))?;
            if n == 0 {
                return match state {
                    State::FieldStart if fields.is_empty() && field.is_empty() => Ok(None),
                    State::Quoted => Err((start_line, "unterminated quoted field".to_string())),
                    _ => {
                        fields.push(field);
                        Ok(Some((start_line, fields)))
                    }
                };
            }
            self.line += 1;
            let line = self.line;
            if state != State::Quoted {
                start_line = line;
            }

            let mut chars = self.buf.chars().peekable();
            while let Some(c) = chars.next() {
                let at_eol = c == '\n' || (c == '\r' && chars.peek() == Some(&'\n'));
                if at_eol && state != State::Quoted {
                    if state == State::FieldStart && fields.is_empty() {
                        // blank line
                        break;
                    }
                    fields.push(field);
                    return Ok(Some((start_line, fields)));
                }
                match state {
                    State::FieldStart => match c {
                        '"' => state = State::Quoted,
                        ',' => fields.push(std::mem::take(&mut field)),
                        _ => {
                            field.push(c);
                            state = State::Unquoted;
                        }
                    },
                    State::Unquoted => match c {
                        ',' => {
                            fields.push(std::mem::take(&mut field));
                            state = State::FieldStart;
                        }
                        '"' => return Err((line, "quote inside unquoted field".to_string())),
                        _ => field.push(c),
                    },
                    State::Quoted => match c {
                        '"' => state = State::QuoteInQuoted,
                        _ => field.push(c),
                    },
                    State::QuoteInQuoted => match c {
                        '"' => {
                            field.push('"');
                            state = State::Quoted;
                        }
                        ',' => {
                            fields.push(std::mem::take(&mut field));
                            state = State::FieldStart;
                        }
                        _ => {
                            return Err((
                                line,
                                format!("unexpected character `{c}` after closing quote"),
                            ))
                        }
                    },
                }
            }
        }
    }
}

#[derive(Debug)]
struct CsvFile {
    path: PathBuf,
    type_name: Arc<str>,
    columns: Vec<Arc<str>>,
    rows: u64,
}

/// Reads every `<Type>.csv` file in a directory (in file-name order). All
/// values are `Text`; there is no type inference.
pub struct CsvIterator {
    files: Vec<CsvFile>,
    current: usize,
    reader: Option<RecordReader<BufReader<File>>>,
    ordinal: u64,
}

pub fn csv_iterator(dir_path: impl AsRef<Path>) -> Result<CsvIterator, SourceError> {
    CsvIterator::open(dir_path.as_ref())
}

fn open_reader(path: &Path) -> Result<RecordReader<BufReader<File>>, SourceError> {
    let file = File::open(path).map_err(|source| SourceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(RecordReader::new(BufReader::new(file)))
}

fn malformed(path: &Path, (line, message): (u64, String)) -> SourceError {
    SourceError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    }
}

impl CsvIterator {
    fn open(dir: &Path) -> Result<Self, SourceError> {
        let io_err = |source| SourceError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io_err)? {
            let path = entry.map_err(io_err)?.path();
            if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
                paths.push(path);
            }
        }
        paths.sort();

        let mut files = Vec::with_capacity(paths.len());
        for path in paths {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .filter(|s| !s.is_empty())
                .ok_or_else(|| SourceError::Other(format!("bad file name {}", path.display())))?
                .to_string();
            // Pre-scan: validates the whole file and counts its rows.
            let mut reader = open_reader(&path)?;
            let columns: Vec<Arc<str>> = match reader.next_record().map_err(|e| malformed(&path, e))? {
                Some((_, header)) => header.into_iter().map(Arc::from).collect(),
                None => Vec::new(),
            };
            let mut seen = BTreeSet::new();
            for c in &columns {
                if !seen.insert(c.clone()) {
                    return Err(malformed(&path, (1, format!("duplicate column `{c}`"))));
                }
            }
            let mut rows = 0;
            while let Some((line, record)) = reader.next_record().map_err(|e| malformed(&path, e))? {
                if record.len() != columns.len() {
                    return Err(malformed(
                        &path,
                        (
                            line,
                            format!("expected {} fields, found {}", columns.len(), record.len()),
                        ),
                    ));
                }
                rows += 1;
            }
            files.push(CsvFile {
                path,
                type_name: Arc::from(stem.as_str()),
                columns,
                rows,
            });
        }
        Ok(CsvIterator {
            files,
            current: 0,
            reader: None,
            ordinal: 0,
        })
    }

    fn step(&mut self) -> Result<Option<Resource>, SourceError> {
        while self.current < self.files.len() {
            let file = &self.files[self.current];
            if self.reader.is_none() {
                let mut reader = open_reader(&file.path)?;
                // header
                reader.next_record().map_err(|e| malformed(&file.path, e))?;
                self.reader = Some(reader);
                self.ordinal = 0;
            }
            let reader = self.reader.as_mut().expect("reader");
            match reader.next_record().map_err(|e| malformed(&file.path, e))? {
                Some((line, record)) => {
                    if record.len() != file.columns.len() {
                        return Err(malformed(
                            &file.path,
                            (line, format!("expected {} fields, found {}", file.columns.len(), record.len())),
                        ));
                    }
                    let r = Resource::from_row(
                        file.type_name.clone(),
                        self.ordinal,
                        &file.columns,
                        record.into_iter().map(Value::Text),
                    );
                    self.ordinal += 1;
                    return Ok(Some(r));
                }
                None => {
                    self.reader = None;
                    self.current += 1;
                }
            }
        }
        Ok(None)
    }
}

impl Iterator for CsvIterator {
    type Item = Result<Resource, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.step() {
            Ok(r) => r.map(Ok),
            Err(e) => {
                self.current = self.files.len();
                self.reader = None;
                Some(Err(e))
            }
        }
    }
}

impl ResourceIterator for CsvIterator {
    fn reset(&mut self) -> Result<(), SourceError> {
        self.current = 0;
        self.reader = None;
        self.ordinal = 0;
        Ok(())
    }

    fn total(&self) -> Option<u64> {
        Some(self.files.iter().map(|f| f.rows).sum())
    }

    fn columns(&self) -> SourceColumns {
        self.files
            .iter()
            .map(|f| {
                (
                    f.type_name.to_string(),
                    f.columns.iter().map(|c| c.to_string()).collect(),
                )
            })
            .collect()
    }
}
