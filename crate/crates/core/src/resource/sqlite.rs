use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};

use super::{Resource, ResourceIterator, SourceColumns, SourceError};
use crate::value::Value;

const CHUNK_ROWS: i64 = 8192;

#[derive(Debug)]
struct Table {
    name: Arc<str>,
    columns: Vec<Arc<str>>,
    rows: u64,
    has_rowid: bool,
}

/// Streams every row of the selected tables, one table after another.
///
/// Rows are read in chunks keyed on `rowid` (or by offset for `WITHOUT ROWID`
/// tables), so no statement stays open between calls and a reset is just a
/// rewind of the cursor.
pub struct SqliteIterator {
    path: PathBuf,
    conn: Connection,
    tables: Vec<Table>,
    table: usize,
    buffer: VecDeque<Resource>,
    last_rowid: i64,
    offset: i64,
    ordinal: u64,
    table_done: bool,
}

/// Opens `db_path` read-only. With `tables = None` every user table is read in
/// name order; otherwise exactly the named tables, in the given order.
pub fn sqlite_iterator(
    db_path: impl AsRef<Path>,
    tables: Option<&[&str]>,
) -> Result<SqliteIterator, SourceError> {
    SqliteIterator::open(db_path.as_ref(), tables)
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

impl SqliteIterator {
    fn open(path: &Path, tables: Option<&[&str]>) -> Result<Self, SourceError> {
        if !path.is_file() {
            return Err(SourceError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            });
        }
        let err = |source| SourceError::Sqlite {
            path: path.to_path_buf(),
            source,
        };
        let conn = Connection::open_with_flags(
            path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )
        .map_err(err)?;

        let available: Vec<String> = {
            let mut stmt = conn
                .prepare(
                    "SELECT name FROM sqlite_master WHERE type = 'table' \
                     AND name NOT LIKE 'sqlite_%' ORDER BY name",
                )
                .map_err(err)?;
            let names = stmt
                .query_map([], |row| row.get::<_, String>(0))
                .map_err(err)?
                .collect::<Result<_, _>>()
                .map_err(err)?;
            names
        };

        let selected: Vec<String> = match tables {
            None => available,
            Some(names) => {
                let mut out = Vec::with_capacity(names.len());
                for name in names {
                    if !available.iter().any(|a| a == name) {
                        return Err(SourceError::MissingTable {
                            path: path.to_path_buf(),
                            table: name.to_string(),
                        });
                    }
                    out.push(name.to_string());
                }
                out
            }
        };

        let mut infos = Vec::with_capacity(selected.len());
        for name in selected {
            let quoted = quote_ident(&name);
            let columns: Vec<Arc<str>> = {
                let mut stmt = conn
                    .prepare(&format!("PRAGMA table_info({quoted})"))
                    .map_err(err)?;
                let cols = stmt
                    .query_map([], |row| row.get::<_, String>(1))
                    .map_err(err)?
                    .map(|c| c.map(Arc::from))
                    .collect::<Result<_, _>>()
                    .map_err(err)?;
                cols
            };
            let rows: i64 = conn
                .query_row(&format!("SELECT COUNT(*) FROM {quoted}"), [], |r| r.get(0))
                .map_err(err)?;
            let has_rowid = conn
                .prepare(&format!("SELECT _rowid_ FROM {quoted} LIMIT 0"))
                .is_ok();
            infos.push(Table {
                name: Arc::from(name.as_str()),
                columns,
                rows: rows as u64,
                has_rowid,
            });
        }

        Ok(SqliteIterator {
            path: path.to_path_buf(),
            conn,
            tables: infos,
            table: 0,
            buffer: VecDeque::new(),
            last_rowid: i64::MIN,
            offset: 0,
            ordinal: 0,
            table_done: false,
        })
    }

    fn fetch_chunk(&mut self) -> Result<(), SourceError> {
        let table = &self.tables[self.table];
        let cols = table
            .columns
            .iter()
            .map(|c| quote_ident(c))
            .collect::<Vec<_>>()
            .join(", ");
        let quoted = quote_ident(&table.name);
        let path = &self.path;
        let err = |source| SourceError::Sqlite {
            path: path.clone(),
            source,
        };

        let skip = usize::from(table.has_rowid);
        let sql = if table.has_rowid {
            format!(
                "SELECT _rowid_, {cols} FROM {quoted} WHERE _rowid_ > ?1 ORDER BY _rowid_ LIMIT ?2"
            )
        } else {
            format!("SELECT {cols} FROM {quoted} LIMIT ?2 OFFSET ?1")
        };
        let cursor = if table.has_rowid {
            self.last_rowid
        } else {
            self.offset
        };
        let mut stmt = self.conn.prepare_cached(&sql).map_err(err)?;
        let mut rows = stmt.query([cursor, CHUNK_ROWS]).map_err(err)?;
        let mut fetched = 0i64;
        while let Some(row) = rows.next().map_err(err)? {
            if table.has_rowid {
                self.last_rowid = row.get(0).map_err(err)?;
            }
            let mut values = Vec::with_capacity(table.columns.len());
            for (i, column) in table.columns.iter().enumerate() {
                let value = match row.get_ref(i + skip).map_err(err)? {
                    ValueRef::Null => Value::Null,
                    ValueRef::Integer(v) => Value::Int(v),
                    ValueRef::Real(v) => Value::Float(v),
                    ValueRef::Text(bytes) => match std::str::from_utf8(bytes) {
                        Ok(s) => Value::Text(s.to_string()),
                        Err(_) => {
                            return Err(SourceError::Malformed {
                                path: path.clone(),
                                line: self.ordinal + 1,
                                message: format!(
                                    "table `{}` column `{column}` holds invalid UTF-8",
                                    table.name
                                ),
                            })
                        }
                    },
                    ValueRef::Blob(_) => {
                        return Err(SourceError::Malformed {
                            path: path.clone(),
                            line: self.ordinal + 1,
                            message: format!(
                                "table `{}` column `{column}` holds a BLOB, which has no attribute type",
                                table.name
                            ),
                        })
                    }
                };
                values.push(value);
            }
            self.buffer.push_back(Resource::from_row(
                table.name.clone(),
                self.ordinal,
                &table.columns,
                values,
            ));
            self.ordinal += 1;
            fetched += 1;
        }
        self.offset += fetched;
        if fetched < CHUNK_ROWS {
            self.table_done = true;
        }
        Ok(())
    }

    fn advance_table(&mut self) {
        self.table += 1;
        self.last_rowid = i64::MIN;
        self.offset = 0;
        self.ordinal = 0;
        self.table_done = false;
    }
}

impl Iterator for SqliteIterator {
    type Item = Result<Resource, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(r) = self.buffer.pop_front() {
                return Some(Ok(r));
            }
            if self.table >= self.tables.len() {
                return None;
            }
            if self.table_done {
                self.advance_table();
                continue;
            }
            if let Err(e) = self.fetch_chunk() {
                // Stop after the first error rather than retrying the same chunk.
                self.table = self.tables.len();
                return Some(Err(e));
            }
        }
    }
}

impl ResourceIterator for SqliteIterator {
    fn reset(&mut self) -> Result<(), SourceError> {
        self.buffer.clear();
        self.table = 0;
        self.last_rowid = i64::MIN;
        self.offset = 0;
        self.ordinal = 0;
        self.table_done = false;
        Ok(())
    }

    fn total(&self) -> Option<u64> {
        Some(self.tables.iter().map(|t| t.rows).sum())
    }

    fn columns(&self) -> SourceColumns {
        self.tables
            .iter()
            .map(|t| {
                (
                    t.name.to_string(),
                    t.columns.iter().map(|c| c.to_string()).collect(),
                )
            })
            .collect()
    }
}
