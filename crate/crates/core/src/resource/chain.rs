use super::{Resource, ResourceIterator, SourceColumns, SourceError};

/// Concatenation of several sources, possibly of different kinds.
///
/// Sources yielding the same type name are treated as one logical stream by
/// the converter; each keeps its own ordinals.
pub struct Chain {
    parts: Vec<Box<dyn ResourceIterator>>,
    current: usize,
}

pub fn chain(iterators: Vec<Box<dyn ResourceIterator>>) -> Chain {
    assert!(!iterators.is_empty(), "chain needs at least one iterator");
    Chain {
        parts: iterators,
        current: 0,
    }
}

impl Iterator for Chain {
    type Item = Result<Resource, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        while let Some(part) = self.parts.get_mut(self.current) {
            match part.next() {
                Some(item) => return Some(item),
                None => self.current += 1,
            }
        }
        None
    }
}

impl ResourceIterator for Chain {
    fn reset(&mut self) -> Result<(), SourceError> {
        for part in &mut self.parts {
            part.reset()?;
        }
        self.current = 0;
        Ok(())
    }

    fn total(&self) -> Option<u64> {
        self.parts.iter().map(|p| p.total()).sum()
    }

    fn columns(&self) -> SourceColumns {
        let mut out = SourceColumns::new();
        for part in &self.parts {
            for (ty, cols) in part.columns() {
                out.entry(ty).or_default().extend(cols);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::test_support::drain;
    use crate::resource::{csv_iterator, sqlite_iterator, VecIterator};

    fn vec_source(ty: &str, n: u64) -> Box<dyn ResourceIterator> {
        Box::new(VecIterator::new(
            (0..n).map(|i| Resource::new(ty, i).with("i", i as i64)).collect(),
        ))
    }

    #[test]
    fn concatenates_in_order_and_resets() {
        let mut c = chain(vec![vec_source("A", 2), vec_source("B", 3)]);
        assert_eq!(c.total(), Some(5));
        let first = drain(&mut c);
        let types: Vec<&str> = first.iter().map(|r| r.0.as_str()).collect();
        assert_eq!(types, ["A", "A", "B", "B", "B"]);
        c.reset().unwrap();
        assert_eq!(drain(&mut c), first);
    }

    #[test]
    fn empty_part() {
        let mut c = chain(vec![vec_source("A", 0)]);
        assert!(drain(&mut c).is_empty());
        assert_eq!(c.total(), Some(0));
    }

    #[test]
    fn mixes_source_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join("x.db");
        let conn = rusqlite::Connection::open(&db).unwrap();
        conn.execute_batch("CREATE TABLE S (ID INTEGER); INSERT INTO S VALUES (1), (2);")
            .unwrap();
        let csv_dir = dir.path().join("csv");
        std::fs::create_dir(&csv_dir).unwrap();
        std::fs::write(csv_dir.join("E.csv"), "ID\n7\n").unwrap();

        let mut c = chain(vec![
            Box::new(sqlite_iterator(&db, None).unwrap()),
            Box::new(csv_iterator(&csv_dir).unwrap()),
        ]);
        assert_eq!(c.total(), Some(3));
        let rows = drain(&mut c);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].0, "E");
        assert_eq!(c.columns().len(), 2);
    }
}
