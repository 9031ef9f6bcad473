use std::io::Write;

use super::{Commit, CommitSink, SinkError};
use crate::graph::{canonical_form, PropertyGraph};

/// Writes the canonical form of the final graph; ignores the commit stream.
pub struct JsonSink<W: Write + Send> {
    out: W,
}

impl<W: Write + Send> JsonSink<W> {
    pub fn new(out: W) -> Self {
        JsonSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write + Send> CommitSink for JsonSink<W> {
    fn on_commit(&mut self, _: &Commit<'_>, _: &PropertyGraph) -> Result<(), SinkError> {
        Ok(())
    }

    fn finish(&mut self, graph: &PropertyGraph) -> Result<(), SinkError> {
        self.out.write_all(canonical_form(graph).as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}
