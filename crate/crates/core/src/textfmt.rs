//! Line-oriented helpers shared by the model file readers and writers.

use std::io::BufRead;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unexpected end of file while reading {0}")]
    Truncated(String),
    #[error("read error at line {0}: {1}")]
    Io(usize, String),
}

pub(crate) struct LineReader<R: BufRead> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> LineReader<R> {
    pub fn new(reader: R) -> Self {
        LineReader {
            inner: reader.lines(),
            line: 0,
        }
    }

    pub fn next_line(&mut self, what: &str) -> Result<String, FormatError> {
        match self.inner.next() {
            Some(Ok(l)) => {
                self.line += 1;
                Ok(l)
            }
            Some(Err(e)) => Err(FormatError::Io(self.line + 1, e.to_string())),
            None => Err(FormatError::Truncated(what.to_string())),
        }
    }

    pub fn at_end(&mut self) -> Result<bool, FormatError> {
        match self.inner.next() {
            None => Ok(true),
            Some(Ok(_)) => {
                self.line += 1;
                Ok(false)
            }
            Some(Err(e)) => Err(FormatError::Io(self.line + 1, e.to_string())),
        }
    }

    pub fn error(&self, message: impl Into<String>) -> FormatError {
        FormatError::Line {
            line: self.line,
            message: message.into(),
        }
    }

    /// Reads a line that must start with `tag` and returns the remaining
    /// tab-separated fields.
    pub fn tagged(&mut self, tag: &str) -> Result<Vec<String>, FormatError> {
        let line = self.next_line(tag)?;
        let mut fields = line.split('\t');
        if fields.next() != Some(tag) {
            return Err(self.error(format!("expected a {tag:?} line, found {line:?}")));
        }
        Ok(fields.map(str::to_owned).collect())
    }

    /// Parses `key<TAB>value<TAB>key<TAB>value...` and checks the keys.
    pub fn key_values(&mut self, keys: &[&str]) -> Result<Vec<String>, FormatError> {
        let line = self.next_line("header")?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 * keys.len() {
            return Err(self.error(format!(
                "expected {} header fields, found {}",
                2 * keys.len(),
                fields.len()
            )));
        }
        let mut values = Vec::with_capacity(keys.len());
        for (pair, key) in fields.chunks(2).zip(keys) {
            if pair[0] != *key {
                return Err(self.error(format!("expected header key {key:?}, found {:?}", pair[0])));
            }
            values.push(pair[1].to_string());
        }
        Ok(values)
    }

    pub fn parse<T: std::str::FromStr>(&self, field: &str, what: &str) -> Result<T, FormatError> {
        field.parse().map_err(|_| self.error(format!("bad {what}: {field:?}")))
    }
}

/// Names stored in model files must fit on one tab-separated line.
pub(crate) fn check_name(name: &str) -> Result<(), String> {
    if name.is_empty() || name.contains(['\t', '\n', '\r']) {
        Err(format!(
            "name {name:?} cannot be stored (empty or contains tab/newline)"
        ))
    } else {
        Ok(())
    }
}
