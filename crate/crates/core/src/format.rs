//! `QAD1` model files.
//!
//! A UTF-8 text file. The first line is the magic `QAD1`. Every following
//! non-empty line that does not start with `#` is a record: a key followed by
//! zero or more tab-separated fields. Keys may repeat (e.g. one `tok` record
//! per vocabulary entry). Two records are mandatory:
//!
//! ```text
//! QAD1
//! kind  ngram
//! version  1
//! ```
//!
//! Everything else is kind-specific and documented on the model type.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

pub const MAGIC: &str = "QAD1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelFile {
    pub records: Vec<(String, Vec<String>)>,
}

impl ModelFile {
    pub fn new(kind: &str) -> Self {
        let mut file = ModelFile::default();
        file.push("kind", [kind]);
        file.push("version", [VERSION]);
        file
    }

    pub fn push<I, T>(&mut self, key: &str, fields: I)
    where
        I: IntoIterator<Item = T>,
        T: ToString,
    {
        self.records
            .push((key.to_string(), fields.into_iter().map(|f| f.to_string()).collect()));
    }

    pub fn kind(&self) -> Option<&str> {
        self.first("kind").and_then(|f| f.first()).map(String::as_str)
    }

    pub fn first(&self, key: &str) -> Option<&[String]> {
        self.records
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, f)| f.as_slice())
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a [String]> + 'a {
        self.records
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, f)| f.as_slice())
    }

    /// Parses the single field of a mandatory scalar record.
    pub fn scalar<T: FromStr>(&self, key: &str) -> Result<T> {
        let fields = self
            .first(key)
            .ok_or_else(|| Error::format(format!("missing `{key}`")))?;
        match fields {
            [v] => v
                .parse()
                .map_err(|_| Error::format(format!("bad value for `{key}`: {v}"))),
            _ => Err(Error::format(format!("`{key}` expects one field"))),
        }
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        match self.kind() {
            Some(k) if k == kind => {}
            other => {
                return Err(Error::format(format!(
                    "expected kind `{kind}`, found {other:?}"
                )))
            }
        }
        let version: u32 = self.scalar("version")?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported version {version}")));
        }
        Ok(())
    }

    pub fn push_vocab(&mut self, vocab: &Vocabulary) {
        self.push("vocab_size", [vocab.len()]);
        for (id, tok) in vocab.tokens().iter().enumerate() {
            self.push("tok", [id.to_string(), tok.clone()]);
        }
    }

    pub fn read_vocab(&self) -> Result<Vocabulary> {
        let size: usize = self.scalar("vocab_size")?;
        let mut tokens = Vec::with_capacity(size);
        for (i, fields) in self.all("tok").enumerate() {
            match fields {
                [id, tok] if id.parse::<usize>().ok() == Some(i) => tokens.push(tok.clone()),
                _ => return Err(Error::format(format!("bad `tok` record {i}"))),
            }
        }
        if tokens.len() != size {
            return Err(Error::format("vocab_size does not match `tok` records"));
        }
        Vocabulary::try_from(tokens)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        for (key, fields) in &self.records {
            out.push_str(key);
            for f in fields {
                let _ = write!(out, "\t{f}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(MAGIC) {
            return Err(Error::format("missing QAD1 header"));
        }
        let mut file = ModelFile::default();
        for line in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let key = parts.next().unwrap_or_default().to_string();
            file.records.push((key, parts.map(str::to_string).collect()));
        }
        if file.kind().is_none() {
            return Err(Error::format("missing `kind`"));
        }
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelFile::parse(&text)
    }
}

/// Parses every field of a record, naming the record on failure.
pub(crate) fn parse_fields<T: FromStr>(key: &str, fields: &[String]) -> Result<Vec<T>> {
    fields
        .iter()
        .map(|f| {
            f.parse()
                .map_err(|_| Error::format(format!("bad field {f:?} in `{key}`")))
        })
        .collect()
}
