//! Line-oriented JSON reading and writing. All pipeline data files are
//! JSONL: one record per line, blank lines ignored, encoding UTF-8.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: io::Error },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

/// A record that failed to parse in lenient mode, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: usize,
    pub message: String,
}

/// Reads every record, failing on the first malformed line.
pub fn read_all<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, JsonlError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for item in iter_file(path)? {
        let (_, record) = item?;
        out.push(record);
    }
    Ok(out)
}

/// Reads every well-formed record, collecting malformed lines instead of
/// failing. IO errors still abort.
pub fn read_lenient<T: DeserializeOwned>(
    path: impl AsRef<Path>,
) -> Result<(Vec<T>, Vec<SkippedLine>), JsonlError> {
    let path = path.as_ref();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for item in iter_file(path)? {
        match item {
            Ok((_, record)) => records.push(record),
            Err(JsonlError::Parse { line, message, .. }) => {
                skipped.push(SkippedLine { line, message })
            }
            Err(other) => return Err(other),
        }
    }
    Ok((records, skipped))
}

/// Streaming iterator over `(line_number, record)` pairs.
pub fn iter_file<T: DeserializeOwned>(
    path: impl AsRef<Path>,
) -> Result<impl Iterator<Item = Result<(usize, T), JsonlError>>, JsonlError> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|source| JsonlError::Open { path: path.clone(), source })?;
    let reader = BufReader::new(file);
    Ok(LineIter { lines: reader.lines().enumerate(), path, _marker: std::marker::PhantomData })
}

struct LineIter<T> {
    lines: std::iter::Enumerate<io::Lines<BufReader<File>>>,
    path: PathBuf,
    _marker: std::marker::PhantomData<fn() -> T>,
}

impl<T: DeserializeOwned> Iterator for LineIter<T> {
    type Item = Result<(usize, T), JsonlError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let (idx, line) = self.lines.next()?;
            let line = match line {
                Ok(l) => l,
                Err(source) => {
                    return Some(Err(JsonlError::Io { path: self.path.clone(), source }))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let number = idx + 1;
            return Some(match serde_json::from_str(&line) {
                Ok(record) => Ok((number, record)),
                Err(e) => Err(JsonlError::Parse {
                    path: self.path.clone(),
                    line: number,
                    message: e.to_string(),
                }),
            });
        }
    }
}

/// Writes records one per line, creating parent directories as needed.
pub fn write_all<T: Serialize>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = T>,
) -> Result<usize, JsonlError> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|source| JsonlError::Io { path: path.to_path_buf(), source })?;
        }
    }
    let file =
        File::create(path).map_err(|source| JsonlError::Open { path: path.to_path_buf(), source })?;
    let mut writer = BufWriter::new(file);
    let mut count = 0;
    for record in records {
        let line = serde_json::to_string(&record).map_err(|e| JsonlError::Parse {
            path: path.to_path_buf(),
            line: count + 1,
            message: e.to_string(),
        })?;
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(|source| JsonlError::Io { path: path.to_path_buf(), source })?;
        count += 1;
    }
    writer.flush().map_err(|source| JsonlError::Io { path: path.to_path_buf(), source })?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        id: u32,
        text: String,
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let rows = vec![Row { id: 1, text: "a".into() }, Row { id: 2, text: "b".into() }];
        assert_eq!(write_all(&path, &rows).unwrap(), 2);
        let back: Vec<Row> = read_all(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn blank_lines_skipped_strict_parse_fails_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        std::fs::write(&path, "{\"id\":1,\"text\":\"a\"}\n\nnot json\n").unwrap();
        let err = read_all::<Row>(&path).unwrap_err();
        match err {
            JsonlError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn lenient_mode_collects_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        std::fs::write(&path, "{\"id\":1,\"text\":\"a\"}\nbroken\n{\"id\":3,\"text\":\"c\"}\n")
            .unwrap();
        let (rows, skipped) = read_lenient::<Row>(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].line, 2);
    }

    #[test]
    fn missing_file_is_open_error() {
        assert!(matches!(
            read_all::<Row>("/nonexistent/nowhere.jsonl"),
            Err(JsonlError::Open { .. })
        ));
    }
}
