//! CSV rendering and all-or-nothing file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::CliError;

pub const GENERATOR: &str = concat!("cohortmn ", env!("CARGO_PKG_VERSION"));

/// A CSV file under construction: `# key=value` metadata lines, a header
/// row, then records. Floats use Rust's shortest round-trip formatting.
pub struct CsvDoc {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvDoc {
    pub fn new(schema: &str, meta: &[(&str, String)], header: &[&str]) -> Self {
        let mut prefix = Vec::new();
        writeln!(prefix, "# schema={schema}").unwrap();
        writeln!(prefix, "# generator={GENERATOR}").unwrap();
        for (key, value) in meta {
            writeln!(prefix, "# {key}={value}").unwrap();
        }
        let mut writer = csv::Writer::from_writer(prefix);
        writer.write_record(header).unwrap();
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        // Writing into a Vec cannot fail.
        self.writer.write_record(fields).unwrap();
    }

    pub fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory writer")
    }
}

/// Writes every file or none: each is staged next to its destination and
/// renamed into place only after all staging succeeded.
pub fn write_all(files: Vec<(PathBuf, Vec<u8>)>) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&path, e))?;
        tmp.write_all(&bytes).map_err(|e| CliError::io(&path, e))?;
        tmp.as_file()
            .sync_all()
            .map_err(|e| CliError::io(&path, e))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(&path)
            .map_err(|e| CliError::io(&path, e.error))?;
    }
    Ok(())
}

/// `dir/name.csv` → `dir/name<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut doc = CsvDoc::new("t/1", &[("n0", "5".into())], &["a", "b"]);
        doc.row([1.5.to_string(), "x".into()]);
        let text = String::from_utf8(doc.finish()).unwrap();
        assert_eq!(
            text,
            format!("# schema=t/1\n# generator={GENERATOR}\n# n0=5\na,b\n1.5,x\n")
        );
    }

    #[test]
    fn sibling_names() {
        assert_eq!(
            sibling(Path::new("out/m.csv"), "_cov.csv"),
            PathBuf::from("out/m_cov.csv")
        );
        assert_eq!(sibling(Path::new("m"), ".txt"), PathBuf::from("m.txt"));
    }

    #[test]
    fn writes_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        write_all(vec![(a.clone(), b"x".to_vec())]).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), b"x");
        // Second target in a missing directory: nothing is written.
        let b = dir.path().join("b.csv");
        let bad = dir.path().join("missing/c.csv");
        assert!(write_all(vec![(b.clone(), b"y".to_vec()), (bad, b"z".to_vec())]).is_err());
        assert!(!b.exists());
    }
}
