//! JSON / JSONL helpers and all-or-nothing output staging.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn jsonl_bytes<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).expect("in-memory serialization");
        buf.push(b'\n');
    }
    buf
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = serde_json::to_vec_pretty(value).expect("in-memory serialization");
    buf.push(b'\n');
    buf
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex_lower(&Sha256::digest(bytes))
}

pub(crate) fn hex_lower(bytes: &[u8]) -> String {
    use std::fmt::Write as _;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

// Temporaries default to 0600; outputs get ordinary file permissions.
fn temp_builder() -> tempfile::Builder<'static, 'static> {
    #[allow(unused_mut)]
    let mut b = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        b.permissions(fs::Permissions::from_mode(0o644));
    }
    b
}

/// Collects output files in temporaries next to their destinations and
/// renames them into place only on [`Staging::commit`]. Dropping an
/// uncommitted staging area removes every temporary, so a failed command
/// leaves no partial outputs behind.
#[derive(Default)]
pub struct Staging {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staging {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_bytes(&mut self, dest: impl Into<PathBuf>, bytes: &[u8]) -> Result<()> {
        let dest = dest.into();
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let tmp = temp_builder().tempfile_in(&dir).map_err(|e| Error::io(&dir, e))?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            w.write_all(bytes).map_err(|e| Error::io(&dest, e))?;
            w.flush().map_err(|e| Error::io(&dest, e))?;
        }
        self.files.push((tmp, dest));
        Ok(())
    }

    pub fn add_json<T: Serialize>(&mut self, dest: impl Into<PathBuf>, value: &T) -> Result<()> {
        self.add_bytes(dest, &json_bytes(value))
    }

    pub fn add_jsonl<T: Serialize>(&mut self, dest: impl Into<PathBuf>, items: &[T]) -> Result<()> {
        self.add_bytes(dest, &jsonl_bytes(items))
    }

    pub fn destinations(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(_, p)| p.as_path())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (tmp, dest) in self.files {
            tmp.persist(&dest).map_err(|e| Error::io(&dest, e.error))?;
            written.push(dest);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_staging_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Staging::new();
            s.add_bytes(dir.path().join("a.txt"), b"x").unwrap();
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_writes_all() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Staging::new();
        s.add_jsonl(dir.path().join("a.jsonl"), &[1, 2]).unwrap();
        s.add_json(dir.path().join("sub/b.json"), &"hi").unwrap();
        s.commit().unwrap();
        let v: Vec<u32> = read_jsonl(&dir.path().join("a.jsonl")).unwrap();
        assert_eq!(v, vec![1, 2]);
        let b: String = read_json(&dir.path().join("sub/b.json")).unwrap();
        assert_eq!(b, "hi");
    }

    #[test]
    fn jsonl_parse_error_carries_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        fs::write(&p, "1\n\n{oops\n").unwrap();
        match read_jsonl::<serde_json::Value>(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
