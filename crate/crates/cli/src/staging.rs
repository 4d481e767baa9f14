//! Write-then-rename output staging. Nothing lands in the output directory
//! unless every artifact of a command was produced.

use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

use crate::CliError;

pub struct Staging {
    tmp: TempDir,
    out: PathBuf,
    names: Vec<String>,
}

impl Staging {
    /// The output directory must already exist.
    pub fn new(out: &Path) -> Result<Self, CliError> {
        if !out.is_dir() {
            return Err(CliError::MissingOutput(out.to_path_buf()));
        }
        let tmp = tempfile::Builder::new().prefix(".dtnlab-").tempdir_in(out)?;
        Ok(Self {
            tmp,
            out: out.to_path_buf(),
            names: Vec::new(),
        })
    }

    /// Temporary location for `name`; the file is moved on [`Staging::commit`].
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.tmp.path().join(name)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, contents)?;
        Ok(p)
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        for name in &self.names {
            if !self.tmp.path().join(name).exists() {
                return Err(CliError::Incomplete(name.clone()));
            }
        }
        let mut done = Vec::with_capacity(self.names.len());
        for name in &self.names {
            let dest = self.out.join(name);
            fs::rename(self.tmp.path().join(name), &dest)?;
            done.push(dest);
        }
        Ok(done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_lands_without_commit() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Staging::new(dir.path()).unwrap();
            s.write("a.txt", b"x").unwrap();
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_moves_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Staging::new(dir.path()).unwrap();
        s.write("a.txt", b"x").unwrap();
        s.write("b.txt", b"y").unwrap();
        s.commit().unwrap();
        let mut names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["a.txt", "b.txt"]);
    }

    #[test]
    fn missing_directory_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Staging::new(&dir.path().join("nope")),
            Err(CliError::MissingOutput(_))
        ));
    }
}
