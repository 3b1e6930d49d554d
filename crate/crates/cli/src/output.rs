use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Provenance;
use crate::error::CliError;

const LOCK_NAME: &str = ".gunopt.lock";

/// Output directory held exclusively through a lock file for the lifetime of the value.
pub struct OutputDir {
    root: PathBuf,
    provenance: Provenance,
}

impl OutputDir {
    pub fn acquire(root: &Path, provenance: Provenance) -> Result<OutputDir, CliError> {
        fs::create_dir_all(root)?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Config(format!(
                    "{} is locked by another run (remove {} if stale)",
                    root.display(),
                    lock.display()
                )));
            }
            Err(e) => return Err(e.into()),
        }
        Ok(OutputDir {
            root: root.to_path_buf(),
            provenance,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Pretty JSON of `value` with `config_hash` and `seed` added at the top level.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut v = serde_json::to_value(value)?;
        if let Some(o) = v.as_object_mut() {
            o.insert("config_hash".into(), self.provenance.config_hash.clone().into());
            o.insert("seed".into(), self.provenance.seed.into());
        }
        let path = self.path(name);
        fs::write(&path, serde_json::to_string_pretty(&v)? + "\n")?;
        Ok(path)
    }

    /// CSV with a provenance comment line, a column line, and the rows.
    pub fn write_csv(&self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
        let mut s = format!("# {}\n{}\n", self.provenance.header(), columns.join(","));
        for r in rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        let path = self.path(name);
        fs::write(&path, s)?;
        Ok(path)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, text)?;
        Ok(path)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_NAME));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            config_hash: "abc".into(),
            seed: 3,
        }
    }

    #[test]
    fn one_writer_per_directory() {
        let dir = tempfile::tempdir().unwrap();
        let a = OutputDir::acquire(dir.path(), prov()).unwrap();
        assert!(matches!(OutputDir::acquire(dir.path(), prov()), Err(CliError::Config(_))));
        drop(a);
        OutputDir::acquire(dir.path(), prov()).unwrap();
    }

    #[test]
    fn files_carry_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::acquire(dir.path(), prov()).unwrap();
        let p = out.write_csv("t.csv", &["a", "b"], &[vec![1.0, 2.5]]).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "# config_hash=abc seed=3\na,b\n1e0,2.5e0\n");
        let p = out.write_json("t.json", &serde_json::json!({"x": 1})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["config_hash"], "abc");
        assert_eq!(v["seed"], 3);
    }
}
