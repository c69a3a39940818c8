//! Staged output files and CSV helpers.
//!
//! Every output is written to `<path>.partial` and renamed into place only
//! when the command succeeds; dropping an uncommitted file deletes it.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pra_core::io::ExperimentConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// First 16 hex digits of the SHA-256 of the canonical config text.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.to_text().as_bytes());
    hex::encode(digest)[..16].to_string()
}

pub struct Staged {
    target: PathBuf,
    partial: PathBuf,
    writer: Option<BufWriter<File>>,
}

impl Staged {
    pub fn create(target: &Path) -> std::io::Result<Self> {
        if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut partial = target.as_os_str().to_owned();
        partial.push(".partial");
        let partial = PathBuf::from(partial);
        let writer = BufWriter::new(File::create(&partial)?);
        Ok(Self {
            target: target.to_path_buf(),
            partial,
            writer: Some(writer),
        })
    }

    pub fn writer(&mut self) -> &mut BufWriter<File> {
        self.writer.as_mut().expect("writer present until commit")
    }

    pub fn commit(mut self) -> std::io::Result<()> {
        let mut w = self.writer.take().expect("commit called once");
        w.flush()?;
        drop(w);
        fs::rename(&self.partial, &self.target)
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if self.writer.take().is_some() {
            let _ = fs::remove_file(&self.partial);
        }
    }
}

/// CSV file whose rows all start with the config hash and seed.
pub struct CsvOut {
    staged: Staged,
    hash: String,
    seed: u64,
}

impl CsvOut {
    pub fn create(
        path: &Path,
        hash: &str,
        seed: u64,
        columns: &[&str],
    ) -> Result<Self, Box<dyn std::error::Error>> {
        let mut staged = Staged::create(path)?;
        let mut header = vec!["config_hash", "seed"];
        header.extend_from_slice(columns);
        writeln!(staged.writer(), "{}", header.join(","))?;
        Ok(Self {
            staged,
            hash: hash.into(),
            seed,
        })
    }

    pub fn row<T: Serialize>(&mut self, record: T) -> Result<(), Box<dyn std::error::Error>> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.serialize((&self.hash, self.seed, record))?;
        let bytes = w.into_inner().map_err(|e| e.to_string())?;
        self.staged.writer().write_all(&bytes)?;
        Ok(())
    }

    pub fn commit(self) -> std::io::Result<()> {
        self.staged.commit()
    }
}
