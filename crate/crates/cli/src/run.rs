use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use semshift::embedstore::TemporalEmbeddings;

use crate::config::ExperimentConfig;

/// One experiment's output directory.
pub struct RunDir {
    root: PathBuf,
    log: File,
}

impl RunDir {
    /// Creates the directory and persists the resolved config.
    pub fn create(config: &ExperimentConfig, command: &str) -> Result<Self> {
        let root = config.out_dir()?.to_path_buf();
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        let text = toml::to_string(config).context("serializing config")?;
        fs::write(root.join("config.toml"), format!("# semshift {command}\n{text}"))
            .context("writing config.toml")?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(root.join("run.log"))
            .context("opening run.log")?;
        Ok(Self { root, log })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Prints to stderr and appends to `run.log`.
    pub fn note(&mut self, msg: &str) {
        eprintln!("{msg}");
        let _ = writeln!(self.log, "{msg}");
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn jsonl(&self, name: &str) -> Result<JsonLines> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(JsonLines {
            out: BufWriter::new(file),
        })
    }

    pub fn write_fingerprint(&self, emb: &TemporalEmbeddings) -> Result<String> {
        let fp = fingerprint(emb);
        fs::write(self.path("dataset.sha256"), format!("{fp}\n")).context("writing fingerprint")?;
        Ok(fp)
    }
}

pub struct JsonLines {
    out: BufWriter<File>,
}

impl JsonLines {
    pub fn push<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// SHA-256 over labels, words and the exact bits of every vector.
pub fn fingerprint(emb: &TemporalEmbeddings) -> String {
    let mut h = Sha256::new();
    h.update((emb.dim() as u64).to_le_bytes());
    for l in emb.labels() {
        h.update(l.as_bytes());
        h.update([0u8]);
    }
    for w in 0..emb.num_words() {
        h.update(emb.word(w).as_bytes());
        h.update([0u8]);
        for t in 0..emb.num_timesteps() {
            for v in emb.vector(w, t) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}
