//! Plain-text embedding files and the dataset manifest.
//!
//! An embedding file holds an optional `<count> <dim>` header line followed by
//! one `word x1 … xd` line per word. The manifest is TOML:
//!
//! ```toml
//! name = "web-archive"
//!
//! [[timesteps]]
//! label = "2000"
//! path = "vectors/2000.txt"
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbedError, TemporalEmbeddings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub timesteps: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub path: PathBuf,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, EmbedError> {
        let text = fs::read_to_string(path).map_err(|source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| EmbedError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if manifest.timesteps.is_empty() {
            return Err(EmbedError::Manifest {
                path: path.to_path_buf(),
                message: "no timesteps listed".into(),
            });
        }
        Ok(manifest)
    }
}

/// What ingest kept and dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub name: Option<String>,
    /// Per timestep: (label, words in the file, words dropped by the intersection).
    pub timesteps: Vec<(String, usize, usize)>,
}

/// Reads one embedding file into `(word, vector)` rows and the dimension.
pub fn read_embedding_file(path: &Path) -> Result<(Vec<(String, Vec<f64>)>, usize), EmbedError> {
    let io_err = |source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let reader = BufReader::new(file);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut declared_count: Option<usize> = None;
    let mut seen = std::collections::HashSet::new();

    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = n + 1;
        let mut tokens = line.split_whitespace();
        let Some(word) = tokens.next() else {
            continue;
        };
        let rest: Vec<&str> = tokens.collect();
        if n == 0 && rest.len() == 1 {
            if let (Ok(count), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                declared_count = Some(count);
                dim = Some(d);
                continue;
            }
        }
        let mut values = Vec::with_capacity(rest.len());
        for tok in &rest {
            let v: f64 = tok.parse().map_err(|_| EmbedError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("cannot parse {tok:?} as a float"),
            })?;
            if !v.is_finite() {
                return Err(EmbedError::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("non-finite value {tok:?}"),
                });
            }
            values.push(v);
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(EmbedError::Dimension {
                    path: path.to_path_buf(),
                    line: lineno,
                    expected: d,
                    found: values.len(),
                })
            }
            _ => {}
        }
        if values.is_empty() {
            return Err(EmbedError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("word {word:?} has no vector"),
            });
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(EmbedError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("zero vector for {word:?}"),
            });
        }
        if !seen.insert(word.to_string()) {
            return Err(EmbedError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("duplicate word {word:?}"),
            });
        }
        rows.push((word.to_string(), values));
    }
    if let Some(count) = declared_count {
        if count != rows.len() {
            return Err(EmbedError::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("header declares {count} words, file has {}", rows.len()),
            });
        }
    }
    let dim = dim.unwrap_or(0);
    Ok((rows, dim))
}

/// Writes `count dim` then one line per word, floats with 17 significant digits.
pub fn write_embedding_file<'a, I>(path: &Path, dim: usize, rows: I) -> Result<(), EmbedError>
where
    I: ExactSizeIterator<Item = (&'a str, &'a [f64])>,
{
    let io_err = |source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{} {}", rows.len(), dim).map_err(io_err)?;
    for (word, v) in rows {
        w.write_all(word.as_bytes()).map_err(io_err)?;
        for x in v {
            write!(w, " {x:.16e}").map_err(io_err)?;
        }
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Loads every file of a manifest and keeps the words present at all timesteps.
pub fn ingest(manifest_path: &Path) -> Result<(TemporalEmbeddings, IngestReport), EmbedError> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut tables: Vec<HashMap<String, Vec<f64>>> = Vec::with_capacity(manifest.timesteps.len());
    let mut dim: Option<(usize, PathBuf)> = None;
    for entry in &manifest.timesteps {
        let path = base.join(&entry.path);
        let (rows, d) = read_embedding_file(&path)?;
        if rows.is_empty() {
            return Err(EmbedError::Parse {
                path,
                line: 0,
                message: "no word vectors".into(),
            });
        }
        match &dim {
            None => dim = Some((d, path.clone())),
            Some((expected, first)) if *expected != d => {
                return Err(EmbedError::Invalid(format!(
                    "{}: dimension {d} differs from dimension {expected} of {}",
                    path.display(),
                    first.display()
                )))
            }
            _ => {}
        }
        tables.push(rows.into_iter().collect());
    }
    let dim = dim.map(|(d, _)| d).unwrap_or(0);

    let mut common: BTreeSet<&String> = tables[0].keys().collect();
    for table in &tables[1..] {
        common.retain(|w| table.contains_key(*w));
    }
    if common.is_empty() {
        return Err(EmbedError::EmptyIntersection);
    }

    let vocab: Vec<String> = common.iter().map(|w| (*w).clone()).collect();
    let mut vectors = Vec::with_capacity(vocab.len() * tables.len() * dim);
    for w in &vocab {
        for table in &tables {
            vectors.extend_from_slice(&table[w]);
        }
    }
    let report = IngestReport {
        name: manifest.name.clone(),
        timesteps: manifest
            .timesteps
            .iter()
            .zip(&tables)
            .map(|(e, t)| (e.label.clone(), t.len(), t.len() - vocab.len()))
            .collect(),
    };
    let labels = manifest.timesteps.into_iter().map(|e| e.label).collect();
    let emb = TemporalEmbeddings::from_parts(vocab, labels, dim, vectors)?;
    Ok((emb, report))
}

/// Writes one file per timestep plus `manifest.toml` into `dir`; returns the manifest path.
pub fn export(
    emb: &TemporalEmbeddings,
    dir: &Path,
    name: Option<&str>,
) -> Result<PathBuf, EmbedError> {
    fs::create_dir_all(dir).map_err(|source| EmbedError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::with_capacity(emb.num_timesteps());
    for (t, label) in emb.labels().iter().enumerate() {
        let file_name = format!("{t:03}_{}.txt", sanitize(label));
        let rows = (0..emb.num_words()).map(|w| (emb.word(w), emb.vector(w, t)));
        write_embedding_file(&dir.join(&file_name), emb.dim(), rows)?;
        entries.push(ManifestEntry {
            label: label.clone(),
            path: PathBuf::from(file_name),
        });
    }
    let manifest = Manifest {
        name: name.map(str::to_string),
        timesteps: entries,
    };
    let path = dir.join("manifest.toml");
    let text = toml::to_string(&manifest).map_err(|e| EmbedError::Manifest {
        path: path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&path, text).map_err(|source| EmbedError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
