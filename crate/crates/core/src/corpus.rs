//! Benchmark corpus on disk:
//!
//! ```text
//! corpus/<program>/program.mil     correct version
//! corpus/<program>/suite.json      test suite (expected outputs of the correct version)
//! corpus/<program>/faults/<id>.mil faulty version
//! corpus/<program>/faults/<id>.json optional FaultSpec; otherwise the faulty
//!                                  lines come from a line diff
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::profile::TestSuite;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub operator: String,
    pub original: String,
    pub mutated: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub program: String,
    pub faulty_lines: Vec<u32>,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
}

#[derive(Debug, Clone)]
pub struct FaultVersion {
    pub id: String,
    pub source: String,
    pub fault: FaultSpec,
}

#[derive(Debug, Clone)]
pub struct CorpusProgram {
    pub name: String,
    pub source: String,
    pub suite: TestSuite,
    pub versions: Vec<FaultVersion>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: faulty version is identical to the original")]
    NoDifference { path: PathBuf },
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    out.sort();
    Ok(out)
}

/// Lines of `faulty` that differ from `original`. Equal-length files compare
/// line by line; otherwise the differing middle after trimming the common
/// prefix and suffix is reported, and a pure deletion reports the lines
/// around the gap (faults of omission).
pub fn diff_lines(original: &str, faulty: &str) -> Vec<u32> {
    let a: Vec<&str> = original.lines().collect();
    let b: Vec<&str> = faulty.lines().collect();
    if a.len() == b.len() {
        return (0..a.len()).filter(|&i| a[i] != b[i]).map(|i| i as u32 + 1).collect();
    }
    let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let max_suffix = a.len().min(b.len()) - prefix;
    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take(max_suffix)
        .take_while(|(x, y)| x == y)
        .count();
    let (start, end) = (prefix, b.len() - suffix);
    if start < end {
        (start..end).map(|i| i as u32 + 1).collect()
    } else {
        // Deletion: candidates are the neighbours of the gap.
        let mut v = Vec::new();
        if start > 0 {
            v.push(start as u32);
        }
        if start < b.len() {
            v.push(start as u32 + 1);
        }
        v
    }
}

/// Loads one program directory.
pub fn load_program(dir: &Path) -> Result<CorpusProgram, CorpusError> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let source = read(&dir.join("program.mil"))?;
    let suite_path = dir.join("suite.json");
    let suite = TestSuite::from_json(&read(&suite_path)?).map_err(|source| CorpusError::Json {
        path: suite_path.clone(),
        source,
    })?;
    let mut versions = Vec::new();
    let faults = dir.join("faults");
    if faults.is_dir() {
        for path in sorted_entries(&faults)? {
            if path.extension().is_none_or(|e| e != "mil") {
                continue;
            }
            let id = path.file_stem().unwrap().to_string_lossy().into_owned();
            let fsrc = read(&path)?;
            let meta = path.with_extension("json");
            let fault = if meta.exists() {
                serde_json::from_str(&read(&meta)?).map_err(|source| CorpusError::Json { path: meta, source })?
            } else {
                let lines = diff_lines(&source, &fsrc);
                if lines.is_empty() {
                    return Err(CorpusError::NoDifference { path });
                }
                FaultSpec {
                    program: name.clone(),
                    faulty_lines: lines,
                    description: String::new(),
                    mutation: None,
                }
            };
            versions.push(FaultVersion { id, source: fsrc, fault });
        }
    }
    Ok(CorpusProgram {
        name,
        source,
        suite,
        versions,
    })
}

/// Loads every subdirectory of `root` that contains a `program.mil`, in name
/// order.
pub fn load_corpus(root: &Path) -> Result<Vec<CorpusProgram>, CorpusError> {
    sorted_entries(root)?
        .into_iter()
        .filter(|p| p.join("program.mil").is_file())
        .map(|p| load_program(&p))
        .collect()
}
