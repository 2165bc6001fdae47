use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// An input file read once, with its content digest.
pub struct Input {
    pub role: &'static str,
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

impl Input {
    pub fn read(role: &'static str, path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self {
            role,
            path: path.to_path_buf(),
            bytes,
        })
    }

    pub fn text(&self) -> Result<&str> {
        std::str::from_utf8(&self.bytes)
            .with_context(|| format!("{} is not UTF-8", self.path.display()))
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(&self.bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `# units=… estimator=…` line opening every numeric CSV.
pub fn csv_header(units: &str, estimator: &str) -> String {
    format!("# units={units} estimator={estimator}\n")
}

/// The same declaration as a JSON object for JSON artifacts.
pub fn json_header(units: &str, estimator: &str) -> Value {
    json!({ "units": units, "estimator": estimator })
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes(value: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s.into_bytes()
}

/// Artifacts staged in memory and committed together with the manifest.
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self { files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Writes every artifact and then the manifest, each by temp-file rename.
    pub fn commit(
        self,
        dir: &Path,
        subcommand: &str,
        config: Value,
        inputs: &[&Input],
        seed: u64,
    ) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            write_atomic(&path, bytes)?;
            written.push(path);
        }
        let mut digests = Map::new();
        for input in inputs {
            digests.insert(
                input.role.to_string(),
                json!({ "path": input.path.display().to_string(), "sha256": input.sha256() }),
            );
        }
        let manifest = json!({
            "subcommand": subcommand,
            "config": config,
            "inputs": digests,
            "seed": seed,
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            "outputs": self.names(),
        });
        let path = dir.join(MANIFEST);
        write_atomic(&path, &json_bytes(&manifest))?;
        written.push(path);
        Ok(written)
    }
}

impl Default for Artifacts {
    fn default() -> Self {
        Self::new()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        let input = Input {
            role: "log",
            path: PathBuf::from("x"),
            bytes: Vec::new(),
        };
        assert_eq!(
            input.sha256(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn commit_writes_manifest_last() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new();
        a.add("a.csv", b"1\n".to_vec());
        let written = a.commit(dir.path(), "estimate", json!({}), &[], 3).unwrap();
        assert_eq!(written.last().unwrap().file_name().unwrap(), MANIFEST);
        let m: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(m["outputs"], json!(["a.csv"]));
        assert_eq!(m["seed"], json!(3));
    }
}
