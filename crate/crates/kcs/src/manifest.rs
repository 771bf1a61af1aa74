//! Run manifests: every subcommand writes one next to its primary output,
//! recording the tool version, the resolved-settings hash, the seed, and
//! content hashes of every input file. Two runs with identical manifests
//! are guaranteed byte-identical primary outputs, so the manifest carries
//! no timestamps or host details.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KcsError, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub subcommand: String,
    /// Master seed when one governed the run.
    pub seed: Option<u64>,
    /// SHA-256 of the resolved settings (config after env, seed, and flag
    /// overrides), serialized as canonical JSON.
    pub config_sha256: String,
    /// Input path -> SHA-256 of its content. Directories hash the sorted
    /// relative-path/content pairs of their files.
    pub inputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| KcsError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Hash a directory as the sorted sequence of (relative path, content
/// hash) lines, so the digest is independent of traversal order.
fn hash_dir(path: &Path) -> Result<String> {
    let mut entries = Vec::new();
    collect_files(path, path, &mut entries)?;
    entries.sort();
    let mut lines = String::new();
    for (rel, file) in entries {
        lines.push_str(&rel);
        lines.push(' ');
        lines.push_str(&hash_file(&file)?);
        lines.push('\n');
    }
    Ok(sha256_hex(lines.as_bytes()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| KcsError::io(dir, e))? {
        let entry = entry.map_err(|e| KcsError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("entry lies under root")
                .to_string_lossy()
                .into_owned();
            out.push((rel, path));
        }
    }
    Ok(())
}

impl RunManifest {
    /// `settings` must capture everything that determines the run's output
    /// besides the input files: the resolved config blocks and flags.
    pub fn new(subcommand: &str, settings: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        let canonical = serde_json::to_vec(settings)
            .map_err(|e| KcsError::Config(format!("serializing run settings: {e}")))?;
        Ok(RunManifest {
            tool: "kcs".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            schema_version: MANIFEST_SCHEMA_VERSION,
            subcommand: subcommand.into(),
            seed,
            config_sha256: sha256_hex(&canonical),
            inputs: BTreeMap::new(),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> Result<&mut Self> {
        let digest = if path.is_dir() { hash_dir(path)? } else { hash_file(path)? };
        self.inputs.insert(path.display().to_string(), digest);
        Ok(self)
    }

    /// Write the manifest next to the primary output: `<file>.manifest.json`
    /// for a file output, `<dir>/manifest.json` for a directory output.
    pub fn write_beside(&self, primary_out: &Path) -> Result<PathBuf> {
        let manifest_path = manifest_path_for(primary_out);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| KcsError::Config(format!("serializing manifest: {e}")))?;
        std::fs::write(&manifest_path, json.as_bytes())
            .map_err(|e| KcsError::io(&manifest_path, e))?;
        Ok(manifest_path)
    }
}

pub fn manifest_path_for(primary_out: &Path) -> PathBuf {
    if primary_out.is_dir() {
        primary_out.join("manifest.json")
    } else {
        let mut name = primary_out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        name.push_str(".manifest.json");
        primary_out.with_file_name(name)
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let bytes = std::fs::read(path).map_err(|e| KcsError::io(path, e))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| KcsError::Data(format!("malformed manifest {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vectors() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn identical_settings_and_inputs_give_identical_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("data.jsonl");
        std::fs::write(&input, b"{\"x\":1}\n").unwrap();
        let settings = serde_json::json!({"k": 3, "seed": 7});
        let build = || {
            let mut m = RunManifest::new("sample", &settings, Some(7)).unwrap();
            m.add_input(&input).unwrap();
            m
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn manifests_differ_when_settings_or_inputs_change() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("data.jsonl");
        std::fs::write(&input, b"one").unwrap();
        let base = {
            let mut m =
                RunManifest::new("sample", &serde_json::json!({"seed": 7}), Some(7)).unwrap();
            m.add_input(&input).unwrap();
            m
        };
        let other_settings =
            RunManifest::new("sample", &serde_json::json!({"seed": 8}), Some(8)).unwrap();
        assert_ne!(base.config_sha256, other_settings.config_sha256);

        std::fs::write(&input, b"two").unwrap();
        let mut other_input =
            RunManifest::new("sample", &serde_json::json!({"seed": 7}), Some(7)).unwrap();
        other_input.add_input(&input).unwrap();
        assert_ne!(base.inputs, other_input.inputs);
    }

    #[test]
    fn directory_inputs_hash_order_independently() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("ckpt");
        std::fs::create_dir(&ckpt).unwrap();
        std::fs::write(ckpt.join("b.bin"), b"bbb").unwrap();
        std::fs::write(ckpt.join("a.json"), b"aaa").unwrap();
        let h1 = hash_dir(&ckpt).unwrap();
        // Rewriting the same contents leaves the digest unchanged.
        std::fs::write(ckpt.join("a.json"), b"aaa").unwrap();
        assert_eq!(h1, hash_dir(&ckpt).unwrap());
        std::fs::write(ckpt.join("a.json"), b"changed").unwrap();
        assert_ne!(h1, hash_dir(&ckpt).unwrap());
    }

    #[test]
    fn manifest_lands_beside_file_or_inside_dir_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("traces.jsonl");
        std::fs::write(&out, b"").unwrap();
        let m = RunManifest::new("select", &serde_json::json!({"k": 2}), None).unwrap();
        let path = m.write_beside(&out).unwrap();
        assert_eq!(path, dir.path().join("traces.jsonl.manifest.json"));
        assert_eq!(read_manifest(&path).unwrap(), m);

        let ckpt = dir.path().join("ckpt");
        std::fs::create_dir(&ckpt).unwrap();
        let path = m.write_beside(&ckpt).unwrap();
        assert_eq!(path, ckpt.join("manifest.json"));
    }
}
