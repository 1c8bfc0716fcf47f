//! Run manifests: every artifact records which tool, config, and seed
//! produced it.
//!
//! JSON outputs embed the manifest under a `manifest` key next to the
//! payload; CSV outputs carry it as `#`-prefixed comment lines before
//! the header row. Wall time is informational and excluded from any
//! determinism comparison.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_path: String,
    /// SHA-256 of the raw config file bytes.
    pub config_sha256: String,
    pub seed: u64,
    /// Additional input artifacts (dataset files etc.).
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_time_ms: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_path: &str, config_bytes: &[u8], seed: u64) -> Self {
        RunManifest {
            tool: "semiscat".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_path: config_path.into(),
            config_sha256: sha256_hex(config_bytes),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_time_ms: 0,
        }
    }

    pub fn finish(&mut self, started: Instant) {
        self.wall_time_ms = started.elapsed().as_millis() as u64;
    }

    /// `# key: value` comment block for CSV artifacts.
    pub fn csv_comment(&self) -> String {
        let mut s = String::new();
        let mut push = |k: &str, v: &str| {
            s.push_str("# ");
            s.push_str(k);
            s.push_str(": ");
            s.push_str(v);
            s.push('\n');
        };
        push("tool", &self.tool);
        push("version", &self.version);
        push("subcommand", &self.subcommand);
        push("config", &self.config_path);
        push("config_sha256", &self.config_sha256);
        push("seed", &self.seed.to_string());
        for i in &self.inputs {
            push("input", i);
        }
        for o in &self.outputs {
            push("output", o);
        }
        push("wall_time_ms", &self.wall_time_ms.to_string());
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        use std::fmt::Write;
        write!(s, "{b:02x}").expect("hex into string");
    }
    s
}
