use std::collections::BTreeMap;
use std::fmt::Write as _;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Everything needed to rerun a report. Wall time is only recorded on request, so exact-mode
/// reports stay byte-identical across runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub threads: usize,
    pub size_cap: Option<usize>,
    pub input_hashes: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, threads: usize, size_cap: Option<usize>) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            args,
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            size_cap,
            input_hashes: BTreeMap::new(),
            wall_time_s: None,
        }
    }

    pub fn record_input(&mut self, path: &str, bytes: &[u8]) {
        self.input_hashes.insert(path.to_string(), sha256_hex(bytes));
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Serialize)]
struct Report<'a> {
    manifest: &'a RunManifest,
    result: &'a Value,
}

pub fn render(manifest: &RunManifest, result: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&Report { manifest, result }).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut out = String::from("key,value\n");
            let m = serde_json::to_value(manifest).expect("manifest serializes");
            flatten("manifest", &m, &mut out);
            flatten("result", result, &mut out);
            out
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&format!("{prefix}.{k}"), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::String(s) => {
            let _ = writeln!(out, "{prefix},\"{}\"", s.replace('"', "\"\""));
        }
        other => {
            let _ = writeln!(out, "{prefix},{other}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn csv_flattens_nested_values() {
        let m = RunManifest::new("x", vec![], 1, None);
        let out = render(&m, &serde_json::json!({"a": [1, {"b": "q\"r"}], "c": null}), Format::Csv);
        assert!(out.contains("result.a.0,1\n"));
        assert!(out.contains("result.a.1.b,\"q\"\"r\"\n"));
        assert!(out.contains("result.c,null\n"));
        assert!(!out.contains("wall_time"));
    }
}
