//! JSON and CSV writers. Both start with the same provenance record:
//! library version, seed and a SHA-256 of the effective configuration.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl Meta {
    /// Hashes the parsed arguments together with the bytes of every input file.
    pub fn new(args: &impl Serialize, seed: Option<u64>, files: &[(String, Vec<u8>)]) -> Self {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(args).unwrap_or_default());
        for (name, bytes) in files {
            h.update(name.as_bytes());
            h.update([0u8]);
            h.update(bytes);
        }
        Meta {
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_hash: hex::encode(h.finalize()),
        }
    }

    pub fn csv_header(&self) -> String {
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# endodemand {} seed={} config_sha256={}\n",
            self.version, seed, self.config_hash
        )
    }
}

pub fn json_document(meta: &Meta, result: impl Serialize) -> Result<String, CliError> {
    let result = serde_json::to_value(result)
        .map_err(|e| CliError::Input(format!("cannot serialize result: {e}")))?;
    let doc: Value = json!({ "meta": meta, "result": result });
    let mut text = serde_json::to_string_pretty(&doc).expect("values serialize");
    text.push('\n');
    Ok(text)
}

/// CSV table preceded by the `#` provenance line.
pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(meta: &Meta, columns: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(meta.csv_header().into_bytes());
        writer.write_record(columns).expect("in-memory write");
        Csv { writer }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.writer.write_record(cells).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("cells are UTF-8")
    }
}

/// Shortest representation that round-trips.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}
