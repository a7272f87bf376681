//! Provenance headers and the two output encodings.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    /// SHA-256 of the canonical JSON form of the parsed command.
    pub config_sha256: String,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &'static str, seed: Option<u64>, config: &C) -> Provenance {
        let canonical = serde_json::to_vec(config).expect("command configs serialize");
        let digest = Sha256::digest(&canonical);
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Provenance { tool: "sdirand", version: env!("CARGO_PKG_VERSION"), command, seed, config_sha256 }
    }

    fn comment_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# {} {} {}", self.tool, self.version, self.command),
            format!("# config-sha256: {}", self.config_sha256),
        ];
        if let Some(seed) = self.seed {
            lines.push(format!("# seed: {seed}"));
        }
        lines
    }
}

pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes `#`-prefixed provenance and `extra` lines, then the CSV body.
pub fn write_csv(
    out: &mut dyn Write,
    prov: &Provenance,
    extra: &[String],
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> io::Result<()> {
    for line in prov.comment_lines() {
        writeln!(out, "{line}")?;
    }
    for line in extra {
        writeln!(out, "# {line}")?;
    }
    body(out)?;
    out.flush()
}

/// Pretty JSON with a `provenance` member. Objects gain the member directly;
/// anything else is wrapped as `{"provenance": .., "data": ..}`.
pub fn write_json<T: Serialize>(out: &mut dyn Write, prov: &Provenance, value: &T) -> io::Result<()> {
    let prov_value = serde_json::to_value(prov)?;
    let doc = match serde_json::to_value(value)? {
        Value::Object(mut map) => {
            let mut with = serde_json::Map::new();
            with.insert("provenance".into(), prov_value);
            with.append(&mut map);
            Value::Object(with)
        }
        other => json!({ "provenance": prov_value, "data": other }),
    };
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)?;
    out.flush()
}
