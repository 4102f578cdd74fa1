//! JSON run reports. Reports carry no timestamps or paths outside the
//! configuration, so equal inputs give byte-identical files.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::failure::Failure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Fields shared by every report.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub master_seed: u64,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_sha256: Option<String>,
    pub rng: &'static str,
}

impl Meta {
    pub fn new(command: &'static str, cfg: &RunConfig) -> Self {
        Meta {
            tool: "noisy-ergodic",
            version: env!("CARGO_PKG_VERSION"),
            command,
            master_seed: cfg.mc.master_seed,
            config_hash: sha256_hex(cfg.canonical().as_bytes()),
            kernel_sha256: None,
            rng: noisy_ergodic::mc::RNG_NAME,
        }
    }
}

pub fn render(meta: &Meta, outcome: &Result<Value, Failure>, partial: Option<Value>) -> String {
    let mut doc = serde_json::to_value(meta).expect("meta serializes");
    let obj = doc.as_object_mut().unwrap();
    match outcome {
        Ok(result) => {
            obj.insert("status".into(), json!("ok"));
            obj.insert("exit_code".into(), json!(0));
            obj.insert("result".into(), result.clone());
        }
        Err(failure) => {
            let status = if matches!(failure, Failure::ChecksFailed { .. }) { "failed" } else { "error" };
            obj.insert("status".into(), json!(status));
            obj.insert("exit_code".into(), json!(failure.exit_code()));
            let mut err = json!({ "kind": failure.kind(), "message": failure.to_string() });
            if let Some(r) = failure.residual() {
                err["residual"] = json!(r);
            }
            obj.insert("error".into(), err);
            if let Some(p) = partial {
                obj.insert("result".into(), p);
            }
        }
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    text
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}
