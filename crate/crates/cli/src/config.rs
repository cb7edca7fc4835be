//! Parameter blocks: defaults, overlaid by the `--config` file, overlaid by
//! command-line flags. Every run freezes the resolved result next to its
//! outputs.

use std::collections::BTreeMap;
use std::path::Path;

use octx::{io, Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Recursively overlays `top` on `base`. Keys the defaults do not know are
/// rejected so typos fail loudly instead of being ignored.
pub fn overlay(base: &mut Value, top: &Value, path: &str) -> Result<()> {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(k) {
                    Some(slot) => overlay(slot, v, &here)?,
                    None => return Err(Error::Parameter(format!("unknown config key `{here}`"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>) -> Result<T> {
    let mut v = serde_json::to_value(defaults)?;
    if let Some(path) = file {
        let user: Value = io::read_json(path)?;
        overlay(&mut v, &user, "")?;
    }
    serde_json::from_value(v).map_err(|e| Error::Parameter(format!("config: {e}")))
}

/// The frozen copy written as `run_config.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunConfig<T> {
    pub command: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub params: T,
}

pub fn freeze<T: Serialize>(out: &Path, command: &str, seed: u64, inputs: &[(&str, &Path)], params: &T) -> Result<()> {
    let rc = RunConfig {
        command: command.to_string(),
        seed,
        inputs: inputs.iter().map(|(k, p)| (k.to_string(), p.display().to_string())).collect(),
        params,
    };
    io::write_json(&out.join("run_config.json"), &rc)
}
