//! Run description echoed into every output document.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use srdm_core::MetricConfig;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<MetricConfig>,
    pub parameters: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    /// File names only, so that runs writing to different directories still match.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed,
            config: None,
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        let name = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.outputs.push(name);
        self
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    fn compact(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    /// Single `#` comment line for the top of a CSV file.
    pub fn csv_comment(&self) -> String {
        format!("# manifest: {}\n", self.compact())
    }

    /// The manifest as XML comment text. `--` is written as an escaped JSON
    /// character so the comment stays well-formed.
    pub fn xml_comment_text(&self) -> String {
        format!("manifest: {}", self.compact().replace("--", "-\\u002d"))
    }
}
