use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Format, Resolved};

/// Key under which every JSON output carries its resolved configuration.
pub const CONFIG_KEY: &str = "resolved_config";

pub struct Output {
    config: Resolved,
    body: String,
    format: Format,
    side_files: Vec<(PathBuf, String)>,
}

impl Output {
    /// `payload` must serialize to a JSON object. Keys come out sorted, so
    /// runs diff cleanly.
    pub fn json(config: Resolved, payload: &impl Serialize) -> Result<Output> {
        let mut obj = match serde_json::to_value(payload)? {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        obj.insert(CONFIG_KEY.into(), serde_json::to_value(&config)?);
        let mut body = serde_json::to_string_pretty(&Value::Object(obj))?;
        body.push('\n');
        Ok(Output {
            config,
            body,
            format: Format::Json,
            side_files: Vec::new(),
        })
    }

    pub fn csv(config: Resolved, body: String) -> Output {
        Output {
            config,
            body,
            format: Format::Csv,
            side_files: Vec::new(),
        }
    }

    /// Flattens `payload` into `key,value` rows with dotted keys.
    pub fn key_value_csv(config: Resolved, payload: &impl Serialize) -> Result<Output> {
        let mut rows = Vec::new();
        flatten("", &serde_json::to_value(payload)?, &mut rows);
        let mut body = String::from("key,value\n");
        for (k, v) in rows {
            body.push_str(&k);
            body.push(',');
            body.push_str(&v);
            body.push('\n');
        }
        Ok(Output::csv(config, body))
    }

    pub fn with_file(mut self, path: Option<&Path>, contents: impl FnOnce() -> String) -> Self {
        if let Some(p) = path {
            self.side_files.push((p.to_path_buf(), contents()));
        }
        self
    }

    pub fn write(self, out: Option<&Path>) -> Result<()> {
        for (path, text) in &self.side_files {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        if self.format == Format::Csv {
            // CSV has no place for the configuration, so it goes to stderr
            eprintln!("config: {}", serde_json::to_string(&self.config)?);
        }
        match out {
            Some(path) => std::fs::write(path, &self.body)
                .with_context(|| format!("writing {}", path.display()))?,
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(self.body.as_bytes())?;
                stdout.flush()?;
            }
        }
        Ok(())
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&join(k), x, rows)),
        Value::Array(a) => a
            .iter()
            .enumerate()
            .for_each(|(i, x)| flatten(&join(&i.to_string()), x, rows)),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Null => rows.push((prefix.to_string(), String::new())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}
