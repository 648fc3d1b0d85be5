//! Config loading with dotted-key overrides (`--set reward.chi_o=99`).

use anyhow::{bail, Context, Result};
use edgesim_core::ConfigFile;
use std::path::{Path, PathBuf};

/// Loads a config file (or starts from all defaults) and applies dotted
/// overrides. Returns the file form plus the directory that anchors
/// relative paths inside it.
pub fn load_config_file(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<(ConfigFile, Option<PathBuf>)> {
    let (mut value, base_dir) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            let value: toml::Value =
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
            (value, p.parent().map(|d| d.to_path_buf()))
        }
        None => (toml::Value::Table(toml::map::Map::new()), None),
    };

    for entry in overrides {
        let Some((key, raw)) = entry.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {entry}");
        };
        set_dotted(&mut value, key.trim(), raw.trim())
            .with_context(|| format!("applying --set {entry}"))?;
    }

    let file: ConfigFile = value.try_into().context("config keys")?;
    Ok((file, base_dir))
}

/// Sets `a.b.c = value` in a TOML tree, creating tables along the path.
/// The value is parsed as a TOML literal, falling back to a string.
fn set_dotted(root: &mut toml::Value, dotted: &str, raw: &str) -> Result<()> {
    let parsed = parse_literal(raw);
    let mut node = root;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            bail!("empty key segment in {dotted}");
        }
        let table = node
            .as_table_mut()
            .with_context(|| format!("{dotted}: segment {part} is not a table"))?;
        if i == parts.len() - 1 {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    unreachable!("loop always returns on the last segment")
}

fn parse_literal(raw: &str) -> toml::Value {
    if let Ok(wrapped) = toml::from_str::<toml::Value>(&format!("v = {raw}")) {
        if let Some(v) = wrapped.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}
