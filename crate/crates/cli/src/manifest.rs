//! Versioned table of expected values, compiled into the binary.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;
use tplab_core::{Expected, Source};

const MANIFEST: &str = include_str!("../expectations.toml");

#[derive(Debug, Deserialize)]
struct Entry {
    value: toml::Value,
    source: Source,
    citation: String,
}

#[derive(Debug, Deserialize)]
struct Raw {
    version: u32,
    checks: BTreeMap<String, Entry>,
}

#[derive(Debug)]
pub struct Manifest {
    pub version: u32,
    checks: BTreeMap<String, Expected>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest> {
        let raw: Raw = toml::from_str(text).context("malformed expectations manifest")?;
        let checks = raw
            .checks
            .into_iter()
            .map(|(k, e)| {
                let value = serde_json::to_value(&e.value)?;
                Ok((k, Expected { value, source: e.source, citation: e.citation }))
            })
            .collect::<Result<_>>()?;
        Ok(Manifest { version: raw.version, checks })
    }

    /// The manifest shipped with the binary.
    pub fn builtin() -> &'static Manifest {
        static M: OnceLock<Manifest> = OnceLock::new();
        M.get_or_init(|| Manifest::parse(MANIFEST).expect("built-in manifest parses"))
    }

    pub fn get(&self, name: &str) -> Result<&Expected> {
        self.checks.get(name).ok_or_else(|| anyhow!("no expectation named {name}"))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.checks.keys().map(String::as_str)
    }
}
