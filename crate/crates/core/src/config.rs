//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! K = 10
//! N = 10
//! lambda = 4
//! t = 2
//! p = ["2/5", "1/5", "1/5", "1/5"]
//! ```
//!
//! Intensities may be `"num/den"` strings, decimal strings, integers or TOML
//! floats. Floats are read through their shortest decimal form, so `0.4`
//! means exactly `2/5`.

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::model::SystemConfig;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(rename = "K", alias = "k")]
    users: u64,
    #[serde(rename = "N", alias = "n")]
    files: u64,
    #[serde(alias = "Lambda")]
    lambda: usize,
    t: usize,
    p: Vec<Spanned<RawRational>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawRational {
    Text(String),
    Integer(i64),
    Float(f64),
}

impl RawRational {
    fn to_rational(&self) -> Option<Rational> {
        match self {
            RawRational::Text(s) => exact::parse_rational(s),
            RawRational::Integer(i) => exact::parse_rational(&i.to_string()),
            RawRational::Float(f) if f.is_finite() => exact::parse_rational(&format!("{f}")),
            RawRational::Float(_) => None,
        }
    }

    fn describe(&self) -> String {
        match self {
            RawRational::Text(s) => format!("{s:?}"),
            RawRational::Integer(i) => i.to_string(),
            RawRational::Float(f) => f.to_string(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<SystemConfig> {
    let raw: RawScenario =
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
    let mut intensities = Vec::with_capacity(raw.p.len());
    for (i, entry) in raw.p.iter().enumerate() {
        let value = entry.get_ref().to_rational().ok_or_else(|| {
            Error::Config(format!(
                "scenario line {}, field p[{}]: cannot read {} as an exact rational",
                line_of(text, entry.span().start),
                i + 1,
                entry.get_ref().describe()
            ))
        })?;
        intensities.push(value);
    }
    SystemConfig::new(raw.users, raw.files, raw.lambda, raw.t, intensities)
}

pub fn load_scenario(path: &std::path::Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}
