use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ConfigError;

/// Physical unit of a telemetry signal or check value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "km/h")]
    KilometersPerHour,
    #[serde(rename = "m/s")]
    MetersPerSecond,
    #[serde(rename = "m/s^2", alias = "m/s²")]
    MetersPerSecondSquared,
    #[serde(rename = "boolean")]
    Boolean,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::KilometersPerHour => "km/h",
            Unit::MetersPerSecond => "m/s",
            Unit::MetersPerSecondSquared => "m/s^2",
            Unit::Boolean => "boolean",
        }
    }

    /// Factor `f` such that `value_in_self * f` is the value in `to`.
    pub fn conversion_factor(self, to: Unit) -> Option<f64> {
        use Unit::*;
        match (self, to) {
            (a, b) if a == b => Some(1.0),
            (KilometersPerHour, MetersPerSecond) => Some(1.0 / 3.6),
            (MetersPerSecond, KilometersPerHour) => Some(3.6),
            _ => None,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "km/h" => Ok(Unit::KilometersPerHour),
            "m/s" => Ok(Unit::MetersPerSecond),
            "m/s^2" | "m/s²" => Ok(Unit::MetersPerSecondSquared),
            "boolean" => Ok(Unit::Boolean),
            other => Err(format!("unknown unit `{other}`")),
        }
    }
}

/// The closed vocabularies generated documents may draw from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalogs {
    pub blueprints: BTreeSet<String>,
    pub weather: BTreeSet<String>,
    pub events: BTreeSet<String>,
    /// Telemetry signal name to the unit checks on it are written in.
    pub signals: BTreeMap<String, Unit>,
    // Keep file order for prompt injection.
    blueprint_lines: Vec<String>,
    weather_lines: Vec<String>,
    event_lines: Vec<String>,
}

impl Catalogs {
    /// Loads `blueprints.txt`, `weather.txt`, `events.txt` and `signals.txt`.
    pub fn load(dir: &Path) -> Result<Self, ConfigError> {
        let blueprints = read_lines(&dir.join("blueprints.txt"))?;
        let weather = read_lines(&dir.join("weather.txt"))?;
        let events = read_lines(&dir.join("events.txt"))?;
        let signal_path = dir.join("signals.txt");
        let mut signals = Vec::new();
        for (line_no, line) in read_lines(&signal_path)?.into_iter().enumerate() {
            let mut parts = line.split_whitespace();
            let (Some(name), Some(unit), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(ConfigError::Catalog {
                    path: signal_path.display().to_string(),
                    message: format!("entry {}: expected `<name> <unit>`", line_no + 1),
                });
            };
            let unit = unit.parse().map_err(|message| ConfigError::Catalog {
                path: signal_path.display().to_string(),
                message,
            })?;
            signals.push((name.to_string(), unit));
        }
        Ok(Self::from_entries(blueprints, weather, events, signals))
    }

    pub fn from_entries(
        blueprints: Vec<String>,
        weather: Vec<String>,
        events: Vec<String>,
        signals: Vec<(String, Unit)>,
    ) -> Self {
        Self {
            blueprints: blueprints.iter().cloned().collect(),
            weather: weather.iter().cloned().collect(),
            events: events.iter().cloned().collect(),
            signals: signals.into_iter().collect(),
            blueprint_lines: blueprints,
            weather_lines: weather,
            event_lines: events,
        }
    }

    pub fn blueprint_listing(&self) -> String {
        self.blueprint_lines.join("\n")
    }

    pub fn weather_listing(&self) -> String {
        self.weather_lines.join("\n")
    }

    pub fn event_listing(&self) -> String {
        self.event_lines.join("\n")
    }

    pub fn signal_listing(&self) -> String {
        self.signals
            .iter()
            .map(|(name, unit)| format!("{name} [{unit}]"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Non-empty, non-comment lines of a newline-delimited catalog file.
fn read_lines(path: &Path) -> Result<Vec<String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}
