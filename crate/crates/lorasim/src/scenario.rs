use std::fmt;
use std::path::{Path, PathBuf};

use lorasim_core::experiment::{Scenario, ScenarioError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(#[from] ScenarioError),
}

/// The experiments the CLI can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Baseline,
    AdrSpoof,
    BeaconSpoof,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Baseline, Experiment::AdrSpoof, Experiment::BeaconSpoof];

    /// The scenario attack type this experiment runs.
    pub fn attack_kind(self) -> &'static str {
        match self {
            Experiment::Baseline => "none",
            Experiment::AdrSpoof => "adr_spoofing",
            Experiment::BeaconSpoof => "beacon_drift",
        }
    }

    pub fn csv_name(self) -> &'static str {
        match self {
            Experiment::Baseline => "baseline.csv",
            Experiment::AdrSpoof => "adr_spoof.csv",
            Experiment::BeaconSpoof => "beacon_spoof.csv",
        }
    }

    pub fn builtin(self) -> Scenario {
        match self {
            Experiment::Baseline => Scenario::default_baseline(),
            Experiment::AdrSpoof => Scenario::default_adr_spoofing(),
            Experiment::BeaconSpoof => Scenario::default_beacon_drift(),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Baseline => "baseline",
            Experiment::AdrSpoof => "adr-spoof",
            Experiment::BeaconSpoof => "beacon-spoof",
        })
    }
}

/// Parses and validates a scenario document.
pub fn parse(text: &str) -> Result<Scenario, LoadError> {
    let sc: Scenario = toml::from_str(text)?;
    sc.validate()?;
    Ok(sc)
}

pub fn load(path: &Path) -> Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_owned(), source })?;
    parse(&text)
}

pub fn to_toml(sc: &Scenario) -> String {
    toml::to_string(sc).expect("scenarios serialize")
}
