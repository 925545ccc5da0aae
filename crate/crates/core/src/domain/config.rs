use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AgentId, AgentState, Corridor, CoverageSegment, Network, UatmId, ValidationError, VertiportId};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("unsupported config schema {found}, expected {SCHEMA_VERSION}")]
    Schema { found: u32 },
    #[error("bad id set `{0}`: expected a list or `lo..hi`")]
    IdSet(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Ids given either as a list or as an inclusive `"lo..hi"` range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IdSet {
    List(Vec<i64>),
    Range(String),
}

impl IdSet {
    fn ids(&self) -> Result<BTreeSet<i64>, ConfigError> {
        match self {
            IdSet::List(v) => Ok(v.iter().copied().collect()),
            IdSet::Range(s) => {
                let bad = || ConfigError::IdSet(s.clone());
                let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
                let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
                let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
                Ok((lo..=hi).collect())
            }
        }
    }

    fn from_ids(ids: impl Iterator<Item = i64>) -> IdSet {
        let ids: Vec<i64> = ids.collect();
        match (ids.first(), ids.last()) {
            (Some(&lo), Some(&hi)) if ids.len() > 1 && hi - lo + 1 == ids.len() as i64 => {
                IdSet::Range(format!("{lo}..{hi}"))
            }
            _ => IdSet::List(ids),
        }
    }
}

impl Default for IdSet {
    fn default() -> Self {
        IdSet::List(Vec::new())
    }
}

fn schema_default() -> u32 {
    SCHEMA_VERSION
}

/// The config document. Missing sections are empty; validation then
/// reports what is absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "schema_default")]
    pub schema: u32,
    #[serde(default)]
    pub step_horizon: i64,
    #[serde(default)]
    pub vertiports: IdSet,
    #[serde(default)]
    pub uatms: IdSet,
    #[serde(default)]
    pub agent_ids: IdSet,
    #[serde(default)]
    pub corridors: Vec<Corridor>,
    #[serde(default)]
    pub coverage: Vec<CoverageSegment>,
    #[serde(default)]
    pub vertiport_cover: Vec<CoverEntry>,
    #[serde(default)]
    pub candidates: Vec<CandidateEntry>,
    #[serde(default)]
    pub agents: Vec<AgentState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverEntry {
    pub uatm: UatmId,
    pub vertiport: VertiportId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub vertiport: VertiportId,
    pub fallback: VertiportId,
}

impl NetworkConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: NetworkConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        if config.schema != SCHEMA_VERSION {
            return Err(ConfigError::Schema { found: config.schema });
        }
        Ok(config)
    }

    /// Typed, validated network and agent states.
    pub fn build(&self) -> Result<(Network, Vec<AgentState>), ConfigError> {
        let network = Network {
            vertiports: self.vertiports.ids()?.into_iter().map(VertiportId).collect(),
            uatms: self.uatms.ids()?.into_iter().map(UatmId).collect(),
            agent_ids: self.agent_ids.ids()?.into_iter().map(AgentId).collect(),
            corridors: self.corridors.clone(),
            coverage: self.coverage.clone(),
            vertiport_cover: self.vertiport_cover.iter().map(|c| (c.uatm, c.vertiport)).collect(),
            candidates: self.candidates.iter().map(|c| (c.vertiport, c.fallback)).collect(),
            step_horizon: self.step_horizon,
        };
        network.validate(&self.agents)?;
        Ok((network, self.agents.clone()))
    }

    pub fn from_network(network: &Network, agents: &[AgentState]) -> Self {
        NetworkConfig {
            schema: SCHEMA_VERSION,
            step_horizon: network.step_horizon,
            vertiports: IdSet::from_ids(network.vertiports.iter().map(|v| v.0)),
            uatms: IdSet::from_ids(network.uatms.iter().map(|v| v.0)),
            agent_ids: IdSet::from_ids(network.agent_ids.iter().map(|v| v.0)),
            corridors: network.corridors.clone(),
            coverage: network.coverage.clone(),
            vertiport_cover: network
                .vertiport_cover
                .iter()
                .map(|&(uatm, vertiport)| CoverEntry { uatm, vertiport })
                .collect(),
            candidates: network
                .candidates
                .iter()
                .map(|&(vertiport, fallback)| CandidateEntry { vertiport, fallback })
                .collect(),
            agents: agents.to_vec(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses and validates a network config document.
pub fn load_network(text: &str) -> Result<(Network, Vec<AgentState>), ConfigError> {
    NetworkConfig::parse(text)?.build()
}
