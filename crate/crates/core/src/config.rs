//! Run configuration for the end-to-end pipeline (TOML).
//!
//! The master `seed` drives every random stream of a run: it replaces
//! `environment.seed` and keys the AP-subset draws of all analyses.

use crate::analysis::{default_counts, FrequencyPooling};
use crate::combining::{CombiningMethod, LinkBudget};
use crate::error::{Error, Result};
use crate::field::{EnvironmentModel, PortSelection};
use crate::format::FORMAT_VERSION;
use crate::geometry::Point3;
use crate::sounder::{FlightPlan, UeSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedFlight {
    pub name: String,
    #[serde(flatten)]
    pub plan: FlightPlan,
}

/// Which flights an analysis runs on; an empty list means all of them.
pub type FlightFilter = Vec<String>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainMapConfig {
    pub enabled: bool,
    pub flights: FlightFilter,
}

impl Default for GainMapConfig {
    fn default() -> Self {
        GainMapConfig {
            enabled: true,
            flights: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub enabled: bool,
    pub flights: FlightFilter,
    /// Empty means every UE.
    pub ue_ids: Vec<u32>,
    pub counts: Vec<usize>,
    pub n_subsets: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            enabled: true,
            flights: Vec::new(),
            ue_ids: Vec::new(),
            counts: default_counts(),
            n_subsets: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinrConfig {
    pub enabled: bool,
    pub flights: FlightFilter,
    /// Empty means every UE.
    pub ue_ids: Vec<u32>,
    pub ap_counts: Vec<usize>,
    pub methods: Vec<CombiningMethod>,
    pub n_subsets: usize,
    /// Receive port used by every UE in the multi-user campaign.
    pub ports: PortSelection,
    pub pooling: FrequencyPooling,
}

impl Default for SinrConfig {
    fn default() -> Self {
        SinrConfig {
            enabled: true,
            flights: vec!["ap35".into()],
            ue_ids: Vec::new(),
            ap_counts: vec![64, 256],
            methods: vec![CombiningMethod::Optimum, CombiningMethod::Mr],
            n_subsets: 500,
            ports: PortSelection::Random,
            pooling: FrequencyPooling::PerRealization,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproConfig {
    pub enabled: bool,
    pub flights: FlightFilter,
    pub ue_ids: Vec<u32>,
    /// The two trials compared.
    pub trials: [u32; 2],
}

impl Default for ReproConfig {
    fn default() -> Self {
        ReproConfig {
            enabled: true,
            flights: vec!["ap35".into()],
            ue_ids: vec![2],
            trials: [1, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub format_version: u32,
    /// Also write the sounded campaigns as dataset files.
    pub write_datasets: bool,
    pub environment: EnvironmentModel,
    pub budget: LinkBudget,
    pub flights: Vec<NamedFlight>,
    pub ues: Vec<UeSpec>,
    pub gain_map: GainMapConfig,
    pub sweep: SweepConfig,
    pub sinr: SinrConfig,
    pub repro: ReproConfig,
}

/// Four ground UEs of the default campus: one in the southeast lot, one in
/// the open centre, and two 13 m apart in the northwest corner, the second
/// under the protruding roof.
pub fn default_ues() -> Vec<UeSpec> {
    [
        (1, 320.0, 30.0),
        (2, 200.0, 100.0),
        (3, 45.0, 165.0),
        (4, 32.0, 165.0),
    ]
    .into_iter()
    .map(|(ue_id, x, y)| UeSpec {
        ue_id,
        position: Point3::new(x, y, 1.5),
    })
    .collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        let flight = |name: &str, altitude_m: f64| NamedFlight {
            name: name.into(),
            plan: FlightPlan {
                altitude_m,
                ..FlightPlan::default()
            },
        };
        RunConfig {
            seed: 1,
            format_version: FORMAT_VERSION,
            write_datasets: false,
            environment: EnvironmentModel::default(),
            budget: LinkBudget::default(),
            flights: vec![flight("ap35", 35.0), flight("ap70", 70.0)],
            ues: default_ues(),
            gain_map: GainMapConfig::default(),
            sweep: SweepConfig::default(),
            sinr: SinrConfig::default(),
            repro: ReproConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn unique<T: Ord + Clone + std::fmt::Debug>(items: &[T], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item.clone()) {
            return Err(config_err(format!("{what} {item:?} is defined more than once")));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| config_err(e.to_string()))
    }

    /// Environment with the master seed applied.
    pub fn seeded_environment(&self) -> EnvironmentModel {
        EnvironmentModel {
            seed: self.seed,
            ..self.environment.clone()
        }
    }

    pub fn flight(&self, name: &str) -> Option<&NamedFlight> {
        self.flights.iter().find(|f| f.name == name)
    }

    pub fn ue_ids(&self) -> Vec<u32> {
        self.ues.iter().map(|u| u.ue_id).collect()
    }

    /// Resolves a flight filter to flight names in configuration order.
    pub fn select_flights(&self, filter: &[String]) -> Vec<&NamedFlight> {
        self.flights
            .iter()
            .filter(|f| filter.is_empty() || filter.contains(&f.name))
            .collect()
    }

    /// Resolves a UE filter (empty means all UEs, in configuration order).
    pub fn select_ues(&self, filter: &[u32]) -> Vec<u32> {
        if filter.is_empty() {
            self.ue_ids()
        } else {
            filter.to_vec()
        }
    }

    /// Trials flown for `ue_id` on `flight`: trial 1, plus the repro trials
    /// where a reproducibility analysis needs them.
    pub fn trials_for(&self, flight: &str, ue_id: u32) -> Vec<u32> {
        let mut trials = BTreeSet::from([1]);
        let repro = &self.repro;
        if repro.enabled
            && repro.ue_ids.contains(&ue_id)
            && (repro.flights.is_empty() || repro.flights.iter().any(|f| f == flight))
        {
            trials.extend(repro.trials);
        }
        trials.into_iter().collect()
    }

    fn check_flight_refs(&self, filter: &[String], what: &str) -> Result<()> {
        unique(filter, &format!("{what} flight"))?;
        for name in filter {
            if self.flight(name).is_none() {
                return Err(config_err(format!("{what} references unknown flight '{name}'")));
            }
        }
        Ok(())
    }

    fn check_ue_refs(&self, filter: &[u32], what: &str) -> Result<()> {
        unique(filter, &format!("{what} UE"))?;
        let known = self.ue_ids();
        for id in filter {
            if !known.contains(id) {
                return Err(config_err(format!("{what} references unknown UE {id}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(self.format_version));
        }
        let env = self.seeded_environment();
        env.validate()?;
        self.budget.validate()?;

        if self.flights.is_empty() {
            return Err(config_err("at least one flight is required"));
        }
        let names: Vec<String> = self.flights.iter().map(|f| f.name.clone()).collect();
        unique(&names, "flight")?;
        for f in &self.flights {
            if f.name.is_empty() || !f.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(config_err(format!(
                    "flight name '{}' must be non-empty ASCII letters, digits, '_' or '-'",
                    f.name
                )));
            }
            f.plan
                .validate()
                .map_err(|e| config_err(format!("flight '{}': {e}", f.name)))?;
        }

        if self.ues.is_empty() {
            return Err(config_err("at least one UE is required"));
        }
        unique(&self.ue_ids(), "UE")?;
        for ue in &self.ues {
            if !env.contains_ground(ue.position) {
                return Err(Error::OutOfBounds(ue.position.to_array()));
            }
        }

        self.check_flight_refs(&self.gain_map.flights, "gain_map")?;

        let sweep = &self.sweep;
        self.check_flight_refs(&sweep.flights, "sweep")?;
        self.check_ue_refs(&sweep.ue_ids, "sweep")?;
        if sweep.enabled && (sweep.counts.is_empty() || sweep.n_subsets == 0 || sweep.counts.contains(&0)) {
            return Err(config_err("sweep needs nonzero counts and n_subsets"));
        }

        let sinr = &self.sinr;
        self.check_flight_refs(&sinr.flights, "sinr")?;
        self.check_ue_refs(&sinr.ue_ids, "sinr")?;
        unique(&sinr.methods, "sinr method")?;
        unique(&sinr.ap_counts, "sinr ap_count")?;
        if sinr.enabled {
            if self.select_ues(&sinr.ue_ids).len() < 2 {
                return Err(config_err("sinr evaluation needs at least two UEs"));
            }
            if sinr.ap_counts.is_empty() || sinr.ap_counts.contains(&0) || sinr.methods.is_empty() || sinr.n_subsets == 0 {
                return Err(config_err("sinr needs nonzero ap_counts, methods and n_subsets"));
            }
            if let PortSelection::Port(p) = sinr.ports {
                if p >= env.ue_ports {
                    return Err(config_err(format!("sinr port {p} but the UE has {} ports", env.ue_ports)));
                }
            }
        }

        let repro = &self.repro;
        self.check_flight_refs(&repro.flights, "repro")?;
        self.check_ue_refs(&repro.ue_ids, "repro")?;
        if repro.enabled && (repro.trials[0] == repro.trials[1] || repro.trials.contains(&0)) {
            return Err(config_err("repro needs two distinct trials numbered from 1"));
        }
        Ok(())
    }
}
