//! Monte-Carlo AP-subset sweeps over a sounding dataset.
//!
//! Every capture position of a flight is a candidate single-antenna AP. A
//! sweep draws random AP subsets (uniform, without replacement inside a
//! subset, independently across subsets) and evaluates either the
//! single-user MR SNR or the multi-user SINR for each. Subset `s` always uses
//! the random stream keyed by `(seed, size, s)`, so results do not depend on
//! the thread count, and the optimum and MR evaluations of the same
//! `(seed, size)` see the same subsets.

use crate::channel::{average_gain, linear_to_db, ChannelRecord, SoundingDataset};
use crate::combining::{ue_sinr, ChannelMatrix, CombiningMethod, LinkBudget};
use crate::combining::uplink_snr;
use crate::error::{Error, Result};
use crate::exec;
use crate::seed::{domain, SeedHasher};
use crate::stats::{distribution_stats, DistributionStats};
use num_complex::Complex64;
use rand::seq::index;
use serde::{Deserialize, Serialize};

/// AP counts swept by default: powers of two from 2 to 1024.
pub fn default_counts() -> Vec<usize> {
    (1..=10).map(|e| 1usize << e).collect()
}

/// One row of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportEntry {
    pub ue_id: u32,
    pub ap_count: usize,
    /// `None` for single-user SNR rows.
    pub method: Option<CombiningMethod>,
    pub stats: DistributionStats,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SinrReport {
    pub entries: Vec<ReportEntry>,
}

impl SinrReport {
    pub fn find(&self, ue_id: u32, ap_count: usize, method: Option<CombiningMethod>) -> Option<&ReportEntry> {
        self.entries
            .iter()
            .find(|e| e.ue_id == ue_id && e.ap_count == ap_count && e.method == method)
    }

    pub fn extend(&mut self, other: SinrReport) {
        self.entries.extend(other.entries);
    }
}

/// Sorted subset of `count` distinct AP indices out of `available`.
pub fn draw_subset(seed: u64, available: usize, count: usize, subset: usize) -> Vec<usize> {
    let mut rng = SeedHasher::new(domain::SUBSETS)
        .word(seed)
        .word(count as u64)
        .word(subset as u64)
        .rng();
    let mut picked = index::sample(&mut rng, available, count).into_vec();
    picked.sort_unstable();
    picked
}

fn check_count(count: usize, available: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidInput("AP count must be at least 1".into()));
    }
    if count > available {
        return Err(Error::InfeasibleSubset {
            requested: count,
            available,
        });
    }
    Ok(())
}

fn flight_for(dataset: &SoundingDataset, ue_id: u32) -> Result<&[ChannelRecord]> {
    dataset
        .primary_flight(ue_id)
        .ok_or_else(|| Error::InvalidInput(format!("dataset has no flight for UE {ue_id}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSettings {
    pub counts: Vec<usize>,
    pub n_subsets: usize,
    pub seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            counts: default_counts(),
            n_subsets: 10_000,
            seed: 0,
        }
    }
}

/// Single-user MR uplink SNR over random AP subsets of each size.
///
/// Uses the frequency-averaged gain of each AP (the UE's lowest trial).
pub fn ap_subset_sweep(
    dataset: &SoundingDataset,
    ue_id: u32,
    settings: &SweepSettings,
    budget: &LinkBudget,
) -> Result<SinrReport> {
    budget.validate()?;
    if settings.n_subsets == 0 {
        return Err(Error::InvalidInput("n_subsets must be at least 1".into()));
    }
    let flight = flight_for(dataset, ue_id)?;
    let gains: Vec<f64> = flight.iter().map(average_gain).collect::<Result<_>>()?;
    for &count in &settings.counts {
        check_count(count, gains.len())?;
    }

    let mut report = SinrReport::default();
    for &count in &settings.counts {
        let snr_db = exec::try_map_range(settings.n_subsets, |s| {
            let subset = draw_subset(settings.seed, gains.len(), count, s);
            let picked: Vec<f64> = subset.iter().map(|&l| gains[l]).collect();
            uplink_snr(&picked, budget).map(|r| r.db)
        })?;
        report.entries.push(ReportEntry {
            ue_id,
            ap_count: count,
            method: None,
            stats: distribution_stats(&snr_db)?,
        });
    }
    Ok(report)
}

/// How frequency realizations enter the SINR distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyPooling {
    /// One sample per (subset, realization).
    #[default]
    PerRealization,
    /// One sample per subset: the mean linear SINR over realizations.
    Averaged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiUserSettings {
    pub ue_ids: Vec<u32>,
    pub ap_count: usize,
    pub method: CombiningMethod,
    pub n_subsets: usize,
    pub seed: u64,
    pub pooling: FrequencyPooling,
}

/// Linear SINR samples of one UE, ordered by (subset, realization).
#[derive(Clone, Debug, PartialEq)]
pub struct UeSamples {
    pub ue_id: u32,
    pub sinr: Vec<f64>,
}

fn multi_user_flights<'a>(dataset: &'a SoundingDataset, ue_ids: &[u32]) -> Result<Vec<&'a [ChannelRecord]>> {
    if ue_ids.len() < 2 {
        return Err(Error::InvalidInput("multi-user evaluation needs at least two UEs".into()));
    }
    let mut sorted = ue_ids.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DuplicateKey("UE listed twice".into()));
    }
    let flights: Vec<&[ChannelRecord]> = ue_ids
        .iter()
        .map(|&ue| flight_for(dataset, ue))
        .collect::<Result<_>>()?;
    let reference = flights[0];
    for (flight, ue) in flights.iter().zip(ue_ids).skip(1) {
        if flight.len() != reference.len() {
            return Err(Error::IncompatibleDataset(format!(
                "UE {ue} has {} AP positions, UE {} has {}",
                flight.len(),
                ue_ids[0],
                reference.len()
            )));
        }
        if flight
            .iter()
            .zip(reference)
            .any(|(a, b)| a.ap_position != b.ap_position || a.n_freq() != b.n_freq())
        {
            return Err(Error::IncompatibleDataset(format!(
                "UE {ue} was not sounded on the same trajectory as UE {}",
                ue_ids[0]
            )));
        }
    }
    Ok(flights)
}

/// Per-UE SINR samples over random AP subsets of size `ap_count`.
pub fn multi_user_sinr_samples(
    dataset: &SoundingDataset,
    settings: &MultiUserSettings,
    budget: &LinkBudget,
) -> Result<Vec<UeSamples>> {
    budget.validate()?;
    if settings.n_subsets == 0 {
        return Err(Error::InvalidInput("n_subsets must be at least 1".into()));
    }
    let flights = multi_user_flights(dataset, &settings.ue_ids)?;
    let n_aps = flights[0].len();
    check_count(settings.ap_count, n_aps)?;
    let n_freq = flights[0][0].n_freq();
    let n_ues = flights.len();

    // per subset: per UE: samples
    let per_subset: Vec<Vec<Vec<f64>>> = exec::try_map_range(settings.n_subsets, |s| {
        let subset = draw_subset(settings.seed, n_aps, settings.ap_count, s);
        let mut out = vec![Vec::with_capacity(n_freq); n_ues];
        for i in 0..n_freq {
            let columns: Vec<Vec<Complex64>> = flights
                .iter()
                .map(|flight| subset.iter().map(|&l| flight[l].samples[i]).collect())
                .collect();
            let matrix = ChannelMatrix::from_columns(&columns)?;
            for (k, samples) in out.iter_mut().enumerate() {
                samples.push(ue_sinr(&matrix, k, settings.method, budget)?.linear);
            }
        }
        if settings.pooling == FrequencyPooling::Averaged {
            for samples in out.iter_mut() {
                let mean = samples.iter().sum::<f64>() / samples.len() as f64;
                *samples = vec![mean];
            }
        }
        Ok::<_, Error>(out)
    })?;

    let mut result: Vec<UeSamples> = settings
        .ue_ids
        .iter()
        .map(|&ue_id| UeSamples {
            ue_id,
            sinr: Vec::with_capacity(settings.n_subsets * n_freq),
        })
        .collect();
    for subset in per_subset {
        for (acc, samples) in result.iter_mut().zip(subset) {
            acc.sinr.extend(samples);
        }
    }
    Ok(result)
}

/// Multi-user SINR distribution per UE under one combining method.
pub fn multi_user_sinr_eval(
    dataset: &SoundingDataset,
    settings: &MultiUserSettings,
    budget: &LinkBudget,
) -> Result<SinrReport> {
    let samples = multi_user_sinr_samples(dataset, settings, budget)?;
    let entries = samples
        .into_iter()
        .map(|ue| {
            let db: Vec<f64> = ue.sinr.iter().map(|&s| linear_to_db(s)).collect();
            Ok(ReportEntry {
                ue_id: ue.ue_id,
                ap_count: settings.ap_count,
                method: Some(settings.method),
                stats: distribution_stats(&db)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SinrReport { entries })
}
