//! Channel records, datasets, and the per-link gain analyses.

use crate::error::{Error, Result};
use crate::geometry::Point3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Transfer-function samples between one AP position and one UE port.
///
/// Each sample is one frequency realization of the link (linear amplitude).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRecord {
    pub ap_index: usize,
    pub ap_position: Point3,
    pub ue_id: u32,
    pub trial: u32,
    pub samples: Vec<Complex64>,
}

impl ChannelRecord {
    pub fn new(
        ap_index: usize,
        ap_position: Point3,
        ue_id: u32,
        trial: u32,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        let record = ChannelRecord {
            ap_index,
            ap_position,
            ue_id,
            trial,
            samples,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidRecord("record has no samples".into()));
        }
        if self.trial < 1 {
            return Err(Error::InvalidRecord("trial numbers start at 1".into()));
        }
        if let Some(i) = self
            .samples
            .iter()
            .position(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(Error::InvalidRecord(format!("sample {i} is not finite")));
        }
        if !self.ap_position.is_finite() {
            return Err(Error::InvalidRecord("AP position is not finite".into()));
        }
        Ok(())
    }

    /// Number of frequency realizations.
    pub fn n_freq(&self) -> usize {
        self.samples.len()
    }

    pub fn key(&self) -> FlightKey {
        FlightKey {
            ue_id: self.ue_id,
            trial: self.trial,
        }
    }
}

/// Mean of |h|² over the record's realizations.
pub fn average_gain(record: &ChannelRecord) -> Result<f64> {
    if record.samples.is_empty() {
        return Err(Error::InvalidRecord("record has no samples".into()));
    }
    let sum: f64 = record.samples.iter().map(|s| s.norm_sqr()).sum();
    Ok(sum / record.samples.len() as f64)
}

/// Average gain in power dB. A link with zero gain maps to `f64::NEG_INFINITY`
/// ("no signal") rather than an error.
pub fn gain_db(record: &ChannelRecord) -> Result<f64> {
    average_gain(record).map(linear_to_db)
}

pub fn linear_to_db(linear: f64) -> f64 {
    if linear == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * linear.log10()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Combines the ports of one receive array into an omnidirectional record.
///
/// Power is averaged per realization across ports (incoherent combining);
/// the phase of each output sample is taken from the first port.
pub fn synthesize_omni(ports: &[ChannelRecord]) -> Result<ChannelRecord> {
    let first = ports
        .first()
        .ok_or_else(|| Error::IncompatiblePorts("no port records given".into()))?;
    let n_freq = first.n_freq();
    if n_freq == 0 {
        return Err(Error::InvalidRecord("record has no samples".into()));
    }
    for (p, port) in ports.iter().enumerate().skip(1) {
        if port.n_freq() != n_freq {
            return Err(Error::IncompatiblePorts(format!(
                "port {p} has {} realizations, expected {n_freq}",
                port.n_freq()
            )));
        }
        if port.ap_index != first.ap_index || port.ue_id != first.ue_id || port.trial != first.trial {
            return Err(Error::IncompatiblePorts(format!(
                "port {p} belongs to a different link"
            )));
        }
    }

    let n_ports = ports.len() as f64;
    let samples = (0..n_freq)
        .map(|i| {
            let power = ports.iter().map(|r| r.samples[i].norm_sqr()).sum::<f64>() / n_ports;
            let phase = first.samples[i].arg();
            Complex64::from_polar(power.sqrt(), phase)
        })
        .collect();

    Ok(ChannelRecord {
        ap_index: first.ap_index,
        ap_position: first.ap_position,
        ue_id: first.ue_id,
        trial: first.trial,
        samples,
    })
}

/// Identifies one flight: a UE location and a trial (re-flight) number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlightKey {
    pub ue_id: u32,
    pub trial: u32,
}

/// Campaign-level metadata shared by every record of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    #[serde(rename = "F")]
    pub n_freq: usize,
    pub speed_mps: f64,
    pub capture_interval_s: f64,
    pub altitude_m: f64,
    pub environment_seed: u64,
}

impl DatasetMeta {
    pub fn validate(&self) -> Result<()> {
        if self.n_freq == 0 {
            return Err(Error::IncompatibleDataset("F must be at least 1".into()));
        }
        let finite = [
            self.carrier_hz,
            self.bandwidth_hz,
            self.speed_mps,
            self.capture_interval_s,
            self.altitude_m,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::IncompatibleDataset("metadata contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Ordered collection of channel records from one or more flights.
///
/// Records are kept sorted by `(ue_id, trial, ap_index)`; within a flight the
/// AP indices run contiguously from zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SoundingDataset {
    pub meta: DatasetMeta,
    records: Vec<ChannelRecord>,
}

impl SoundingDataset {
    pub fn empty(meta: DatasetMeta) -> Self {
        SoundingDataset {
            meta,
            records: Vec::new(),
        }
    }

    /// Builds a dataset from records in any order and checks every invariant.
    pub fn from_records(meta: DatasetMeta, mut records: Vec<ChannelRecord>) -> Result<Self> {
        records.sort_by_key(|r| (r.ue_id, r.trial, r.ap_index));
        let dataset = SoundingDataset { meta, records };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        let mut expected_index = 0usize;
        let mut current: Option<FlightKey> = None;
        for record in &self.records {
            record.validate()?;
            if record.n_freq() != self.meta.n_freq {
                return Err(Error::IncompatibleDataset(format!(
                    "record (ue {}, trial {}, ap {}) has {} realizations, dataset F is {}",
                    record.ue_id,
                    record.trial,
                    record.ap_index,
                    record.n_freq(),
                    self.meta.n_freq
                )));
            }
            let key = record.key();
            if current != Some(key) {
                if let Some(prev) = current {
                    if key <= prev {
                        return Err(Error::IncompatibleDataset(
                            "records are not ordered by (ue_id, trial, ap_index)".into(),
                        ));
                    }
                }
                current = Some(key);
                expected_index = 0;
            }
            if record.ap_index != expected_index {
                return Err(Error::IncompatibleDataset(format!(
                    "flight (ue {}, trial {}) expected ap_index {expected_index}, found {}",
                    key.ue_id, key.trial, record.ap_index
                )));
            }
            expected_index += 1;
        }
        Ok(())
    }

    /// Appends another dataset's flights. Metadata must match and no flight
    /// may appear twice.
    pub fn merge(&mut self, other: SoundingDataset) -> Result<()> {
        if other.meta != self.meta {
            return Err(Error::IncompatibleDataset("metadata differs between datasets".into()));
        }
        let existing: BTreeSet<FlightKey> = self.flight_keys().into_iter().collect();
        if let Some(dup) = other.flight_keys().into_iter().find(|k| existing.contains(k)) {
            return Err(Error::DuplicateKey(format!(
                "flight (ue {}, trial {}) already present",
                dup.ue_id, dup.trial
            )));
        }
        self.records.extend(other.records);
        self.records.sort_by_key(|r| (r.ue_id, r.trial, r.ap_index));
        Ok(())
    }

    pub fn records(&self) -> &[ChannelRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ChannelRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn flight_keys(&self) -> Vec<FlightKey> {
        let mut keys: Vec<FlightKey> = self.records.iter().map(ChannelRecord::key).collect();
        keys.dedup();
        keys
    }

    pub fn ue_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.flight_keys().iter().map(|k| k.ue_id).collect();
        ids.dedup();
        ids
    }

    pub fn trials(&self, ue_id: u32) -> Vec<u32> {
        self.flight_keys()
            .into_iter()
            .filter(|k| k.ue_id == ue_id)
            .map(|k| k.trial)
            .collect()
    }

    /// Records of one flight, ordered by AP index.
    pub fn flight(&self, ue_id: u32, trial: u32) -> Option<&[ChannelRecord]> {
        let key = (ue_id, trial);
        let start = self.records.partition_point(|r| (r.ue_id, r.trial) < key);
        let end = self.records.partition_point(|r| (r.ue_id, r.trial) <= key);
        (start < end).then(|| &self.records[start..end])
    }

    /// The lowest-numbered trial flown for `ue_id`.
    pub fn primary_flight(&self, ue_id: u32) -> Option<&[ChannelRecord]> {
        let trial = self.trials(ue_id).into_iter().next()?;
        self.flight(ue_id, trial)
    }
}

/// Per-AP gain in dB along one flight.
#[derive(Clone, Debug, PartialEq)]
pub struct GainProfile {
    pub ue_id: u32,
    pub trial: u32,
    pub gains_db: Vec<f64>,
}

impl GainProfile {
    pub fn from_flight(records: &[ChannelRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidInput("flight has no records".into()))?;
        let gains_db = records.iter().map(gain_db).collect::<Result<Vec<_>>>()?;
        Ok(GainProfile {
            ue_id: first.ue_id,
            trial: first.trial,
            gains_db,
        })
    }

    pub fn len(&self) -> usize {
        self.gains_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains_db.is_empty()
    }
}

/// RMS difference in dB between two gain profiles over the same trajectory.
///
/// Points where both profiles report "no signal" contribute zero; a point
/// where only one does makes the error infinite.
pub fn rms_gain_error(a: &GainProfile, b: &GainProfile) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::TrajectoryMismatch(format!(
            "profiles have {} and {} points",
            a.len(),
            b.len()
        )));
    }
    if a.ue_id != b.ue_id {
        return Err(Error::TrajectoryMismatch(format!(
            "profiles belong to UE {} and UE {}",
            a.ue_id, b.ue_id
        )));
    }
    if a.is_empty() {
        return Err(Error::TrajectoryMismatch("profiles are empty".into()));
    }
    let sum_sq: f64 = a
        .gains_db
        .iter()
        .zip(&b.gains_db)
        .map(|(&ga, &gb)| if ga == gb { 0.0 } else { (ga - gb).powi(2) })
        .sum();
    Ok((sum_sq / a.len() as f64).sqrt())
}
