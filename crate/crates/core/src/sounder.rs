//! Drone sounding procedure: capture planning, flights, and campaigns.
//!
//! The transmitter flies a waypoint polyline at constant speed and the
//! receiver captures one transfer function every `capture_interval_s`. Each
//! capture position becomes one virtual single-antenna AP. Re-flights of the
//! same plan land at slightly different positions (i.i.d. Gaussian jitter per
//! axis) and redraw small-scale fading; shadowing is a property of the
//! static environment and does not change between trials.

use crate::channel::{ChannelRecord, DatasetMeta, SoundingDataset};
use crate::error::{Error, Result};
use crate::exec;
use crate::field::{PortSelection, SyntheticField};
use crate::geometry::Point3;
use crate::seed::{domain, SeedHasher};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Slack on the capture count so a path that is an exact multiple of the
/// spacing is not lost to rounding (e.g. 240 m / 0.2 m).
const COUNT_EPSILON: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightPlan {
    /// Horizontal waypoints, meters. Repeat the first point at the end for a
    /// closed loop.
    pub waypoints: Vec<[f64; 2]>,
    pub altitude_m: f64,
    pub speed_mps: f64,
    pub capture_interval_s: f64,
    /// Per-axis standard deviation of re-flight position error, meters.
    pub jitter_sigma_m: f64,
}

impl Default for FlightPlan {
    fn default() -> Self {
        FlightPlan {
            waypoints: perimeter_loop(400.0, 200.0),
            altitude_m: 35.0,
            speed_mps: 4.0,
            capture_interval_s: 0.05,
            jitter_sigma_m: 0.1,
        }
    }
}

/// Closed rectangular loop around an `x_extent` by `y_extent` area.
pub fn perimeter_loop(x_extent: f64, y_extent: f64) -> Vec<[f64; 2]> {
    vec![
        [0.0, 0.0],
        [x_extent, 0.0],
        [x_extent, y_extent],
        [0.0, y_extent],
        [0.0, 0.0],
    ]
}

impl FlightPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mps > 0.0 && self.speed_mps.is_finite()) {
            return Err(Error::InvalidPlan("speed must be positive".into()));
        }
        if !(self.capture_interval_s > 0.0 && self.capture_interval_s.is_finite()) {
            return Err(Error::InvalidPlan("capture interval must be positive".into()));
        }
        if self.waypoints.len() < 2 {
            return Err(Error::InvalidPlan("at least two waypoints are required".into()));
        }
        if !(self.jitter_sigma_m >= 0.0) {
            return Err(Error::InvalidPlan("jitter sigma must be nonnegative".into()));
        }
        if self
            .waypoints
            .iter()
            .flatten()
            .chain(std::iter::once(&self.altitude_m))
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidPlan("waypoints and altitude must be finite".into()));
        }
        if self.path_length() <= 0.0 {
            return Err(Error::InvalidPlan("path has zero length".into()));
        }
        Ok(())
    }

    /// Distance between consecutive captures along the path.
    pub fn capture_spacing_m(&self) -> f64 {
        self.speed_mps * self.capture_interval_s
    }

    pub fn path_length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }

    pub fn is_closed(&self) -> bool {
        self.waypoints.first() == self.waypoints.last()
    }
}

/// Planned capture positions with their timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct CaptureSchedule {
    pub positions: Vec<Point3>,
    pub times_s: Vec<f64>,
}

impl CaptureSchedule {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.times_s.last().copied().unwrap_or(0.0)
    }
}

/// Lays capture positions along the waypoint polyline by arc length.
///
/// There are `floor(length / spacing) + 1` captures, the first at the first
/// waypoint; the tail of the path shorter than one spacing is not captured.
pub fn plan_captures(plan: &FlightPlan) -> Result<CaptureSchedule> {
    plan.validate()?;
    let spacing = plan.capture_spacing_m();
    let total = plan.path_length();
    let count = (total / spacing + COUNT_EPSILON).floor() as usize + 1;

    // cumulative arc length at each waypoint
    let mut cumulative = Vec::with_capacity(plan.waypoints.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in plan.waypoints.windows(2) {
        acc += (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        cumulative.push(acc);
    }

    let mut positions = Vec::with_capacity(count);
    let mut times_s = Vec::with_capacity(count);
    let mut seg = 0usize;
    for j in 0..count {
        let s = (j as f64 * spacing).min(total);
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        // skip zero-length segments
        while seg + 2 < cumulative.len() && cumulative[seg + 1] - cumulative[seg] == 0.0 {
            seg += 1;
        }
        let (a, b) = (plan.waypoints[seg], plan.waypoints[seg + 1]);
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let t = if seg_len > 0.0 {
            ((s - cumulative[seg]) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        positions.push(Point3::new(
            a[0] + (b[0] - a[0]) * t,
            a[1] + (b[1] - a[1]) * t,
            plan.altitude_m,
        ));
        times_s.push(j as f64 * plan.capture_interval_s);
    }
    Ok(CaptureSchedule { positions, times_s })
}

/// A UE location flown in a campaign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    pub ue_id: u32,
    pub position: Point3,
}

/// Options shared by every flight of a campaign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlightOptions {
    pub jitter: bool,
    pub ports: PortSelection,
}

impl Default for FlightOptions {
    fn default() -> Self {
        FlightOptions {
            jitter: true,
            ports: PortSelection::Omni,
        }
    }
}

fn dataset_meta(plan: &FlightPlan, field: &SyntheticField) -> DatasetMeta {
    let env = field.env();
    DatasetMeta {
        carrier_hz: env.carrier_hz,
        bandwidth_hz: env.bandwidth_hz,
        n_freq: env.n_freq,
        speed_mps: plan.speed_mps,
        capture_interval_s: plan.capture_interval_s,
        altitude_m: plan.altitude_m,
        environment_seed: env.seed,
    }
}

/// Position actually flown for capture `index` of a flight.
fn jittered(field: &SyntheticField, plan: &FlightPlan, nominal: Point3, ue_id: u32, trial: u32, index: usize) -> Point3 {
    if plan.jitter_sigma_m == 0.0 {
        return nominal;
    }
    let mut rng = SeedHasher::new(domain::JITTER)
        .word(field.env().seed)
        .word(ue_id as u64)
        .word(trial as u64)
        .word(index as u64)
        .rng();
    let normal = Normal::new(0.0, plan.jitter_sigma_m).expect("sigma validated");
    nominal
        + Point3::new(
            normal.sample(&mut rng),
            normal.sample(&mut rng),
            normal.sample(&mut rng),
        )
}

fn fly_schedule(
    plan: &FlightPlan,
    schedule: &CaptureSchedule,
    field: &SyntheticField,
    ue: UeSpec,
    trial: u32,
    options: FlightOptions,
) -> Result<Vec<ChannelRecord>> {
    if !field.env().contains_ground(ue.position) {
        return Err(Error::OutOfBounds(ue.position.to_array()));
    }
    if trial < 1 {
        return Err(Error::InvalidInput("trial numbers start at 1".into()));
    }
    exec::try_map_range(schedule.len(), |index| {
        let nominal = schedule.positions[index];
        let flown = if options.jitter {
            jittered(field, plan, nominal, ue.ue_id, trial, index)
        } else {
            nominal
        };
        let geometry = field.geometry(flown, ue.position)?;
        let mut record = field.sample_channel(&geometry, index, ue.ue_id, trial, options.ports)?;
        // records carry the planned position; the flown one is not observable
        record.ap_position = nominal;
        Ok(record)
    })
}

/// Flies one trajectory for one UE and returns its records.
pub fn fly(
    plan: &FlightPlan,
    field: &SyntheticField,
    ue: UeSpec,
    trial: u32,
    options: FlightOptions,
) -> Result<SoundingDataset> {
    let schedule = plan_captures(plan)?;
    let records = fly_schedule(plan, &schedule, field, ue, trial, options)?;
    SoundingDataset::from_records(dataset_meta(plan, field), records)
}

/// Re-flies the same trajectory for every UE, `trials_per_ue` times each.
pub fn multi_ue_campaign(
    plan: &FlightPlan,
    field: &SyntheticField,
    ues: &[UeSpec],
    trials_per_ue: u32,
    options: FlightOptions,
) -> Result<SoundingDataset> {
    let trials: Vec<u32> = (1..=trials_per_ue).collect();
    campaign_with_trials(plan, field, ues, &trials, options)
}

/// Like [`multi_ue_campaign`] with an explicit list of trial numbers.
pub fn campaign_with_trials(
    plan: &FlightPlan,
    field: &SyntheticField,
    ues: &[UeSpec],
    trials: &[u32],
    options: FlightOptions,
) -> Result<SoundingDataset> {
    if ues.is_empty() {
        return Err(Error::InvalidInput("campaign needs at least one UE".into()));
    }
    let mut seen = BTreeSet::new();
    for ue in ues {
        for &trial in trials {
            if !seen.insert((ue.ue_id, trial)) {
                return Err(Error::DuplicateKey(format!("(ue {}, trial {trial})", ue.ue_id)));
            }
        }
    }
    for ue in ues {
        if !field.env().contains_ground(ue.position) {
            return Err(Error::OutOfBounds(ue.position.to_array()));
        }
    }
    let schedule = plan_captures(plan)?;
    let mut records = Vec::with_capacity(ues.len() * trials.len() * schedule.len());
    for ue in ues {
        for &trial in trials {
            records.extend(fly_schedule(plan, &schedule, field, *ue, trial, options)?);
        }
    }
    SoundingDataset::from_records(dataset_meta(plan, field), records)
}
