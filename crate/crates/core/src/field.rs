//! Synthetic ground-truth channel field.
//!
//! Large-scale gain follows a log-distance law with separate LOS/NLOS
//! exponents, a fixed penetration loss for links blocked by a building, and
//! spatially correlated log-normal shadowing. Small-scale fading is a
//! tapped-delay line with a Rician LOS tap, evaluated at `n_freq` equally
//! spaced frequencies across the sounding bandwidth.
//!
//! Everything is a pure function of the environment seed and the link
//! coordinates; nothing is stored per position.

use crate::channel::{db_to_linear, synthesize_omni, ChannelRecord};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::seed::{domain, SeedHasher};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Random Fourier features used to synthesize the shadowing process.
const SHADOWING_FEATURES: usize = 512;

/// Axis-aligned box obstacle. The box spans `base_m..height_m` vertically, so
/// an overhang or canopy can be modelled with a nonzero base.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub height_m: f64,
    #[serde(default)]
    pub base_m: f64,
}

impl Building {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, height_m: f64) -> Self {
        Building {
            x_min,
            y_min,
            x_max,
            y_max,
            height_m,
            base_m: 0.0,
        }
    }

    pub fn contains(&self, p: Point3) -> bool {
        p.x >= self.x_min
            && p.x <= self.x_max
            && p.y >= self.y_min
            && p.y <= self.y_max
            && p.z >= self.base_m
            && p.z <= self.height_m
    }

    /// Slab test for the closed segment `a -> b` against this box.
    fn intersects_segment(&self, a: Point3, b: Point3) -> bool {
        let lo = [self.x_min, self.y_min, self.base_m];
        let hi = [self.x_max, self.y_max, self.height_m];
        let origin = a.to_array();
        let dir = (b - a).to_array();
        let (mut t_enter, mut t_exit) = (0.0f64, 1.0f64);
        for axis in 0..3 {
            if dir[axis] == 0.0 {
                if origin[axis] < lo[axis] || origin[axis] > hi[axis] {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / dir[axis];
            let mut t0 = (lo[axis] - origin[axis]) * inv;
            let mut t1 = (hi[axis] - origin[axis]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
            if t_enter > t_exit {
                return false;
            }
        }
        true
    }
}

/// Configuration of the synthetic environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentModel {
    /// Extent of the campaign area along x and y, meters.
    pub area_m: [f64; 2],
    pub buildings: Vec<Building>,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    #[serde(rename = "F")]
    pub n_freq: usize,
    pub pathloss_exponent_los: f64,
    pub pathloss_exponent_nlos: f64,
    pub building_penetration_db: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_decorrelation_m: f64,
    /// Rician K of the LOS tap; `inf` gives a pure LOS channel.
    pub rician_k_los_db: f64,
    /// Rician K used for blocked links; `-inf` gives pure Rayleigh fading.
    pub rician_k_nlos_db: f64,
    pub n_multipath_taps: usize,
    pub max_excess_delay_s: f64,
    /// Ports of the receive array. Each port has a cardioid pattern pointing
    /// at azimuth `2*pi*p/ue_ports`; a single port is isotropic.
    pub ue_ports: usize,
    pub seed: u64,
}

impl Default for EnvironmentModel {
    fn default() -> Self {
        EnvironmentModel {
            area_m: [400.0, 200.0],
            buildings: campus_buildings(),
            carrier_hz: 3.5e9,
            bandwidth_hz: 46e6,
            n_freq: 64,
            pathloss_exponent_los: 2.0,
            pathloss_exponent_nlos: 3.5,
            building_penetration_db: 20.0,
            shadowing_sigma_db: 6.0,
            shadowing_decorrelation_m: 25.0,
            rician_k_los_db: 10.0,
            rician_k_nlos_db: f64::NEG_INFINITY,
            n_multipath_taps: 8,
            max_excess_delay_s: 500e-9,
            ue_ports: 8,
            seed: 0,
        }
    }
}

/// Building layout of the default campus-like area (400 m x 200 m).
///
/// The southeast parking lot is closed to the west, north and east and open
/// to the south. The centre is open apart from one block to its east. In the
/// northwest corner a low building has a roof protruding 6 m over the road at
/// 4-5 m height.
pub fn campus_buildings() -> Vec<Building> {
    vec![
        // around the southeast lot
        Building::new(270.0, 40.0, 290.0, 100.0, 25.0),
        Building::new(280.0, 75.0, 385.0, 95.0, 30.0),
        Building::new(360.0, 40.0, 385.0, 75.0, 25.0),
        // east of the open centre
        Building::new(230.0, 85.0, 250.0, 120.0, 30.0),
        // northwest building and its protruding roof
        Building::new(10.0, 140.0, 30.0, 190.0, 15.0),
        Building {
            base_m: 4.0,
            ..Building::new(30.0, 150.0, 36.0, 180.0, 5.0)
        },
        // fill
        Building::new(100.0, 155.0, 140.0, 185.0, 24.0),
        Building::new(120.0, 15.0, 160.0, 45.0, 15.0),
        Building::new(60.0, 60.0, 100.0, 110.0, 25.0),
    ]
}

impl EnvironmentModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidEnvironment(msg.to_string()));
        if !(self.area_m[0] > 0.0 && self.area_m[1] > 0.0) {
            return bad("area extents must be positive");
        }
        if self.n_freq < 1 {
            return bad("F must be at least 1");
        }
        if !(self.carrier_hz > 0.0) || !(self.bandwidth_hz >= 0.0) {
            return bad("carrier must be positive and bandwidth nonnegative");
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return bad("shadowing sigma must be nonnegative");
        }
        if !(self.shadowing_decorrelation_m > 0.0) {
            return bad("decorrelation distance must be positive");
        }
        if self.n_multipath_taps < 1 {
            return bad("at least one multipath tap is required");
        }
        if !(self.max_excess_delay_s >= 0.0) {
            return bad("max excess delay must be nonnegative");
        }
        if self.ue_ports < 1 {
            return bad("at least one UE port is required");
        }
        if self.rician_k_los_db.is_nan() || self.rician_k_nlos_db.is_nan() {
            return bad("K-factors must not be NaN");
        }
        for b in &self.buildings {
            if !(b.x_max >= b.x_min && b.y_max >= b.y_min && b.height_m >= b.base_m) {
                return bad("building box has inverted bounds");
            }
        }
        Ok(())
    }

    pub fn contains_ground(&self, p: Point3) -> bool {
        p.x >= 0.0 && p.x <= self.area_m[0] && p.y >= 0.0 && p.y <= self.area_m[1]
    }

    /// Baseband offsets of the F sounding frequencies from the carrier.
    pub fn frequency_offsets(&self) -> Vec<f64> {
        let f = self.n_freq as f64;
        let step = self.bandwidth_hz / f;
        (0..self.n_freq)
            .map(|i| (i as f64 - (f - 1.0) / 2.0) * step)
            .collect()
    }
}

/// Free-space gain at 1 m, dB.
pub fn friis_reference_db(carrier_hz: f64) -> f64 {
    20.0 * (SPEED_OF_LIGHT / (4.0 * PI * carrier_hz)).log10()
}

/// True iff the 3-D segment from `ap` to `ue` touches any building.
pub fn los_blocked(ap: Point3, ue: Point3, buildings: &[Building]) -> Result<bool> {
    if ap == ue {
        return Err(Error::DegenerateGeometry("AP and UE coincide".into()));
    }
    Ok(buildings.iter().any(|b| b.intersects_segment(ap, ue)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkGeometry {
    pub ap_position: Point3,
    pub ue_position: Point3,
    pub distance_m: f64,
    pub is_los: bool,
}

impl LinkGeometry {
    pub fn new(ap: Point3, ue: Point3, buildings: &[Building]) -> Result<Self> {
        let blocked = los_blocked(ap, ue, buildings)?;
        Ok(LinkGeometry {
            ap_position: ap,
            ue_position: ue,
            distance_m: ap.distance(ue),
            is_los: !blocked,
        })
    }

    /// Azimuth of the AP as seen from the UE, radians.
    pub fn azimuth(&self) -> f64 {
        let d = self.ap_position - self.ue_position;
        d.y.atan2(d.x)
    }
}

/// Which receive port(s) a sampled record represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "port")]
pub enum PortSelection {
    /// Power average over all ports.
    Omni,
    /// One specific port.
    Port(usize),
    /// One port drawn per (UE, trial) flight from the environment seed.
    Random,
}

/// One multipath component: complex amplitude at zero offset frequency and
/// excess delay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap {
    pub amplitude: Complex64,
    pub delay_s: f64,
}

/// Evaluates `sum_n a_n exp(-j 2 pi f tau_n)` at the given frequency offsets.
pub fn transfer_function(taps: &[Tap], freq_offsets_hz: &[f64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); freq_offsets_hz.len()];
    if freq_offsets_hz.is_empty() {
        return out;
    }
    let f0 = freq_offsets_hz[0];
    let uniform_step = uniform_step(freq_offsets_hz);
    for tap in taps {
        match uniform_step {
            Some(step) => {
                // phasor recurrence across the uniform grid
                let mut phasor = tap.amplitude * Complex64::from_polar(1.0, -2.0 * PI * f0 * tap.delay_s);
                let rot = Complex64::from_polar(1.0, -2.0 * PI * step * tap.delay_s);
                for h in out.iter_mut() {
                    *h += phasor;
                    phasor *= rot;
                }
            }
            None => {
                for (h, &f) in out.iter_mut().zip(freq_offsets_hz) {
                    *h += tap.amplitude * Complex64::from_polar(1.0, -2.0 * PI * f * tap.delay_s);
                }
            }
        }
    }
    out
}

fn uniform_step(freqs: &[f64]) -> Option<f64> {
    if freqs.len() < 2 {
        return Some(0.0);
    }
    let step = freqs[1] - freqs[0];
    let uniform = freqs
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
    uniform.then_some(step)
}

fn k_factor_linear(k_db: f64) -> f64 {
    db_to_linear(k_db)
}

/// Fraction of link power carried by the deterministic LOS component.
fn los_fraction(k_db: f64) -> f64 {
    if k_db == f64::INFINITY {
        1.0
    } else if k_db == f64::NEG_INFINITY {
        0.0
    } else {
        let k = k_factor_linear(k_db);
        k / (k + 1.0)
    }
}

/// Spatially correlated log-normal shadowing over link coordinates.
///
/// The process is stationary over the 6-D (AP, UE) coordinate with
/// covariance `sigma^2 exp(-|delta| / d_c)`. It is synthesized by random
/// Fourier features: frequencies drawn from the multivariate Cauchy law that
/// is the spectral density of the exponential kernel.
#[derive(Clone, Debug)]
pub struct ShadowingField {
    frequencies: Vec<[f64; 6]>,
    phases: Vec<f64>,
    amplitude: f64,
}

impl ShadowingField {
    pub fn new(sigma_db: f64, decorrelation_m: f64, seed: u64) -> Self {
        if sigma_db == 0.0 {
            return ShadowingField {
                frequencies: Vec::new(),
                phases: Vec::new(),
                amplitude: 0.0,
            };
        }
        let mut rng = SeedHasher::new(domain::SHADOWING).word(seed).rng();
        let mut frequencies = Vec::with_capacity(SHADOWING_FEATURES);
        let mut phases = Vec::with_capacity(SHADOWING_FEATURES);
        for _ in 0..SHADOWING_FEATURES {
            let chi: f64 = loop {
                let g: f64 = StandardNormal.sample(&mut rng);
                if g != 0.0 {
                    break g.abs();
                }
            };
            let mut omega = [0.0; 6];
            for w in omega.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = z / (chi * decorrelation_m);
            }
            frequencies.push(omega);
            phases.push(rng.random_range(0.0..2.0 * PI));
        }
        ShadowingField {
            frequencies,
            phases,
            amplitude: sigma_db * (2.0 / SHADOWING_FEATURES as f64).sqrt(),
        }
    }

    /// Shadowing of the link `ap <-> ue`, dB.
    pub fn value_db(&self, ap: Point3, ue: Point3) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let x = [ap.x, ap.y, ap.z, ue.x, ue.y, ue.z];
        let sum: f64 = self
            .frequencies
            .iter()
            .zip(&self.phases)
            .map(|(w, &phi)| {
                let arg = w.iter().zip(&x).map(|(wi, xi)| wi * xi).sum::<f64>() + phi;
                arg.cos()
            })
            .sum();
        self.amplitude * sum
    }
}

/// An environment prepared for sampling. Immutable; safe to share across
/// threads.
#[derive(Clone, Debug)]
pub struct SyntheticField {
    env: EnvironmentModel,
    shadowing: ShadowingField,
    freq_offsets: Vec<f64>,
}

impl SyntheticField {
    pub fn new(env: EnvironmentModel) -> Result<Self> {
        env.validate()?;
        let shadowing = ShadowingField::new(env.shadowing_sigma_db, env.shadowing_decorrelation_m, env.seed);
        let freq_offsets = env.frequency_offsets();
        Ok(SyntheticField {
            env,
            shadowing,
            freq_offsets,
        })
    }

    pub fn env(&self) -> &EnvironmentModel {
        &self.env
    }

    pub fn shadowing(&self) -> &ShadowingField {
        &self.shadowing
    }

    pub fn geometry(&self, ap: Point3, ue: Point3) -> Result<LinkGeometry> {
        LinkGeometry::new(ap, ue, &self.env.buildings)
    }

    /// Large-scale gain of a link, dB.
    pub fn mean_gain_db(&self, geometry: &LinkGeometry) -> f64 {
        let env = &self.env;
        let exponent = if geometry.is_los {
            env.pathloss_exponent_los
        } else {
            env.pathloss_exponent_nlos
        };
        let mut gain = friis_reference_db(env.carrier_hz) - 10.0 * exponent * geometry.distance_m.log10();
        if !geometry.is_los {
            gain -= env.building_penetration_db;
        }
        gain + self.shadowing.value_db(geometry.ap_position, geometry.ue_position)
    }

    /// Resolves a port selection to a concrete port for one flight.
    pub fn resolve_port(&self, selection: PortSelection, ue_id: u32, trial: u32) -> Option<usize> {
        match selection {
            PortSelection::Omni => None,
            PortSelection::Port(p) => Some(p),
            PortSelection::Random => {
                let h = SeedHasher::new(domain::PORT_PICK)
                    .word(self.env.seed)
                    .word(ue_id as u64)
                    .word(trial as u64)
                    .finish();
                Some((h % self.env.ue_ports as u64) as usize)
            }
        }
    }

    /// Multipath taps seen by one receive port.
    pub fn port_taps(&self, geometry: &LinkGeometry, port: usize) -> Vec<Tap> {
        let env = &self.env;
        let power = db_to_linear(self.mean_gain_db(geometry));
        let k_db = if geometry.is_los {
            env.rician_k_los_db
        } else {
            env.rician_k_nlos_db
        };
        let los_frac = los_fraction(k_db);
        let n_taps = env.n_multipath_taps;

        let link = |d: u64| {
            SeedHasher::new(d)
                .word(env.seed)
                .float(geometry.ap_position.x)
                .float(geometry.ap_position.y)
                .float(geometry.ap_position.z)
                .float(geometry.ue_position.x)
                .float(geometry.ue_position.y)
                .float(geometry.ue_position.z)
        };

        // delay profile belongs to the link, shared by every port and trial
        let mut delay_rng = link(domain::TAP_DELAYS).rng();
        let delays: Vec<f64> = (0..n_taps)
            .map(|n| {
                if n == 0 || env.max_excess_delay_s == 0.0 {
                    0.0
                } else {
                    delay_rng.random_range(0.0..=env.max_excess_delay_s)
                }
            })
            .collect();

        // small-scale fading is a function of where the drone actually was, so
        // an exact re-flight reproduces the channel and a jittered one does not
        let mut fade_rng = link(domain::FADING).word(port as u64).rng();
        let diffuse_std = ((1.0 - los_frac) * power / n_taps as f64 / 2.0).sqrt();
        let mut taps: Vec<Tap> = delays
            .iter()
            .map(|&delay_s| {
                let re: f64 = StandardNormal.sample(&mut fade_rng);
                let im: f64 = StandardNormal.sample(&mut fade_rng);
                Tap {
                    amplitude: Complex64::new(re, im) * diffuse_std,
                    delay_s,
                }
            })
            .collect();

        if los_frac > 0.0 {
            let pattern = if env.ue_ports >= 2 {
                let boresight = 2.0 * PI * port as f64 / env.ue_ports as f64;
                1.0 + (geometry.azimuth() - boresight).cos()
            } else {
                1.0
            };
            taps[0].amplitude += Complex64::new((los_frac * power * pattern).sqrt(), 0.0);
        }

        // common propagation delay puts the geometric carrier phase on every tap
        let carrier_phase = Complex64::from_polar(
            1.0,
            -2.0 * PI * (env.carrier_hz * geometry.distance_m / SPEED_OF_LIGHT).fract(),
        );
        let bulk_delay = geometry.distance_m / SPEED_OF_LIGHT;
        for tap in taps.iter_mut() {
            tap.amplitude *= carrier_phase;
            tap.delay_s += bulk_delay;
        }
        taps
    }

    /// Transfer function of one port over the sounding band.
    pub fn sample_port(&self, geometry: &LinkGeometry, port: usize) -> Vec<Complex64> {
        transfer_function(&self.port_taps(geometry, port), &self.freq_offsets)
    }

    /// Channel record for one AP position.
    pub fn sample_channel(
        &self,
        geometry: &LinkGeometry,
        ap_index: usize,
        ue_id: u32,
        trial: u32,
        selection: PortSelection,
    ) -> Result<ChannelRecord> {
        let make = |samples| ChannelRecord {
            ap_index,
            ap_position: geometry.ap_position,
            ue_id,
            trial,
            samples,
        };
        let record = match self.resolve_port(selection, ue_id, trial) {
            Some(port) => {
                if port >= self.env.ue_ports {
                    return Err(Error::InvalidInput(format!(
                        "port {port} out of range for {} ports",
                        self.env.ue_ports
                    )));
                }
                make(self.sample_port(geometry, port))
            }
            None => {
                let ports: Vec<ChannelRecord> = (0..self.env.ue_ports)
                    .map(|p| make(self.sample_port(geometry, p)))
                    .collect();
                synthesize_omni(&ports)?
            }
        };
        record.validate()?;
        Ok(record)
    }
}
