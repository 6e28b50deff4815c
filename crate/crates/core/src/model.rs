//! Problem-instance types, seeded scenario generation and JSON persistence.
//!
//! A [`Scenario`] is immutable once built: device positions and tasks, the
//! UAV hovering positions, radio/energy constants and the UAV budgets. The
//! on-disk form is a versioned JSON document with SI units throughout.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current scenario file schema version.
pub const SCHEMA_VERSION: u64 = 1;

/// Uplink transmit power of every generated device (2.83 mW).
pub const DEFAULT_UPLINK_POWER_W: f64 = 2.83e-3;

/// Effective switched capacitance of every generated device.
pub const DEFAULT_CAPACITANCE: f64 = 1e-28;

/// Positions are rounded to this grid before storage.
const POSITION_QUANTUM_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn horizontal_distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A ground IIoT device with a single task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    pub position: Point,
    /// Task input size, bits.
    pub task_bits: f64,
    /// Task workload, CPU cycles.
    pub task_cycles: f64,
    /// On-chip CPU frequency, Hz. Fixed at the device maximum.
    pub local_freq_hz: f64,
    /// Uplink transmit power, W.
    pub uplink_power_w: f64,
    /// Effective switched capacitance (J·s²/cycle³).
    pub capacitance_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoverPosition {
    pub id: usize,
    pub position: Point,
}

/// How the elevation angle feeding the LoS probability is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElevationConvention {
    /// `atan(H / horizontal distance)`, 90° straight overhead.
    #[default]
    HorizontalDistance,
    /// `atan(H / 3-D distance)`, the literal slant-range form.
    SlantRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub altitude_m: f64,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    pub carrier_hz: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub los_a: f64,
    pub los_b: f64,
    /// Channel power gain at the 1 m reference distance (linear).
    pub ref_gain: f64,
    /// RF-to-DC conversion efficiency, in (0, 1].
    pub eh_efficiency: f64,
    pub cpu_exponent: f64,
    pub elevation_convention: ElevationConvention,
    /// Upper bound on any device's local CPU frequency, Hz.
    pub device_freq_max_hz: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            altitude_m: 10.0,
            bandwidth_hz: 10e6,
            // -60 dBm
            noise_power_w: 1e-9,
            carrier_hz: 2e9,
            eta_los_db: 0.1,
            eta_nlos_db: 21.0,
            los_a: 4.88,
            los_b: 0.49,
            // -30 dB
            ref_gain: 1e-3,
            eh_efficiency: 0.8,
            cpu_exponent: 3.0,
            elevation_convention: ElevationConvention::HorizontalDistance,
            device_freq_max_hz: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavBudget {
    pub cpu_max_hz: f64,
    pub power_max_w: f64,
}

impl Default for UavBudget {
    fn default() -> Self {
        UavBudget {
            cpu_max_hz: 3e6,
            power_max_w: 0.1,
        }
    }
}

/// Tolerances, iteration caps and seeds for the iterative solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stopping tolerance of the connection-management loop, seconds.
    pub eps_inner: f64,
    /// Stopping tolerance of the outer block-coordinate loop, seconds.
    pub eps_outer: f64,
    pub k_max: usize,
    pub r_max: usize,
    /// Base step of the multiplier updates, seconds per unit of normalized residual.
    pub step0: f64,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_inner: 1e-6,
            eps_outer: 1e-10,
            k_max: 100,
            r_max: 200,
            step0: 0.1,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        positive("eps_inner", self.eps_inner)?;
        positive("eps_outer", self.eps_outer)?;
        positive("step0", self.step0)?;
        if self.k_max < 1 {
            return Err(Error::validation("k_max", "must be at least 1"));
        }
        if self.r_max < 1 {
            return Err(Error::validation("r_max", "must be at least 1"));
        }
        Ok(())
    }
}

/// Closed intervals from which task sizes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRanges {
    pub bits: (f64, f64),
    pub cycles: (f64, f64),
}

impl Default for TaskRanges {
    fn default() -> Self {
        TaskRanges {
            bits: (1e5, 1e6),
            cycles: (2e5, 1e6),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub devices: Vec<Device>,
    pub positions: Vec<HoverPosition>,
    pub physics: PhysicsConfig,
    pub budget: UavBudget,
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {v}")))
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<()> {
        positive("altitude_m", self.altitude_m)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("noise_power_w", self.noise_power_w)?;
        positive("carrier_hz", self.carrier_hz)?;
        positive("los_a", self.los_a)?;
        positive("los_b", self.los_b)?;
        positive("ref_gain", self.ref_gain)?;
        positive("device_freq_max_hz", self.device_freq_max_hz)?;
        if !(self.eta_los_db.is_finite() && self.eta_nlos_db.is_finite()) {
            return Err(Error::validation("eta_los_db", "excess attenuations must be finite"));
        }
        if !(self.eh_efficiency > 0.0 && self.eh_efficiency <= 1.0) {
            return Err(Error::validation(
                "eh_efficiency",
                format!("must lie in (0, 1], got {}", self.eh_efficiency),
            ));
        }
        if !(self.cpu_exponent.is_finite() && self.cpu_exponent >= 2.0) {
            return Err(Error::validation(
                "cpu_exponent",
                format!("must be >= 2, got {}", self.cpu_exponent),
            ));
        }
        Ok(())
    }
}

impl UavBudget {
    pub fn validate(&self) -> Result<()> {
        positive("cpu_max_hz", self.cpu_max_hz)?;
        positive("power_max_w", self.power_max_w)
    }
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.devices.len()
    }

    pub fn m(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            return Err(Error::validation("devices", "at least one device is required"));
        }
        if self.positions.is_empty() {
            return Err(Error::validation("positions", "at least one hovering position is required"));
        }
        self.physics.validate()?;
        self.budget.validate()?;
        for (i, d) in self.devices.iter().enumerate() {
            if d.id != i {
                return Err(Error::validation("id", format!("device ids must be dense, found {} at {i}", d.id)));
            }
            if !(d.position.x.is_finite() && d.position.y.is_finite())
                || d.position.x < 0.0
                || d.position.y < 0.0
            {
                return Err(Error::validation(
                    "position",
                    format!("device {i} must lie in the first quadrant"),
                ));
            }
            positive("task_bits", d.task_bits)?;
            positive("task_cycles", d.task_cycles)?;
            positive("local_freq_hz", d.local_freq_hz)?;
            positive("uplink_power_w", d.uplink_power_w)?;
            positive("capacitance_k", d.capacitance_k)?;
            if d.local_freq_hz > self.physics.device_freq_max_hz {
                return Err(Error::validation(
                    "local_freq_hz",
                    format!("device {i} exceeds device_freq_max_hz"),
                ));
            }
        }
        for (j, q) in self.positions.iter().enumerate() {
            if q.id != j {
                return Err(Error::validation("id", format!("position ids must be dense, found {} at {j}", q.id)));
            }
            if !(q.position.x.is_finite() && q.position.y.is_finite()) {
                return Err(Error::validation("position", format!("hover position {j} is not finite")));
            }
        }
        Ok(())
    }
}

fn quantize(v: f64) -> f64 {
    (v / POSITION_QUANTUM_M).round() * POSITION_QUANTUM_M
}

fn check_range(field: &'static str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::validation(
            field,
            format!("range must satisfy 0 < min <= max, got [{lo}, {hi}]"),
        ));
    }
    Ok(())
}

/// Draws a scenario with `n` devices and `m` hovering positions placed
/// uniformly on `[0, side]²`.
///
/// Devices and positions come from two independent ChaCha streams of the
/// same seed, so growing `n` keeps the first devices and every hovering
/// position unchanged.
pub fn generate_scenario(
    n: usize,
    m: usize,
    area_side_m: f64,
    seed: u64,
    physics: PhysicsConfig,
    budget: UavBudget,
    task_ranges: TaskRanges,
) -> Result<Scenario> {
    if n == 0 {
        return Err(Error::validation("n", "must be at least 1"));
    }
    if m == 0 {
        return Err(Error::validation("m", "must be at least 1"));
    }
    if !(area_side_m.is_finite() && area_side_m >= 0.0) {
        return Err(Error::validation("area_side_m", "must be finite and >= 0"));
    }
    check_range("task_bits", task_ranges.bits)?;
    check_range("task_cycles", task_ranges.cycles)?;

    let mut dev_rng = ChaCha8Rng::seed_from_u64(seed);
    dev_rng.set_stream(0);
    let mut pos_rng = ChaCha8Rng::seed_from_u64(seed);
    pos_rng.set_stream(1);

    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| (lo + (hi - lo) * rng.gen::<f64>()).round();

    let local_freq = physics.device_freq_max_hz;
    let devices = (0..n)
        .map(|id| {
            let x = quantize(area_side_m * dev_rng.gen::<f64>());
            let y = quantize(area_side_m * dev_rng.gen::<f64>());
            let task_bits = draw(&mut dev_rng, task_ranges.bits).max(1.0);
            let task_cycles = draw(&mut dev_rng, task_ranges.cycles).max(1.0);
            Device {
                id,
                position: Point::new(x, y),
                task_bits,
                task_cycles,
                local_freq_hz: local_freq,
                uplink_power_w: DEFAULT_UPLINK_POWER_W,
                capacitance_k: DEFAULT_CAPACITANCE,
            }
        })
        .collect();
    let positions = (0..m)
        .map(|id| {
            let x = quantize(area_side_m * pos_rng.gen::<f64>());
            let y = quantize(area_side_m * pos_rng.gen::<f64>());
            HoverPosition {
                id,
                position: Point::new(x, y),
            }
        })
        .collect();

    let scenario = Scenario {
        devices,
        positions,
        physics,
        budget,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Serialize)]
struct ScenarioFileRef<'a> {
    version: u64,
    devices: &'a [Device],
    positions: &'a [HoverPosition],
    physics: &'a PhysicsConfig,
    budget: &'a UavBudget,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[allow(dead_code)]
    version: u64,
    devices: Vec<Device>,
    positions: Vec<HoverPosition>,
    physics: PhysicsConfig,
    budget: UavBudget,
}

impl Scenario {
    pub fn to_json(&self) -> Result<String> {
        let file = ScenarioFileRef {
            version: SCHEMA_VERSION,
            devices: &self.devices,
            positions: &self.positions,
            physics: &self.physics,
            budget: &self.budget,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let version = raw
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::validation("version", "missing or not an unsigned integer"))?;
        if version != SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        let file: ScenarioFile = serde_json::from_value(raw)?;
        let scenario = Scenario {
            devices: file.devices,
            positions: file.positions,
            physics: file.physics,
            budget: file.budget,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = s.to_json()?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    Scenario::from_json(&text)
}
