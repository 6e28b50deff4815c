//! Air-to-ground radio quantities for every (device, hovering position) pair.
//!
//! Pathloss follows the suburban LoS/NLoS mixture model: free-space loss plus
//! an excess attenuation, averaged with a sigmoid LoS probability of the
//! elevation angle. The uplink rate is Shannon capacity of the averaged loss
//! and the wireless-power channel gain decays as `g0 / d`.
//!
//! Pathloss values are kept in dB and gains in linear scale; conversions go
//! through [`db_to_linear`] and [`linear_to_db`] only.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ElevationConvention, Point, Scenario};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Slant range between a ground device and the UAV hovering at altitude `h`.
pub fn distance(w: &Point, q: &Point, h: f64) -> f64 {
    let dx = q.x - w.x;
    let dy = q.y - w.y;
    (dx * dx + dy * dy + h * h).sqrt()
}

/// Free-space loss at 1 m for the given carrier.
pub fn free_space_pathloss_db(carrier_hz: f64) -> f64 {
    20.0 * carrier_hz.log10() + 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10()
}

pub fn los_probability(theta_deg: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * (-b * (theta_deg - a)).exp())
}

/// Elevation angle in degrees.
pub fn elevation_deg(w: &Point, q: &Point, h: f64, convention: ElevationConvention) -> f64 {
    match convention {
        ElevationConvention::HorizontalDistance => {
            let horiz = w.horizontal_distance(q);
            if horiz == 0.0 {
                90.0
            } else {
                (h / horiz).atan().to_degrees()
            }
        }
        ElevationConvention::SlantRange => (h / distance(w, q, h)).atan().to_degrees(),
    }
}

pub fn average_pathloss_db(p_los: f64, pl_los_db: f64, pl_nlos_db: f64) -> f64 {
    p_los * pl_los_db + (1.0 - p_los) * pl_nlos_db
}

pub fn uplink_rate_bps(p_tx_w: f64, sigma2_w: f64, pathloss_db: f64, bandwidth_hz: f64) -> f64 {
    let snr = p_tx_w / (sigma2_w * db_to_linear(pathloss_db));
    bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

/// Wireless-power channel gain `g0 / d`; undefined inside the 1 m reference distance.
pub fn channel_gain(g0_linear: f64, dist_m: f64) -> Result<f64> {
    if !(dist_m >= 1.0) {
        return Err(Error::Domain { dist_m });
    }
    Ok(g0_linear / dist_m)
}

/// Per-(device, position) cache of the radio quantities, indexed `[i][j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelTable {
    pub n: usize,
    pub m: usize,
    pub dist_m: Vec<Vec<f64>>,
    pub pathloss_db: Vec<Vec<f64>>,
    pub rate_bps: Vec<Vec<f64>>,
    pub gain: Vec<Vec<f64>>,
}

pub fn build_channel_table(s: &Scenario) -> Result<ChannelTable> {
    let phys = &s.physics;
    let h = phys.altitude_m;
    let lfs = free_space_pathloss_db(phys.carrier_hz);
    let (n, m) = (s.n(), s.m());
    let mut table = ChannelTable {
        n,
        m,
        dist_m: vec![vec![0.0; m]; n],
        pathloss_db: vec![vec![0.0; m]; n],
        rate_bps: vec![vec![0.0; m]; n],
        gain: vec![vec![0.0; m]; n],
    };
    for (i, dev) in s.devices.iter().enumerate() {
        for (j, pos) in s.positions.iter().enumerate() {
            let d = distance(&dev.position, &pos.position, h);
            let spread = lfs + 20.0 * d.log10();
            let theta = elevation_deg(&dev.position, &pos.position, h, phys.elevation_convention);
            let p_los = los_probability(theta, phys.los_a, phys.los_b);
            let pl = average_pathloss_db(p_los, spread + phys.eta_los_db, spread + phys.eta_nlos_db);
            table.dist_m[i][j] = d;
            table.pathloss_db[i][j] = pl;
            table.rate_bps[i][j] =
                uplink_rate_bps(dev.uplink_power_w, phys.noise_power_w, pl, phys.bandwidth_hz);
            table.gain[i][j] = channel_gain(phys.ref_gain, d)?;
        }
    }
    Ok(table)
}

impl ChannelTable {
    /// One row per pair: `device,position,dist_m,pathloss_db,rate_bps,gain`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("device,position,dist_m,pathloss_db,rate_bps,gain\n");
        for i in 0..self.n {
            for j in 0..self.m {
                let _ = writeln!(
                    out,
                    "{i},{j},{:e},{:e},{:e},{:e}",
                    self.dist_m[i][j], self.pathloss_db[i][j], self.rate_bps[i][j], self.gain[i][j]
                );
            }
        }
        out
    }
}
