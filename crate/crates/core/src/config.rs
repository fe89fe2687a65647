//! Simulation configuration.
//!
//! The on-disk format is a flat TOML table whose keys are exactly the field
//! names of [`SystemConfig`]. Unknown keys are rejected. Units are SI unless a
//! field name says otherwise (distances to BSs in metres, system separation in
//! km, angles in degrees, powers in watts).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the FP precoder update models the victim-side duct penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DuctPenalty {
    /// Uses the realized duct matrices, the same ones the objective is
    /// evaluated with. Each precoder step is an exact surrogate maximizer.
    #[default]
    Realized,
    /// Uses the expected duct covariance built from the estimated AoDs.
    Statistical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub num_victim_bs: usize,
    pub num_aggressor_bs: usize,
    pub antennas_per_bs: usize,
    pub ues_per_cell: usize,
    pub pilot_len: usize,
    /// Uplink transmit power per UE [W].
    pub ul_power: f64,
    /// Downlink transmit power per BS [W].
    pub dl_power: f64,
    /// Receiver noise power [W].
    pub noise_power: f64,
    pub rician_k: f64,
    /// Linear large-scale gain of the duct, in (0, 1].
    pub duct_loss: f64,
    /// Distance between the two systems [km]. Recorded only; the duct gain is
    /// `duct_loss`.
    pub system_separation: f64,
    /// Hexagon side length [m].
    pub cell_side: f64,
    /// UE exclusion radius around each BS [m].
    pub restricted_radius: f64,
    /// Full width of the AoA/AoD distribution [deg].
    pub angular_spread: f64,
    /// Element spacing over wavelength.
    pub antenna_spacing_ratio: f64,
    /// Guard-period snapshots for AoA estimation; `None` resolves to 10·M.
    pub gp_snapshots: Option<usize>,
    pub shadowing_sigma_db: f64,
    pub rng_seed: u64,
    pub fp_tolerance: f64,
    pub fp_max_iters: usize,
    pub trials: usize,
    /// Require globally distinct pilots (no pilot contamination).
    pub unique_pilots: bool,
    /// Use the literally printed RI scalar in the null-regime estimator.
    pub paper_literal_null_scalar: bool,
    /// One AoA per victim BS and one AoD per aggressor BS instead of one pair
    /// per (victim, aggressor) link.
    pub single_duct_angle: bool,
    /// Bypass root-MUSIC and hand the true duct angles to every consumer.
    pub true_angles: bool,
    pub fp_duct_penalty: DuctPenalty,
    /// Optional uplink power sweep `"start:step:stop"` in dBm.
    pub ul_sweep_dbm: Option<String>,
}

impl Default for SystemConfig {
    /// Full-size parameter set: 50 + 50 BSs, 64 antennas, 7 UEs per cell.
    fn default() -> Self {
        Self {
            num_victim_bs: 50,
            num_aggressor_bs: 50,
            antennas_per_bs: 64,
            ues_per_cell: 7,
            pilot_len: 32,
            ul_power: crate::linalg::dbm_to_watts(14.0),
            dl_power: crate::linalg::dbm_to_watts(40.0),
            noise_power: 1e-14,
            rician_k: 1000.0,
            duct_loss: 1e-13,
            system_separation: 86.0,
            cell_side: 250.0,
            restricted_radius: 20.0,
            angular_spread: 10.0,
            antenna_spacing_ratio: 0.5,
            gp_snapshots: None,
            shadowing_sigma_db: 4.0,
            rng_seed: 0,
            fp_tolerance: 1e-3,
            fp_max_iters: 100,
            trials: 1,
            unique_pilots: false,
            paper_literal_null_scalar: false,
            single_duct_angle: false,
            true_angles: false,
            fp_duct_penalty: DuctPenalty::Realized,
            ul_sweep_dbm: None,
        }
    }
}

impl SystemConfig {
    /// Small layout used by the desk-scale experiments: 2 + 2 BSs, 16
    /// antennas, 3 UEs per cell, a duct strong enough to dominate the
    /// uplink at low power.
    pub fn desk() -> Self {
        Self {
            num_victim_bs: 2,
            num_aggressor_bs: 2,
            antennas_per_bs: 16,
            ues_per_cell: 3,
            duct_loss: 1e-9,
            trials: 200,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn gp_snapshot_count(&self) -> usize {
        self.gp_snapshots.unwrap_or(10 * self.antennas_per_bs)
    }

    pub fn victim_ue_count(&self) -> usize {
        self.num_victim_bs * self.ues_per_cell
    }

    pub fn aggressor_ue_count(&self) -> usize {
        self.num_aggressor_bs * self.ues_per_cell
    }

    /// Number of distinct LoS directions seen at a victim BS.
    pub fn victim_source_count(&self) -> usize {
        if self.single_duct_angle {
            1
        } else {
            self.num_aggressor_bs
        }
    }

    /// Number of distinct LoS directions seen at an aggressor BS.
    pub fn aggressor_source_count(&self) -> usize {
        if self.single_duct_angle {
            1
        } else {
            self.num_victim_bs
        }
    }

    /// Half-width of the duct angle distribution [rad].
    pub fn half_spread_rad(&self) -> f64 {
        self.angular_spread.to_radians() / 2.0
    }

    /// Copy with every defaulted value made explicit.
    pub fn resolved(&self) -> Self {
        Self {
            gp_snapshots: Some(self.gp_snapshot_count()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive_count = |v: usize, field: &'static str| {
            if v == 0 {
                Err(Error::config(field, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive_count(self.num_victim_bs, "num_victim_bs")?;
        positive_count(self.num_aggressor_bs, "num_aggressor_bs")?;
        positive_count(self.ues_per_cell, "ues_per_cell")?;
        positive_count(self.fp_max_iters, "fp_max_iters")?;
        positive_count(self.trials, "trials")?;
        let m = self.antennas_per_bs;
        if m < 2 {
            return Err(Error::config("antennas_per_bs", "M must be at least 2"));
        }
        if self.pilot_len < self.ues_per_cell {
            return Err(Error::config(
                "pilot_len",
                format!(
                    "pilot length {} is shorter than ues_per_cell {}",
                    self.pilot_len, self.ues_per_cell
                ),
            ));
        }
        if self.gp_snapshot_count() < m {
            return Err(Error::config(
                "gp_snapshots",
                format!("P = {} must be at least M = {m}", self.gp_snapshot_count()),
            ));
        }
        if !(self.duct_loss > 0.0 && self.duct_loss <= 1.0) {
            return Err(Error::config("duct_loss", "must lie in (0, 1]"));
        }
        if !(self.angular_spread > 0.0 && self.angular_spread < 180.0) {
            return Err(Error::config("angular_spread", "must lie in (0, 180) degrees"));
        }
        if !(self.ul_power > 0.0 && self.ul_power.is_finite()) {
            return Err(Error::config("ul_power", "must be strictly positive"));
        }
        if !(self.dl_power >= 0.0 && self.dl_power.is_finite()) {
            return Err(Error::config("dl_power", "must be non-negative"));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::config("noise_power", "must be strictly positive"));
        }
        if !(self.rician_k >= 0.0) {
            return Err(Error::config("rician_k", "must be non-negative"));
        }
        if !(self.antenna_spacing_ratio > 0.0 && self.antenna_spacing_ratio <= 0.5) {
            return Err(Error::config(
                "antenna_spacing_ratio",
                "must lie in (0, 0.5] so arcsin inversion is unambiguous",
            ));
        }
        if !(self.cell_side > 0.0) {
            return Err(Error::config("cell_side", "must be strictly positive"));
        }
        let inradius = self.cell_side * 3f64.sqrt() / 2.0;
        if !(self.restricted_radius >= 0.0 && self.restricted_radius < inradius) {
            return Err(Error::config(
                "restricted_radius",
                "must be non-negative and smaller than the hexagon inradius",
            ));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::config("shadowing_sigma_db", "must be non-negative"));
        }
        if !(self.fp_tolerance >= 0.0) {
            return Err(Error::config("fp_tolerance", "must be non-negative"));
        }
        if self.unique_pilots
            && (self.victim_ue_count() > self.pilot_len
                || self.aggressor_ue_count() > self.pilot_len)
        {
            return Err(Error::config(
                "unique_pilots",
                "total UEs per system exceed the pilot length",
            ));
        }
        if !self.true_angles {
            if self.victim_source_count() >= m {
                return Err(Error::config(
                    "num_aggressor_bs",
                    "AoA estimation needs fewer duct directions than antennas",
                ));
            }
            if self.aggressor_source_count() >= m {
                return Err(Error::config(
                    "num_victim_bs",
                    "AoD estimation needs fewer duct directions than antennas",
                ));
            }
        }
        if let Some(s) = &self.ul_sweep_dbm {
            parse_sweep(s)?;
        }
        Ok(())
    }
}

/// Parses `"start:step:stop"` (dBm) into an inclusive grid.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.trim().trim_end_matches("dBm").trim().split(':').collect();
    let bad = || Error::config("ul_sweep_dbm", format!("expected start:step:stop, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let (start, step, stop) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}
