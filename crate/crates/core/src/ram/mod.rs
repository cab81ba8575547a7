//! Reliability, availability and maintainability models for a single
//! satellite and for a constellation with spares.

mod manifest;
mod models;
mod sweep;

pub use manifest::{bundled_manifest, Manifest, ManifestOutput, Section, MANIFEST_NAMES};
pub use models::{
    build_constellation_model, build_single_satellite_model, bundled_model, calibrate_d_u, constellation_text,
    single_satellite_text, CONSTELLATION_CTMC, SATELLITE_CTMC,
};
pub use sweep::{parse_sweep, run_experiment_sweep, SweepRow, SweepSpec, SweepTable};

use crate::error::{Error, Result};

/// Hours in the 15-year design lifetime used throughout the experiments.
pub const LIFETIME: f64 = 129_600.0;

/// Model parameters; times in hours, rates per hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamParams {
    /// Design reliability over one MTBF.
    pub r: f64,
    pub mtbf: f64,
    pub mttr: f64,
    /// Mean time to an unplanned interruption.
    pub t_u: f64,
    /// Mean time to a planned interruption.
    pub t_p: f64,
    /// Unplanned interruption duration.
    pub d_u: f64,
    /// Planned interruption duration.
    pub d_p: f64,
    /// Probability that an on-orbit fault is resolved.
    pub p_b: f64,
    /// Replacement decision time.
    pub t_r: f64,
    /// Manufacture time.
    pub t_d: f64,
    /// Accepted for completeness; not used by the bundled models.
    pub t_e: f64,
    /// Positioning time after launch.
    pub t_k: f64,
    /// Launch success probability.
    pub p_y: f64,
    /// Orbital slots.
    pub n: u32,
    /// Spares.
    pub m: u32,
}

/// Calibrated so availability against planned-interruption duration
/// crosses 0.995 at 16 h.
pub const DEFAULT_D_U: f64 = 4.88;

impl RamParams {
    pub fn single_satellite() -> Self {
        RamParams {
            r: 0.8,
            mtbf: LIFETIME,
            mttr: 24.0,
            t_u: 4320.0,
            t_p: 4320.0,
            d_u: DEFAULT_D_U,
            d_p: 2.0,
            p_b: 0.8,
            t_r: 24.0,
            t_d: 1440.0,
            t_e: 4320.0,
            t_k: 24.0,
            p_y: 0.9,
            n: 1,
            m: 0,
        }
    }

    pub fn constellation() -> Self {
        RamParams {
            mttr: 3600.0,
            n: 24,
            m: 3,
            ..Self::single_satellite()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [("r", self.r), ("p_b", self.p_b), ("p_y", self.p_y)];
        for (name, v) in unit {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Domain(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        let times = [
            ("MTBF", self.mtbf),
            ("MTTR", self.mttr),
            ("t_u", self.t_u),
            ("t_p", self.t_p),
            ("d_u", self.d_u),
            ("d_p", self.d_p),
            ("t_r", self.t_r),
            ("t_d", self.t_d),
            ("t_e", self.t_e),
            ("t_k", self.t_k),
        ];
        for (name, v) in times {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} = {v} must be a positive time")));
            }
        }
        if self.n == 0 {
            return Err(Error::Domain("a constellation needs at least one slot".into()));
        }
        Ok(())
    }

    pub fn rates(&self) -> Result<(f64, f64)> {
        derive_rates(self.r, self.mtbf, self.mttr)
    }
}

/// Failure rate from reliability over one MTBF, repair rate from MTTR.
pub fn derive_rates(r: f64, mtbf: f64, mttr: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("reliability {r} must lie in (0, 1)")));
    }
    if !(mtbf > 0.0 && mttr > 0.0) {
        return Err(Error::Domain(format!("MTBF {mtbf} and MTTR {mttr} must be positive")));
    }
    Ok((-r.ln() / mtbf, 1.0 / mttr))
}

/// Exponential reliability `e^{-λt}`.
pub fn reliability_curve(lambda: f64, t: f64) -> f64 {
    (-lambda * t).exp()
}
