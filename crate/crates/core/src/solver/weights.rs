use serde::{Deserialize, Serialize};

use super::SolveError;

/// Parameters of the SNR/elevation variance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightParams {
    /// SNR threshold `T`, dB-Hz. At or above it the factor is 1.
    pub t: f64,
    pub a: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            t: 45.0,
            a: 30.0,
            big_a: 32.0,
            f: 10.0,
        }
    }
}

impl WeightParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.f < self.t) {
            return Err(format!("F ({}) must be below T ({})", self.f, self.t));
        }
        if !(self.a > 0.0 && self.big_a > 0.0) {
            return Err("a and A must be positive".into());
        }
        Ok(())
    }
}

/// Variance factor of a measurement from its SNR and elevation:
///
/// ```text
/// 1                                                                       snr >= T
/// 1/sin²(el) · 10^(-(snr-T)/a) · [ (A / 10^(-(F-T)/a) - 1) · (snr-T)/(F-T) + 1 ]   otherwise
/// ```
///
/// The factor grows as the SNR drops below `T`. The least-squares weight is
/// its reciprocal, see [`wls_weight`].
pub fn snr_elevation_weight(elevation_deg: f64, snr: f64, p: &WeightParams) -> Result<f64, SolveError> {
    if !(elevation_deg > 0.0 && elevation_deg <= 90.0) {
        return Err(SolveError::InvalidElevation(elevation_deg));
    }
    if snr >= p.t {
        return Ok(1.0);
    }
    let sin_el = elevation_deg.to_radians().sin();
    let snr_term = 10f64.powf(-(snr - p.t) / p.a);
    let floor_term = p.big_a / 10f64.powf(-(p.f - p.t) / p.a) - 1.0;
    let bracket = floor_term * (snr - p.t) / (p.f - p.t) + 1.0;
    Ok(snr_term * bracket / (sin_el * sin_el))
}

/// Diagonal weight used by the weighted solver: the inverse variance factor.
pub fn wls_weight(elevation_deg: f64, snr: f64, p: &WeightParams) -> Result<f64, SolveError> {
    Ok(1.0 / snr_elevation_weight(elevation_deg, snr, p)?)
}
