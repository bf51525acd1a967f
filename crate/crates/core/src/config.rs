use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{BusClassifierConfig, DetectionConfig};
use crate::exclusion::ExclusionConfig;
use crate::pointcloud::{Point3, DEFAULT_MAX_CLUSTER_SIZE, DEFAULT_MIN_CLUSTER_SIZE};
use crate::solver::{BucketEdges, SolverConfig, WeightParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Every tunable of the pipeline. Missing keys take their defaults, unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Area margin of the exclusion test, squared sky units.
    pub s_threshold: f64,
    /// SNR threshold, dB-Hz. Used both by the exclusion guard and as `T` of the weighting.
    pub snr_threshold: f64,
    /// Elevation mask of the filter, degrees.
    pub ele_thres: f64,
    /// Edge-beam guard, degrees.
    pub theta_thres: f64,
    pub a: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    #[serde(rename = "F")]
    pub f: f64,
    /// SNR floor of the filter, dB-Hz.
    pub snr_floor: f64,
    pub sector_tolerance: f64,
    pub r_search: f64,
    pub min_cluster_size: usize,
    pub max_cluster_size: usize,
    pub ground_z: Option<f64>,
    pub classifier: BusClassifierConfig,
    /// Antenna position in the sensor frame, meters.
    pub lever_arm: Point3,
    /// True azimuth of the sensor +y axis, degrees.
    pub heading_deg: f64,
    pub initial_position_ecef: Option<Vector3<f64>>,
    pub buckets: BucketEdges,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = WeightParams::default();
        let x = ExclusionConfig::default();
        Self {
            s_threshold: x.s_threshold,
            snr_threshold: x.snr_threshold,
            ele_thres: 20.0,
            theta_thres: x.theta_thres,
            a: w.a,
            big_a: w.big_a,
            f: w.f,
            snr_floor: 28.0,
            sector_tolerance: x.sector_tolerance,
            r_search: 0.5,
            min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE,
            max_cluster_size: DEFAULT_MAX_CLUSTER_SIZE,
            ground_z: None,
            classifier: BusClassifierConfig::default(),
            lever_arm: Point3::ORIGIN,
            heading_deg: 0.0,
            initial_position_ecef: None,
            buckets: BucketEdges::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.exclusion().validate().map_err(ConfigError::Invalid)?;
        self.weights().validate().map_err(ConfigError::Invalid)?;
        self.classifier
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.r_search > 0.0) {
            return Err(ConfigError::Invalid("r_search must be positive".into()));
        }
        if self.min_cluster_size == 0 || self.min_cluster_size > self.max_cluster_size {
            return Err(ConfigError::Invalid(
                "cluster sizes must satisfy 1 <= min_cluster_size <= max_cluster_size".into(),
            ));
        }
        if !(0.0..90.0).contains(&self.ele_thres) {
            return Err(ConfigError::Invalid("ele_thres must be in [0, 90)".into()));
        }
        let b = &self.buckets;
        if !(b.lt_small <= b.lt_medium) {
            return Err(ConfigError::Invalid("bucket edges must satisfy lt_small <= lt_medium".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> WeightParams {
        WeightParams {
            t: self.snr_threshold,
            a: self.a,
            big_a: self.big_a,
            f: self.f,
        }
    }

    pub fn exclusion(&self) -> ExclusionConfig {
        ExclusionConfig {
            s_threshold: self.s_threshold,
            snr_threshold: self.snr_threshold,
            theta_thres: self.theta_thres,
            sector_tolerance: self.sector_tolerance,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            ele_thres: self.ele_thres,
            snr_floor: self.snr_floor,
            weights: self.weights(),
            exclusion: self.exclusion(),
        }
    }

    pub fn detection(&self) -> DetectionConfig {
        DetectionConfig {
            r_search: self.r_search,
            min_cluster_size: self.min_cluster_size,
            max_cluster_size: self.max_cluster_size,
            ground_z: self.ground_z,
            classifier: self.classifier,
        }
    }

    /// Antenna position in the sensor frame.
    pub fn antenna(&self) -> Point3 {
        self.lever_arm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_reference_parameters() {
        let c = RunConfig::default();
        assert_eq!(
            (c.s_threshold, c.snr_threshold, c.ele_thres, c.theta_thres, c.a, c.big_a, c.f),
            (10.0, 45.0, 20.0, 5.0, 30.0, 32.0, 10.0)
        );
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = RunConfig::from_json(r#"{"ele_thres": 15, "A": 30, "classifier": {"len_min": 5}}"#).unwrap();
        assert_eq!(c.ele_thres, 15.0);
        assert_eq!(c.big_a, 30.0);
        assert_eq!(c.classifier.len_min, 5.0);
        assert_eq!(c.classifier.len_max, 13.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"ele_thresh": 15}"#).is_err());
        assert!(RunConfig::from_json(r#"{"classifier": {"length": 5}}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"s_threshold": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"F": 50}"#).is_err());
        assert!(RunConfig::from_json(r#"{"r_search": -1}"#).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let c = RunConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }
}
