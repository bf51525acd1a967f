//! Synthetic scenes and epochs: ray-traced LiDAR scans of boxes, exact
//! ray/box occlusion, and pseudorange synthesis with NLOS delays.

mod raycast;

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use raycast::{occlusion_oracle, ray_box, synth_bus_cloud, synth_scene_cloud, BoxPose};

use crate::config::RunConfig;
use crate::detection::{detect_buses, extract_boundary, BusBoundary3D, DetectError};
use crate::pointcloud::{Point3, PointCloud};
use crate::skygeom::{project_boundary, AzEl, GeomError, SkyBoundary};
use crate::solver::frames::{az_el_from_ecef, corrected_range, geodetic_to_ecef, point_along, Geodetic};
use crate::solver::{error_stats, format_table, run_methods, Epoch, EpochResult, ErrorStats, GnssSystem, Method, SatelliteObservation};

/// Nominal orbit radius used to place GPS satellites along their direction, meters.
pub const GPS_RANGE_M: f64 = 20_200e3;
/// Nominal range for BDS MEO satellites, meters.
pub const BDS_RANGE_M: f64 = 21_500e3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// True receiver position, geodetic or ECEF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Receiver {
    Geodetic { lat_deg: f64, lon_deg: f64, height_m: f64 },
    Ecef { ecef: Vector3<f64> },
}

impl Receiver {
    pub fn ecef(&self) -> Vector3<f64> {
        match *self {
            Receiver::Geodetic { lat_deg, lon_deg, height_m } => geodetic_to_ecef(&Geodetic::from_degrees(lat_deg, lon_deg, height_m)),
            Receiver::Ecef { ecef } => ecef,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatSpec {
    pub prn: String,
    pub system: GnssSystem,
    /// True azimuth, degrees clockwise from north.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_deg: Option<f64>,
    /// Explicit position, overriding azimuth and elevation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sat_pos_ecef: Option<Vector3<f64>>,
    pub snr_dbhz: f64,
    /// Ground distance to the reflector, used when the direct path is blocked.
    #[serde(default)]
    pub reflector_distance_m: f64,
    /// Constant range error added on every epoch, meters.
    #[serde(default)]
    pub bias_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarSpec {
    pub min_el: f64,
    pub max_el: f64,
    pub angular_res: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        Self {
            min_el: -30.0,
            max_el: 10.0,
            angular_res: 0.25,
        }
    }
}

/// Where the exclusion boundaries of a scenario come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySource {
    /// Scan the boxes and run bus detection.
    #[default]
    Detect,
    /// Take the near top edge of every box directly.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub receiver: Receiver,
    /// True azimuth of the sensor +y axis, degrees.
    pub heading_deg: f64,
    /// Antenna position in the sensor frame, meters.
    pub lever_arm: Point3,
    pub boxes: Vec<BoxPose>,
    pub satellites: Vec<SatSpec>,
    /// Receiver clock bias per constellation, meters.
    pub clock_bias_m: BTreeMap<GnssSystem, f64>,
    pub noise_sigma_m: f64,
    /// NLOS delay per meter of reflector distance.
    pub nlos_gain: f64,
    pub seed: u64,
    pub lidar: LidarSpec,
    pub boundary_source: BoundarySource,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            receiver: Receiver::Geodetic {
                lat_deg: 22.3,
                lon_deg: 114.17,
                height_m: 20.0,
            },
            heading_deg: 0.0,
            lever_arm: Point3::ORIGIN,
            boxes: Vec::new(),
            satellites: Vec::new(),
            clock_bias_m: BTreeMap::new(),
            noise_sigma_m: 2.0,
            nlos_gain: 1.0,
            seed: 0,
            lidar: LidarSpec::default(),
            boundary_source: BoundarySource::Detect,
        }
    }
}

/// A satellite at its resolved position, with its blockage state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedSat {
    pub spec: SatSpec,
    pub position: Vector3<f64>,
    pub az_el: AzEl,
    pub blocked: bool,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if !(self.noise_sigma_m >= 0.0) {
            return bad("noise_sigma_m must be >= 0".into());
        }
        if !(self.nlos_gain >= 0.0) {
            return bad("nlos_gain must be >= 0".into());
        }
        let l = &self.lidar;
        if !(l.angular_res > 0.0) || !(l.min_el < l.max_el) {
            return bad("lidar needs angular_res > 0 and min_el < max_el".into());
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if !b.dims.iter().all(|d| *d > 0.0) {
                return bad(format!("box {i} has non-positive dimensions"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.satellites {
            if !seen.insert(s.prn.as_str()) {
                return bad(format!("duplicate satellite {}", s.prn));
            }
            if !(s.reflector_distance_m >= 0.0) {
                return bad(format!("{}: reflector_distance_m must be >= 0", s.prn));
            }
            if s.sat_pos_ecef.is_none() {
                match (s.azimuth_deg, s.elevation_deg) {
                    (Some(_), Some(el)) if el > 0.0 && el <= 90.0 => {}
                    (Some(_), Some(el)) => return bad(format!("{}: elevation {el} outside (0, 90]", s.prn)),
                    _ => return bad(format!("{}: needs azimuth and elevation or sat_pos_ecef", s.prn)),
                }
            }
        }
        Ok(())
    }

    pub fn truth_ecef(&self) -> Vector3<f64> {
        self.receiver.ecef()
    }

    /// Resolves every satellite position and tests its direct path against the boxes.
    pub fn placed_satellites(&self) -> Vec<PlacedSat> {
        let rx = self.truth_ecef();
        self.satellites
            .iter()
            .map(|spec| {
                let (position, az_el) = match spec.sat_pos_ecef {
                    Some(p) => (p, az_el_from_ecef(&rx, &p)),
                    None => {
                        let dir = AzEl::new(spec.azimuth_deg.unwrap_or(0.0), spec.elevation_deg.unwrap_or(90.0));
                        let range = match spec.system {
                            GnssSystem::Gps => GPS_RANGE_M,
                            GnssSystem::Bds => BDS_RANGE_M,
                        };
                        (point_along(&rx, &dir, range), dir)
                    }
                };
                let sensor_dir = az_el.rotated(-self.heading_deg);
                let blocked = self.boxes.iter().any(|b| occlusion_oracle(&sensor_dir, b, &self.lever_arm));
                PlacedSat {
                    spec: spec.clone(),
                    position,
                    az_el,
                    blocked,
                }
            })
            .collect()
    }

    /// Scan of the scene from the sensor origin.
    pub fn scan(&self) -> PointCloud {
        let l = &self.lidar;
        synth_scene_cloud(&self.boxes, &Point3::ORIGIN, (l.min_el, l.max_el), l.angular_res)
    }

    /// Occluder top edges in the sensor frame, from detection or from the true boxes.
    pub fn boundaries(&self, cfg: &RunConfig) -> Result<Vec<BusBoundary3D>, SimError> {
        Ok(match self.boundary_source {
            BoundarySource::Truth => self.boxes.iter().map(|b| extract_boundary(&b.obb(), &Point3::ORIGIN)).collect(),
            BoundarySource::Detect => detect_buses(&self.scan(), &cfg.detection(), &Point3::ORIGIN)?,
        })
    }

    /// Skyplot boundaries seen from the antenna, in true azimuths.
    pub fn sky_boundaries(&self, cfg: &RunConfig) -> Result<Vec<SkyBoundary>, SimError> {
        let mut out = Vec::new();
        for b in self.boundaries(cfg)? {
            out.push(project_boundary(&b, &self.lever_arm, self.heading_deg)?);
        }
        Ok(out)
    }
}

/// Epoch `index` of the scenario. Noise is drawn from a generator seeded with
/// `seed + index`, so each epoch is reproducible on its own.
pub fn synth_epoch(s: &Scenario, index: usize) -> Result<Epoch, SimError> {
    s.validate()?;
    Ok(synth_epoch_placed(s, &s.placed_satellites(), index))
}

fn synth_epoch_placed(s: &Scenario, placed: &[PlacedSat], index: usize) -> Epoch {
    let rx = s.truth_ecef();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(index as u64));
    let noise = Normal::new(0.0, s.noise_sigma_m).expect("sigma validated non-negative");
    let observations = placed
        .iter()
        .map(|p| {
            let clock = s.clock_bias_m.get(&p.spec.system).copied().unwrap_or(0.0);
            let nlos = if p.blocked { s.nlos_gain * p.spec.reflector_distance_m } else { 0.0 };
            let e = noise.sample(&mut rng);
            SatelliteObservation {
                prn: p.spec.prn.clone(),
                system: p.spec.system,
                sat_pos: p.position,
                pseudorange: corrected_range(&p.position, &rx).0 + clock + e + p.spec.bias_m + nlos,
                snr: p.spec.snr_dbhz,
                azimuth: Some(p.az_el.azimuth),
                elevation: Some(p.az_el.elevation),
            }
        })
        .collect();
    Epoch {
        time: index as f64,
        truth: Some(rx),
        observations,
    }
}

/// Per-epoch figures of a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub index: usize,
    pub error_3d: BTreeMap<Method, Option<f64>>,
    pub hdop: BTreeMap<Method, Option<f64>>,
    pub used: BTreeMap<Method, usize>,
    pub excluded_prns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub epochs: usize,
    /// Satellites whose direct path is blocked by a box.
    pub blocked_prns: Vec<String>,
    pub boundaries: Vec<BusBoundary3D>,
    /// Error statistics per method; `None` for an empty run.
    pub stats: BTreeMap<Method, Option<ErrorStats>>,
    pub per_epoch: Vec<EpochSummary>,
    pub table: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub epochs: Vec<Epoch>,
    pub results: Vec<EpochResult>,
    pub report: ScenarioReport,
}

/// Generates `epochs` epochs and compares the four methods on them.
pub fn run_scenario(s: &Scenario, epochs: usize, cfg: &RunConfig) -> Result<ScenarioRun, SimError> {
    s.validate()?;
    cfg.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
    let placed = s.placed_satellites();
    let boundaries = s.boundaries(cfg)?;
    let sky = boundaries
        .iter()
        .map(|b| project_boundary(b, &s.lever_arm, s.heading_deg))
        .collect::<Result<Vec<_>, _>>()?;
    let solver_cfg = cfg.solver();
    let initial = cfg.initial_position_ecef.unwrap_or_else(Vector3::zeros);

    let mut all_epochs = Vec::with_capacity(epochs);
    let mut results = Vec::with_capacity(epochs);
    let mut per_epoch = Vec::with_capacity(epochs);
    for index in 0..epochs {
        let epoch = synth_epoch_placed(s, &placed, index);
        let result = run_methods(&epoch, &sky, &solver_cfg, &initial);
        let pick = |f: &dyn Fn(&EpochResult, Method) -> Option<f64>| Method::ALL.iter().map(|&m| (m, f(&result, m))).collect();
        per_epoch.push(EpochSummary {
            index,
            error_3d: pick(&|r, m| r.error_3d(m)),
            hdop: pick(&|r, m| r.solution(m).map(|s| s.hdop)),
            used: Method::ALL
                .iter()
                .map(|&m| (m, result.solution(m).map_or(0, |s| s.used_prns.len())))
                .collect(),
            excluded_prns: result.solution(Method::WlsEsfNe).map(|s| s.excluded_prns.clone()).unwrap_or_default(),
        });
        all_epochs.push(epoch);
        results.push(result);
    }

    let mut stats = BTreeMap::new();
    for m in Method::ALL {
        let errors: Vec<Option<f64>> = results.iter().map(|r| r.error_3d(m)).collect();
        stats.insert(m, error_stats(&errors, &cfg.buckets).ok());
    }
    let columns: Vec<(&str, ErrorStats)> = Method::ALL
        .iter()
        .filter_map(|m| stats[m].map(|s| (m.label(), s)))
        .collect();
    let table = if columns.is_empty() { String::new() } else { format_table(&columns, &cfg.buckets) };

    let report = ScenarioReport {
        epochs,
        blocked_prns: placed.iter().filter(|p| p.blocked).map(|p| p.spec.prn.clone()).collect(),
        boundaries,
        stats,
        per_epoch,
        table,
    };
    Ok(ScenarioRun {
        epochs: all_epochs,
        results,
        report,
    })
}
