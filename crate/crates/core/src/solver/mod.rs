//! Pseudorange positioning: elevation/SNR filtering, iterated (weighted)
//! least squares with one clock column per constellation, HDOP, and the
//! four-method comparison.

pub mod frames;
mod methods;
mod stats;
mod weights;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use methods::{run_methods, EpochResult, Method, MethodOutcome, SolverConfig};
pub use stats::{error_stats, format_table, BucketEdges, ErrorStats};
pub use weights::{snr_elevation_weight, wls_weight, WeightParams};

use frames::{az_el_from_ecef, corrected_range, ecef_to_geodetic, enu_rotation};

/// Maximum Gauss-Newton iterations.
pub const MAX_ITERATIONS: usize = 10;
/// Convergence threshold on the norm of the state update, meters.
pub const STEP_TOLERANCE: f64 = 1e-4;
/// Ratio of smallest to largest singular value below which geometry is singular.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("geometry is singular ({0})")]
    SingularGeometry(String),
    #[error("no convergence after {} iterations", .0.iterations)]
    NoConvergence(Box<PositionSolution>),
    #[error("weight {0} is not positive")]
    InvalidWeight(f64),
    #[error("elevation {0} deg is outside (0, 90]")]
    InvalidElevation(f64),
    #[error("{0} weights supplied for {1} observations")]
    WeightCount(usize, usize),
    #[error("no input")]
    EmptyInput,
    #[error("invalid observation {prn}: {message}")]
    InvalidObservation { prn: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GnssSystem {
    #[serde(rename = "GPS")]
    Gps,
    #[serde(rename = "BDS")]
    Bds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteObservation {
    pub prn: String,
    pub system: GnssSystem,
    /// Transmit-time ECEF position, meters.
    #[serde(rename = "sat_pos_ecef")]
    pub sat_pos: Vector3<f64>,
    #[serde(rename = "pseudorange_m")]
    pub pseudorange: f64,
    #[serde(rename = "snr_dbhz")]
    pub snr: f64,
    #[serde(rename = "azimuth_deg", default, skip_serializing_if = "Option::is_none")]
    pub azimuth: Option<f64>,
    #[serde(rename = "elevation_deg", default, skip_serializing_if = "Option::is_none")]
    pub elevation: Option<f64>,
}

impl SatelliteObservation {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |message: String| SolveError::InvalidObservation {
            prn: self.prn.clone(),
            message,
        };
        if !(self.pseudorange > 1e7 && self.pseudorange < 5e7) {
            return Err(bad(format!("pseudorange {} m outside (1e7, 5e7)", self.pseudorange)));
        }
        if !(0.0..=70.0).contains(&self.snr) {
            return Err(bad(format!("snr {} dB-Hz outside [0, 70]", self.snr)));
        }
        if !self.sat_pos.iter().all(|v| v.is_finite()) {
            return Err(bad("satellite position is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Epoch {
    pub time: f64,
    #[serde(rename = "truth_ecef", default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vector3<f64>>,
    pub observations: Vec<SatelliteObservation>,
}

impl Epoch {
    pub fn validate(&self) -> Result<(), SolveError> {
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.observations {
            o.validate()?;
            if !seen.insert(o.prn.as_str()) {
                return Err(SolveError::InvalidObservation {
                    prn: o.prn.clone(),
                    message: "duplicate PRN in epoch".into(),
                });
            }
        }
        Ok(())
    }

    /// Fills missing azimuth/elevation from an approximate receiver position.
    pub fn fill_az_el(&mut self, receiver: &Vector3<f64>) {
        for o in &mut self.observations {
            if o.azimuth.is_none() || o.elevation.is_none() {
                let ae = az_el_from_ecef(receiver, &o.sat_pos);
                o.azimuth = Some(ae.azimuth);
                o.elevation = Some(ae.elevation);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSolution {
    #[serde(rename = "position_ecef")]
    pub position: Vector3<f64>,
    /// Receiver clock bias per constellation, meters.
    pub clock_bias: BTreeMap<GnssSystem, f64>,
    pub hdop: f64,
    pub used_prns: Vec<String>,
    pub filtered_prns: Vec<String>,
    pub excluded_prns: Vec<String>,
    pub iterations: usize,
    /// Post-fit residuals in the order of `used_prns`, meters.
    pub residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_3d: Option<f64>,
}

fn systems_of(obs: &[SatelliteObservation]) -> Vec<GnssSystem> {
    let mut systems: Vec<GnssSystem> = obs.iter().map(|o| o.system).collect();
    systems.sort();
    systems.dedup();
    systems
}

/// Linearized geometry at `x`: design matrix rows `[-los, clock indicator]`
/// and predicted geometric ranges.
fn design(obs: &[SatelliteObservation], systems: &[GnssSystem], x: &Vector3<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n_unknowns = 3 + systems.len();
    let mut g = DMatrix::zeros(obs.len(), n_unknowns);
    let mut ranges = Vec::with_capacity(obs.len());
    for (i, o) in obs.iter().enumerate() {
        let (range, rotated) = corrected_range(&o.sat_pos, x);
        let los = (rotated - x) / range;
        g[(i, 0)] = -los.x;
        g[(i, 1)] = -los.y;
        g[(i, 2)] = -los.z;
        let col = systems.iter().position(|s| *s == o.system).expect("system present");
        g[(i, 3 + col)] = 1.0;
        ranges.push(range);
    }
    (g, ranges)
}

/// Solves `min ||sqrt(W)(G dx - r)||` and rejects rank-deficient geometry.
fn weighted_step(g: &DMatrix<f64>, r: &DVector<f64>, w: &[f64]) -> Result<DVector<f64>, SolveError> {
    let mut a = g.clone();
    let mut b = r.clone();
    for (i, wi) in w.iter().enumerate() {
        let s = wi.sqrt();
        a.row_mut(i).scale_mut(s);
        b[i] *= s;
    }
    let svd = a.svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(max > 0.0) || min / max < RANK_TOLERANCE {
        return Err(SolveError::SingularGeometry(format!(
            "condition {:.3e} over {} observations",
            if max > 0.0 { min / max } else { 0.0 },
            g.nrows()
        )));
    }
    svd.solve(&b, 0.0)
        .map_err(|e| SolveError::SingularGeometry(e.to_string()))
}

fn check_count(obs: &[SatelliteObservation], systems: &[GnssSystem]) -> Result<(), SolveError> {
    let needed = 3 + systems.len();
    if obs.len() < needed {
        return Err(SolveError::SingularGeometry(format!(
            "{} observations for {needed} unknowns",
            obs.len()
        )));
    }
    Ok(())
}

/// Gauss-Newton core. `initial` is used as is.
fn gauss_newton(obs: &[SatelliteObservation], w: &[f64], initial: &Vector3<f64>) -> Result<PositionSolution, SolveError> {
    let systems = systems_of(obs);
    check_count(obs, &systems)?;
    let mut x = *initial;
    let mut clocks = vec![0.0; systems.len()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (g, ranges) = design(obs, &systems, &x);
        let r = DVector::from_iterator(
            obs.len(),
            obs.iter().zip(&ranges).map(|(o, range)| {
                let col = systems.iter().position(|s| *s == o.system).expect("system present");
                o.pseudorange - range - clocks[col]
            }),
        );
        let dx = weighted_step(&g, &r, w)?;
        x += Vector3::new(dx[0], dx[1], dx[2]);
        for (k, c) in clocks.iter_mut().enumerate() {
            *c += dx[3 + k];
        }
        if dx.norm() < STEP_TOLERANCE {
            converged = true;
            break;
        }
    }

    let (_, ranges) = design(obs, &systems, &x);
    let residuals = obs
        .iter()
        .zip(&ranges)
        .map(|(o, range)| {
            let col = systems.iter().position(|s| *s == o.system).expect("system present");
            o.pseudorange - range - clocks[col]
        })
        .collect();
    let solution = PositionSolution {
        position: x,
        clock_bias: systems.iter().copied().zip(clocks).collect(),
        hdop: hdop(obs, &x)?,
        used_prns: obs.iter().map(|o| o.prn.clone()).collect(),
        filtered_prns: Vec::new(),
        excluded_prns: Vec::new(),
        iterations,
        residuals,
        error_3d: None,
    };
    if converged {
        Ok(solution)
    } else {
        Err(SolveError::NoConvergence(Box::new(solution)))
    }
}

/// Picks a starting point. Positions closer than 1 km to the earth center are
/// treated as unknown and replaced by a bootstrap fix over the
/// highest-elevation satellites (or all of them when elevations are missing).
fn bootstrap(obs: &[SatelliteObservation], w: &[f64], initial: &Vector3<f64>) -> Vector3<f64> {
    if initial.norm() > 1e3 {
        return *initial;
    }
    let systems = systems_of(obs);
    let needed = 3 + systems.len();
    let mut order: Vec<usize> = (0..obs.len()).collect();
    if obs.iter().all(|o| o.elevation.is_some()) {
        order.sort_by(|&a, &b| obs[b].elevation.unwrap().total_cmp(&obs[a].elevation.unwrap()));
        // Keep enough satellites to cover every constellation.
        let mut chosen: Vec<usize> = Vec::new();
        for s in &systems {
            if let Some(&i) = order.iter().find(|&&i| obs[i].system == *s) {
                chosen.push(i);
            }
        }
        for &i in &order {
            if chosen.len() >= needed.max(4) {
                break;
            }
            if !chosen.contains(&i) {
                chosen.push(i);
            }
        }
        order = chosen;
    }
    let subset: Vec<SatelliteObservation> = order.iter().map(|&i| obs[i].clone()).collect();
    let sub_w: Vec<f64> = order.iter().map(|&i| w[i]).collect();
    match gauss_newton(&subset, &sub_w, initial) {
        Ok(s) => s.position,
        Err(SolveError::NoConvergence(s)) => s.position,
        Err(_) => match gauss_newton(obs, w, initial) {
            Ok(s) => s.position,
            Err(SolveError::NoConvergence(s)) => s.position,
            Err(_) => *initial,
        },
    }
}

/// Iterated least squares from `initial` (ECEF meters).
pub fn solve_ls(obs: &[SatelliteObservation], initial: &Vector3<f64>) -> Result<PositionSolution, SolveError> {
    let w = vec![1.0; obs.len()];
    solve_weighted(obs, &w, initial)
}

/// Iterated weighted least squares with diagonal weights.
pub fn solve_wls(obs: &[SatelliteObservation], weights: &[f64], initial: &Vector3<f64>) -> Result<PositionSolution, SolveError> {
    if weights.len() != obs.len() {
        return Err(SolveError::WeightCount(weights.len(), obs.len()));
    }
    if let Some(&bad) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(SolveError::InvalidWeight(bad));
    }
    solve_weighted(obs, weights, initial)
}

fn solve_weighted(obs: &[SatelliteObservation], w: &[f64], initial: &Vector3<f64>) -> Result<PositionSolution, SolveError> {
    if obs.is_empty() {
        return Err(SolveError::SingularGeometry("no observations".into()));
    }
    let start = bootstrap(obs, w, initial);
    gauss_newton(obs, w, &start)
}

/// Horizontal dilution of precision of the unweighted geometry at `x`.
pub fn hdop(obs: &[SatelliteObservation], x: &Vector3<f64>) -> Result<f64, SolveError> {
    let systems = systems_of(obs);
    check_count(obs, &systems)?;
    let (g, _) = design(obs, &systems, x);
    let normal = g.transpose() * &g;
    let q = normal
        .try_inverse()
        .ok_or_else(|| SolveError::SingularGeometry("normal matrix is not invertible".into()))?;
    let q_pos = q.fixed_view::<3, 3>(0, 0).into_owned();
    let r = enu_rotation(&ecef_to_geodetic(x));
    let q_enu = r * q_pos * r.transpose();
    let h = q_enu[(0, 0)] + q_enu[(1, 1)];
    if !(h > 0.0) || !h.is_finite() {
        return Err(SolveError::SingularGeometry(format!("degenerate DOP matrix (trace {h})")));
    }
    Ok(h.sqrt())
}

/// Splits observations into those passing `elevation >= ele_thres` and
/// `snr >= snr_floor`, and the rest. Missing elevations fail the filter.
pub fn elevation_snr_filter(
    obs: &[SatelliteObservation],
    ele_thres: f64,
    snr_floor: f64,
) -> (Vec<SatelliteObservation>, Vec<SatelliteObservation>) {
    obs.iter()
        .cloned()
        .partition(|o| o.elevation.is_some_and(|e| e >= ele_thres) && o.snr >= snr_floor)
}
