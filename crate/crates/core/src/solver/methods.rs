use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{elevation_snr_filter, solve_ls, solve_wls, wls_weight, Epoch, PositionSolution, SatelliteObservation, SolveError, WeightParams};
use crate::exclusion::{exclude_nlos, ExclusionConfig, ExclusionDecision, SkySat};
use crate::skygeom::{AzEl, SatStatus, SkyBoundary};

/// The four compared positioning pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "LS")]
    Ls,
    #[serde(rename = "LS-ESF")]
    LsEsf,
    #[serde(rename = "WLS-ESF")]
    WlsEsf,
    #[serde(rename = "WLS-ESF-NE")]
    WlsEsfNe,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ls, Method::LsEsf, Method::WlsEsf, Method::WlsEsfNe];

    pub fn label(self) -> &'static str {
        match self {
            Method::Ls => "LS",
            Method::LsEsf => "LS-ESF",
            Method::WlsEsf => "WLS-ESF",
            Method::WlsEsfNe => "WLS-ESF-NE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// Filter, weighting and exclusion parameters shared by the methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub ele_thres: f64,
    pub snr_floor: f64,
    pub weights: WeightParams,
    pub exclusion: ExclusionConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            ele_thres: 20.0,
            snr_floor: 28.0,
            weights: WeightParams::default(),
            exclusion: ExclusionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<PositionSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-satellite status in the full pipeline, for reporting and skyplots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatState {
    pub prn: String,
    pub azimuth: f64,
    pub elevation: f64,
    pub snr: f64,
    pub status: SatStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochResult {
    pub time: f64,
    pub outcomes: Vec<MethodOutcome>,
    /// Exclusion decisions for satellites that passed the elevation/SNR filter.
    pub decisions: Vec<ExclusionDecision>,
    pub satellites: Vec<SatState>,
}

impl EpochResult {
    pub fn outcome(&self, method: Method) -> &MethodOutcome {
        self.outcomes.iter().find(|o| o.method == method).expect("every method is recorded")
    }

    pub fn solution(&self, method: Method) -> Option<&PositionSolution> {
        self.outcome(method).solution.as_ref()
    }

    pub fn error_3d(&self, method: Method) -> Option<f64> {
        self.solution(method).and_then(|s| s.error_3d)
    }
}

fn weights_for(obs: &[SatelliteObservation], p: &WeightParams) -> Result<Vec<f64>, SolveError> {
    obs.iter()
        .map(|o| wls_weight(o.elevation.unwrap_or(0.0), o.snr, p))
        .collect()
}

fn prns(obs: &[SatelliteObservation]) -> Vec<String> {
    obs.iter().map(|o| o.prn.clone()).collect()
}

/// Runs LS, LS-ESF, WLS-ESF and WLS-ESF-NE on one epoch. A failing method is
/// recorded with its error and does not affect the others.
pub fn run_methods(epoch: &Epoch, boundaries: &[SkyBoundary], cfg: &SolverConfig, initial: &Vector3<f64>) -> EpochResult {
    let mut epoch = epoch.clone();
    let all = epoch.observations.clone();

    let ls = solve_ls(&all, initial);
    let start = ls.as_ref().map(|s| s.position).unwrap_or(*initial);
    if epoch.observations.iter().any(|o| o.azimuth.is_none() || o.elevation.is_none()) && start.norm() > 1e3 {
        epoch.fill_az_el(&start);
    }
    let (kept, filtered) = elevation_snr_filter(&epoch.observations, cfg.ele_thres, cfg.snr_floor);
    let filtered_prns = prns(&filtered);

    let ls_esf = solve_ls(&kept, &start);
    let wls_esf = weights_for(&kept, &cfg.weights).and_then(|w| solve_wls(&kept, &w, &start));

    let sky: Vec<SkySat> = kept
        .iter()
        .map(|o| SkySat {
            prn: o.prn.clone(),
            az_el: AzEl::new(o.azimuth.unwrap_or(0.0), o.elevation.unwrap_or(0.0)),
            snr: o.snr,
        })
        .collect();
    let exclusion = exclude_nlos(&sky, boundaries, &cfg.exclusion);
    let survivors: Vec<SatelliteObservation> = exclusion.survivors.iter().map(|&i| kept[i].clone()).collect();
    let excluded_prns = exclusion.excluded_prns();
    let wls_esf_ne = weights_for(&survivors, &cfg.weights).and_then(|w| solve_wls(&survivors, &w, &start));

    let truth = epoch.truth;
    let finish = |method: Method, result: Result<PositionSolution, SolveError>, filtered: &[String], excluded: &[String]| {
        match result {
            Ok(mut s) => {
                s.filtered_prns = filtered.to_vec();
                s.excluded_prns = excluded.to_vec();
                s.error_3d = truth.map(|t| (s.position - t).norm());
                MethodOutcome {
                    method,
                    solution: Some(s),
                    error: None,
                }
            }
            Err(e) => MethodOutcome {
                method,
                solution: None,
                error: Some(e.to_string()),
            },
        }
    };

    let outcomes = vec![
        finish(Method::Ls, ls, &[], &[]),
        finish(Method::LsEsf, ls_esf, &filtered_prns, &[]),
        finish(Method::WlsEsf, wls_esf, &filtered_prns, &[]),
        finish(Method::WlsEsfNe, wls_esf_ne, &filtered_prns, &excluded_prns),
    ];

    let satellites = epoch
        .observations
        .iter()
        .map(|o| {
            let status = if filtered_prns.contains(&o.prn) {
                SatStatus::Filtered
            } else if excluded_prns.contains(&o.prn) {
                SatStatus::Excluded
            } else {
                SatStatus::Kept
            };
            SatState {
                prn: o.prn.clone(),
                azimuth: o.azimuth.unwrap_or(f64::NAN),
                elevation: o.elevation.unwrap_or(f64::NAN),
                snr: o.snr,
                status,
            }
        })
        .collect();

    EpochResult {
        time: epoch.time,
        outcomes,
        decisions: exclusion.decisions,
        satellites,
    }
}
