//! NLOS exclusion of satellites behind detected bus boundaries.
//!
//! A satellite is excluded by a boundary only when every guard passes, in
//! this order:
//!
//! 1. its SNR is at most the SNR threshold (strong signals are trusted);
//! 2. it is at least `theta_thres` away in azimuth from both edge beams;
//! 3. its azimuth lies in the minor-arc sector between `E` and `F`;
//! 4. it lies outside the triangle `E`-zenith-`F` by more than `s_threshold`.
//!
//! Satellites are kept with the first failing guard as the reason.

use serde::{Deserialize, Serialize};

use crate::skygeom::{delta_area, sector_angles, to_sky_point, AzEl, SkyBoundary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExclusionConfig {
    /// Area margin in squared sky units.
    pub s_threshold: f64,
    /// dB-Hz. Satellites above it are never excluded.
    pub snr_threshold: f64,
    /// Degrees of azimuth around each edge beam inside which satellites are kept.
    pub theta_thres: f64,
    /// Slack, in degrees, of the sector-membership test.
    pub sector_tolerance: f64,
}

impl Default for ExclusionConfig {
    fn default() -> Self {
        Self {
            s_threshold: 10.0,
            snr_threshold: 45.0,
            theta_thres: 5.0,
            sector_tolerance: 0.5,
        }
    }
}

impl ExclusionConfig {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("s_threshold", self.s_threshold),
            ("snr_threshold", self.snr_threshold),
            ("theta_thres", self.theta_thres),
            ("sector_tolerance", self.sector_tolerance),
        ];
        for (name, v) in fields {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Kept,
    Excluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    HighSnrGuard,
    EdgeBeamGuard,
    OutsideSector,
    InsideTriangleVisible,
    Blocked,
    /// No boundary was present.
    NoBoundary,
}

/// Per-satellite outcome, serialized as `{prn, verdict, reason, dS, theta1, theta2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionDecision {
    pub prn: String,
    pub verdict: Verdict,
    pub reason: Reason,
    #[serde(rename = "dS")]
    pub delta_s: f64,
    pub theta1: f64,
    pub theta2: f64,
}

/// A satellite as seen by the exclusion test.
#[derive(Debug, Clone, PartialEq)]
pub struct SkySat {
    pub prn: String,
    pub az_el: AzEl,
    pub snr: f64,
}

pub fn is_blocked(prn: &str, sat: &AzEl, snr: f64, b: &SkyBoundary, cfg: &ExclusionConfig) -> ExclusionDecision {
    let angles = sector_angles(sat, b);
    let delta_s = delta_area(&to_sky_point(sat), b);
    let reason = if snr > cfg.snr_threshold {
        Reason::HighSnrGuard
    } else if angles.theta1 < cfg.theta_thres || angles.theta2 < cfg.theta_thres {
        Reason::EdgeBeamGuard
    } else if !angles.in_sector(cfg.sector_tolerance) {
        Reason::OutsideSector
    } else if delta_s <= cfg.s_threshold {
        Reason::InsideTriangleVisible
    } else {
        Reason::Blocked
    };
    ExclusionDecision {
        prn: prn.to_owned(),
        verdict: if reason == Reason::Blocked {
            Verdict::Excluded
        } else {
            Verdict::Kept
        },
        reason,
        delta_s,
        theta1: angles.theta1,
        theta2: angles.theta2,
    }
}

/// Result of running the exclusion over all satellites of an epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExclusionOutcome {
    /// Indices into the input of the surviving satellites.
    pub survivors: Vec<usize>,
    /// One decision per input satellite, same order as the input.
    pub decisions: Vec<ExclusionDecision>,
}

impl ExclusionOutcome {
    pub fn excluded_prns(&self) -> Vec<String> {
        self.decisions
            .iter()
            .filter(|d| d.verdict == Verdict::Excluded)
            .map(|d| d.prn.clone())
            .collect()
    }
}

/// A satellite survives iff every boundary keeps it. The recorded decision is
/// from the first boundary that excludes it, or from the last boundary when
/// none does.
pub fn exclude_nlos(sats: &[SkySat], boundaries: &[SkyBoundary], cfg: &ExclusionConfig) -> ExclusionOutcome {
    let mut out = ExclusionOutcome::default();
    for (i, sat) in sats.iter().enumerate() {
        let mut decision = ExclusionDecision {
            prn: sat.prn.clone(),
            verdict: Verdict::Kept,
            reason: Reason::NoBoundary,
            delta_s: 0.0,
            theta1: 0.0,
            theta2: 0.0,
        };
        for b in boundaries {
            decision = is_blocked(&sat.prn, &sat.az_el, sat.snr, b, cfg);
            if decision.verdict == Verdict::Excluded {
                break;
            }
        }
        if decision.verdict == Verdict::Kept {
            out.survivors.push(i);
        }
        out.decisions.push(decision);
    }
    out
}
