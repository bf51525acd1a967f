//! Bounding-box fitting, bus classification, extension to full bus size and
//! extraction of the occluding top edge.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointcloud::{
    euclidean_cluster, Cluster, CloudError, Point3, PointCloud, DEFAULT_MAX_CLUSTER_SIZE,
    DEFAULT_MIN_CLUSTER_SIZE,
};

/// Smallest horizontal extent accepted as a real width, meters.
const MIN_EXTENT: f64 = 1e-6;
/// Relative area slack within which rectangles are compared by fit.
const AREA_TIE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("cluster is degenerate: {0}")]
    DegenerateCluster(String),
    #[error("invalid classifier configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// Nine-parameter box descriptor. Angles in degrees, lengths in meters.
///
/// Only yaw is fitted; roll and pitch are always zero. `yaw` is the heading
/// of the long axis measured counter-clockwise from +x, in `[-90, 90)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbDescriptor {
    pub center: Point3,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub d_len: f64,
    pub d_wid: f64,
    pub d_alt: f64,
}

impl ObbDescriptor {
    pub fn new(center: Point3, yaw: f64, d_len: f64, d_wid: f64, d_alt: f64) -> Self {
        Self {
            center,
            roll: 0.0,
            pitch: 0.0,
            yaw,
            d_len,
            d_wid,
            d_alt,
        }
    }

    /// Unit vectors of the long (`u`) and lateral (`v`) axes in the xy plane.
    pub fn axes(&self) -> (Point3, Point3) {
        let (s, c) = self.yaw.to_radians().sin_cos();
        (Point3::new(c, s, 0.0), Point3::new(-s, c, 0.0))
    }

    pub fn z_min(&self) -> f64 {
        self.center.z - self.d_alt / 2.0
    }

    pub fn z_max(&self) -> f64 {
        self.center.z + self.d_alt / 2.0
    }

    /// Coordinates of `p` along the long axis, lateral axis and z, relative to the center.
    pub fn to_local(&self, p: &Point3) -> Point3 {
        let (u, v) = self.axes();
        let d = *p - self.center;
        Point3::new(d.dot(&u), d.dot(&v), d.z)
    }

    pub fn from_local(&self, p: &Point3) -> Point3 {
        let (u, v) = self.axes();
        self.center + u * p.x + v * p.y + Point3::new(0.0, 0.0, p.z)
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.d_len / 2.0 + tol
            && l.y.abs() <= self.d_wid / 2.0 + tol
            && l.z.abs() <= self.d_alt / 2.0 + tol
    }

    pub fn corners(&self) -> [Point3; 8] {
        let (hl, hw, ha) = (self.d_len / 2.0, self.d_wid / 2.0, self.d_alt / 2.0);
        let mut out = [Point3::ORIGIN; 8];
        for (k, corner) in out.iter_mut().enumerate() {
            let sx = if k & 1 == 0 { -hl } else { hl };
            let sy = if k & 2 == 0 { -hw } else { hw };
            let sz = if k & 4 == 0 { -ha } else { ha };
            *corner = self.from_local(&Point3::new(sx, sy, sz));
        }
        out
    }
}

/// Dimension intervals of the bus classifier and nominal full-size bus dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusClassifierConfig {
    pub len_min: f64,
    pub len_max: f64,
    pub wid_min: f64,
    pub wid_max: f64,
    pub alt_min: f64,
    pub alt_max: f64,
    pub full_len: f64,
    pub full_wid: f64,
    pub full_alt: f64,
}

impl Default for BusClassifierConfig {
    fn default() -> Self {
        Self {
            len_min: 4.0,
            len_max: 13.5,
            wid_min: 1.6,
            wid_max: 3.0,
            alt_min: 2.2,
            alt_max: 4.8,
            full_len: 12.8,
            full_wid: 2.5,
            full_alt: 4.4,
        }
    }
}

impl BusClassifierConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let intervals = [
            ("len", self.len_min, self.len_max),
            ("wid", self.wid_min, self.wid_max),
            ("alt", self.alt_min, self.alt_max),
        ];
        for (name, lo, hi) in intervals {
            if !(lo < hi) {
                return Err(DetectError::InvalidConfig(format!(
                    "{name}_min ({lo}) must be below {name}_max ({hi})"
                )));
            }
        }
        if !(self.full_len > 0.0 && self.full_wid > 0.0 && self.full_alt > 0.0) {
            return Err(DetectError::InvalidConfig(
                "full bus dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Endpoints of the occluding top edge, sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusBoundary3D {
    #[serde(rename = "E")]
    pub e: Point3,
    #[serde(rename = "F")]
    pub f: Point3,
}

/// On-disk form `{"boundaries":[{"E":[x,y,z],"F":[x,y,z]}]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryFile {
    pub boundaries: Vec<BusBoundary3D>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise convex hull (monotone chain), collinear points removed.
pub(crate) fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Extents of `hull` along the direction `theta` (radians) and its normal.
fn extents_at(hull: &[(f64, f64)], theta: f64) -> (f64, f64, f64, f64) {
    let (s, c) = theta.sin_cos();
    let (mut a_lo, mut a_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut b_lo, mut b_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in hull {
        let a = c * x + s * y;
        let b = -s * x + c * y;
        a_lo = a_lo.min(a);
        a_hi = a_hi.max(a);
        b_lo = b_lo.min(b);
        b_hi = b_hi.max(b);
    }
    (a_lo, a_hi, b_lo, b_hi)
}

/// Mean distance of `xy` points to the nearest side of the rectangle at `theta`.
fn edge_gap(xy: &[(f64, f64)], theta: f64, ext: (f64, f64, f64, f64)) -> f64 {
    let (s, c) = theta.sin_cos();
    let (a_lo, a_hi, b_lo, b_hi) = ext;
    let total: f64 = xy
        .iter()
        .map(|&(x, y)| {
            let a = c * x + s * y;
            let b = -s * x + c * y;
            (a - a_lo).min(a_hi - a).min(b - b_lo).min(b_hi - b).max(0.0)
        })
        .sum();
    total / xy.len() as f64
}

/// Wraps an axis direction in degrees into `[-90, 90)`.
pub(crate) fn wrap_axis_deg(deg: f64) -> f64 {
    let w = (deg + 90.0).rem_euclid(180.0) - 90.0;
    if w >= 90.0 {
        w - 180.0
    } else {
        w
    }
}

/// Fits a yaw-only box to a cluster: the horizontal rectangle of minimum area
/// over the cluster's xy projection, and the full z range.
///
/// The minimum-area rectangle has one side collinear with an edge of the
/// convex hull, so every hull edge direction is evaluated exactly. Rectangles
/// within 1% of the minimum area are ranked by the mean distance of the
/// points to their sides.
pub fn fit_bounding_box(cloud: &PointCloud, cluster: &Cluster) -> Result<ObbDescriptor, DetectError> {
    fit_points(cluster.points(cloud))
}

pub(crate) fn fit_points(points: impl Iterator<Item = Point3>) -> Result<ObbDescriptor, DetectError> {
    let mut xy = Vec::new();
    let (mut z_lo, mut z_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        xy.push((p.x, p.y));
        z_lo = z_lo.min(p.z);
        z_hi = z_hi.max(p.z);
    }
    let hull = convex_hull(&xy);
    if hull.len() < 3 {
        return Err(DetectError::DegenerateCluster(format!(
            "{} distinct horizontal points, need 3 non-collinear",
            hull.len()
        )));
    }
    if !(z_hi - z_lo > 0.0) {
        return Err(DetectError::DegenerateCluster("cluster has no vertical extent".into()));
    }

    let candidates: Vec<(f64, f64, (f64, f64, f64, f64))> = (0..hull.len())
        .map(|i| {
            let (p, q) = (hull[i], hull[(i + 1) % hull.len()]);
            let theta = (q.1 - p.1).atan2(q.0 - p.0);
            let ext = extents_at(&hull, theta);
            ((ext.1 - ext.0) * (ext.3 - ext.2), theta, ext)
        })
        .collect();
    let min_area = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    // Among near-minimal rectangles, take the one the points hug most closely.
    let best = candidates
        .iter()
        .filter(|c| c.0 <= min_area * (1.0 + AREA_TIE))
        .map(|&(area, theta, ext)| (edge_gap(&xy, theta, ext), area, theta, ext))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|(_, area, theta, ext)| (area, theta, ext));
    let (_, theta, (a_lo, a_hi, b_lo, b_hi)) = best.expect("hull has edges");
    let (ext_a, ext_b) = (a_hi - a_lo, b_hi - b_lo);
    if ext_a.min(ext_b) < MIN_EXTENT {
        return Err(DetectError::DegenerateCluster(format!(
            "horizontal width {:.3e} m is below {MIN_EXTENT:e} m",
            ext_a.min(ext_b)
        )));
    }

    let (s, c) = theta.sin_cos();
    let (mid_a, mid_b) = ((a_lo + a_hi) / 2.0, (b_lo + b_hi) / 2.0);
    let center = Point3::new(c * mid_a - s * mid_b, s * mid_a + c * mid_b, (z_lo + z_hi) / 2.0);
    let (axis_deg, d_len, d_wid) = if ext_a >= ext_b {
        (theta.to_degrees(), ext_a, ext_b)
    } else {
        (theta.to_degrees() + 90.0, ext_b, ext_a)
    };
    Ok(ObbDescriptor::new(center, wrap_axis_deg(axis_deg), d_len, d_wid, z_hi - z_lo))
}

/// True iff every dimension lies strictly inside its classifier interval.
pub fn classify_bus(obb: &ObbDescriptor, cfg: &BusClassifierConfig) -> bool {
    let inside = |v: f64, lo: f64, hi: f64| v > lo && v < hi;
    inside(obb.d_len, cfg.len_min, cfg.len_max)
        && inside(obb.d_wid, cfg.wid_min, cfg.wid_max)
        && inside(obb.d_alt, cfg.alt_min, cfg.alt_max)
}

fn side_of(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Grows a partially scanned bus box to full bus size.
///
/// The long face and the end nearest the sensor stay fixed, growth goes away
/// from the sensor, and height grows upward from the preserved ground level.
/// Dimensions already larger than the nominal bus are kept, so the result
/// always contains the scanned box.
pub fn extend_to_full_bus(obb: &ObbDescriptor, sensor_origin: &Point3, cfg: &BusClassifierConfig) -> ObbDescriptor {
    let s = obb.to_local(sensor_origin);
    let new_len = obb.d_len.max(cfg.full_len);
    let new_wid = obb.d_wid.max(cfg.full_wid);
    let new_alt = obb.d_alt.max(cfg.full_alt);

    let du = side_of(s.x) * (obb.d_len - new_len) / 2.0;
    let dv = side_of(s.y) * (obb.d_wid - new_wid) / 2.0;
    let (u, v) = obb.axes();
    let mut center = obb.center + u * du + v * dv;
    center.z = obb.z_min() + new_alt / 2.0;
    ObbDescriptor::new(center, obb.yaw, new_len, new_wid, new_alt)
}

/// Top edge of the long face nearest the sensor. `E` is at the negative end
/// of the long axis, `F` at the positive end.
pub fn extract_boundary(extended: &ObbDescriptor, sensor_origin: &Point3) -> BusBoundary3D {
    let s = extended.to_local(sensor_origin);
    let lateral = side_of(s.y) * extended.d_wid / 2.0;
    let top = extended.d_alt / 2.0;
    let half = extended.d_len / 2.0;
    BusBoundary3D {
        e: extended.from_local(&Point3::new(-half, lateral, top)),
        f: extended.from_local(&Point3::new(half, lateral, top)),
    }
}

/// Parameters of the detection pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub r_search: f64,
    pub min_cluster_size: usize,
    pub max_cluster_size: usize,
    /// Drop points below this height before clustering. Disabled when `None`.
    pub ground_z: Option<f64>,
    pub classifier: BusClassifierConfig,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            r_search: 0.5,
            min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE,
            max_cluster_size: DEFAULT_MAX_CLUSTER_SIZE,
            ground_z: None,
            classifier: BusClassifierConfig::default(),
        }
    }
}

/// One detected bus with its intermediate products.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub cluster: Cluster,
    pub scanned: ObbDescriptor,
    pub extended: ObbDescriptor,
    pub boundary: BusBoundary3D,
}

/// Cluster, fit, classify, extend and extract for every bus-like cluster,
/// in descending cluster size. Clusters that cannot be fitted are skipped.
pub fn detect(cloud: &PointCloud, cfg: &DetectionConfig, sensor_origin: &Point3) -> Result<Vec<Detection>, DetectError> {
    cfg.classifier.validate()?;
    let filtered;
    let cloud = match cfg.ground_z {
        Some(z) => {
            filtered = cloud.drop_below(z);
            &filtered
        }
        None => cloud,
    };
    let clusters = euclidean_cluster(cloud, cfg.r_search, cfg.min_cluster_size, cfg.max_cluster_size)?;
    let mut out = Vec::new();
    for cluster in clusters {
        let scanned = match fit_bounding_box(cloud, &cluster) {
            Ok(b) => b,
            Err(e) => {
                log::debug!("skipping cluster of {} points: {e}", cluster.len());
                continue;
            }
        };
        if !classify_bus(&scanned, &cfg.classifier) {
            continue;
        }
        let extended = extend_to_full_bus(&scanned, sensor_origin, &cfg.classifier);
        let boundary = extract_boundary(&extended, sensor_origin);
        out.push(Detection {
            cluster,
            scanned,
            extended,
            boundary,
        });
    }
    Ok(out)
}

pub fn detect_buses(cloud: &PointCloud, cfg: &DetectionConfig, sensor_origin: &Point3) -> Result<Vec<BusBoundary3D>, DetectError> {
    Ok(detect(cloud, cfg, sensor_origin)?.into_iter().map(|d| d.boundary).collect())
}
