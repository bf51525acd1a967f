//! Point clouds, radius search and Euclidean cluster extraction.

mod io;
mod kdtree;

use std::collections::VecDeque;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{parse_csv, parse_pcd, read_cloud, CloudFormat, IngestReport, ParseError};
pub use kdtree::SpatialIndex;

/// Default lower bound on the number of points in a returned cluster.
pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 30;
/// Default upper bound on the number of points in a returned cluster.
pub const DEFAULT_MAX_CLUSTER_SIZE: usize = 50_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("point cloud is empty")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A point in the sensor frame, in meters. x forward/east, y left/north, z up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let d = *self - *other;
        d.dot(&d)
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    /// Rotates the point about the z axis by `angle_deg` (counter-clockwise seen from above).
    pub fn rotate_z(&self, angle_deg: f64) -> Point3 {
        let (s, c) = angle_deg.to_radians().sin_cos();
        Point3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub(crate) fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Point3::new(v[0], v[1], v[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// An unordered scan. The index of a point in `points` is its id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points }
    }

    /// Builds a cloud, dropping points with non-finite coordinates.
    /// Returns the cloud and the number of dropped points.
    pub fn from_points_lossy(points: impl IntoIterator<Item = Point3>) -> (Self, usize) {
        let mut dropped = 0;
        let points = points
            .into_iter()
            .filter(|p| {
                let ok = p.is_finite();
                if !ok {
                    dropped += 1;
                }
                ok
            })
            .collect();
        if dropped > 0 {
            log::warn!("dropped {dropped} points with non-finite coordinates");
        }
        (Self { points }, dropped)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Removes every point with `z < z_min`. Ids of the result are renumbered.
    pub fn drop_below(&self, z_min: f64) -> PointCloud {
        PointCloud::new(self.points.iter().copied().filter(|p| p.z >= z_min).collect())
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }
}

/// A set of point ids into a source cloud, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cluster {
    pub point_ids: Vec<usize>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }

    pub fn points<'a>(&'a self, cloud: &'a PointCloud) -> impl Iterator<Item = Point3> + 'a {
        self.point_ids.iter().map(move |&i| cloud.points[i])
    }
}

pub fn build_spatial_index(cloud: &PointCloud) -> Result<SpatialIndex, CloudError> {
    if cloud.is_empty() {
        return Err(CloudError::EmptyInput);
    }
    Ok(SpatialIndex::build(&cloud.points))
}

/// Connected components of the graph joining points closer than `r_search`
/// (strictly), keeping components with `min_size <= |C| <= max_size`.
///
/// Clusters are ordered by descending size, ties broken by smallest member id.
/// An empty cloud yields no clusters.
pub fn euclidean_cluster(
    cloud: &PointCloud,
    r_search: f64,
    min_size: usize,
    max_size: usize,
) -> Result<Vec<Cluster>, CloudError> {
    if !(r_search > 0.0) || !r_search.is_finite() {
        return Err(CloudError::InvalidParameter(format!(
            "r_search must be positive, got {r_search}"
        )));
    }
    if min_size == 0 || min_size > max_size {
        return Err(CloudError::InvalidParameter(format!(
            "cluster size bounds must satisfy 1 <= min_size <= max_size, got {min_size}..{max_size}"
        )));
    }
    if cloud.is_empty() {
        return Ok(Vec::new());
    }

    let index = SpatialIndex::build(&cloud.points);
    let mut processed = vec![false; cloud.len()];
    let mut frontier = VecDeque::new();
    let mut neighbors = Vec::new();
    let mut clusters = Vec::new();

    for seed in 0..cloud.len() {
        if processed[seed] {
            continue;
        }
        processed[seed] = true;
        frontier.push_back(seed);
        let mut members = Vec::new();
        while let Some(id) = frontier.pop_front() {
            members.push(id);
            neighbors.clear();
            index.within_strict(&cloud.points[id], r_search, &mut neighbors);
            for &n in &neighbors {
                if !processed[n] {
                    processed[n] = true;
                    frontier.push_back(n);
                }
            }
        }
        if members.len() >= min_size && members.len() <= max_size {
            members.sort_unstable();
            clusters.push(Cluster { point_ids: members });
        }
    }

    clusters.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.point_ids[0].cmp(&b.point_ids[0]))
    });
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(center: Point3, n_side: usize, spacing: f64) -> Vec<Point3> {
        let mut pts = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                pts.push(center + Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
            }
        }
        pts
    }

    fn two_blobs() -> PointCloud {
        // 5x10 grids, 50 points each.
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..10 {
                pts.push(Point3::new(i as f64 * 0.2, j as f64 * 0.2, 0.0));
            }
        }
        let a_max_x = 0.8;
        for i in 0..5 {
            for j in 0..10 {
                pts.push(Point3::new(a_max_x + 5.0 + i as f64 * 0.2, j as f64 * 0.2, 0.0));
            }
        }
        PointCloud::new(pts)
    }

    #[test]
    fn separated_blobs_give_two_clusters() {
        let cloud = two_blobs();
        let clusters = euclidean_cluster(&cloud, 0.5, 10, 50_000).unwrap();
        assert_eq!(clusters.len(), 2);
        assert!(clusters.iter().all(|c| c.len() == 50));
    }

    #[test]
    fn large_radius_merges_blobs() {
        let cloud = two_blobs();
        let clusters = euclidean_cluster(&cloud, 6.0, 10, 50_000).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].len(), 100);
    }

    #[test]
    fn boundary_distance_is_not_a_neighbor() {
        let cloud = PointCloud::new(vec![Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0)]);
        let clusters = euclidean_cluster(&cloud, 1.0, 1, 10).unwrap();
        assert_eq!(clusters.len(), 2);
        let clusters = euclidean_cluster(&cloud, 1.0 + 1e-9, 1, 10).unwrap();
        assert_eq!(clusters.len(), 1);
    }

    #[test]
    fn size_bounds_filter_components() {
        let mut pts = blob(Point3::ORIGIN, 3, 0.1); // 9 points
        pts.extend(blob(Point3::new(10.0, 0.0, 0.0), 5, 0.1)); // 25 points
        pts.push(Point3::new(-20.0, 0.0, 0.0)); // singleton
        let cloud = PointCloud::new(pts);
        let clusters = euclidean_cluster(&cloud, 0.15, 2, 20).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].len(), 9);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let cloud = two_blobs();
        assert!(matches!(
            euclidean_cluster(&cloud, 0.0, 1, 10),
            Err(CloudError::InvalidParameter(_))
        ));
        assert!(matches!(
            euclidean_cluster(&cloud, -1.0, 1, 10),
            Err(CloudError::InvalidParameter(_))
        ));
        assert!(matches!(
            euclidean_cluster(&cloud, 1.0, 0, 10),
            Err(CloudError::InvalidParameter(_))
        ));
        assert!(matches!(
            euclidean_cluster(&cloud, 1.0, 11, 10),
            Err(CloudError::InvalidParameter(_))
        ));
    }

    #[test]
    fn ordering_is_by_size_then_smallest_id() {
        let mut pts = blob(Point3::new(50.0, 0.0, 0.0), 2, 0.1); // ids 0..4, size 4
        pts.extend(blob(Point3::ORIGIN, 3, 0.1)); // ids 4..13, size 9
        pts.extend(blob(Point3::new(-50.0, 0.0, 0.0), 2, 0.1)); // ids 13..17, size 4
        let cloud = PointCloud::new(pts);
        let clusters = euclidean_cluster(&cloud, 0.15, 1, 100).unwrap();
        let firsts: Vec<usize> = clusters.iter().map(|c| c.point_ids[0]).collect();
        assert_eq!(firsts, vec![4, 0, 13]);
    }

    #[test]
    fn empty_cloud_has_no_clusters_but_no_index() {
        let cloud = PointCloud::default();
        assert!(euclidean_cluster(&cloud, 1.0, 1, 10).unwrap().is_empty());
        assert_eq!(build_spatial_index(&cloud).unwrap_err(), CloudError::EmptyInput);
    }

    #[test]
    fn lossy_construction_counts_dropped_points() {
        let (cloud, dropped) = PointCloud::from_points_lossy(vec![
            Point3::ORIGIN,
            Point3::new(f64::NAN, 0.0, 0.0),
            Point3::new(0.0, f64::INFINITY, 0.0),
            Point3::new(1.0, 2.0, 3.0),
        ]);
        assert_eq!(dropped, 2);
        assert_eq!(cloud.len(), 2);
    }

    #[test]
    fn drop_below_filters_on_height() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, -2.0),
            Point3::new(0.0, 0.0, -1.0),
            Point3::new(0.0, 0.0, 0.5),
        ]);
        assert_eq!(cloud.drop_below(-1.0).len(), 2);
    }
}
