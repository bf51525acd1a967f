//! Skyplot geometry: azimuth/elevation, polar sky coordinates, the sector
//! angles and triangle areas used by the exclusion test, and SVG rendering.
//!
//! Angles are degrees at every public boundary. The skyplot is a polar
//! diagram with the zenith at the origin, radius `90 - elevation` and
//! azimuth clockwise from north, so `x` points east and `y` north.

mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::BusBoundary3D;
use crate::pointcloud::Point3;

pub use svg::{render_skyplot, SatMarker, SatStatus, SVG_SIZE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("direction is undefined: point coincides with the antenna")]
    DegenerateDirection,
    #[error("boundary endpoint at elevation {elevation:.3} deg is not above the antenna")]
    BelowHorizonBoundary { elevation: f64 },
    #[error("boundary endpoints project to the same sky point")]
    DegenerateBoundary,
}

/// Maps any angle in degrees into `[0, 360)`.
pub fn wrap_360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Smallest absolute difference between two azimuths, in `[0, 180]`.
pub fn azimuth_separation(a: f64, b: f64) -> f64 {
    let d = wrap_360(a - b);
    d.min(360.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzEl {
    /// Degrees clockwise from north, `[0, 360)`.
    pub azimuth: f64,
    /// Degrees above the horizon, `[0, 90]`.
    pub elevation: f64,
}

impl AzEl {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self {
            azimuth: wrap_360(azimuth),
            elevation,
        }
    }

    /// Adds a heading to the azimuth, e.g. to go from sensor azimuths to true azimuths.
    pub fn rotated(&self, heading_deg: f64) -> AzEl {
        AzEl::new(self.azimuth + heading_deg, self.elevation)
    }

    /// Unit direction in the east/north/up frame.
    pub fn unit_vector(&self) -> Point3 {
        let (sa, ca) = self.azimuth.to_radians().sin_cos();
        let (se, ce) = self.elevation.to_radians().sin_cos();
        Point3::new(ce * sa, ce * ca, se)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkyPoint {
    pub x: f64,
    pub y: f64,
}

impl SkyPoint {
    pub const ZENITH: SkyPoint = SkyPoint { x: 0.0, y: 0.0 };

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// A bus boundary in skyplot coordinates, with the az/el it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkyBoundary {
    pub e: SkyPoint,
    pub f: SkyPoint,
    pub az_e: f64,
    pub el_e: f64,
    pub az_f: f64,
    pub el_f: f64,
}

impl SkyBoundary {
    pub fn from_az_el(e: AzEl, f: AzEl) -> Result<Self, GeomError> {
        for el in [e.elevation, f.elevation] {
            if !(el > 0.0) {
                return Err(GeomError::BelowHorizonBoundary { elevation: el });
            }
        }
        let (pe, pf) = (to_sky_point(&e), to_sky_point(&f));
        if pe == pf {
            return Err(GeomError::DegenerateBoundary);
        }
        Ok(Self {
            e: pe,
            f: pf,
            az_e: e.azimuth,
            el_e: e.elevation,
            az_f: f.azimuth,
            el_f: f.elevation,
        })
    }
}

/// Azimuth and elevation of `p` seen from `antenna`, both in the sensor frame
/// (+y north, +x east). Points below the antenna are clamped to elevation 0.
pub fn az_el_of_point(p: &Point3, antenna: &Point3) -> Result<AzEl, GeomError> {
    let d = *p - *antenna;
    let horizontal = d.x.hypot(d.y);
    if horizontal == 0.0 && d.z == 0.0 {
        return Err(GeomError::DegenerateDirection);
    }
    let azimuth = wrap_360(d.x.atan2(d.y).to_degrees());
    let mut elevation = d.z.atan2(horizontal).to_degrees();
    if elevation < 0.0 {
        log::debug!("point below antenna (elevation {elevation:.3} deg) clamped to the horizon");
        elevation = 0.0;
    }
    Ok(AzEl { azimuth, elevation })
}

pub fn to_sky_point(a: &AzEl) -> SkyPoint {
    let r = 90.0 - a.elevation;
    let (s, c) = a.azimuth.to_radians().sin_cos();
    SkyPoint { x: r * s, y: r * c }
}

/// Inverse of [`to_sky_point`]. The zenith maps to azimuth 0.
pub fn from_sky_point(p: &SkyPoint) -> AzEl {
    let r = p.radius();
    let azimuth = if r == 0.0 {
        0.0
    } else {
        wrap_360(p.x.atan2(p.y).to_degrees())
    };
    AzEl {
        azimuth,
        elevation: 90.0 - r,
    }
}

/// Projects a 3D boundary into the skyplot. `heading_deg` rotates sensor
/// azimuths into true azimuths (0 when the sensor +y axis points north).
pub fn project_boundary(b: &BusBoundary3D, antenna: &Point3, heading_deg: f64) -> Result<SkyBoundary, GeomError> {
    let mut ends = [AzEl::new(0.0, 0.0); 2];
    for (slot, p) in ends.iter_mut().zip([b.e, b.f]) {
        if !(p.z > antenna.z) {
            let el = az_el_of_point(&p, antenna).map(|a| a.elevation).unwrap_or(0.0);
            let el = if p.z < antenna.z { -el.max(0.0) } else { el };
            return Err(GeomError::BelowHorizonBoundary { elevation: el });
        }
        *slot = az_el_of_point(&p, antenna)?.rotated(heading_deg);
    }
    SkyBoundary::from_az_el(ends[0], ends[1])
}

/// Azimuthal separations used by the exclusion test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorAngles {
    /// Separation between the satellite and `E`.
    pub theta1: f64,
    /// Separation between the satellite and `F`.
    pub theta2: f64,
    /// Separation between `E` and `F`.
    pub angle_eof: f64,
}

impl SectorAngles {
    /// Whether the satellite azimuth lies on the minor arc from `E` to `F`,
    /// allowing `tolerance` degrees of slack.
    pub fn in_sector(&self, tolerance: f64) -> bool {
        self.theta1 + self.theta2 <= self.angle_eof + tolerance && self.angle_eof < 180.0
    }
}

pub fn sector_angles(sat: &AzEl, b: &SkyBoundary) -> SectorAngles {
    SectorAngles {
        theta1: azimuth_separation(sat.azimuth, b.az_e),
        theta2: azimuth_separation(sat.azimuth, b.az_f),
        angle_eof: azimuth_separation(b.az_e, b.az_f),
    }
}

pub fn triangle_area(a: &SkyPoint, b: &SkyPoint, c: &SkyPoint) -> f64 {
    ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs() / 2.0
}

/// `area(SEO) + area(SFO) + area(SEF) - area(EOF)` with `O` the zenith.
/// Zero (up to rounding) iff `S` lies inside or on the triangle `EOF`.
pub fn delta_area(sat: &SkyPoint, b: &SkyBoundary) -> f64 {
    let o = SkyPoint::ZENITH;
    triangle_area(sat, &b.e, &o) + triangle_area(sat, &b.f, &o) + triangle_area(sat, &b.e, &b.f)
        - triangle_area(&b.e, &o, &b.f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn az_el_examples() {
        let a = az_el_of_point(&Point3::new(0.0, 10.0, 10.0), &Point3::ORIGIN).unwrap();
        assert!(close(a.azimuth, 0.0, 1e-12) && close(a.elevation, 45.0, 1e-12));
        let a = az_el_of_point(&Point3::new(10.0, 0.0, 0.0), &Point3::ORIGIN).unwrap();
        assert!(close(a.azimuth, 90.0, 1e-12) && close(a.elevation, 0.0, 1e-12));
        let a = az_el_of_point(&Point3::new(5.0, 5.0, 5.0 * 2f64.sqrt()), &Point3::ORIGIN).unwrap();
        assert!(close(a.azimuth, 45.0, 1e-9) && close(a.elevation, 45.0, 1e-9));
        let a = az_el_of_point(&Point3::new(-1.0, -1.0, 0.0), &Point3::ORIGIN).unwrap();
        assert!(close(a.azimuth, 225.0, 1e-12));
    }

    #[test]
    fn az_el_relative_to_antenna_and_clamped() {
        let antenna = Point3::new(1.0, 1.0, 1.0);
        let a = az_el_of_point(&Point3::new(1.0, 11.0, 11.0), &antenna).unwrap();
        assert!(close(a.elevation, 45.0, 1e-12));
        let below = az_el_of_point(&Point3::new(1.0, 11.0, -5.0), &antenna).unwrap();
        assert_eq!(below.elevation, 0.0);
        assert_eq!(az_el_of_point(&antenna, &antenna), Err(GeomError::DegenerateDirection));
    }

    #[test]
    fn sky_point_examples() {
        let p = to_sky_point(&AzEl::new(0.0, 90.0));
        assert!(close(p.x, 0.0, 1e-12) && close(p.y, 0.0, 1e-12));
        let p = to_sky_point(&AzEl::new(90.0, 0.0));
        assert!(close(p.x, 90.0, 1e-12) && close(p.y, 0.0, 1e-12));
        let p = to_sky_point(&AzEl::new(8.0, 54.0));
        assert!(close(p.x, 36.0 * 8f64.to_radians().sin(), 1e-12));
        assert!(close(p.y, 36.0 * 8f64.to_radians().cos(), 1e-12));
        assert!(close(p.x, 5.010, 1e-3) && close(p.y, 35.650, 1e-3));
    }

    #[test]
    fn project_boundary_mirror_symmetry() {
        let b = BusBoundary3D { e: Point3::new(-6.4, 4.75, 3.0), f: Point3::new(6.4, 4.75, 3.0) };
        let s = project_boundary(&b, &Point3::ORIGIN, 0.0).unwrap();
        assert!(close(s.az_e, wrap_360((-6.4f64).atan2(4.75).to_degrees()), 1e-12));
        assert!(close(s.az_f, 6.4f64.atan2(4.75).to_degrees(), 1e-12));
        assert!(close(s.el_e, s.el_f, 1e-12));
        assert!(close(s.e.x, -s.f.x, 1e-12) && close(s.e.y, s.f.y, 1e-12));
    }

    #[test]
    fn project_boundary_chord_length() {
        // Both ends at elevation 80 deg, azimuths -10 and +10 deg.
        let el = 80f64.to_radians();
        let mk = |az: f64| {
            let az = az.to_radians();
            Point3::new(az.sin(), az.cos(), el.tan())
        };
        let b = BusBoundary3D { e: mk(-10.0), f: mk(10.0) };
        let s = project_boundary(&b, &Point3::ORIGIN, 0.0).unwrap();
        let chord = (s.e.x - s.f.x).hypot(s.e.y - s.f.y);
        assert!(close(chord, 2.0 * 10.0 * 10f64.to_radians().sin(), 1e-9));
    }

    #[test]
    fn project_boundary_rejects_level_endpoint() {
        let b = BusBoundary3D { e: Point3::new(-6.4, 4.75, 0.0), f: Point3::new(6.4, 4.75, 3.0) };
        assert!(matches!(
            project_boundary(&b, &Point3::ORIGIN, 0.0),
            Err(GeomError::BelowHorizonBoundary { .. })
        ));
    }

    #[test]
    fn project_boundary_applies_heading() {
        let b = BusBoundary3D { e: Point3::new(-1.0, 5.0, 3.0), f: Point3::new(1.0, 5.0, 3.0) };
        let s0 = project_boundary(&b, &Point3::ORIGIN, 0.0).unwrap();
        let s90 = project_boundary(&b, &Point3::ORIGIN, 90.0).unwrap();
        assert!(close(s90.az_e, wrap_360(s0.az_e + 90.0), 1e-9));
        assert!(close(s90.el_f, s0.el_f, 1e-12));
    }

    fn boundary(az_e: f64, az_f: f64) -> SkyBoundary {
        SkyBoundary::from_az_el(AzEl::new(az_e, 70.0), AzEl::new(az_f, 70.0)).unwrap()
    }

    #[test]
    fn sector_angle_examples() {
        let b = boundary(352.0, 20.0);
        let a = sector_angles(&AzEl::new(8.0, 54.0), &b);
        assert!(close(a.theta1, 16.0, 1e-9) && close(a.theta2, 12.0, 1e-9) && close(a.angle_eof, 28.0, 1e-9));
        assert!(a.in_sector(0.5));
        let a = sector_angles(&AzEl::new(180.0, 54.0), &b);
        assert!(close(a.theta1, 172.0, 1e-9) && close(a.theta2, 160.0, 1e-9));
        assert!(!a.in_sector(0.5));
    }

    #[test]
    fn sector_angles_match_arc_sweep() {
        // Oracle: step along the minor arc from E to F in 1 degree increments
        // and check which integer azimuths are visited.
        for az_e in (0..360).step_by(7) {
            for span in [1i32, 10, 45, 90, 135, 179] {
                for dir in [1i32, -1] {
                    let az_f = (az_e + dir * span).rem_euclid(360);
                    let on_arc: Vec<i32> = (0..=span).map(|k| (az_e + dir * k).rem_euclid(360)).collect();
                    let b = boundary(az_e as f64, az_f as f64);
                    for sat in 0..360 {
                        let a = sector_angles(&AzEl::new(sat as f64, 40.0), &b);
                        assert!(a.theta1 + a.theta2 >= a.angle_eof - 1e-9);
                        let equal = close(a.theta1 + a.theta2, a.angle_eof, 1e-9);
                        assert_eq!(equal, on_arc.contains(&sat), "E={az_e} F={az_f} sat={sat}");
                    }
                }
            }
        }
    }

    #[test]
    fn delta_area_zero_inside() {
        let b = boundary(352.0, 20.0);
        let centroid = SkyPoint { x: (b.e.x + b.f.x) / 3.0, y: (b.e.y + b.f.y) / 3.0 };
        assert!(delta_area(&centroid, &b).abs() < 1e-9);
        assert!(delta_area(&b.e, &b).abs() < 1e-9);
        assert!(delta_area(&SkyPoint::ZENITH, &b).abs() < 1e-9);
        assert!(delta_area(&to_sky_point(&AzEl::new(8.0, 54.0)), &b) > 10.0);
    }

    /// Barycentric point-in-triangle test for (E, O, F).
    fn inside_barycentric(p: &SkyPoint, b: &SkyBoundary) -> bool {
        let (a, c) = (b.e, b.f);
        let o = SkyPoint::ZENITH;
        let det = (o.y - c.y) * (a.x - c.x) + (c.x - o.x) * (a.y - c.y);
        let l1 = ((o.y - c.y) * (p.x - c.x) + (c.x - o.x) * (p.y - c.y)) / det;
        let l2 = ((c.y - a.y) * (p.x - c.x) + (a.x - c.x) * (p.y - c.y)) / det;
        let l3 = 1.0 - l1 - l2;
        l1 >= 0.0 && l2 >= 0.0 && l3 >= 0.0
    }

    #[test]
    fn delta_area_matches_barycentric_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = SkyBoundary::from_az_el(AzEl::new(300.0, 35.0), AzEl::new(40.0, 50.0)).unwrap();
        let mut mismatches = 0;
        for _ in 0..10_000 {
            let s = SkyPoint { x: rng.random_range(-90.0..90.0), y: rng.random_range(-90.0..90.0) };
            let ds = delta_area(&s, &b);
            assert!(ds >= -1e-9);
            if (ds <= 1e-9) != inside_barycentric(&s, &b) {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn sky_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let a = AzEl::new(rng.random_range(0.0..360.0), rng.random_range(0.0..89.999));
            let back = from_sky_point(&to_sky_point(&a));
            assert!(azimuth_separation(a.azimuth, back.azimuth) < 1e-9);
            assert!(close(a.elevation, back.elevation, 1e-9));
        }
    }

    #[test]
    fn delta_area_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let e = AzEl::new(rng.random_range(0.0..360.0), rng.random_range(5.0..80.0));
            let f = AzEl::new(rng.random_range(0.0..360.0), rng.random_range(5.0..80.0));
            let s = AzEl::new(rng.random_range(0.0..360.0), rng.random_range(0.0..90.0));
            let rot: f64 = rng.random_range(0.0..360.0);
            let Ok(b) = SkyBoundary::from_az_el(e, f) else { continue };
            let rb = SkyBoundary::from_az_el(e.rotated(rot), f.rotated(rot)).unwrap();
            let d0 = delta_area(&to_sky_point(&s), &b);
            let d1 = delta_area(&to_sky_point(&s.rotated(rot)), &rb);
            assert!(close(d0, d1, 1e-8 * (1.0 + d0.abs())));
        }
    }
}
