//! WGS84 geodetic conversions, local east/north/up frames and the
//! earth-rotation corrected signal range.

use nalgebra::{Matrix3, Vector3};

use crate::skygeom::{wrap_360, AzEl};

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// Earth rotation rate, rad/s.
pub const OMEGA_E: f64 = 7.292_115_146_7e-5;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;

fn e2() -> f64 {
    WGS84_F * (2.0 - WGS84_F)
}

/// Geodetic latitude and longitude (radians) and ellipsoidal height (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geodetic {
    pub lat: f64,
    pub lon: f64,
    pub height: f64,
}

impl Geodetic {
    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height: f64) -> Self {
        Self {
            lat: lat_deg.to_radians(),
            lon: lon_deg.to_radians(),
            height,
        }
    }
}

pub fn geodetic_to_ecef(g: &Geodetic) -> Vector3<f64> {
    let (slat, clat) = g.lat.sin_cos();
    let (slon, clon) = g.lon.sin_cos();
    let n = WGS84_A / (1.0 - e2() * slat * slat).sqrt();
    Vector3::new(
        (n + g.height) * clat * clon,
        (n + g.height) * clat * slon,
        (n * (1.0 - e2()) + g.height) * slat,
    )
}

pub fn ecef_to_geodetic(p: &Vector3<f64>) -> Geodetic {
    let e2 = e2();
    let rho = p.x.hypot(p.y);
    let lon = if rho == 0.0 { 0.0 } else { p.y.atan2(p.x) };
    let mut lat = p.z.atan2(rho * (1.0 - e2));
    let mut height = 0.0;
    for _ in 0..10 {
        let slat = lat.sin();
        let n = WGS84_A / (1.0 - e2 * slat * slat).sqrt();
        height = if lat.cos().abs() > 1e-10 {
            rho / lat.cos() - n
        } else {
            p.z.abs() / slat.abs() - n * (1.0 - e2)
        };
        let next = p.z.atan2(rho * (1.0 - e2 * n / (n + height)));
        if (next - lat).abs() < 1e-14 {
            lat = next;
            break;
        }
        lat = next;
    }
    Geodetic { lat, lon, height }
}

/// Rotation taking ECEF vectors into east/north/up at the given location.
pub fn enu_rotation(g: &Geodetic) -> Matrix3<f64> {
    let (slat, clat) = g.lat.sin_cos();
    let (slon, clon) = g.lon.sin_cos();
    Matrix3::new(
        -slon, clon, 0.0, //
        -slat * clon, -slat * slon, clat, //
        clat * clon, clat * slon, slat,
    )
}

/// Azimuth/elevation of `target` seen from `receiver`, both ECEF.
pub fn az_el_from_ecef(receiver: &Vector3<f64>, target: &Vector3<f64>) -> AzEl {
    let enu = enu_rotation(&ecef_to_geodetic(receiver)) * (target - receiver);
    let horizontal = enu.x.hypot(enu.y);
    AzEl {
        azimuth: wrap_360(enu.x.atan2(enu.y).to_degrees()),
        elevation: enu.z.atan2(horizontal).to_degrees(),
    }
}

/// ECEF point at `range` meters from `receiver` along `dir`.
pub fn point_along(receiver: &Vector3<f64>, dir: &AzEl, range: f64) -> Vector3<f64> {
    let u = dir.unit_vector();
    let enu = Vector3::new(u.x, u.y, u.z);
    receiver + enu_rotation(&ecef_to_geodetic(receiver)).transpose() * enu * range
}

/// Satellite position rotated by the earth rotation during the signal travel
/// time, so that it is expressed in the ECEF frame at reception.
pub fn sagnac_rotated(sat: &Vector3<f64>, travel_time: f64) -> Vector3<f64> {
    let (s, c) = (OMEGA_E * travel_time).sin_cos();
    Vector3::new(c * sat.x + s * sat.y, -s * sat.x + c * sat.y, sat.z)
}

/// Geometric range from `receiver` to a satellite given at transmit-time
/// ECEF coordinates, including the earth-rotation correction. The travel
/// time is iterated to a fixed point.
pub fn corrected_range(sat: &Vector3<f64>, receiver: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let mut range = (sat - receiver).norm();
    let mut rotated = *sat;
    for _ in 0..4 {
        rotated = sagnac_rotated(sat, range / C_LIGHT);
        let next = (rotated - receiver).norm();
        let done = (next - range).abs() < 1e-9;
        range = next;
        if done {
            break;
        }
    }
    (range, rotated)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geodetic_round_trip() {
        for (lat, lon, h) in [(22.3, 114.17, 30.0), (-45.0, -70.0, 1000.0), (89.9, 10.0, 0.0), (0.0, 180.0, -50.0)] {
            let g = Geodetic::from_degrees(lat, lon, h);
            let back = ecef_to_geodetic(&geodetic_to_ecef(&g));
            assert!((back.lat - g.lat).abs() < 1e-11);
            assert!(crate::skygeom::azimuth_separation(back.lon.to_degrees(), lon) < 1e-9);
            assert!((back.height - h).abs() < 1e-5);
        }
    }

    #[test]
    fn az_el_round_trip_through_ecef() {
        let rx = geodetic_to_ecef(&Geodetic::from_degrees(22.3, 114.17, 10.0));
        for (az, el) in [(0.0, 45.0), (123.0, 10.0), (300.0, 85.0)] {
            let sat = point_along(&rx, &AzEl::new(az, el), 20_200e3);
            let got = az_el_from_ecef(&rx, &sat);
            assert!(crate::skygeom::azimuth_separation(got.azimuth, az) < 1e-9);
            assert!((got.elevation - el).abs() < 1e-9);
        }
    }

    #[test]
    fn sagnac_correction_magnitude() {
        let rx = geodetic_to_ecef(&Geodetic::from_degrees(22.3, 114.17, 10.0));
        let sat = point_along(&rx, &AzEl::new(90.0, 30.0), 22_000e3);
        let (range, _) = corrected_range(&sat, &rx);
        let diff = range - (sat - rx).norm();
        // Earth rotation shifts ranges by at most a few tens of meters.
        assert!(diff.abs() > 1.0 && diff.abs() < 50.0);
    }
}
