use serde::{Deserialize, Serialize};

use crate::detection::ObbDescriptor;
use crate::pointcloud::{Point3, PointCloud};
use crate::skygeom::AzEl;

const SLAB_EPS: f64 = 1e-12;

/// A physical box resting in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxPose {
    pub center: Point3,
    /// Heading of the long axis, degrees counter-clockwise from +x.
    pub yaw_deg: f64,
    /// Length, width and height, meters.
    pub dims: [f64; 3],
}

impl BoxPose {
    /// A box of `dims` whose bottom face lies at `ground_z`.
    pub fn on_ground(x: f64, y: f64, ground_z: f64, yaw_deg: f64, dims: [f64; 3]) -> Self {
        Self {
            center: Point3::new(x, y, ground_z + dims[2] / 2.0),
            yaw_deg,
            dims,
        }
    }

    pub fn obb(&self) -> ObbDescriptor {
        ObbDescriptor::new(self.center, self.yaw_deg, self.dims[0], self.dims[1], self.dims[2])
    }
}

/// Parametric entry and exit distances of the ray `origin + t·dir` through
/// the closed box, or `None` when the line misses it.
pub fn ray_box(origin: &Point3, dir: &Point3, obb: &ObbDescriptor) -> Option<(f64, f64)> {
    let o = obb.to_local(origin);
    let (u, v) = obb.axes();
    let d = Point3::new(dir.dot(&u), dir.dot(&v), dir.z);
    let half = [obb.d_len / 2.0, obb.d_wid / 2.0, obb.d_alt / 2.0];
    let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
    for axis in 0..3 {
        let (oa, da, h) = (o.axis(axis), d.axis(axis), half[axis]);
        if da.abs() < 1e-15 {
            if oa < -h - SLAB_EPS || oa > h + SLAB_EPS {
                return None;
            }
            continue;
        }
        let (t1, t2) = ((-h - oa) / da, (h - oa) / da);
        t_near = t_near.max(t1.min(t2));
        t_far = t_far.min(t1.max(t2));
    }
    (t_near <= t_far + SLAB_EPS).then_some((t_near, t_far))
}

/// Distance along the ray to the first surface hit in front of the origin.
fn first_hit(origin: &Point3, dir: &Point3, obb: &ObbDescriptor) -> Option<f64> {
    let (t_near, t_far) = ray_box(origin, dir, obb)?;
    if t_near > 0.0 {
        Some(t_near)
    } else if t_far > 0.0 {
        Some(t_far)
    } else {
        None
    }
}

/// Ray-traced LiDAR scan of `boxes` from `sensor`: one ray per azimuth and
/// elevation step of `angular_res` degrees within the vertical field of view,
/// each keeping its nearest hit.
pub fn synth_scene_cloud(boxes: &[BoxPose], sensor: &Point3, fov: (f64, f64), angular_res: f64) -> PointCloud {
    assert!(angular_res > 0.0, "angular resolution must be positive");
    let obbs: Vec<ObbDescriptor> = boxes.iter().map(BoxPose::obb).collect();
    let n_az = (360.0 / angular_res).round() as usize;
    let n_el = ((fov.1 - fov.0) / angular_res).floor() as usize + 1;
    let mut points = Vec::new();
    for j in 0..n_el {
        let el = fov.0 + j as f64 * angular_res;
        for i in 0..n_az {
            let dir = AzEl::new(i as f64 * angular_res, 0.0);
            let (sa, ca) = dir.azimuth.to_radians().sin_cos();
            let (se, ce) = el.to_radians().sin_cos();
            let ray = Point3::new(ce * sa, ce * ca, se);
            let hit = obbs
                .iter()
                .filter_map(|b| first_hit(sensor, &ray, b))
                .min_by(f64::total_cmp);
            if let Some(t) = hit {
                points.push(*sensor + ray * t);
            }
        }
    }
    PointCloud::new(points)
}

pub fn synth_bus_cloud(bus: &BoxPose, sensor: &Point3, fov: (f64, f64), angular_res: f64) -> PointCloud {
    synth_scene_cloud(std::slice::from_ref(bus), sensor, fov, angular_res)
}

/// Whether the ray from `antenna` toward `sat` (sensor-frame azimuth)
/// touches the closed box.
pub fn occlusion_oracle(sat: &AzEl, bus: &BoxPose, antenna: &Point3) -> bool {
    let dir = sat.unit_vector();
    match ray_box(antenna, &dir, &bus.obb()) {
        Some((_, t_far)) => t_far >= -SLAB_EPS,
        None => false,
    }
}
