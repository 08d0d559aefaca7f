//! Shoe-box rooms, poses, and image-source enumeration.
//!
//! Surfaces are indexed `0..6` as (x = 0, x = lx, y = 0, y = ly, z = 0,
//! z = lz), i.e. west, east, south, north, floor, ceiling. An image source is
//! identified by its lattice index `(i, j, k)`; its reflection order is
//! `|i| + |j| + |k|`.
//!
//! Angles follow one convention throughout the crate: azimuth is measured in
//! the local x–y plane from local +x toward local +y and lies in `[0, 2π)`;
//! elevation is measured from that plane toward local +z and lies in
//! `[-π/2, π/2]`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::SurfaceProfile;

pub type Vec3 = Vector3<f64>;

/// Minimum distance between any source or microphone and any wall.
pub const WALL_INSET: f64 = 0.05;

pub const SURFACE_NAMES: [&str; 6] = ["west", "east", "south", "north", "floor", "ceiling"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub dims: [f64; 3],
    pub surfaces: [SurfaceProfile; 6],
}

impl Room {
    pub fn new(dims: [f64; 3], surfaces: [SurfaceProfile; 6]) -> Result<Self> {
        let room = Room { dims, surfaces };
        room.validate()?;
        Ok(room)
    }

    /// A room whose six surfaces share one frequency-flat absorption value.
    pub fn uniform(dims: [f64; 3], alpha: f64) -> Result<Self> {
        let profile = SurfaceProfile::flat(alpha)?;
        Room::new(dims, [profile; 6])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "room dimensions must be positive, got {:?}",
                self.dims
            )));
        }
        for s in &self.surfaces {
            s.validate()?;
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface_area(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }

    /// Area of each of the six surfaces, in surface-index order.
    pub fn surface_areas(&self) -> [f64; 6] {
        let [x, y, z] = self.dims;
        [y * z, y * z, x * z, x * z, x * y, x * y]
    }

    pub fn min_dim(&self) -> f64 {
        self.dims.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &Vec3, margin: f64) -> bool {
        (0..3).all(|a| p[a] >= margin && p[a] <= self.dims[a] - margin)
    }
}

/// Volume and total surface area of the room.
pub fn room_labels(room: &Room) -> (f64, f64) {
    (room.volume(), room.surface_area())
}

/// Yaw–pitch–roll orientation, radians. Yaw turns the local +x axis about
/// world +z, pitch raises it toward +z, roll spins about it, so a pose with
/// `yaw = a, pitch = e` points its boresight at azimuth `a`, elevation `e`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Orientation {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Orientation {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Orientation { yaw, pitch, roll }
    }

    /// Local-to-world rotation.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), -self.pitch)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), self.roll)
    }

    pub fn from_rotation(r: &Rotation3<f64>) -> Self {
        // nalgebra's convention is R = Rz(yaw) * Ry(pitch) * Rx(roll).
        let (roll, pitch, yaw) = r.euler_angles();
        Orientation {
            yaw,
            pitch: -pitch,
            roll,
        }
    }

    /// Orientation whose boresight points along `dir` with zero roll.
    pub fn facing(dir: &Vec3) -> Self {
        let (az, el) = direction_angles(dir);
        Orientation::new(az, el, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    #[serde(default)]
    pub orientation: Orientation,
}

impl Pose {
    pub fn new(position: [f64; 3], orientation: Orientation) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    pub fn at(position: [f64; 3]) -> Self {
        Pose::new(position, Orientation::default())
    }

    pub fn pos(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        *self.orientation.rotation().matrix()
    }

    pub fn check_inside(&self, room: &Room) -> Result<()> {
        if self.position.iter().any(|v| !v.is_finite()) || !room.contains(&self.pos(), WALL_INSET)
        {
            return Err(Error::InvalidGeometry(format!(
                "position {:?} is not inside room {:?} with {WALL_INSET} m inset",
                self.position, room.dims
            )));
        }
        Ok(())
    }
}

/// Coordinate of the lattice image `index` of a source at `s` on an axis of
/// length `len`.
#[inline]
pub(crate) fn mirror_coord(index: i32, s: f64, len: f64) -> f64 {
    if index % 2 == 0 {
        index as f64 * len + s
    } else {
        (index + 1) as f64 * len - s
    }
}

/// Number of hits on the low (coordinate 0) and high (coordinate = len)
/// surface of one axis for lattice index `index`.
#[inline]
pub(crate) fn wall_hits(index: i32) -> (u32, u32) {
    let n = index.unsigned_abs();
    let first = n.div_ceil(2);
    let second = n / 2;
    if index > 0 {
        (second, first)
    } else {
        (first, second)
    }
}

/// Per-surface reflection counts of a lattice image, in surface-index order.
#[cfg(test)]
pub(crate) fn surface_hits(lattice: [i32; 3]) -> [u32; 6] {
    let mut out = [0u32; 6];
    for axis in 0..3 {
        let (lo, hi) = wall_hits(lattice[axis]);
        out[2 * axis] = lo;
        out[2 * axis + 1] = hi;
    }
    out
}

#[inline]
pub(crate) fn mirror_signs(lattice: [i32; 3]) -> [f64; 3] {
    lattice.map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    pub position: Vec3,
    pub order: u32,
    pub lattice: [i32; 3],
    /// Surfaces met on the way out, grouped by axis (x, then y, then z) and
    /// alternating within each axis starting from the wall on the image's side.
    pub surface_sequence: Vec<usize>,
    /// Source local-to-world frame reflected once per bounce. Improper
    /// (determinant −1) after an odd number of reflections.
    pub mirrored_orientation: Matrix3<f64>,
}

impl ImageSource {
    fn from_lattice(room: &Room, src: &Pose, src_rot: &Matrix3<f64>, lattice: [i32; 3]) -> Self {
        let s = src.pos();
        let position = Vec3::new(
            mirror_coord(lattice[0], s.x, room.dims[0]),
            mirror_coord(lattice[1], s.y, room.dims[1]),
            mirror_coord(lattice[2], s.z, room.dims[2]),
        );
        let mut surface_sequence = Vec::new();
        for (axis, &idx) in lattice.iter().enumerate() {
            let (near, far) = if idx > 0 {
                (2 * axis + 1, 2 * axis)
            } else {
                (2 * axis, 2 * axis + 1)
            };
            for hit in 0..idx.unsigned_abs() {
                surface_sequence.push(if hit % 2 == 0 { near } else { far });
            }
        }
        let signs = mirror_signs(lattice);
        let mirror = Matrix3::from_diagonal(&Vec3::new(signs[0], signs[1], signs[2]));
        ImageSource {
            position,
            order: lattice.iter().map(|v| v.unsigned_abs()).sum(),
            lattice,
            surface_sequence,
            mirrored_orientation: mirror * src_rot,
        }
    }
}

/// Calls `f` for every lattice index with L1 norm `<= max_order`, in
/// ascending (order, i, j, k) order. When `radius` is given, only images whose
/// distance to the source position is at most `radius` are visited.
pub(crate) fn for_each_lattice(
    room: &Room,
    src: &Vec3,
    max_order: u32,
    radius: Option<f64>,
    mut f: impl FnMut([i32; 3]),
) {
    let n_max = max_order as i32;
    let r2 = radius.map(|r| r * r).unwrap_or(f64::INFINITY);
    // Squared distance along one axis; evaluated lazily so that pruning by
    // `radius` stays cheap for very high orders.
    let axis_d2 = |axis: usize, idx: i32| -> f64 {
        let d = mirror_coord(idx, src[axis], room.dims[axis]) - src[axis];
        d * d
    };
    for n in 0..=n_max {
        for i in -n..=n {
            let dx2 = axis_d2(0, i);
            if dx2 > r2 {
                continue;
            }
            let rem_i = n - i.abs();
            for j in -rem_i..=rem_i {
                let dy2 = dx2 + axis_d2(1, j);
                if dy2 > r2 {
                    continue;
                }
                let r = rem_i - j.abs();
                if r == 0 {
                    if dy2 + axis_d2(2, 0) <= r2 {
                        f([i, j, 0]);
                    }
                } else {
                    for k in [-r, r] {
                        if dy2 + axis_d2(2, k) <= r2 {
                            f([i, j, k]);
                        }
                    }
                }
            }
        }
    }
}

/// Every image source with reflection order `<= max_order`, sorted by
/// (order, lattice index).
pub fn enumerate_image_sources(room: &Room, src: &Pose, max_order: u32) -> Result<Vec<ImageSource>> {
    room.validate()?;
    src.check_inside(room)?;
    let rot = src.rotation();
    let mut out = Vec::new();
    for_each_lattice(room, &src.pos(), max_order, None, |l| {
        out.push(ImageSource::from_lattice(room, src, &rot, l))
    });
    Ok(out)
}

/// Time of flight in seconds between two points.
pub fn propagation_delay(mic: &Vec3, image: &Vec3, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("speed of sound must be positive, got {c}")));
    }
    Ok((mic - image).norm() / c)
}

/// Azimuth in `[0, 2π)` and elevation in `[-π/2, π/2]` of a direction.
pub fn direction_angles(v: &Vec3) -> (f64, f64) {
    let mut az = v.y.atan2(v.x);
    if az < 0.0 {
        az += 2.0 * PI;
    }
    if az >= 2.0 * PI {
        az = 0.0;
    }
    let el = v.z.atan2(v.x.hypot(v.y));
    (az, el)
}

pub fn unit_from_angles(az: f64, el: f64) -> Vec3 {
    Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAngles {
    pub theta_out: f64,
    pub phi_out: f64,
    pub theta_in: f64,
    pub phi_in: f64,
}

/// Departure direction (image toward microphone) in the image's mirrored
/// frame and arrival direction (microphone toward image) in the microphone
/// frame, as local unit vectors.
pub(crate) fn local_directions(
    image_pos: &Vec3,
    image_frame: &Matrix3<f64>,
    mic_pos: &Vec3,
    mic_frame: &Matrix3<f64>,
) -> Option<(Vec3, Vec3)> {
    let to_image = image_pos - mic_pos;
    let dist = to_image.norm();
    if !(dist > 0.0) {
        return None;
    }
    let arrival = mic_frame.transpose() * (to_image / dist);
    // Reflection matrices are orthogonal, so the transpose is the inverse
    // even when the mirrored frame is improper.
    let departure = image_frame.transpose() * (-to_image / dist);
    Some((departure, arrival))
}

pub fn departure_arrival_angles(image: &ImageSource, mic: &Pose) -> Result<PathAngles> {
    let (dep, arr) = local_directions(
        &image.position,
        &image.mirrored_orientation,
        &mic.pos(),
        &mic.rotation(),
    )
    .ok_or_else(|| Error::InvalidGeometry("image source coincides with microphone".into()))?;
    let (theta_out, phi_out) = direction_angles(&dep);
    let (theta_in, phi_in) = direction_angles(&arr);
    Ok(PathAngles {
        theta_out,
        phi_out,
        theta_in,
        phi_in,
    })
}
