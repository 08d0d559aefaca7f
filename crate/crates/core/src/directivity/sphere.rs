use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Golden-angle spiral with `n` points, `z` running from near +1 to near -1.
pub fn fibonacci_grid(n: usize) -> Result<Vec<Vec3>> {
    if n == 0 {
        return Err(Error::Domain("Fibonacci grid needs at least one point".into()));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    Ok((0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z).normalize()
        })
        .collect())
}

const EL_CELLS: usize = 36;
const AZ_CELLS: usize = 72;

/// Exact great-circle nearest-neighbour lookup over a fixed point set.
///
/// Queries are bucketed into latitude/longitude cells; each cell keeps every
/// point that could be nearest to some query inside it, so the answer (ties
/// included) equals a brute-force scan.
#[derive(Debug, Clone)]
pub struct SphereIndex {
    points: Vec<Vec3>,
    cells: Vec<Vec<u32>>,
}

fn cell_of(dir: &Vec3) -> usize {
    let n = dir.norm();
    let el = (dir.z / n).clamp(-1.0, 1.0).asin();
    let mut az = dir.y.atan2(dir.x);
    if az < 0.0 {
        az += 2.0 * PI;
    }
    let ie = (((el + PI / 2.0) / PI * EL_CELLS as f64) as usize).min(EL_CELLS - 1);
    let ia = ((az / (2.0 * PI) * AZ_CELLS as f64) as usize).min(AZ_CELLS - 1);
    ie * AZ_CELLS + ia
}

fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

impl SphereIndex {
    pub fn new(points: Vec<Vec3>) -> Self {
        let d_el = PI / EL_CELLS as f64;
        let d_az = 2.0 * PI / AZ_CELLS as f64;
        let mut cells = Vec::with_capacity(EL_CELLS * AZ_CELLS);
        for ie in 0..EL_CELLS {
            let el0 = -PI / 2.0 + ie as f64 * d_el;
            let el1 = el0 + d_el;
            let el_c = 0.5 * (el0 + el1);
            let max_cos = if el0 <= 0.0 && el1 >= 0.0 {
                1.0
            } else {
                el0.cos().max(el1.cos())
            };
            let radius = 0.5 * d_el + 0.5 * d_az * max_cos;
            for ia in 0..AZ_CELLS {
                let az_c = (ia as f64 + 0.5) * d_az;
                let centre = Vec3::new(el_c.cos() * az_c.cos(), el_c.cos() * az_c.sin(), el_c.sin());
                let d0 = points
                    .iter()
                    .map(|p| angle_between(&centre, p))
                    .fold(f64::INFINITY, f64::min);
                let reach = 2.0 * radius + d0 + 1e-9;
                let list = points
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| angle_between(&centre, p) <= reach)
                    .map(|(i, _)| i as u32)
                    .collect();
                cells.push(list);
            }
        }
        SphereIndex { points, cells }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Index of the point with the largest dot product with `dir`; ties go to
    /// the lowest index.
    pub fn nearest(&self, dir: &Vec3) -> usize {
        let mut best = usize::MAX;
        let mut best_dot = f64::NEG_INFINITY;
        for &i in &self.cells[cell_of(dir)] {
            let d = self.points[i as usize].dot(dir);
            if d > best_dot || (d == best_dot && (i as usize) < best) {
                best_dot = d;
                best = i as usize;
            }
        }
        best
    }
}

/// Reference nearest-neighbour scan over every point.
pub fn nearest_brute_force(points: &[Vec3], dir: &Vec3) -> usize {
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = p.dot(dir);
        if d > best_dot {
            best_dot = d;
            best = i;
        }
    }
    best
}

/// Solid angle of the spherical triangle with unit corners `a`, `b`, `c`.
fn triangle_solid_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let num = a.dot(&b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// Clip a convex polygon against `n . x <= h`.
fn clip(poly: &[[f64; 2]], n: [f64; 2], h: f64) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| n[0] * p[0] + n[1] * p[1] - h;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (sp, sq) = (side(&p), side(&q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Solid angle of each node's spherical Voronoi cell.
///
/// Each cell is built in the gnomonic projection about its node by clipping
/// with the bisector of every other node, so every cell must fit inside an
/// open hemisphere. Coincident nodes share one cell equally.
pub fn voronoi_weights(nodes: &[Vec3]) -> Result<Vec<f64>> {
    if nodes.len() < 4 {
        return Err(Error::InvalidGeometry(format!(
            "Voronoi weights need at least 4 nodes, got {}",
            nodes.len()
        )));
    }
    let unit: Vec<Vec3> = nodes
        .iter()
        .map(|v| {
            let n = v.norm();
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::InvalidGeometry("zero or non-finite node vector".into()));
            }
            Ok(v / n)
        })
        .collect::<Result<_>>()?;

    // Merge coincident nodes.
    let mut rep = vec![usize::MAX; unit.len()];
    let mut uniques: Vec<usize> = Vec::new();
    for i in 0..unit.len() {
        if let Some(&u) = uniques.iter().find(|&&u| unit[u].dot(&unit[i]) > 1.0 - 1e-12) {
            rep[i] = u;
        } else {
            rep[i] = i;
            uniques.push(i);
        }
    }
    if uniques.len() < 4 {
        return Err(Error::InvalidGeometry("fewer than 4 distinct nodes".into()));
    }

    const BOUND: f64 = 1e6;
    let mut cell_area = vec![0.0; unit.len()];
    for &i in &uniques {
        let ni = unit[i];
        let helper = if ni.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = ni.cross(&helper).normalize();
        let v = ni.cross(&u);

        let mut others: Vec<(f64, usize)> = uniques
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| (angle_between(&ni, &unit[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut poly = vec![[-BOUND, -BOUND], [BOUND, -BOUND], [BOUND, BOUND], [-BOUND, BOUND]];
        for &(theta, j) in &others {
            let reach = poly.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
            if theta < PI && (0.5 * theta).tan() > reach {
                break;
            }
            let nj = unit[j];
            poly = clip(&poly, [u.dot(&nj), v.dot(&nj)], 1.0 - ni.dot(&nj));
            if poly.len() < 3 {
                return Err(Error::InvalidGeometry("empty Voronoi cell".into()));
            }
        }
        let reach = poly.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        if reach > 1e3 {
            return Err(Error::InvalidGeometry(
                "degenerate node set: a Voronoi cell is not bounded within a hemisphere".into(),
            ));
        }
        let verts: Vec<Vec3> = poly
            .iter()
            .map(|p| (ni + u * p[0] + v * p[1]).normalize())
            .collect();
        let mut area = 0.0;
        for k in 0..verts.len() {
            area += triangle_solid_angle(&ni, &verts[k], &verts[(k + 1) % verts.len()]);
        }
        cell_area[i] = area;
    }

    let mut weights = vec![0.0; unit.len()];
    for &u in &uniques {
        let members: Vec<usize> = (0..unit.len()).filter(|&i| rep[i] == u).collect();
        let share = cell_area[u] / members.len() as f64;
        for m in members {
            weights[m] = share;
        }
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidGeometry("non-positive Voronoi cell".into()));
    }
    Ok(weights)
}
