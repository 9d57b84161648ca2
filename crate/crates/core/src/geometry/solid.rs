//! Solids for overlap testing: bounding boxes, exact signed distances and
//! surface sampling.

use std::f64::consts::{PI, TAU};

use super::{Axis, Pose, Primitive, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn centered(center: Vec3, half: Vec3) -> Self {
        Aabb { min: center - half, max: center + half }
    }

    /// True when the interiors share positive volume. Touching faces do not count.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] && other.min[i] < self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb, eps: f64) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] - eps && other.max[i] <= self.max[i] + eps)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn expanded(&self, by: f64) -> Aabb {
        let d = Vec3::repeat(by);
        Aabb { min: self.min - d, max: self.max + d }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn half(&self) -> Vec3 {
        (self.max - self.min) * 0.5
    }

    /// Exact signed distance to the box surface.
    pub fn sdf(&self, p: &Vec3) -> f64 {
        box_sdf(&(p - self.center()), &self.half())
    }

    /// Slab-method ray clip. Returns `[t_in, t_out]` with `t_in <= t_out`.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let (mut a, mut b) = ((self.min[i] - origin[i]) * inv, (self.max[i] - origin[i]) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

fn box_sdf(local: &Vec3, half: &Vec3) -> f64 {
    let q = local.abs() - half;
    let outside = q.map(|v| v.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

/// Finite cylinder along local z.
fn cylinder_sdf(radial: f64, along: f64, radius: f64, half_height: f64) -> f64 {
    let dx = radial - radius;
    let dy = along.abs() - half_height;
    let outside = (dx.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt();
    outside + dx.max(dy).min(0.0)
}

fn rect_distance_2d(p: [f64; 2], min: [f64; 2], max: [f64; 2]) -> f64 {
    let dx = (min[0] - p[0]).max(0.0).max(p[0] - max[0]);
    let dy = (min[1] - p[1]).max(0.0).max(p[1] - max[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Components `(along, cross_u, cross_v)` of `p` for an axis-aligned cylinder.
fn axis_frame(axis: Axis, p: &Vec3) -> (f64, f64, f64) {
    match axis {
        Axis::X => (p.x, p.y, p.z),
        Axis::Y => (p.y, p.x, p.z),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Solid {
    Box(Aabb),
    Sphere { center: Vec3, radius: f64 },
    AxisCylinder { axis: Axis, center: Vec3, radius: f64, half_length: f64 },
    Oriented { pose: Pose, primitive: Primitive },
}

impl Solid {
    pub fn aabb(&self) -> Aabb {
        match *self {
            Solid::Box(b) => b,
            Solid::Sphere { center, radius } => Aabb::centered(center, Vec3::repeat(radius)),
            Solid::AxisCylinder { axis, center, radius, half_length } => {
                let half = match axis {
                    Axis::X => Vec3::new(half_length, radius, radius),
                    Axis::Y => Vec3::new(radius, half_length, radius),
                };
                Aabb::centered(center, half)
            }
            Solid::Oriented { pose, primitive } => {
                Aabb::centered(pose.translation, oriented_half_extents(&pose, &primitive))
            }
        }
    }

    /// Exact signed distance (negative inside).
    pub fn sdf(&self, p: &Vec3) -> f64 {
        match *self {
            Solid::Box(b) => b.sdf(p),
            Solid::Sphere { center, radius } => (p - center).norm() - radius,
            Solid::AxisCylinder { axis, center, radius, half_length } => {
                let (along, u, v) = axis_frame(axis, &(p - center));
                cylinder_sdf((u * u + v * v).sqrt(), along, radius, half_length)
            }
            Solid::Oriented { pose, primitive } => {
                let local = pose.unit_quaternion().inverse_transform_vector(&(p - pose.translation));
                primitive_sdf(&primitive, &local)
            }
        }
    }

    pub fn interior_point(&self) -> Vec3 {
        match *self {
            Solid::Box(b) => b.center(),
            Solid::Sphere { center, .. } | Solid::AxisCylinder { center, .. } => center,
            Solid::Oriented { pose, .. } => pose.translation,
        }
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Solid::Box(b) => {
                let s = b.max - b.min;
                2.0 * (s.x * s.y + s.y * s.z + s.x * s.z)
            }
            Solid::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Solid::AxisCylinder { radius, half_length, .. } => TAU * radius * (radius + 2.0 * half_length),
            Solid::Oriented { primitive, .. } => match primitive {
                Primitive::Box { size: s } => 2.0 * (s[0] * s[1] + s[1] * s[2] + s[0] * s[2]),
                Primitive::Cylinder { diameter, height } => PI * diameter * (diameter * 0.5 + height),
                Primitive::Sphere { diameter } => PI * diameter * diameter,
            },
        }
    }

    /// Points covering the surface with neighbour gaps no larger than `spacing`.
    pub fn surface_points(&self, spacing: f64) -> Vec<Vec3> {
        match *self {
            Solid::Box(b) => box_surface(&b.half(), spacing).into_iter().map(|p| p + b.center()).collect(),
            Solid::Sphere { center, radius } => {
                sphere_surface(radius, spacing).into_iter().map(|p| p + center).collect()
            }
            Solid::AxisCylinder { axis, center, radius, half_length } => {
                cylinder_surface(radius, half_length, spacing)
                    .into_iter()
                    .map(|p| {
                        // local z is the cylinder axis
                        let w = match axis {
                            Axis::X => Vec3::new(p.z, p.x, p.y),
                            Axis::Y => Vec3::new(p.x, p.z, p.y),
                        };
                        w + center
                    })
                    .collect()
            }
            Solid::Oriented { pose, primitive } => {
                let rot = pose.unit_quaternion();
                let local = match primitive {
                    Primitive::Box { size } => box_surface(&(Vec3::from(size) * 0.5), spacing),
                    Primitive::Cylinder { diameter, height } => {
                        cylinder_surface(diameter * 0.5, height * 0.5, spacing)
                    }
                    Primitive::Sphere { diameter } => sphere_surface(diameter * 0.5, spacing),
                };
                local.into_iter().map(|p| rot * p + pose.translation).collect()
            }
        }
    }
}

pub fn primitive_sdf(primitive: &Primitive, local: &Vec3) -> f64 {
    match *primitive {
        Primitive::Box { size } => box_sdf(local, &(Vec3::from(size) * 0.5)),
        Primitive::Cylinder { diameter, height } => {
            cylinder_sdf(local.xy().norm(), local.z, diameter * 0.5, height * 0.5)
        }
        Primitive::Sphere { diameter } => local.norm() - diameter * 0.5,
    }
}

/// Half extents of the world-space bounding box of a rotated primitive.
pub fn oriented_half_extents(pose: &Pose, primitive: &Primitive) -> Vec3 {
    let rot = pose.unit_quaternion().to_rotation_matrix();
    let m = rot.matrix();
    match *primitive {
        Primitive::Box { size } => {
            let h = Vec3::from(size) * 0.5;
            m.abs() * h
        }
        Primitive::Cylinder { diameter, height } => {
            let axis = m.column(2);
            let r = diameter * 0.5;
            let hh = height * 0.5;
            Vec3::from_fn(|i, _| hh * axis[i].abs() + r * (1.0 - axis[i] * axis[i]).max(0.0).sqrt())
        }
        Primitive::Sphere { diameter } => Vec3::repeat(diameter * 0.5),
    }
}

fn steps(len: f64, spacing: f64) -> usize {
    ((len / spacing).ceil() as usize).max(1)
}

fn box_surface(half: &Vec3, spacing: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        let (na, nb) = (steps(2.0 * half[a], spacing), steps(2.0 * half[b], spacing));
        for sign in [-1.0, 1.0] {
            for i in 0..=na {
                for j in 0..=nb {
                    let mut p = Vec3::zeros();
                    p[axis] = sign * half[axis];
                    p[a] = -half[a] + 2.0 * half[a] * i as f64 / na as f64;
                    p[b] = -half[b] + 2.0 * half[b] * j as f64 / nb as f64;
                    out.push(p);
                }
            }
        }
    }
    out
}

fn sphere_surface(radius: f64, spacing: f64) -> Vec<Vec3> {
    let n_theta = steps(PI * radius, spacing);
    let mut out = Vec::new();
    for i in 0..=n_theta {
        let theta = PI * i as f64 / n_theta as f64;
        let ring = radius * theta.sin();
        let n_phi = steps(TAU * ring, spacing);
        for j in 0..n_phi {
            let phi = TAU * j as f64 / n_phi as f64;
            out.push(Vec3::new(ring * phi.cos(), ring * phi.sin(), radius * theta.cos()));
        }
    }
    out
}

/// Cylinder along local z: side rings plus concentric rings on each cap.
fn cylinder_surface(radius: f64, half_height: f64, spacing: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    let n_phi = steps(TAU * radius, spacing);
    let n_z = steps(2.0 * half_height, spacing);
    for k in 0..=n_z {
        let z = -half_height + 2.0 * half_height * k as f64 / n_z as f64;
        for j in 0..n_phi {
            let phi = TAU * j as f64 / n_phi as f64;
            out.push(Vec3::new(radius * phi.cos(), radius * phi.sin(), z));
        }
    }
    let n_r = steps(radius, spacing);
    for z in [-half_height, half_height] {
        out.push(Vec3::new(0.0, 0.0, z));
        for i in 1..=n_r {
            let r = radius * i as f64 / n_r as f64;
            let n = steps(TAU * r, spacing);
            for j in 0..n {
                let phi = TAU * j as f64 / n as f64;
                out.push(Vec3::new(r * phi.cos(), r * phi.sin(), z));
            }
        }
    }
    out
}

/// Whether two solids overlap with positive volume.
///
/// Axis-aligned pairs are decided analytically. Pairs involving a rotated
/// solid fall back to sampling the smaller surface at `spacing` and flagging
/// any sample closer than `spacing` to the other solid, plus a mutual
/// containment check. The fallback is conservative: it may reject solids
/// that are separated by less than `spacing`, never accepts overlapping ones.
pub fn overlaps(a: &Solid, b: &Solid, spacing: f64) -> bool {
    if !a.aabb().intersects(&b.aabb()) {
        return false;
    }
    use Solid::*;
    match (a, b) {
        (Box(_), Box(_)) => true,
        (Sphere { center: c1, radius: r1 }, Sphere { center: c2, radius: r2 }) => (c1 - c2).norm() < r1 + r2,
        (Sphere { center, radius }, other @ (Box(_) | AxisCylinder { .. }))
        | (other @ (Box(_) | AxisCylinder { .. }), Sphere { center, radius }) => other.sdf(center) < *radius,
        (Box(bx), AxisCylinder { axis, center, radius, half_length })
        | (AxisCylinder { axis, center, radius, half_length }, Box(bx)) => {
            let (a_lo, u_lo, v_lo) = axis_frame(*axis, &bx.min);
            let (a_hi, u_hi, v_hi) = axis_frame(*axis, &bx.max);
            let (a_c, u_c, v_c) = axis_frame(*axis, center);
            let along = a_lo < a_c + half_length && a_c - half_length < a_hi;
            along && rect_distance_2d([u_c, v_c], [u_lo, v_lo], [u_hi, v_hi]) < *radius
        }
        (
            AxisCylinder { axis: ax1, center: c1, radius: r1, half_length: h1 },
            AxisCylinder { axis: ax2, center: c2, radius: r2, half_length: h2 },
        ) => {
            if ax1 == ax2 {
                let (a1, u1, v1) = axis_frame(*ax1, c1);
                let (a2, u2, v2) = axis_frame(*ax2, c2);
                (a1 - a2).abs() < h1 + h2 && ((u1 - u2).powi(2) + (v1 - v2).powi(2)).sqrt() < r1 + r2
            } else {
                // Perpendicular horizontal axes. When each axis crosses the
                // other's span the closest approach is the z separation.
                let (a1, u1, _) = axis_frame(*ax1, c1);
                let (a2, u2, _) = axis_frame(*ax2, c2);
                let crosses = (u2 - a1).abs() <= *h1 && (u1 - a2).abs() <= *h2;
                if crosses {
                    (c1.z - c2.z).abs() < r1 + r2
                } else {
                    sampled_overlap(a, b, spacing)
                }
            }
        }
        _ => sampled_overlap(a, b, spacing),
    }
}

fn sampled_overlap(a: &Solid, b: &Solid, spacing: f64) -> bool {
    if a.sdf(&b.interior_point()) < 0.0 || b.sdf(&a.interior_point()) < 0.0 {
        return true;
    }
    let (probe, target) = if a.surface_area() <= b.surface_area() { (a, b) } else { (b, a) };
    let window = target.aabb().expanded(spacing);
    probe
        .surface_points(spacing)
        .iter()
        .any(|p| window.contains(p) && target.sdf(p) < spacing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn sphere(x: f64, y: f64, z: f64, r: f64) -> Solid {
        Solid::Sphere { center: Vec3::new(x, y, z), radius: r }
    }

    #[test]
    fn aabb_touching_is_not_overlap() {
        let a = Aabb { min: Vec3::zeros(), max: Vec3::repeat(1.0) };
        let b = Aabb { min: Vec3::new(1.0, 0.0, 0.0), max: Vec3::new(2.0, 1.0, 1.0) };
        assert!(!a.intersects(&b));
        assert!(a.intersects(&a));
    }

    #[test]
    fn ray_clip() {
        let b = Aabb { min: Vec3::repeat(-1.0), max: Vec3::repeat(1.0) };
        let (t0, t1) = b.intersect_ray(&Vec3::new(0.0, 0.0, 5.0), &Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!((t0, t1), (4.0, 6.0));
        assert!(b.intersect_ray(&Vec3::new(0.0, 0.0, 5.0), &Vec3::new(1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn analytic_pairs() {
        assert!(overlaps(&sphere(0.0, 0.0, 0.0, 1.0), &sphere(1.5, 0.0, 0.0, 1.0), 1.0));
        assert!(!overlaps(&sphere(0.0, 0.0, 0.0, 1.0), &sphere(2.5, 0.0, 0.0, 1.0), 1.0));

        let duct_x = Solid::AxisCylinder { axis: Axis::X, center: Vec3::new(0.0, 0.0, 0.0), radius: 50.0, half_length: 500.0 };
        let duct_y_low = Solid::AxisCylinder { axis: Axis::Y, center: Vec3::new(100.0, 0.0, -59.0), radius: 10.0, half_length: 500.0 };
        let duct_y_far = Solid::AxisCylinder { axis: Axis::Y, center: Vec3::new(100.0, 0.0, -61.0), radius: 10.0, half_length: 500.0 };
        assert!(overlaps(&duct_x, &duct_y_low, 1.0));
        assert!(!overlaps(&duct_x, &duct_y_far, 1.0));

        // box whose corner sits just outside the cylinder's circular section
        let corner = 50.0 / 2f64.sqrt() + 0.5;
        let bx = Solid::Box(Aabb { min: Vec3::new(-10.0, corner, corner), max: Vec3::new(10.0, 80.0, 80.0) });
        assert!(!overlaps(&duct_x, &bx, 1.0));
        let bx2 = Solid::Box(Aabb { min: Vec3::new(-10.0, corner - 1.0, corner - 1.0), max: Vec3::new(10.0, 80.0, 80.0) });
        assert!(overlaps(&duct_x, &bx2, 1.0));
    }

    #[test]
    fn oriented_box_vs_sphere() {
        let rot = UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_4);
        let cube = Solid::Oriented { pose: Pose::new(Vec3::zeros(), rot), primitive: Primitive::Box { size: [40.0; 3] } };
        // rotated 45 degrees about z, the cube reaches 20*sqrt(2) along x
        let reach = 20.0 * 2f64.sqrt();
        assert!(overlaps(&cube, &sphere(reach + 4.0, 0.0, 0.0, 5.0), 1.0));
        assert!(!overlaps(&cube, &sphere(reach + 7.0, 0.0, 0.0, 5.0), 1.0));
        // fully contained sphere
        assert!(overlaps(&cube, &sphere(0.0, 0.0, 0.0, 2.0), 1.0));
        let aabb = cube.aabb();
        assert!((aabb.max.x - reach).abs() < 1e-9 && (aabb.max.z - 20.0).abs() < 1e-9);
    }

    #[test]
    fn surface_points_lie_on_surface() {
        let rot = UnitQuaternion::from_euler_angles(0.3, -0.7, 1.1);
        let solids = [
            Solid::Oriented { pose: Pose::new(Vec3::new(1.0, 2.0, 3.0), rot), primitive: Primitive::Cylinder { diameter: 40.0, height: 60.0 } },
            Solid::Oriented { pose: Pose::new(Vec3::zeros(), rot), primitive: Primitive::Box { size: [35.0, 50.0, 75.0] } },
            sphere(5.0, 5.0, 5.0, 30.0),
            Solid::AxisCylinder { axis: Axis::Y, center: Vec3::new(0.0, 0.0, 10.0), radius: 25.0, half_length: 100.0 },
        ];
        for s in solids {
            let pts = s.surface_points(1.0);
            assert!(!pts.is_empty());
            for p in pts {
                assert!(s.sdf(&p).abs() < 1e-9, "{s:?} {}", s.sdf(&p));
            }
        }
    }

    #[test]
    fn cylinder_aabb_tilted() {
        let rot = UnitQuaternion::from_euler_angles(std::f64::consts::FRAC_PI_2, 0.0, 0.0);
        let c = Solid::Oriented { pose: Pose::new(Vec3::zeros(), rot), primitive: Primitive::Cylinder { diameter: 40.0, height: 60.0 } };
        // axis rotated from z onto -y
        let h = c.aabb().half();
        assert!((h.x - 20.0).abs() < 1e-9 && (h.y - 30.0).abs() < 1e-9 && (h.z - 20.0).abs() < 1e-9, "{h:?}");
    }
}
