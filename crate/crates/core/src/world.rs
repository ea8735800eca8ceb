//! Synthetic desk-scale grasp world: parametric planar shapes with signed
//! distance functions, a rendered grid observation, an analytic grasp oracle
//! and heuristic grasp proposals.
//!
//! Everything lives in the unit square `[0,1] x [0,1]`. A scene holds one
//! convex shape — axis-pair rectangle, ellipse or capsule — with a pose and
//! half-extents `a >= b`. Grasps are parallel-jaw configurations
//! `(gx, gy, psi, h)`: the gripper closes along the axis at angle `psi`
//! through `(gx, gy)` starting from fingertips `h` away on each side.
//!
//! The oracle is exact (up to the ellipse's first-order distance estimate,
//! whose *sign* is exact): it checks fingertip clearance, contact of the
//! closing segment with the shape, the opening against the grasped width
//! plus slack, and the centering of the grasp line.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grasp::{BoxBounds, GraspConfig};
use crate::tensor::{GridTensor, Shape};

/// Observation grid side length.
pub const GRID: usize = 32;
/// Observation channel count.
pub const OBS_CHANNELS: usize = 4;
/// Occupancy channel index.
pub const CH_OCC: usize = 0;
/// Clamped signed-distance channel index.
pub const CH_SDF: usize = 1;
/// Outward-normal x channel index.
pub const CH_NX: usize = 2;
/// Outward-normal y channel index.
pub const CH_NY: usize = 3;
/// Signed distance is clamped to this magnitude in the observation.
pub const SDF_CLAMP: f64 = 0.2;
/// Normals are rendered only within this distance of the boundary.
pub const NORMAL_BAND: f64 = 0.05;
/// Smallest admissible half-opening.
pub const H_MIN: f64 = 0.01;
/// Largest admissible half-opening.
pub const H_MAX: f64 = 0.30;
/// Number of shape families in the default pool.
pub const FAMILY_POOL: u32 = 24;

/// Step for the numeric boundary-normal estimate.
const NORMAL_STEP: f64 = 1e-5;

/// The three parametric shape kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
    Capsule,
}

impl ShapeKind {
    pub fn tag(self) -> u8 {
        match self {
            ShapeKind::Rectangle => 0,
            ShapeKind::Ellipse => 1,
            ShapeKind::Capsule => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ShapeKind::Rectangle),
            1 => Ok(ShapeKind::Ellipse),
            2 => Ok(ShapeKind::Capsule),
            _ => Err(Error::Format(format!("unknown shape kind tag {tag}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Rectangle => "rectangle",
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::Capsule => "capsule",
        }
    }
}

/// A posed convex shape in the unit square.
///
/// `phi` rotates the shape's major axis from world x; half-extents satisfy
/// `b <= a`. For the capsule, `a` is the half-length including the round
/// caps and `b` the radius.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectShape {
    pub kind: ShapeKind,
    pub cx: f64,
    pub cy: f64,
    pub phi: f64,
    pub a: f64,
    pub b: f64,
    pub shape_id: u32,
    pub family_id: u32,
}

impl ObjectShape {
    pub fn new(kind: ShapeKind, cx: f64, cy: f64, phi: f64, a: f64, b: f64) -> Self {
        ObjectShape { kind, cx, cy, phi, a, b, shape_id: 0, family_id: 0 }
    }

    /// World point -> object frame (shape centered, major axis along +x).
    fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (s, c) = self.phi.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// World direction -> object frame.
    fn dir_to_local(&self, dx: f64, dy: f64) -> (f64, f64) {
        let (s, c) = self.phi.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Signed distance from a world point to the shape boundary, negative
    /// inside. Exact for the rectangle and capsule; the ellipse uses a
    /// first-order estimate whose sign is exact.
    pub fn sdf(&self, x: f64, y: f64) -> f64 {
        let (px, py) = self.to_local(x, y);
        match self.kind {
            ShapeKind::Rectangle => {
                let qx = px.abs() - self.a;
                let qy = py.abs() - self.b;
                let outside = (qx.max(0.0).powi(2) + qy.max(0.0).powi(2)).sqrt();
                outside + qx.max(qy).min(0.0)
            }
            ShapeKind::Ellipse => {
                let k0 = ((px / self.a).powi(2) + (py / self.b).powi(2)).sqrt();
                if k0 < 1e-9 {
                    // At the center the nearest boundary point is b away.
                    return -self.b;
                }
                let k1 = ((px / (self.a * self.a)).powi(2)
                    + (py / (self.b * self.b)).powi(2))
                .sqrt();
                k0 * (k0 - 1.0) / k1
            }
            ShapeKind::Capsule => {
                let half = (self.a - self.b).max(0.0);
                let qx = px - px.clamp(-half, half);
                (qx * qx + py * py).sqrt() - self.b
            }
        }
    }

    /// Strict interior test (boundary counts as outside).
    pub fn inside(&self, x: f64, y: f64) -> bool {
        self.sdf(x, y) < 0.0
    }

    pub fn area(&self) -> f64 {
        match self.kind {
            ShapeKind::Rectangle => 4.0 * self.a * self.b,
            ShapeKind::Ellipse => PI * self.a * self.b,
            ShapeKind::Capsule => {
                let half = (self.a - self.b).max(0.0);
                4.0 * half * self.b + PI * self.b * self.b
            }
        }
    }

    /// Radius of the circumscribed circle around the shape center.
    pub fn circumradius(&self) -> f64 {
        match self.kind {
            ShapeKind::Rectangle => (self.a * self.a + self.b * self.b).sqrt(),
            ShapeKind::Ellipse | ShapeKind::Capsule => self.a,
        }
    }

    /// Chord of the line `p + t d` (d unit) through the shape, as the
    /// parameter interval `[t0, t1]`, or `None` when the line misses it.
    /// All three kinds are convex, so the chord is a single interval.
    pub fn chord(&self, px: f64, py: f64, dx: f64, dy: f64) -> Option<(f64, f64)> {
        let (lpx, lpy) = self.to_local(px, py);
        let (ldx, ldy) = self.dir_to_local(dx, dy);
        match self.kind {
            ShapeKind::Rectangle => {
                slab_interval(lpx, ldx, self.a).and_then(|ix| {
                    slab_interval(lpy, ldy, self.b)
                        .and_then(|iy| intersect_intervals(ix, iy))
                })
            }
            ShapeKind::Ellipse => {
                quadratic_chord(lpx / self.a, lpy / self.b, ldx / self.a, ldy / self.b)
            }
            ShapeKind::Capsule => {
                let half = (self.a - self.b).max(0.0);
                let mut best: Option<(f64, f64)> = None;
                let mut merge = |iv: Option<(f64, f64)>| {
                    if let Some((t0, t1)) = iv {
                        best = Some(match best {
                            None => (t0, t1),
                            Some((b0, b1)) => (b0.min(t0), b1.max(t1)),
                        });
                    }
                };
                if half > 0.0 {
                    merge(
                        slab_interval(lpx, ldx, half)
                            .and_then(|ix| {
                                slab_interval(lpy, ldy, self.b)
                                    .and_then(|iy| intersect_intervals(ix, iy))
                            }),
                    );
                }
                for sign in [-1.0, 1.0] {
                    merge(circle_chord(lpx - sign * half, lpy, ldx, ldy, self.b));
                }
                best
            }
        }
    }

    /// Reflection of the shape across the vertical line `x = 0.5`. All three
    /// kinds are symmetric under 180 degrees, so negating the orientation
    /// gives the mirrored pose exactly.
    pub fn mirrored_x(&self) -> Self {
        let mut s = self.clone();
        s.cx = 1.0 - s.cx;
        s.phi = -s.phi;
        s
    }

    /// Render the four-channel observation grid. Cells sample the world at
    /// their centers: occupancy, clamped signed distance, and the outward
    /// unit normal inside a band around the boundary (zero elsewhere).
    pub fn render(&self) -> Observation {
        let mut grid = GridTensor::zeros(Shape::new(OBS_CHANNELS, GRID, GRID));
        for iy in 0..GRID {
            for ix in 0..GRID {
                let (x, y) = cell_center(ix, iy);
                let sd = self.sdf(x, y);
                grid.set(CH_OCC, iy, ix, if sd < 0.0 { 1.0 } else { 0.0 });
                grid.set(CH_SDF, iy, ix, sd.clamp(-SDF_CLAMP, SDF_CLAMP));
                if sd.abs() <= NORMAL_BAND {
                    let gx = (self.sdf(x + NORMAL_STEP, y) - self.sdf(x - NORMAL_STEP, y))
                        / (2.0 * NORMAL_STEP);
                    let gy = (self.sdf(x, y + NORMAL_STEP) - self.sdf(x, y - NORMAL_STEP))
                        / (2.0 * NORMAL_STEP);
                    let norm = (gx * gx + gy * gy).sqrt();
                    if norm > 1e-6 {
                        grid.set(CH_NX, iy, ix, gx / norm);
                        grid.set(CH_NY, iy, ix, gy / norm);
                    }
                }
            }
        }
        Observation { grid }
    }
}

/// World coordinates of the center of grid cell (column `ix`, row `iy`).
pub fn cell_center(ix: usize, iy: usize) -> (f64, f64) {
    (
        (ix as f64 + 0.5) / GRID as f64,
        (iy as f64 + 0.5) / GRID as f64,
    )
}

/// `|p + t d| <= e` slab solved for t; `None` when the line misses the slab.
fn slab_interval(p: f64, d: f64, e: f64) -> Option<(f64, f64)> {
    if d.abs() < 1e-12 {
        if p.abs() <= e {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let t0 = (-e - p) / d;
        let t1 = (e - p) / d;
        Some((t0.min(t1), t0.max(t1)))
    }
}

fn intersect_intervals(a: (f64, f64), b: (f64, f64)) -> Option<(f64, f64)> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if lo <= hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// Chord of the unit circle for the (already scaled) line `u + t v`.
fn quadratic_chord(ux: f64, uy: f64, vx: f64, vy: f64) -> Option<(f64, f64)> {
    let a = vx * vx + vy * vy;
    let b = 2.0 * (ux * vx + uy * vy);
    let c = ux * ux + uy * uy - 1.0;
    if a < 1e-18 {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
}

/// Chord of the circle of radius `r` centered at the local origin.
fn circle_chord(px: f64, py: f64, dx: f64, dy: f64, r: f64) -> Option<(f64, f64)> {
    quadratic_chord(px / r, py / r, dx / r, dy / r)
}

/// Rendered scene observation: a 4 x 32 x 32 grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub grid: GridTensor,
}

impl Observation {
    pub fn shape() -> Shape {
        Shape::new(OBS_CHANNELS, GRID, GRID)
    }

    /// Mean world position of occupied cells, or `None` when the occupancy
    /// channel is empty.
    pub fn occupancy_centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for iy in 0..GRID {
            for ix in 0..GRID {
                if self.grid.at(CH_OCC, iy, ix) > 0.5 {
                    let (x, y) = cell_center(ix, iy);
                    sx += x;
                    sy += y;
                    n += 1.0;
                }
            }
        }
        if n > 0.0 {
            Some((sx / n, sy / n))
        } else {
            None
        }
    }

    /// Mirror across the vertical mid-line: columns reverse and the
    /// normal-x channel negates. Matches rendering the mirrored shape
    /// exactly because cell centers are symmetric about `x = 0.5`.
    pub fn mirrored_x(&self) -> Observation {
        let mut grid = GridTensor::zeros(self.grid.shape());
        for ch in 0..OBS_CHANNELS {
            for iy in 0..GRID {
                for ix in 0..GRID {
                    let v = self.grid.at(ch, iy, GRID - 1 - ix);
                    let v = if ch == CH_NX { -v } else { v };
                    grid.set(ch, iy, ix, v);
                }
            }
        }
        Observation { grid }
    }
}

/// Why a grasp attempt failed — or that it succeeded. Conditions are
/// checked in this order and the first violation is reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraspOutcome {
    Success,
    /// A fingertip starts inside (or on) the shape.
    FingerCollision,
    /// The closing segment never meets the shape.
    NoContact,
    /// The opening is smaller than the grasped width.
    TooNarrow,
    /// The opening exceeds the grasped width plus the gripper slack.
    TooWide,
    /// The grasp line passes too far from the shape center.
    OffCenter,
}

impl GraspOutcome {
    pub fn is_success(self) -> bool {
        self == GraspOutcome::Success
    }

    pub fn label(self) -> &'static str {
        match self {
            GraspOutcome::Success => "success",
            GraspOutcome::FingerCollision => "finger-collision",
            GraspOutcome::NoContact => "no-contact",
            GraspOutcome::TooNarrow => "too-narrow",
            GraspOutcome::TooWide => "too-wide",
            GraspOutcome::OffCenter => "off-center",
        }
    }

    pub fn from_label(label: &str) -> Option<GraspOutcome> {
        Some(match label {
            "success" => GraspOutcome::Success,
            "finger-collision" => GraspOutcome::FingerCollision,
            "no-contact" => GraspOutcome::NoContact,
            "too-narrow" => GraspOutcome::TooNarrow,
            "too-wide" => GraspOutcome::TooWide,
            "off-center" => GraspOutcome::OffCenter,
            _ => return None,
        })
    }
}

/// Calibrated world constants: oracle tolerances, heuristic-proposal
/// geometry and the exploration noise used when collecting datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldParams {
    /// Maximum admissible excess opening beyond the grasped width.
    pub slack_max: f64,
    /// Off-center tolerance as a fraction of the smaller half-extent.
    pub off_center_frac: f64,
    /// Heuristic standoff of the gripper center from the shape centroid.
    pub palm_standoff: f64,
    /// Gaussian noise on the heuristic standoff.
    pub standoff_noise_sigma: f64,
    /// Uniform widening `[0, x)` of the heuristic opening.
    pub opening_noise: f64,
    /// Exploration noise (dataset collection): center jitter sigma.
    pub explore_center_sigma: f64,
    /// Exploration noise: closing-angle jitter sigma (radians).
    pub explore_angle_sigma: f64,
    /// Exploration noise: lower opening offset.
    pub explore_opening_lo: f64,
    /// Exploration noise: upper opening offset.
    pub explore_opening_hi: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            slack_max: 0.06,
            off_center_frac: 0.45,
            palm_standoff: 0.035,
            standoff_noise_sigma: 0.002,
            opening_noise: 0.02,
            explore_center_sigma: 0.022,
            explore_angle_sigma: 0.28,
            explore_opening_lo: -0.025,
            explore_opening_hi: 0.040,
        }
    }
}

/// Execute a grasp against the true shape and report the outcome.
///
/// Success requires, in order: both fingertips strictly outside the shape;
/// the closing segment intersecting the shape; the opening `2h` within
/// `[w, w + slack]` of the grasped width `w` (inclusive on both ends); and
/// the grasp line passing within `off_center_frac * min(a, b)` of the
/// shape center.
pub fn oracle_execute(shape: &ObjectShape, theta: &GraspConfig, params: &WorldParams) -> GraspOutcome {
    let (gx, gy, psi, h) = (theta.gx(), theta.gy(), theta.psi(), theta.h());
    let (s, c) = psi.sin_cos();
    let (dx, dy) = (c, s);

    for sign in [1.0, -1.0] {
        let fx = gx + sign * h * dx;
        let fy = gy + sign * h * dy;
        if shape.sdf(fx, fy) <= 0.0 {
            return GraspOutcome::FingerCollision;
        }
    }

    let chord = match shape.chord(gx, gy, dx, dy) {
        Some(iv) => iv,
        None => return GraspOutcome::NoContact,
    };
    // The fingers sweep t in [-h, h]; a chord entirely outside that range
    // means they close on air.
    if chord.0 > h || chord.1 < -h {
        return GraspOutcome::NoContact;
    }

    let width = chord.1 - chord.0;
    if 2.0 * h < width {
        return GraspOutcome::TooNarrow;
    }
    if 2.0 * h > width + params.slack_max {
        return GraspOutcome::TooWide;
    }

    let offset = (dx * (shape.cy - gy) - dy * (shape.cx - gx)).abs();
    if offset > params.off_center_frac * shape.a.min(shape.b) {
        return GraspOutcome::OffCenter;
    }

    GraspOutcome::Success
}

/// Box of physically meaningful toy-world configurations: the unit square
/// for the center, a full turn for the angle and `[H_MIN, H_MAX]` opening.
pub fn world_bounds() -> BoxBounds {
    BoxBounds::new(vec![0.0, 0.0, -PI, H_MIN], vec![1.0, 1.0, PI, H_MAX])
        .expect("static bounds are valid")
}

/// Every family identifier, `0..FAMILY_POOL`.
pub fn full_family_pool() -> Vec<u32> {
    (0..FAMILY_POOL).collect()
}

/// Nominal (pre-jitter) family parameters: kind, base major half-extent
/// and aspect ratio. The pool crosses 3 kinds x 4 sizes x 2 aspects.
pub fn family_nominal(family_id: u32) -> (ShapeKind, f64, f64) {
    let kind = match family_id % 3 {
        0 => ShapeKind::Rectangle,
        1 => ShapeKind::Ellipse,
        _ => ShapeKind::Capsule,
    };
    let a_base = [0.07, 0.10, 0.14, 0.19][(family_id / 3) as usize % 4];
    let aspect = [0.55, 0.85][(family_id / 12) as usize % 2];
    (kind, a_base, aspect)
}

/// Draw a scene from the given family: nominal half-extents with +-12%
/// jitter, a uniform orientation, and a center clamped so the whole shape
/// stays inside the unit square.
pub fn generate_scene<R: Rng>(rng: &mut R, family_id: u32) -> ObjectShape {
    let (kind, a_base, aspect) = family_nominal(family_id);
    let jitter_a: f64 = 1.0 + 0.12 * (2.0 * rng.gen::<f64>() - 1.0);
    let jitter_b: f64 = 1.0 + 0.12 * (2.0 * rng.gen::<f64>() - 1.0);
    let a = (a_base * jitter_a).clamp(0.03, 0.25);
    let b = (a * aspect * jitter_b).clamp(0.03, a);
    let phi = (rng.gen::<f64>() - 0.5) * PI;
    let mut shape = ObjectShape::new(kind, 0.0, 0.0, phi, a, b);
    // Keep a small margin so the rendered boundary band stays in view.
    let margin = (shape.circumradius() + 0.02).min(0.5);
    shape.cx = rng.gen::<f64>().clamp(margin, 1.0 - margin);
    shape.cy = rng.gen::<f64>().clamp(margin, 1.0 - margin);
    shape.shape_id = rng.gen::<u32>();
    shape.family_id = family_id;
    shape
}

/// Oriented box estimated from the occupancy channel by principal
/// component analysis of occupied cell centers.
#[derive(Clone, Debug)]
pub struct OrientedBox {
    /// Centroid of occupied cells (world coordinates).
    pub center: (f64, f64),
    /// Unit major axis (larger variance).
    pub major: (f64, f64),
    /// Unit minor axis (perpendicular, right-handed).
    pub minor: (f64, f64),
    /// Half-extent along the major axis, inflated by half a cell.
    pub half_major: f64,
    /// Half-extent along the minor axis, inflated by half a cell.
    pub half_minor: f64,
}

/// Fit an oriented box to the observation's occupancy. Errors when no cell
/// is occupied.
pub fn fit_oriented_box(obs: &Observation) -> Result<OrientedBox> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for iy in 0..GRID {
        for ix in 0..GRID {
            if obs.grid.at(CH_OCC, iy, ix) > 0.5 {
                pts.push(cell_center(ix, iy));
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::Numeric("empty occupancy: no object in view".into()));
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / n, my / n);
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for (x, y) in &pts {
        let (dx, dy) = (x - mx, y - my);
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    cxx /= n;
    cxy /= n;
    cyy /= n;

    // Analytic eigendecomposition of the 2x2 covariance.
    let half_tr = 0.5 * (cxx + cyy);
    let det_root = (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
    let lambda_max = half_tr + det_root;
    let major = if cxy.abs() > 1e-15 {
        // (cxx - l) vx + cxy vy = 0 — pick the better-conditioned row.
        let v1 = (cxy, lambda_max - cxx);
        let v2 = (lambda_max - cyy, cxy);
        let (vx, vy) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
        let norm = vx.hypot(vy);
        (vx / norm, vy / norm)
    } else if cxx >= cyy {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let minor = (-major.1, major.0);

    let (mut e_major, mut e_minor) = (0.0f64, 0.0f64);
    for (x, y) in &pts {
        let (dx, dy) = (x - mx, y - my);
        e_major = e_major.max((dx * major.0 + dy * major.1).abs());
        e_minor = e_minor.max((dx * minor.0 + dy * minor.1).abs());
    }
    // Cell centers under-reach the true extent by up to half a cell.
    let half_cell = 0.5 / GRID as f64;
    Ok(OrientedBox {
        center: (mx, my),
        major,
        minor,
        half_major: e_major + half_cell,
        half_minor: e_minor + half_cell,
    })
}

fn wrap_angle(psi: f64) -> f64 {
    let mut p = psi;
    while p > PI {
        p -= 2.0 * PI;
    }
    while p < -PI {
        p += 2.0 * PI;
    }
    p
}

/// Three heuristic grasp proposals from the observation alone.
///
/// An oriented box is fitted to the occupancy; for each approach face
/// (major+, major-, minor+) the gripper center is pushed a small standoff
/// out of the box centroid along the face normal, closing across the
/// perpendicular extent with a slightly widened opening. With both noise
/// scales zero the proposals are deterministic in the box geometry.
pub fn heuristic_inits<R: Rng>(
    obs: &Observation,
    params: &WorldParams,
    rng: &mut R,
) -> Result<Vec<GraspConfig>> {
    let obb = fit_oriented_box(obs)?;
    let faces = [
        (obb.major, obb.minor, obb.half_minor),
        ((-obb.major.0, -obb.major.1), obb.minor, obb.half_minor),
        (obb.minor, obb.major, obb.half_major),
    ];
    let mut inits = Vec::with_capacity(faces.len());
    for (normal, closing, half_extent) in faces {
        let z: f64 = rng.sample(StandardNormal);
        let standoff = params.palm_standoff + params.standoff_noise_sigma * z;
        let widen = rng.gen::<f64>() * params.opening_noise;
        let gx = obb.center.0 + standoff * normal.0;
        let gy = obb.center.1 + standoff * normal.1;
        let psi = wrap_angle(closing.1.atan2(closing.0));
        let h = (half_extent + widen).clamp(H_MIN, H_MAX);
        inits.push(GraspConfig::parallel_jaw(gx, gy, psi, h));
    }
    Ok(inits)
}

/// One exploration-noised grasp attempt for dataset collection: a heuristic
/// proposal perturbed by center, angle and opening noise wide enough to
/// produce informative failures of every kind.
pub fn explore_grasp<R: Rng>(
    obs: &Observation,
    params: &WorldParams,
    rng: &mut R,
) -> Result<GraspConfig> {
    let inits = heuristic_inits(obs, params, rng)?;
    let pick = rng.gen_range(0..inits.len());
    let base = &inits[pick];
    let zx: f64 = rng.sample(StandardNormal);
    let zy: f64 = rng.sample(StandardNormal);
    let za: f64 = rng.sample(StandardNormal);
    let span = params.explore_opening_hi - params.explore_opening_lo;
    let dh = params.explore_opening_lo + rng.gen::<f64>() * span;
    let theta = GraspConfig::parallel_jaw(
        (base.gx() + params.explore_center_sigma * zx).clamp(0.0, 1.0),
        (base.gy() + params.explore_center_sigma * zy).clamp(0.0, 1.0),
        wrap_angle(base.psi() + params.explore_angle_sigma * za),
        (base.h() + dh).clamp(H_MIN, H_MAX),
    );
    Ok(theta)
}
