//! Image-patch extraction: windows of the scene grid resampled around
//! anchor points derived from the grasp configuration.
//!
//! Two patch families exist. The *object patch* is a full-size window used
//! as the config-net image input, centered either on the object centroid
//! (fixed — independent of the configuration) or on the gripper center
//! (palm-tracked). *Grasp patches* feed the patch-net: a palm window plus
//! one window per fingertip, each rotated to align with the closing axis.
//!
//! Sampling is continuous with bilinear (default) or nearest
//! interpolation; cells that fall outside the scene grid read as zero.
//! Configuration gradients of patches are taken by central finite
//! differences, one directional difference per coordinate.

use crate::grasp::GraspConfig;
use crate::tensor::{GridTensor, Shape};
use crate::world::{Observation, GRID, OBS_CHANNELS};
use crate::zoo::{FINGER_PATCH, NUM_FINGERS, PALM_PATCH};

/// Interpolation rule for patch sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    Nearest,
    Bilinear,
}

impl Interp {
    pub fn tag(self) -> &'static str {
        match self {
            Interp::Nearest => "nearest",
            Interp::Bilinear => "bilinear",
        }
    }

    pub fn from_tag(tag: &str) -> crate::error::Result<Self> {
        match tag {
            "nearest" => Ok(Interp::Nearest),
            "bilinear" => Ok(Interp::Bilinear),
            other => Err(crate::error::Error::Format(format!(
                "unknown interpolation `{other}`"
            ))),
        }
    }
}

/// Anchor rule for the object patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchMode {
    /// Centered on the occupancy centroid; independent of the grasp.
    Fixed,
    /// Centered on the gripper center; moves with the grasp.
    PalmTracked,
}

impl PatchMode {
    pub fn tag(self) -> &'static str {
        match self {
            PatchMode::Fixed => "fixed",
            PatchMode::PalmTracked => "palm-tracked",
        }
    }

    pub fn from_tag(tag: &str) -> crate::error::Result<Self> {
        match tag {
            "fixed" => Ok(PatchMode::Fixed),
            "palm-tracked" => Ok(PatchMode::PalmTracked),
            other => Err(crate::error::Error::Format(format!(
                "unknown patch mode `{other}`"
            ))),
        }
    }
}

/// Patch-extraction engine; geometry is fixed, interpolation selectable.
#[derive(Clone, Copy, Debug)]
pub struct PatchExtractor {
    pub interp: Interp,
}

impl Default for PatchExtractor {
    fn default() -> Self {
        PatchExtractor { interp: Interp::Bilinear }
    }
}

/// Sample one channel of the grid at continuous cell coordinates; points
/// outside the grid contribute zero.
fn sample(grid: &GridTensor, ch: usize, px: f64, py: f64, interp: Interp) -> f64 {
    let w = grid.shape().width as isize;
    let h = grid.shape().height as isize;
    let tap = |x: isize, y: isize| -> f64 {
        if x >= 0 && x < w && y >= 0 && y < h {
            grid.at(ch, y as usize, x as usize)
        } else {
            0.0
        }
    };
    match interp {
        Interp::Nearest => tap(px.round() as isize, py.round() as isize),
        Interp::Bilinear => {
            let x0 = px.floor();
            let y0 = py.floor();
            let fx = px - x0;
            let fy = py - y0;
            let (x0, y0) = (x0 as isize, y0 as isize);
            (1.0 - fx) * (1.0 - fy) * tap(x0, y0)
                + fx * (1.0 - fy) * tap(x0 + 1, y0)
                + (1.0 - fx) * fy * tap(x0, y0 + 1)
                + fx * fy * tap(x0 + 1, y0 + 1)
        }
    }
}

impl PatchExtractor {
    /// Extract a `size`-cell square window centered at world `(cx, cy)`,
    /// rotated by `angle`, from all observation channels.
    fn window(
        &self,
        obs: &Observation,
        cx: f64,
        cy: f64,
        angle: f64,
        size: usize,
    ) -> GridTensor {
        let mut out = GridTensor::zeros(Shape::new(OBS_CHANNELS, size, size));
        let cell = 1.0 / GRID as f64;
        let (sin, cos) = angle.sin_cos();
        let half = size as f64 / 2.0;
        for i in 0..size {
            for j in 0..size {
                let u = (j as f64 + 0.5 - half) * cell;
                let v = (i as f64 + 0.5 - half) * cell;
                let wx = cx + cos * u - sin * v;
                let wy = cy + sin * u + cos * v;
                let px = wx * GRID as f64 - 0.5;
                let py = wy * GRID as f64 - 0.5;
                for ch in 0..OBS_CHANNELS {
                    out.set(ch, i, j, sample(&obs.grid, ch, px, py, self.interp));
                }
            }
        }
        out
    }

    /// World coordinates of the object-patch center for the given mode.
    pub fn object_anchor(
        &self,
        obs: &Observation,
        theta: &GraspConfig,
        mode: PatchMode,
    ) -> (f64, f64) {
        match mode {
            PatchMode::Fixed => obs.occupancy_centroid().unwrap_or((0.5, 0.5)),
            PatchMode::PalmTracked => (theta.gx(), theta.gy()),
        }
    }

    /// The config-net image input: a full-size unrotated window around the
    /// mode's anchor.
    pub fn object_patch(
        &self,
        obs: &Observation,
        theta: &GraspConfig,
        mode: PatchMode,
    ) -> GridTensor {
        let (cx, cy) = self.object_anchor(obs, theta, mode);
        self.window(obs, cx, cy, 0.0, GRID)
    }

    /// The patch-net inputs: palm window rotated to the closing axis, then
    /// one window per fingertip.
    pub fn grasp_patches(&self, obs: &Observation, theta: &GraspConfig) -> Vec<GridTensor> {
        let (gx, gy, psi, h) = (theta.gx(), theta.gy(), theta.psi(), theta.h());
        let (sin, cos) = psi.sin_cos();
        let mut patches =
            Vec::with_capacity(1 + NUM_FINGERS);
        patches.push(self.window(obs, gx, gy, psi, PALM_PATCH));
        for sign in [1.0, -1.0] {
            patches.push(self.window(
                obs,
                gx + sign * h * cos,
                gy + sign * h * sin,
                psi,
                FINGER_PATCH,
            ));
        }
        patches
    }

    /// Central-difference directional derivative of the object patch with
    /// respect to configuration coordinate `coord`.
    pub fn object_patch_diff(
        &self,
        obs: &Observation,
        theta: &GraspConfig,
        mode: PatchMode,
        coord: usize,
        eps: f64,
    ) -> GridTensor {
        let (plus, minus) = probe_pair(theta, coord, eps);
        let p = self.object_patch(obs, &plus, mode);
        let m = self.object_patch(obs, &minus, mode);
        central_diff(&p, &m, eps)
    }

    /// Central-difference directional derivatives of all grasp patches
    /// with respect to configuration coordinate `coord`. One call costs
    /// two patch extractions.
    pub fn grasp_patch_diff(
        &self,
        obs: &Observation,
        theta: &GraspConfig,
        coord: usize,
        eps: f64,
    ) -> Vec<GridTensor> {
        let (plus, minus) = probe_pair(theta, coord, eps);
        let p = self.grasp_patches(obs, &plus);
        let m = self.grasp_patches(obs, &minus);
        p.iter()
            .zip(&m)
            .map(|(a, b)| central_diff(a, b, eps))
            .collect()
    }
}

fn probe_pair(theta: &GraspConfig, coord: usize, eps: f64) -> (GraspConfig, GraspConfig) {
    let mut plus = theta.clone();
    let mut minus = theta.clone();
    plus.as_mut_slice()[coord] += eps;
    minus.as_mut_slice()[coord] -= eps;
    (plus, minus)
}

fn central_diff(plus: &GridTensor, minus: &GridTensor, eps: f64) -> GridTensor {
    let mut out = GridTensor::zeros(plus.shape());
    for ((o, p), m) in out
        .data_mut()
        .iter_mut()
        .zip(plus.data())
        .zip(minus.data())
    {
        *o = (p - m) / (2.0 * eps);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{cell_center, ObjectShape, ShapeKind};

    fn scene() -> (ObjectShape, Observation) {
        let s = ObjectShape::new(ShapeKind::Rectangle, 0.5, 0.5, 0.0, 0.15, 0.08);
        let obs = s.render();
        (s, obs)
    }

    /// Observation whose every channel is a linear ramp in world x.
    fn ramp_obs(slope: f64) -> Observation {
        let mut grid = GridTensor::zeros(Observation::shape());
        for ch in 0..OBS_CHANNELS {
            for iy in 0..GRID {
                for ix in 0..GRID {
                    let (x, _) = cell_center(ix, iy);
                    grid.set(ch, iy, ix, slope * x);
                }
            }
        }
        Observation { grid }
    }

    #[test]
    fn fixed_mode_is_theta_independent() {
        let (_, obs) = scene();
        let ex = PatchExtractor::default();
        let a = ex.object_patch(&obs, &GraspConfig::parallel_jaw(0.2, 0.3, 0.4, 0.05), PatchMode::Fixed);
        let b = ex.object_patch(&obs, &GraspConfig::parallel_jaw(0.9, 0.8, -1.0, 0.2), PatchMode::Fixed);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn centered_palm_patch_is_identity_window() {
        let (_, obs) = scene();
        let ex = PatchExtractor::default();
        let theta = GraspConfig::parallel_jaw(0.5, 0.5, 0.0, 0.1);
        let patch = ex.object_patch(&obs, &theta, PatchMode::PalmTracked);
        // A full-size window centered at the grid center reproduces the
        // scene exactly: every sample lands on a cell center.
        assert_eq!(patch.data(), obs.grid.data());
    }

    #[test]
    fn two_cell_translation_shifts_contents() {
        let (_, obs) = scene();
        let ex = PatchExtractor { interp: Interp::Nearest };
        let cell = 1.0 / GRID as f64;
        let base = GraspConfig::parallel_jaw(0.5, 0.5, 0.0, 0.1);
        let moved = GraspConfig::parallel_jaw(0.5 + 2.0 * cell, 0.5, 0.0, 0.1);
        let p0 = ex.object_patch(&obs, &base, PatchMode::PalmTracked);
        let p1 = ex.object_patch(&obs, &moved, PatchMode::PalmTracked);
        for i in 0..GRID {
            for j in 0..GRID - 2 {
                for ch in 0..OBS_CHANNELS {
                    assert_eq!(
                        p1.at(ch, i, j),
                        p0.at(ch, i, j + 2),
                        "cell ({i},{j}) channel {ch}"
                    );
                }
            }
        }
    }

    #[test]
    fn half_turn_rotates_palm_patch_180_degrees() {
        let (_, obs) = scene();
        let ex = PatchExtractor::default();
        let theta0 = GraspConfig::parallel_jaw(0.47, 0.52, 0.0, 0.1);
        let theta1 = GraspConfig::parallel_jaw(0.47, 0.52, std::f64::consts::PI, 0.1);
        let p0 = &ex.grasp_patches(&obs, &theta0)[0];
        let p1 = &ex.grasp_patches(&obs, &theta1)[0];
        let n = PALM_PATCH;
        for ch in 0..OBS_CHANNELS {
            for i in 0..n {
                for j in 0..n {
                    let a = p0.at(ch, i, j);
                    let b = p1.at(ch, n - 1 - i, n - 1 - j);
                    assert!((a - b).abs() < 1e-9, "({i},{j}) ch {ch}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn three_patches_with_fingertips_on_the_closing_axis() {
        let (_, obs) = scene();
        let ex = PatchExtractor::default();
        let theta = GraspConfig::parallel_jaw(0.5, 0.5, 0.0, 0.125);
        let patches = ex.grasp_patches(&obs, &theta);
        assert_eq!(patches.len(), 1 + NUM_FINGERS);
        assert_eq!(patches[0].shape(), Shape::new(OBS_CHANNELS, PALM_PATCH, PALM_PATCH));
        for f in 1..patches.len() {
            assert_eq!(
                patches[f].shape(),
                Shape::new(OBS_CHANNELS, FINGER_PATCH, FINGER_PATCH)
            );
        }
        // With psi = 0 the finger windows are plain translated windows at
        // (gx +- h, gy): compare against directly extracted windows.
        let right = ex.window(&obs, 0.5 + 0.125, 0.5, 0.0, FINGER_PATCH);
        let left = ex.window(&obs, 0.5 - 0.125, 0.5, 0.0, FINGER_PATCH);
        assert_eq!(patches[1].data(), right.data());
        assert_eq!(patches[2].data(), left.data());
    }

    #[test]
    fn bilinear_patches_are_continuous_in_theta() {
        let (_, obs) = scene();
        let ex = PatchExtractor::default();
        let delta = 1e-6;
        let theta = GraspConfig::parallel_jaw(0.48, 0.51, 0.37, 0.11);
        let base = ex.grasp_patches(&obs, &theta);
        for coord in 0..theta.dim() {
            let mut bumped = theta.clone();
            bumped.as_mut_slice()[coord] += delta;
            let moved = ex.grasp_patches(&obs, &bumped);
            for (a, b) in base.iter().zip(&moved) {
                let max = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                assert!(max <= 1e-4, "coord {coord}: sup change {max}");
            }
        }
    }

    #[test]
    fn fixed_object_patch_diff_is_zero() {
        let (_, obs) = scene();
        let ex = PatchExtractor::default();
        let theta = GraspConfig::parallel_jaw(0.45, 0.55, 0.3, 0.12);
        for coord in 0..theta.dim() {
            let d = ex.object_patch_diff(&obs, &theta, PatchMode::Fixed, coord, 1e-3);
            assert!(d.data().iter().all(|v| *v == 0.0), "coord {coord}");
        }
    }

    #[test]
    fn ramp_translation_derivative_equals_slope() {
        let slope = 1.7;
        let obs = ramp_obs(slope);
        let ex = PatchExtractor::default();
        let theta = GraspConfig::parallel_jaw(0.5, 0.5, 0.0, 0.1);
        let diffs = ex.grasp_patch_diff(&obs, &theta, crate::grasp::THETA_GX, 1e-3);
        // Interior palm cells: everything except the outermost ring, which
        // may touch the zero-filled boundary of the ramp image.
        let palm = &diffs[0];
        for i in 2..PALM_PATCH - 2 {
            for j in 2..PALM_PATCH - 2 {
                for ch in 0..OBS_CHANNELS {
                    let d = palm.at(ch, i, j);
                    assert!(
                        (d - slope).abs() < 1e-6,
                        "cell ({i},{j}) ch {ch}: {d} vs {slope}"
                    );
                }
            }
        }
    }

    #[test]
    fn rotation_derivative_obeys_richardson_ratio() {
        // Under rotation a ramp-image patch cell reads
        //   slope * (cx + cos(psi) u - sin(psi) v),
        // a smooth function of psi, so central differences converge at
        // second order: quartering eps divides the error by ~16... no —
        // halving eps quarters the error.
        let slope = 1.0;
        let obs = ramp_obs(slope);
        let ex = PatchExtractor::default();
        let psi = 0.3;
        let theta = GraspConfig::parallel_jaw(0.5, 0.5, psi, 0.1);
        let cell = 1.0 / GRID as f64;
        let (i, j) = (2, 3);
        let u = (j as f64 + 0.5 - PALM_PATCH as f64 / 2.0) * cell;
        let v = (i as f64 + 0.5 - PALM_PATCH as f64 / 2.0) * cell;
        let truth = slope * (-psi.sin() * u - psi.cos() * v);
        let eps = 1e-2;
        let d1 = ex.grasp_patch_diff(&obs, &theta, crate::grasp::THETA_PSI, eps)[0].at(0, i, j);
        let d2 =
            ex.grasp_patch_diff(&obs, &theta, crate::grasp::THETA_PSI, eps / 2.0)[0].at(0, i, j);
        let e1 = (d1 - truth).abs();
        let e2 = (d2 - truth).abs();
        assert!(e1 > 1e-12, "need measurable error, got {e1}");
        let ratio = e1 / e2;
        assert!(
            (2.5..6.0).contains(&ratio),
            "second-order convergence expected, ratio {ratio} (e1={e1}, e2={e2})"
        );
    }

    #[test]
    fn out_of_grid_cells_read_zero() {
        let (_, obs) = scene();
        let ex = PatchExtractor::default();
        // Palm at the corner: most of the window hangs outside.
        let theta = GraspConfig::parallel_jaw(0.01, 0.01, 0.0, 0.05);
        let patch = &ex.grasp_patches(&obs, &theta)[0];
        assert_eq!(patch.at(0, 0, 0), 0.0);
        assert!(patch.all_finite());
    }
}
