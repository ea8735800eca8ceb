//! Grasp configurations and box constraints — the shared vocabulary between
//! the synthetic world, the models and the planner.
//!
//! A grasp configuration is a real vector; the planner treats it as opaque
//! coordinates, while the toy world fixes the four-dimensional layout
//! `(gx, gy, psi, h)`: gripper center, closing-axis angle, half-opening.

use crate::error::{Error, Result};

/// Index of the gripper-center x coordinate in a toy-world configuration.
pub const THETA_GX: usize = 0;
/// Index of the gripper-center y coordinate.
pub const THETA_GY: usize = 1;
/// Index of the closing-axis angle (radians).
pub const THETA_PSI: usize = 2;
/// Index of the half-opening (fingertip distance from the gripper center).
pub const THETA_H: usize = 3;
/// Dimension of a toy-world grasp configuration.
pub const THETA_DIM: usize = 4;

/// A grasp configuration vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspConfig {
    values: Vec<f64>,
}

impl GraspConfig {
    pub fn new(values: Vec<f64>) -> Self {
        GraspConfig { values }
    }

    /// Toy-world constructor with the canonical coordinate order.
    pub fn parallel_jaw(gx: f64, gy: f64, psi: f64, h: f64) -> Self {
        GraspConfig { values: vec![gx, gy, psi, h] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn gx(&self) -> f64 {
        self.values[THETA_GX]
    }

    pub fn gy(&self) -> f64 {
        self.values[THETA_GY]
    }

    pub fn psi(&self) -> f64 {
        self.values[THETA_PSI]
    }

    pub fn h(&self) -> f64 {
        self.values[THETA_H]
    }

    /// Reflection across the vertical world mid-line `x = 0.5`: the center's
    /// x coordinate flips and the closing axis negates its angle. Opening and
    /// y are unchanged.
    pub fn mirrored_x(&self) -> Self {
        let mut v = self.values.clone();
        v[THETA_GX] = 1.0 - v[THETA_GX];
        v[THETA_PSI] = -v[THETA_PSI];
        GraspConfig { values: v }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl std::fmt::Display for GraspConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.6}")?;
        }
        write!(f, ")")
    }
}

/// Axis-aligned box `lo <= theta <= hi` constraining a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Config(format!(
                "bound dimensions disagree: {} vs {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::Config(format!("non-finite bound in coordinate {i}")));
            }
            if l > h {
                return Err(Error::Config(format!(
                    "inverted bound in coordinate {i}: [{l}, {h}]"
                )));
            }
        }
        Ok(BoxBounds { lo, hi })
    }

    /// Box `center ± radius` per coordinate, clipped against `outer` when
    /// given. The clip keeps the box non-empty by also clamping the center.
    pub fn around(center: &[f64], radius: &[f64], outer: Option<&BoxBounds>) -> Result<Self> {
        if center.len() != radius.len() {
            return Err(Error::Config("center and radius dimensions disagree".into()));
        }
        let mut lo: Vec<f64> = center.iter().zip(radius).map(|(c, r)| c - r).collect();
        let mut hi: Vec<f64> = center.iter().zip(radius).map(|(c, r)| c + r).collect();
        if let Some(outer) = outer {
            for i in 0..lo.len() {
                lo[i] = lo[i].max(outer.lo[i]).min(outer.hi[i]);
                hi[i] = hi[i].min(outer.hi[i]).max(lo[i]);
            }
        }
        BoxBounds::new(lo, hi)
    }

    /// Smallest box containing both operands (they must agree in dimension).
    pub fn hull(&self, other: &BoxBounds) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Config("bound dimensions disagree".into()));
        }
        BoxBounds::new(
            self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Clamp every coordinate into the box.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }

    /// True when every coordinate lies inside (inclusive).
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }
}
