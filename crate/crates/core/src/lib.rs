//! Learned grasp-success models and a gradient-based grasp planner.
//!
//! The crate trains a small convolutional classifier to predict whether a
//! parallel-jaw grasp of a tabletop object succeeds, then *plans* grasps by
//! gradient ascent on the classifier's predicted success probability with
//! respect to the grasp configuration itself. Everything runs in a synthetic
//! 2-D desk-scale world with an analytic grasp oracle, so datasets, training
//! and benchmarks are fully reproducible from a seed.
//!
//! Module map:
//!
//! * [`tensor`], [`layers`], [`graph`] — a static layer graph with reverse-mode
//!   differentiation w.r.t. both weights (training) and inputs (planning).
//! * [`zoo`], [`patches`] — network builders and patch extraction.
//! * [`world`], [`dataset`] — synthetic scenes, grasp oracle, data collection.
//! * [`train`] — cross-entropy / ridge-regression training with Adam.
//! * [`plan`] — projected gradient ascent with backtracking line search.
//! * [`model`] — ties a graph to its extraction scheme; gradient modes.
//! * [`eval`] — cross-validated classifier metrics and the planner benchmark.
//! * [`checkpoint`] — model serialization.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod grasp;
pub mod graph;
pub mod layers;
pub mod model;
pub mod patches;
pub mod plan;
pub mod train;
pub mod tensor;
pub mod world;
pub mod zoo;

pub use error::{Error, Result};
pub use grasp::{BoxBounds, GraspConfig};
pub use graph::{Graph, GraphBuilder, Mode, NodeRef, ParamVector, Workspace};
pub use layers::LayerKind;
pub use tensor::{GridTensor, Shape};
