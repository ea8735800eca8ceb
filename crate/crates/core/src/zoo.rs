//! The three network architectures, built on the layer graph.
//!
//! - config-net: scene grid and grasp configuration meet in a tile-concat,
//!   followed by a convolution and fully-connected layers to one logistic
//!   probability. The workhorse model for planning by gradient ascent.
//! - patch-net: one convolutional stack per image patch (palm plus one per
//!   fingertip), concatenated into fully-connected layers and a logistic
//!   probability.
//! - regression-net: config-net's image channel without the post-merge
//!   convolution, ending in independent linear heads that predict a grasp
//!   configuration directly.
//!
//! Builders are pure: the same spec and seed give bit-identical graphs.

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder, NodeRef};
use crate::layers::LayerKind;
use crate::tensor::Shape;
use crate::world::{GRID, OBS_CHANNELS};

/// Side length of the palm patch fed to patch-net.
pub const PALM_PATCH: usize = 16;
/// Side length of each fingertip patch fed to patch-net.
pub const FINGER_PATCH: usize = 8;
/// Number of fingertip patches in the toy world.
pub const NUM_FINGERS: usize = 2;

/// The architecture family of a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArchKind {
    ConfigNet,
    PatchNet,
    RegressionNet,
}

impl ArchKind {
    pub fn tag(self) -> &'static str {
        match self {
            ArchKind::ConfigNet => "config-net",
            ArchKind::PatchNet => "patch-net",
            ArchKind::RegressionNet => "regression-net",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "config-net" => Ok(ArchKind::ConfigNet),
            "patch-net" => Ok(ArchKind::PatchNet),
            "regression-net" => Ok(ArchKind::RegressionNet),
            other => Err(Error::Format(format!("unknown architecture `{other}`"))),
        }
    }

    /// True when the network ends in a logistic success probability (the
    /// regression baseline instead emits a configuration).
    pub fn is_classifier(self) -> bool {
        !matches!(self, ArchKind::RegressionNet)
    }
}

/// Config-net hyperparameters. Defaults give the reference network.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigNetSpec {
    pub theta_dim: usize,
    pub dropout_keep: f64,
}

impl Default for ConfigNetSpec {
    fn default() -> Self {
        ConfigNetSpec { theta_dim: crate::grasp::THETA_DIM, dropout_keep: 0.75 }
    }
}

/// Patch-net hyperparameters. Defaults give the reference network.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchNetSpec {
    pub dropout_keep: f64,
}

impl Default for PatchNetSpec {
    fn default() -> Self {
        PatchNetSpec { dropout_keep: 0.75 }
    }
}

/// Regression-net hyperparameters. Defaults give the reference network.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionNetSpec {
    pub theta_dim: usize,
    pub dropout_keep: f64,
}

impl Default for RegressionNetSpec {
    fn default() -> Self {
        RegressionNetSpec { theta_dim: crate::grasp::THETA_DIM, dropout_keep: 0.75 }
    }
}

/// Image channel shared by config-net and regression-net: two padded
/// convolutions and a pooling, 4x32x32 -> 8x16x16.
fn image_channel(b: &mut GraphBuilder, image: NodeRef) -> Result<NodeRef> {
    let c1 = b.layer(
        "img_conv1",
        LayerKind::Conv2d { filters: 8, kernel: (5, 5), stride: (1, 1), padding: 2 },
        &[image],
    )?;
    let r1 = b.layer("img_relu1", LayerKind::Relu, &[c1])?;
    let c2 = b.layer(
        "img_conv2",
        LayerKind::Conv2d { filters: 8, kernel: (3, 3), stride: (1, 1), padding: 1 },
        &[r1],
    )?;
    let r2 = b.layer("img_relu2", LayerKind::Relu, &[c2])?;
    b.layer(
        "img_pool",
        LayerKind::MaxPool2d { size: (2, 2), stride: (2, 2) },
        &[r2],
    )
}

/// Build the config-net graph: image and configuration slots to one
/// logistic probability.
pub fn build_config_net(spec: &ConfigNetSpec, seed: u64) -> Result<Graph> {
    let mut b = GraphBuilder::new();
    let image = b.input("image", Shape::new(OBS_CHANNELS, GRID, GRID));
    let config = b.input("config", Shape::vector(spec.theta_dim));

    let img = image_channel(&mut b, image)?;
    let cd = b.layer("cfg_dense", LayerKind::Dense { out_features: 8 }, &[config])?;
    let cr = b.layer("cfg_relu", LayerKind::Relu, &[cd])?;
    let merge = b.layer("merge", LayerKind::TileConcat, &[img, cr])?;

    let pc = b.layer(
        "post_conv",
        LayerKind::Conv2d { filters: 8, kernel: (3, 3), stride: (1, 1), padding: 1 },
        &[merge],
    )?;
    let pr = b.layer("post_relu", LayerKind::Relu, &[pc])?;
    let pp = b.layer(
        "post_pool",
        LayerKind::MaxPool2d { size: (2, 2), stride: (2, 2) },
        &[pr],
    )?;

    let fc1 = b.layer("fc1", LayerKind::Dense { out_features: 32 }, &[pp])?;
    let fr1 = b.layer("fc1_relu", LayerKind::Relu, &[fc1])?;
    let fd1 = b.layer("fc1_drop", LayerKind::Dropout { keep: spec.dropout_keep }, &[fr1])?;
    let fc2 = b.layer("fc2", LayerKind::Dense { out_features: 16 }, &[fd1])?;
    let fr2 = b.layer("fc2_relu", LayerKind::Relu, &[fc2])?;
    let fd2 = b.layer("fc2_drop", LayerKind::Dropout { keep: spec.dropout_keep }, &[fr2])?;
    let head = b.layer("head", LayerKind::Dense { out_features: 1 }, &[fd2])?;
    let prob = b.layer("prob", LayerKind::Logistic, &[head])?;
    b.build(prob, seed)
}

/// One patch stack: two padded convolutions, pooling, dense to 16.
fn patch_stack(b: &mut GraphBuilder, prefix: &str, patch: NodeRef) -> Result<NodeRef> {
    let c1 = b.layer(
        &format!("{prefix}_conv1"),
        LayerKind::Conv2d { filters: 8, kernel: (3, 3), stride: (1, 1), padding: 1 },
        &[patch],
    )?;
    let r1 = b.layer(&format!("{prefix}_relu1"), LayerKind::Relu, &[c1])?;
    let c2 = b.layer(
        &format!("{prefix}_conv2"),
        LayerKind::Conv2d { filters: 8, kernel: (3, 3), stride: (1, 1), padding: 1 },
        &[r1],
    )?;
    let r2 = b.layer(&format!("{prefix}_relu2"), LayerKind::Relu, &[c2])?;
    let pool = b.layer(
        &format!("{prefix}_pool"),
        LayerKind::MaxPool2d { size: (2, 2), stride: (2, 2) },
        &[r2],
    )?;
    let d = b.layer(&format!("{prefix}_dense"), LayerKind::Dense { out_features: 16 }, &[pool])?;
    b.layer(&format!("{prefix}_relu3"), LayerKind::Relu, &[d])
}

/// Build the patch-net graph: palm and fingertip patch slots to one
/// logistic probability.
pub fn build_patch_net(spec: &PatchNetSpec, seed: u64) -> Result<Graph> {
    let mut b = GraphBuilder::new();
    let palm = b.input("palm", Shape::new(OBS_CHANNELS, PALM_PATCH, PALM_PATCH));
    let mut stacks = vec![patch_stack(&mut b, "palm", palm)?];
    for f in 0..NUM_FINGERS {
        let slot = b.input(
            format!("finger{f}"),
            Shape::new(OBS_CHANNELS, FINGER_PATCH, FINGER_PATCH),
        );
        stacks.push(patch_stack(&mut b, &format!("f{f}"), slot)?);
    }
    let cat = b.layer("concat", LayerKind::ChannelConcat, &stacks)?;
    let fc1 = b.layer("fc1", LayerKind::Dense { out_features: 32 }, &[cat])?;
    let fr1 = b.layer("fc1_relu", LayerKind::Relu, &[fc1])?;
    let fd1 = b.layer("fc1_drop", LayerKind::Dropout { keep: spec.dropout_keep }, &[fr1])?;
    let head = b.layer("head", LayerKind::Dense { out_features: 1 }, &[fd1])?;
    let prob = b.layer("prob", LayerKind::Logistic, &[head])?;
    b.build(prob, seed)
}

/// Build the regression baseline: image channel, a second pooling, two
/// hidden dense layers and independent linear heads of dimension theta.
pub fn build_regression_net(spec: &RegressionNetSpec, seed: u64) -> Result<Graph> {
    let mut b = GraphBuilder::new();
    let image = b.input("image", Shape::new(OBS_CHANNELS, GRID, GRID));
    let img = image_channel(&mut b, image)?;
    let pool2 = b.layer(
        "pool2",
        LayerKind::MaxPool2d { size: (2, 2), stride: (2, 2) },
        &[img],
    )?;
    let fc1 = b.layer("fc1", LayerKind::Dense { out_features: 32 }, &[pool2])?;
    let fr1 = b.layer("fc1_relu", LayerKind::Relu, &[fc1])?;
    let fd1 = b.layer("fc1_drop", LayerKind::Dropout { keep: spec.dropout_keep }, &[fr1])?;
    let fc2 = b.layer("fc2", LayerKind::Dense { out_features: 16 }, &[fd1])?;
    let fr2 = b.layer("fc2_relu", LayerKind::Relu, &[fc2])?;
    let fd2 = b.layer("fc2_drop", LayerKind::Dropout { keep: spec.dropout_keep }, &[fr2])?;
    let heads = b.layer("heads", LayerKind::LinearHeads { heads: spec.theta_dim }, &[fd2])?;
    b.build(heads, seed)
}

/// Build the default network of the given family (used when loading
/// checkpoints).
pub fn build_default(arch: ArchKind, theta_dim: usize, dropout_keep: f64, seed: u64) -> Result<Graph> {
    match arch {
        ArchKind::ConfigNet => build_config_net(&ConfigNetSpec { theta_dim, dropout_keep }, seed),
        ArchKind::PatchNet => build_patch_net(&PatchNetSpec { dropout_keep }, seed),
        ArchKind::RegressionNet => {
            build_regression_net(&RegressionNetSpec { theta_dim, dropout_keep }, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::GridTensor;

    #[test]
    fn config_net_merge_outputs_16_channels_at_16x16() {
        let g = build_config_net(&ConfigNetSpec::default(), 0).unwrap();
        let merge = g
            .nodes()
            .find(|n| n.name == "merge")
            .expect("merge layer present");
        assert_eq!(merge.out_shape, Shape::new(16, 16, 16));
    }

    #[test]
    fn config_net_parameter_count_is_frozen() {
        let g = build_config_net(&ConfigNetSpec::default(), 0).unwrap();
        let n = g.param_count();
        assert_eq!(n, 19_553);
        assert!((5_000..=80_000).contains(&n));
    }

    #[test]
    fn config_dense_dimensions_match_theta() {
        let g = build_config_net(&ConfigNetSpec::default(), 0).unwrap();
        let w = g
            .params()
            .iter()
            .find(|p| p.name == "cfg_dense.weight")
            .unwrap();
        assert_eq!(w.dims, vec![8, 4]);
        let b = g
            .params()
            .iter()
            .find(|p| p.name == "cfg_dense.bias")
            .unwrap();
        assert_eq!(b.dims, vec![8]);
    }

    #[test]
    fn same_seed_gives_identical_parameters() {
        let a = build_config_net(&ConfigNetSpec::default(), 5).unwrap();
        let b = build_config_net(&ConfigNetSpec::default(), 5).unwrap();
        for (pa, pb) in a.params().iter().zip(b.params()) {
            assert_eq!(pa.values, pb.values);
        }
        let c = build_config_net(&ConfigNetSpec::default(), 6).unwrap();
        let differs = a
            .params()
            .iter()
            .zip(c.params())
            .any(|(pa, pc)| pa.values != pc.values);
        assert!(differs, "different seeds must give different weights");
    }

    #[test]
    fn patch_net_shape_and_size() {
        let g = build_patch_net(&PatchNetSpec::default(), 0).unwrap();
        assert_eq!(g.num_slots(), 1 + NUM_FINGERS);
        assert_eq!(g.output_shape(), Shape::vector(1));
        assert_eq!(g.param_count(), 16_577);
    }

    #[test]
    fn regression_net_has_no_config_slot_and_theta_output() {
        let g = build_regression_net(&RegressionNetSpec::default(), 0).unwrap();
        assert_eq!(g.num_slots(), 1);
        assert!(g.slot_index("config").is_none());
        assert_eq!(g.output_shape(), Shape::vector(4));
        assert_eq!(g.param_count(), 18_404);
    }

    #[test]
    fn classifier_outputs_are_probabilities() {
        let g = build_config_net(&ConfigNetSpec::default(), 3).unwrap();
        let mut ws = g.workspace();
        let mut image = GridTensor::zeros(Shape::new(OBS_CHANNELS, GRID, GRID));
        for (i, v) in image.data_mut().iter_mut().enumerate() {
            *v = ((i % 17) as f64) / 17.0 - 0.3;
        }
        let config = GridTensor::from_vec(Shape::vector(4), vec![0.2, -0.1, 0.5, 0.9]).unwrap();
        let out = g.forward(&mut ws, &[&image, &config]).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0] > 0.0 && out[0] < 1.0);
    }

    #[test]
    fn arch_tags_round_trip() {
        for arch in [ArchKind::ConfigNet, ArchKind::PatchNet, ArchKind::RegressionNet] {
            assert_eq!(ArchKind::from_tag(arch.tag()).unwrap(), arch);
        }
        assert!(ArchKind::from_tag("mystery-net").is_err());
    }
}
