//! Static layer graph with reverse-mode differentiation.
//!
//! A [`Graph`] is an immutable DAG of layers built once through
//! [`GraphBuilder`] and shared read-only afterwards; all per-call state
//! (activations, pooling argmaxes, dropout masks, gradients) lives in a
//! [`Workspace`] so one graph can serve many threads. The same backward pass
//! machinery produces gradients with respect to the weights (training) and
//! with respect to the declared input slots (planning); callers choose which
//! via [`Graph::backward_weights`] / [`Graph::backward_inputs`].
//!
//! Gradient buffers are zeroed at the start of every backward call, and a
//! forward pass must precede each backward pass so the activation cache
//! matches the point of linearization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{self, LayerKind};
use crate::tensor::{GridTensor, Shape};

/// Reference to a value in the graph: either a declared input slot or the
/// output of an earlier layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Slot(usize),
    Layer(usize),
}

/// One trainable parameter tensor (e.g. a layer's weight matrix or bias).
#[derive(Clone, Debug)]
pub struct ParamVector {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug)]
struct SlotSpec {
    name: String,
    shape: Shape,
}

#[derive(Clone, Debug)]
struct Node {
    name: String,
    kind: LayerKind,
    inputs: Vec<NodeRef>,
    out_shape: Shape,
    /// Range into `Graph::params` holding this node's parameters.
    params: std::ops::Range<usize>,
    /// Bitmask of input slots this node transitively depends on.
    slot_deps: u32,
    /// True when this node or any transitive input owns parameters.
    contains_params: bool,
    /// True when this node feeds the graph output.
    reaches_output: bool,
}

/// Read-only view of a layer, for inspection and serialization.
pub struct NodeView<'a> {
    pub name: &'a str,
    pub kind: &'a LayerKind,
    pub out_shape: Shape,
}

/// Forward-pass mode. Dropout draws fresh masks in `Train` and is the
/// identity in `Eval`; nothing else differs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train,
}

/// Per-layer auxiliary state recorded by a forward pass.
#[derive(Clone, Debug)]
enum Aux {
    None,
    /// Flat in-plane argmax per pooled output cell.
    MaxPool(Vec<usize>),
    /// Multiplicative dropout mask (0 or 1/keep) per element.
    Dropout(Vec<f64>),
}

/// Immutable layer graph. Parameters are owned here; mutate them through
/// [`Graph::params_mut`] (training, checkpoint restore).
#[derive(Clone, Debug)]
pub struct Graph {
    slots: Vec<SlotSpec>,
    nodes: Vec<Node>,
    params: Vec<ParamVector>,
    output: usize,
}

/// Incremental builder for [`Graph`]. Shapes are checked as layers are added
/// so a graph that builds successfully never hits a shape error at run time.
pub struct GraphBuilder {
    slots: Vec<SlotSpec>,
    nodes: Vec<Node>,
    params: Vec<ParamVector>,
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl GraphBuilder {
    pub fn new() -> Self {
        GraphBuilder { slots: Vec::new(), nodes: Vec::new(), params: Vec::new() }
    }

    /// Declare an input slot. At most 32 slots are supported.
    pub fn input(&mut self, name: impl Into<String>, shape: Shape) -> NodeRef {
        assert!(self.slots.len() < 32, "at most 32 input slots supported");
        self.slots.push(SlotSpec { name: name.into(), shape });
        NodeRef::Slot(self.slots.len() - 1)
    }

    /// Append a layer consuming `inputs` (slots or earlier layers). Fails
    /// with an error naming the layer when shapes or arity do not fit.
    pub fn layer(
        &mut self,
        name: impl Into<String>,
        kind: LayerKind,
        inputs: &[NodeRef],
    ) -> Result<NodeRef> {
        let name = name.into();
        if self.nodes.iter().any(|n| n.name == name) {
            return Err(Error::shape(&name, "duplicate layer name"));
        }
        let mut in_shapes = Vec::with_capacity(inputs.len());
        let mut slot_deps = 0u32;
        let mut contains_params = false;
        for &input in inputs {
            match input {
                NodeRef::Slot(i) => {
                    let slot = self.slots.get(i).ok_or_else(|| {
                        Error::shape(&name, format!("references unknown slot {i}"))
                    })?;
                    in_shapes.push(slot.shape);
                    slot_deps |= 1 << i;
                }
                NodeRef::Layer(i) => {
                    let node = self.nodes.get(i).ok_or_else(|| {
                        Error::shape(&name, format!("references layer {i} that does not exist yet"))
                    })?;
                    in_shapes.push(node.out_shape);
                    slot_deps |= node.slot_deps;
                    contains_params |= node.contains_params;
                }
            }
        }
        let out_shape = kind.infer_shape(&name, &in_shapes)?;
        let start = self.params.len();
        for (suffix, dims) in kind.param_dims(&in_shapes) {
            let len = dims.iter().product();
            self.params.push(ParamVector {
                name: format!("{name}.{suffix}"),
                dims,
                values: vec![0.0; len],
            });
        }
        contains_params |= self.params.len() > start;
        self.nodes.push(Node {
            name,
            kind,
            inputs: inputs.to_vec(),
            out_shape,
            params: start..self.params.len(),
            slot_deps,
            contains_params,
            reaches_output: false,
        });
        Ok(NodeRef::Layer(self.nodes.len() - 1))
    }

    /// Finalize the graph with `output` as its result and Xavier-initialize
    /// all weights from `seed` (biases start at zero).
    pub fn build(mut self, output: NodeRef, seed: u64) -> Result<Graph> {
        let output = match output {
            NodeRef::Layer(i) if i < self.nodes.len() => i,
            NodeRef::Layer(i) => {
                return Err(Error::State(format!("output layer {i} does not exist")))
            }
            NodeRef::Slot(_) => {
                return Err(Error::State("graph output must be a layer, not a slot".into()))
            }
        };
        // Mark the ancestry of the output node.
        let mut reach = vec![false; self.nodes.len()];
        reach[output] = true;
        for i in (0..self.nodes.len()).rev() {
            if !reach[i] {
                continue;
            }
            for &input in &self.nodes[i].inputs {
                if let NodeRef::Layer(j) = input {
                    reach[j] = true;
                }
            }
        }
        for (node, r) in self.nodes.iter_mut().zip(reach) {
            node.reaches_output = r;
        }
        // Xavier-uniform weight init, biases zero, in declaration order.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for node in &self.nodes {
            let in_shapes: Vec<Shape> = node
                .inputs
                .iter()
                .map(|r| match *r {
                    NodeRef::Slot(i) => self.slots[i].shape,
                    NodeRef::Layer(i) => self.nodes[i].out_shape,
                })
                .collect();
            if let Some((fan_in, fan_out)) = node.kind.fans(&in_shapes) {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = &mut self.params[node.params.start];
                for v in &mut weight.values {
                    *v = rng.gen_range(-limit..limit);
                }
            }
        }
        Ok(Graph { slots: self.slots, nodes: self.nodes, params: self.params, output })
    }
}

impl Graph {
    // ── introspection ────────────────────────────────────────────────────

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_shape(&self, slot: usize) -> Shape {
        self.slots[slot].shape
    }

    pub fn slot_name(&self, slot: usize) -> &str {
        &self.slots[slot].name
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn output_shape(&self) -> Shape {
        self.nodes[self.output].out_shape
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeView<'_>> {
        self.nodes
            .iter()
            .map(|n| NodeView { name: &n.name, kind: &n.kind, out_shape: n.out_shape })
    }

    pub fn params(&self) -> &[ParamVector] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [ParamVector] {
        &mut self.params
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut ParamVector> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    // ── workspaces ───────────────────────────────────────────────────────

    /// Workspace for eval-mode passes (dropout inactive).
    pub fn workspace(&self) -> Workspace {
        self.make_workspace(Mode::Eval, None)
    }

    /// Workspace for train-mode passes; dropout masks are reproducible from
    /// `seed` and advance with every forward call.
    pub fn workspace_train(&self, seed: u64) -> Workspace {
        self.make_workspace(Mode::Train, Some(ChaCha8Rng::seed_from_u64(seed)))
    }

    fn make_workspace(&self, mode: Mode, rng: Option<ChaCha8Rng>) -> Workspace {
        Workspace {
            acts: self.nodes.iter().map(|n| GridTensor::zeros(n.out_shape)).collect(),
            act_grads: self.nodes.iter().map(|n| GridTensor::zeros(n.out_shape)).collect(),
            aux: vec![Aux::None; self.nodes.len()],
            slot_vals: self.slots.iter().map(|s| GridTensor::zeros(s.shape)).collect(),
            slot_grads: self.slots.iter().map(|s| GridTensor::zeros(s.shape)).collect(),
            param_grads: self.params.iter().map(|p| vec![0.0; p.len()]).collect(),
            mode,
            rng,
            forward_done: false,
        }
    }

    // ── forward ──────────────────────────────────────────────────────────

    /// Full forward pass. `inputs` must supply every slot in declaration
    /// order with matching shapes and finite values. Returns the output
    /// activation as a flat slice.
    pub fn forward<'w>(&self, ws: &'w mut Workspace, inputs: &[&GridTensor]) -> Result<&'w [f64]> {
        if inputs.len() != self.slots.len() {
            return Err(Error::State(format!(
                "graph has {} input slots, got {} inputs",
                self.slots.len(),
                inputs.len()
            )));
        }
        for (i, (input, spec)) in inputs.iter().zip(&self.slots).enumerate() {
            self.check_input(i, input, spec)?;
            ws.slot_vals[i].data_mut().copy_from_slice(input.data());
        }
        for i in 0..self.nodes.len() {
            self.forward_node(ws, i)?;
        }
        ws.forward_done = true;
        Ok(ws.acts[self.output].data())
    }

    /// Re-run only the part of the graph affected by the given slot updates,
    /// reusing cached activations elsewhere. Requires a prior full forward.
    /// Produces bit-identical results to a full forward with the same inputs.
    pub fn forward_update<'w>(
        &self,
        ws: &'w mut Workspace,
        updates: &[(usize, &GridTensor)],
    ) -> Result<&'w [f64]> {
        if !ws.forward_done {
            return Err(Error::State("forward_update requires a prior full forward".into()));
        }
        let mut dirty = 0u32;
        for &(slot, value) in updates {
            let spec = self
                .slots
                .get(slot)
                .ok_or_else(|| Error::State(format!("unknown slot {slot}")))?;
            self.check_input(slot, value, spec)?;
            ws.slot_vals[slot].data_mut().copy_from_slice(value.data());
            dirty |= 1 << slot;
        }
        for i in 0..self.nodes.len() {
            if self.nodes[i].slot_deps & dirty != 0 {
                self.forward_node(ws, i)?;
            }
        }
        Ok(ws.acts[self.output].data())
    }

    fn check_input(&self, index: usize, input: &GridTensor, spec: &SlotSpec) -> Result<()> {
        if input.shape() != spec.shape {
            return Err(Error::State(format!(
                "slot `{}` expects shape {}, got {}",
                spec.name,
                spec.shape,
                input.shape()
            )));
        }
        if !input.all_finite() {
            return Err(Error::NonFinite(format!("input for slot `{}` (index {index})", spec.name)));
        }
        Ok(())
    }

    fn forward_node(&self, ws: &mut Workspace, i: usize) -> Result<()> {
        let node = &self.nodes[i];
        let (before, rest) = ws.acts.split_at_mut(i);
        let out = &mut rest[0];
        let resolve = |r: &NodeRef| -> &GridTensor {
            match *r {
                NodeRef::Slot(s) => &ws.slot_vals[s],
                NodeRef::Layer(l) => &before[l],
            }
        };
        match node.kind {
            LayerKind::Dense { .. } | LayerKind::LinearHeads { .. } => {
                let x = resolve(&node.inputs[0]);
                let w = &self.params[node.params.start];
                let b = &self.params[node.params.start + 1];
                layers::dense_forward(x, &w.values, &b.values, out);
            }
            LayerKind::Conv2d { kernel, stride, padding, .. } => {
                let x = resolve(&node.inputs[0]);
                let w = &self.params[node.params.start];
                let b = &self.params[node.params.start + 1];
                layers::conv2d_forward(x, &w.values, &b.values, kernel, stride, padding, out);
            }
            LayerKind::MaxPool2d { size, stride } => {
                let x = resolve(&node.inputs[0]);
                let mut argmax = match std::mem::replace(&mut ws.aux[i], Aux::None) {
                    Aux::MaxPool(v) => v,
                    _ => Vec::new(),
                };
                layers::maxpool_forward(x, size, stride, out, &mut argmax);
                ws.aux[i] = Aux::MaxPool(argmax);
            }
            LayerKind::Relu => {
                let x = resolve(&node.inputs[0]);
                for (o, &v) in out.data_mut().iter_mut().zip(x.data()) {
                    *o = v.max(0.0);
                }
            }
            LayerKind::Logistic => {
                let x = resolve(&node.inputs[0]);
                for (o, &v) in out.data_mut().iter_mut().zip(x.data()) {
                    *o = layers::sigmoid(v);
                }
            }
            LayerKind::Dropout { keep } => {
                let x = resolve(&node.inputs[0]);
                match ws.mode {
                    Mode::Eval => {
                        out.data_mut().copy_from_slice(x.data());
                        ws.aux[i] = Aux::None;
                    }
                    Mode::Train => {
                        let rng = ws.rng.as_mut().ok_or_else(|| {
                            Error::State("train-mode forward requires a seeded workspace".into())
                        })?;
                        let inv = 1.0 / keep;
                        let mut mask = match std::mem::replace(&mut ws.aux[i], Aux::None) {
                            Aux::Dropout(v) => v,
                            _ => vec![0.0; x.len()],
                        };
                        for m in &mut mask {
                            *m = if rng.gen::<f64>() < keep { inv } else { 0.0 };
                        }
                        for ((o, &v), &m) in out.data_mut().iter_mut().zip(x.data()).zip(&mask) {
                            *o = v * m;
                        }
                        ws.aux[i] = Aux::Dropout(mask);
                    }
                }
            }
            LayerKind::TileConcat => {
                let map = resolve(&node.inputs[0]);
                let vec = resolve(&node.inputs[1]);
                layers::tile_concat_forward(map, vec, out);
            }
            LayerKind::ChannelConcat => {
                let mut offset = 0;
                for r in &node.inputs {
                    let x = resolve(r);
                    out.data_mut()[offset..offset + x.len()].copy_from_slice(x.data());
                    offset += x.len();
                }
            }
        }
        Ok(())
    }

    // ── backward ─────────────────────────────────────────────────────────

    /// Gradients of the (vector-valued) output w.r.t. all parameters, seeded
    /// with `upstream` (one value per output entry). Results land in
    /// [`Workspace::param_grads`]; accumulation starts from zero each call.
    pub fn backward_weights(&self, ws: &mut Workspace, upstream: &[f64]) -> Result<()> {
        self.backward(ws, upstream, true, 0)
    }

    /// Gradients of the output w.r.t. the listed input slots, available via
    /// [`Workspace::slot_grad`] afterwards. The activation cache from the
    /// preceding forward pass defines the linearization point.
    pub fn backward_inputs(&self, ws: &mut Workspace, upstream: &[f64], slots: &[usize]) -> Result<()> {
        let mut mask = 0u32;
        for &s in slots {
            if s >= self.slots.len() {
                return Err(Error::State(format!("unknown slot {s}")));
            }
            mask |= 1 << s;
        }
        self.backward(ws, upstream, false, mask)
    }

    fn backward(
        &self,
        ws: &mut Workspace,
        upstream: &[f64],
        want_weights: bool,
        slot_mask: u32,
    ) -> Result<()> {
        if !ws.forward_done {
            return Err(Error::State("backward called before any forward pass".into()));
        }
        let out_len = self.output_shape().len();
        if upstream.len() != out_len {
            return Err(Error::State(format!(
                "upstream gradient has {} entries, output has {out_len}",
                upstream.len()
            )));
        }
        if upstream.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("upstream gradient".into()));
        }

        let needed = |node: &Node| -> bool {
            node.reaches_output
                && ((want_weights && node.contains_params) || (node.slot_deps & slot_mask != 0))
        };

        for (i, node) in self.nodes.iter().enumerate() {
            if needed(node) || i == self.output {
                ws.act_grads[i].fill_zero();
            }
        }
        for (s, grad) in ws.slot_grads.iter_mut().enumerate() {
            if slot_mask & (1 << s) != 0 {
                grad.fill_zero();
            }
        }
        if want_weights {
            for g in &mut ws.param_grads {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        ws.act_grads[self.output].data_mut().copy_from_slice(upstream);

        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            if !(needed(node) || i == self.output) {
                continue;
            }
            self.backward_node(ws, i, want_weights, slot_mask, &needed)?;
        }
        Ok(())
    }

    fn backward_node(
        &self,
        ws: &mut Workspace,
        i: usize,
        want_weights: bool,
        slot_mask: u32,
        needed: &dyn Fn(&Node) -> bool,
    ) -> Result<()> {
        let node = &self.nodes[i];
        let (grads_before, grads_rest) = ws.act_grads.split_at_mut(i);
        let up = &grads_rest[0];
        // Splitting the borrow: `up` is read-only for node i, targets are
        // strictly earlier nodes or slots.
        let acts = &ws.acts;
        let slot_vals = &ws.slot_vals;
        let resolve_act = |r: &NodeRef| -> &GridTensor {
            match *r {
                NodeRef::Slot(s) => &slot_vals[s],
                NodeRef::Layer(l) => &acts[l],
            }
        };
        // Helper to fetch the mutable gradient tensor for an input reference,
        // or None when that gradient is not needed for the requested targets.
        macro_rules! grad_of {
            ($r:expr) => {
                match *$r {
                    NodeRef::Slot(s) => {
                        if slot_mask & (1 << s) != 0 {
                            Some(&mut ws.slot_grads[s])
                        } else {
                            None
                        }
                    }
                    NodeRef::Layer(l) => {
                        if needed(&self.nodes[l]) {
                            Some(&mut grads_before[l])
                        } else {
                            None
                        }
                    }
                }
            };
        }

        match node.kind {
            LayerKind::Dense { .. } | LayerKind::LinearHeads { .. } => {
                let x = resolve_act(&node.inputs[0]);
                let w = &self.params[node.params.start];
                let (dw, db) = if want_weights {
                    let (a, b) = ws.param_grads.split_at_mut(node.params.start + 1);
                    (Some(&mut a[node.params.start][..]), Some(&mut b[0][..]))
                } else {
                    (None, None)
                };
                let dx = grad_of!(&node.inputs[0]);
                layers::dense_backward(x, &w.values, up, dx, dw, db);
            }
            LayerKind::Conv2d { kernel, stride, padding, .. } => {
                let x = resolve_act(&node.inputs[0]);
                let w = &self.params[node.params.start];
                let (dw, db) = if want_weights {
                    let (a, b) = ws.param_grads.split_at_mut(node.params.start + 1);
                    (Some(&mut a[node.params.start][..]), Some(&mut b[0][..]))
                } else {
                    (None, None)
                };
                let dx = grad_of!(&node.inputs[0]);
                layers::conv2d_backward(x, &w.values, kernel, stride, padding, up, dx, dw, db);
            }
            LayerKind::MaxPool2d { .. } => {
                if let Some(dx) = grad_of!(&node.inputs[0]) {
                    let Aux::MaxPool(argmax) = &ws.aux[i] else {
                        return Err(Error::State(format!(
                            "pooling cache missing for layer `{}`",
                            node.name
                        )));
                    };
                    layers::maxpool_backward(up, argmax, dx);
                }
            }
            LayerKind::Relu => {
                if let Some(dx) = grad_of!(&node.inputs[0]) {
                    let out = &acts[i];
                    for ((d, &g), &o) in dx.data_mut().iter_mut().zip(up.data()).zip(out.data()) {
                        if o > 0.0 {
                            *d += g;
                        }
                    }
                }
            }
            LayerKind::Logistic => {
                if let Some(dx) = grad_of!(&node.inputs[0]) {
                    let out = &acts[i];
                    for ((d, &g), &o) in dx.data_mut().iter_mut().zip(up.data()).zip(out.data()) {
                        *d += g * o * (1.0 - o);
                    }
                }
            }
            LayerKind::Dropout { .. } => {
                if let Some(dx) = grad_of!(&node.inputs[0]) {
                    match &ws.aux[i] {
                        Aux::Dropout(mask) => {
                            for ((d, &g), &m) in dx.data_mut().iter_mut().zip(up.data()).zip(mask) {
                                *d += g * m;
                            }
                        }
                        // Eval mode: identity.
                        _ => {
                            for (d, &g) in dx.data_mut().iter_mut().zip(up.data()) {
                                *d += g;
                            }
                        }
                    }
                }
            }
            LayerKind::TileConcat => {
                let c_map = match node.inputs[0] {
                    NodeRef::Slot(s) => self.slots[s].shape.channels,
                    NodeRef::Layer(l) => self.nodes[l].out_shape.channels,
                };
                // The two sinks borrow disjoint tensors; handle sequentially.
                if let Some(d_map) = grad_of!(&node.inputs[0]) {
                    layers::tile_concat_backward(up, c_map, Some(d_map), None);
                }
                if let Some(d_vec) = grad_of!(&node.inputs[1]) {
                    layers::tile_concat_backward(up, c_map, None, Some(d_vec));
                }
            }
            LayerKind::ChannelConcat => {
                let mut offset = 0;
                for r in &node.inputs {
                    let len = match *r {
                        NodeRef::Slot(s) => self.slots[s].shape.len(),
                        NodeRef::Layer(l) => self.nodes[l].out_shape.len(),
                    };
                    if let Some(dx) = grad_of!(r) {
                        for (d, &g) in
                            dx.data_mut().iter_mut().zip(&up.data()[offset..offset + len])
                        {
                            *d += g;
                        }
                    }
                    offset += len;
                }
            }
        }
        Ok(())
    }
}

/// Per-call state for one graph: activations, dropout/pooling caches and all
/// gradient buffers. Create via [`Graph::workspace`] or
/// [`Graph::workspace_train`]; a workspace must only be used with the graph
/// that created it.
#[derive(Clone, Debug)]
pub struct Workspace {
    acts: Vec<GridTensor>,
    act_grads: Vec<GridTensor>,
    aux: Vec<Aux>,
    slot_vals: Vec<GridTensor>,
    slot_grads: Vec<GridTensor>,
    param_grads: Vec<Vec<f64>>,
    mode: Mode,
    rng: Option<ChaCha8Rng>,
    forward_done: bool,
}

impl Workspace {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Gradient w.r.t. one input slot; valid after `backward_inputs` that
    /// listed this slot.
    pub fn slot_grad(&self, slot: usize) -> &GridTensor {
        &self.slot_grads[slot]
    }

    /// Per-parameter gradients aligned with [`Graph::params`]; valid after
    /// `backward_weights`.
    pub fn param_grads(&self) -> &[Vec<f64>] {
        &self.param_grads
    }

}

impl Graph {
    /// Hash of the discrete decisions of `ws`'s last forward pass (ReLU
    /// on/off states and pooling argmaxes). Two inputs with equal patterns
    /// lie on the same smooth piece of the network, which is what makes a
    /// finite-difference gradient check between them valid.
    pub fn activation_pattern(&self, ws: &Workspace) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64; // FNV-1a offset basis
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x1000_0000_01b3);
        };
        for (i, node) in self.nodes.iter().enumerate() {
            match node.kind {
                LayerKind::Relu => {
                    // max(0, x) > 0 iff x > 0, so the output encodes the state.
                    for (j, &v) in ws.acts[i].data().iter().enumerate() {
                        if v > 0.0 {
                            mix(j as u64 + 1);
                        }
                    }
                    mix(u64::MAX);
                }
                LayerKind::MaxPool2d { .. } => {
                    if let Aux::MaxPool(argmax) = &ws.aux[i] {
                        for &a in argmax {
                            mix(a as u64 + 1);
                        }
                    }
                }
                _ => {}
            }
        }
        h
    }
}
