//! Minimal reverse-mode differentiation over a define-by-run tape.
//!
//! Values are computed eagerly as nodes are appended; `backward` walks the
//! tape in reverse and accumulates gradients. Model parameters enter the
//! graph as [`Graph::param`] leaves whose values are read from the attached
//! model, so no parameter data is copied per batch.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::model::{Model, ParamId};
use super::scalar::{sigmoid, Scalar};
use super::tensor::{gemm_acc, Tensor};
use super::NeuralError;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Payload<F: Scalar> {
    /// Input tensor; gradients are only tracked when `requires_grad`.
    Leaf {
        requires_grad: bool,
    },
    /// Model parameter; the value lives in the attached model.
    Param(ParamId),
    Op(Op<F>),
}

#[derive(Debug)]
enum Op<F: Scalar> {
    MatMul,
    Add,
    /// `x (m×n) + bias (m×1)` broadcast over columns.
    AddBias,
    Sigmoid,
    Tanh,
    /// Elementwise product.
    Mul,
    ConcatRows,
    SliceRows {
        start: usize,
        len: usize,
    },
    SoftmaxCols,
    Scale {
        factor: F,
    },
    /// Sum of same-shaped parents.
    AddN,
    /// Row gather from an id table: parent (V×E), output (E×B).
    EmbedLookup {
        ids: Vec<u32>,
    },
    /// Stacks T parents of shape (r×c) into a (T, r, c) tensor.
    PackSteps,
    /// Per-column gather across T same-shaped parents.
    TimeGatherCols {
        step_of_col: Vec<usize>,
    },
    /// Scores s[t,b] = Σ_h pack[t,h,b]·q[h,b]; parents [pack (T,H,B), q (H×B)].
    AttnScores,
    /// Context c[h,b] = Σ_t w[t,b]·pack[t,h,b]; parents [pack (T,H,B), w (T×B)].
    AttnContext,
    /// Inverted dropout; mask entries are 0 or 1/(1-rate).
    Dropout {
        mask: Vec<F>,
    },
    /// Sum over unmasked columns of -log softmax(logits[:,b])[target_b].
    NllSum {
        targets: Vec<u32>,
        mask: Vec<bool>,
    },
}

struct Node<F: Scalar> {
    parents: Vec<NodeId>,
    payload: Payload<F>,
    value: Tensor<F>,
    grad: Option<Tensor<F>>,
    /// Op-specific cache (softmax probabilities for `NllSum`).
    cache: Option<Tensor<F>>,
}

/// Gradients produced by one backward pass, keyed by parameter.
#[derive(Debug)]
pub struct ParamGrads<F: Scalar> {
    pub(crate) updates: Vec<(ParamId, Tensor<F>)>,
}

/// Dropout sampler used while building a training-mode graph.
pub struct DropoutSampler {
    pub rate: f64,
    pub rng: ChaCha12Rng,
}

impl DropoutSampler {
    pub fn new(rate: f64, rng: ChaCha12Rng) -> Self {
        Self { rate, rng }
    }
}

pub struct Graph<'m, F: Scalar> {
    model: Option<&'m Model<F>>,
    nodes: Vec<Node<F>>,
    param_nodes: HashMap<ParamId, NodeId>,
    backward_done: bool,
}

impl<'m, F: Scalar> Graph<'m, F> {
    /// Graph whose parameter leaves read from `model`.
    pub fn attached(model: &'m Model<F>) -> Self {
        Self {
            model: Some(model),
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            backward_done: false,
        }
    }

    /// Graph without a model; only leaf inputs are available.
    pub fn detached() -> Self {
        Self {
            model: None,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, parents: Vec<NodeId>, payload: Payload<F>, value: Tensor<F>) -> NodeId {
        self.nodes.push(Node {
            parents,
            payload,
            value,
            grad: None,
            cache: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push_cached(
        &mut self,
        parents: Vec<NodeId>,
        payload: Payload<F>,
        value: Tensor<F>,
        cache: Tensor<F>,
    ) -> NodeId {
        self.nodes.push(Node {
            parents,
            payload,
            value,
            grad: None,
            cache: Some(cache),
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Value of a node. Parameter leaves resolve through the attached model.
    pub fn value(&self, id: NodeId) -> &Tensor<F> {
        match &self.nodes[id.0].payload {
            Payload::Param(pid) => self
                .model
                .expect("param node in detached graph")
                .param_value(*pid),
            _ => &self.nodes[id.0].value,
        }
    }

    /// Gradient accumulated on a node by the last backward pass.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor<F>> {
        self.nodes[id.0].grad.as_ref()
    }

    // ---- leaves ----------------------------------------------------------

    /// Constant input; no gradient is tracked.
    pub fn leaf(&mut self, value: Tensor<F>) -> NodeId {
        self.push(
            vec![],
            Payload::Leaf {
                requires_grad: false,
            },
            value,
        )
    }

    /// Gradient-tracked input (used by tests and state feeding).
    pub fn var(&mut self, value: Tensor<F>) -> NodeId {
        self.push(
            vec![],
            Payload::Leaf {
                requires_grad: true,
            },
            value,
        )
    }

    /// Leaf for a model parameter; deduplicated per parameter.
    pub fn param(&mut self, pid: ParamId) -> NodeId {
        if let Some(&id) = self.param_nodes.get(&pid) {
            return id;
        }
        let id = self.push(vec![], Payload::Param(pid), Tensor::zeros(&[0]));
        self.param_nodes.insert(pid, id);
        id
    }

    // ---- ops --------------------------------------------------------------

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a);
        let vb = self.value(b);
        assert!(
            va.is_matrix() && vb.is_matrix() && va.cols() == vb.rows(),
            "matmul shape mismatch: {:?} · {:?}",
            va.shape(),
            vb.shape()
        );
        let value = va.matmul(vb).expect("checked above");
        self.push(vec![a, b], Payload::Op(Op::MatMul), value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(va.shape(), vb.shape(), "add shape mismatch");
        let mut value = va.clone();
        value.add_scaled(vb, F::ONE);
        self.push(vec![a, b], Payload::Op(Op::Add), value)
    }

    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        let vx = self.value(x);
        let vb = self.value(bias);
        assert!(
            vx.is_matrix() && vb.is_matrix() && vb.cols() == 1 && vb.rows() == vx.rows(),
            "add_bias shape mismatch: {:?} + {:?}",
            vx.shape(),
            vb.shape()
        );
        let (m, n) = (vx.rows(), vx.cols());
        let mut value = vx.clone();
        for i in 0..m {
            let b = vb.data()[i];
            for j in 0..n {
                *value.at2_mut(i, j) += b;
            }
        }
        self.push(vec![x, bias], Payload::Op(Op::AddBias), value)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let mut value = self.value(x).clone();
        value.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        self.push(vec![x], Payload::Op(Op::Sigmoid), value)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let mut value = self.value(x).clone();
        value.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        self.push(vec![x], Payload::Op(Op::Tanh), value)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(va.shape(), vb.shape(), "mul shape mismatch");
        let mut value = va.clone();
        for (v, w) in value.data_mut().iter_mut().zip(vb.data()) {
            *v *= *w;
        }
        self.push(vec![a, b], Payload::Op(Op::Mul), value)
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a);
        let vb = self.value(b);
        assert!(
            va.is_matrix() && vb.is_matrix() && va.cols() == vb.cols(),
            "concat_rows shape mismatch: {:?} ++ {:?}",
            va.shape(),
            vb.shape()
        );
        let mut data = Vec::with_capacity(va.len() + vb.len());
        data.extend_from_slice(va.data());
        data.extend_from_slice(vb.data());
        let value = Tensor::from_vec(&[va.rows() + vb.rows(), va.cols()], data).unwrap();
        self.push(vec![a, b], Payload::Op(Op::ConcatRows), value)
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let vx = self.value(x);
        assert!(
            vx.is_matrix() && start + len <= vx.rows(),
            "slice_rows out of range"
        );
        let n = vx.cols();
        let data = vx.data()[start * n..(start + len) * n].to_vec();
        let value = Tensor::from_vec(&[len, n], data).unwrap();
        self.push(vec![x], Payload::Op(Op::SliceRows { start, len }), value)
    }

    pub fn softmax_cols(&mut self, x: NodeId) -> NodeId {
        let vx = self.value(x);
        assert!(vx.is_matrix(), "softmax_cols wants a matrix");
        let (m, n) = (vx.rows(), vx.cols());
        let mut value = vx.clone();
        for j in 0..n {
            let mut hi = value.at2(0, j);
            for i in 1..m {
                hi = hi.max(value.at2(i, j));
            }
            let mut sum = F::ZERO;
            for i in 0..m {
                let e = (value.at2(i, j) - hi).exp();
                *value.at2_mut(i, j) = e;
                sum += e;
            }
            for i in 0..m {
                *value.at2_mut(i, j) = value.at2(i, j) / sum;
            }
        }
        self.push(vec![x], Payload::Op(Op::SoftmaxCols), value)
    }

    pub fn scale(&mut self, x: NodeId, factor: F) -> NodeId {
        let mut value = self.value(x).clone();
        value.scale_in_place(factor);
        self.push(vec![x], Payload::Op(Op::Scale { factor }), value)
    }

    pub fn add_n(&mut self, xs: &[NodeId]) -> NodeId {
        assert!(!xs.is_empty(), "add_n needs at least one input");
        let mut value = self.value(xs[0]).clone();
        for &x in &xs[1..] {
            let vx = self.value(x);
            assert_eq!(vx.shape(), value.shape(), "add_n shape mismatch");
            value.add_scaled(vx, F::ONE);
        }
        self.push(xs.to_vec(), Payload::Op(Op::AddN), value)
    }

    /// Looks up embedding rows for a batch of ids: output column `b` is row
    /// `ids[b]` of the table.
    pub fn embed_lookup(&mut self, table: NodeId, ids: &[u32]) -> NodeId {
        let vt = self.value(table);
        assert!(vt.is_matrix(), "embed_lookup wants a matrix table");
        let (v, e) = (vt.rows(), vt.cols());
        let b = ids.len();
        assert!(
            ids.iter().all(|&id| (id as usize) < v),
            "embedding id out of range"
        );
        let mut value = Tensor::zeros(&[e, b]);
        for (col, &id) in ids.iter().enumerate() {
            for row in 0..e {
                *value.at2_mut(row, col) = vt.at2(id as usize, row);
            }
        }
        self.push(
            vec![table],
            Payload::Op(Op::EmbedLookup { ids: ids.to_vec() }),
            value,
        )
    }

    pub fn pack_steps(&mut self, steps: &[NodeId]) -> NodeId {
        assert!(!steps.is_empty(), "pack_steps needs at least one step");
        let shape = self.value(steps[0]).shape().to_vec();
        assert_eq!(shape.len(), 2);
        let (r, c) = (shape[0], shape[1]);
        let mut data = Vec::with_capacity(steps.len() * r * c);
        for &s in steps {
            let vs = self.value(s);
            assert_eq!(vs.shape(), &shape[..], "pack_steps shape mismatch");
            data.extend_from_slice(vs.data());
        }
        let value = Tensor::from_vec(&[steps.len(), r, c], data).unwrap();
        self.push(steps.to_vec(), Payload::Op(Op::PackSteps), value)
    }

    /// Output column `b` is column `b` of parent `step_of_col[b]`.
    pub fn time_gather_cols(&mut self, steps: &[NodeId], step_of_col: &[usize]) -> NodeId {
        assert!(!steps.is_empty());
        let shape = self.value(steps[0]).shape().to_vec();
        let (r, c) = (shape[0], shape[1]);
        assert_eq!(step_of_col.len(), c, "one source step per column");
        assert!(
            step_of_col.iter().all(|&s| s < steps.len()),
            "step index out of range"
        );
        let mut value = Tensor::zeros(&[r, c]);
        for (b, &t) in step_of_col.iter().enumerate() {
            let vs = self.value(steps[t]);
            assert_eq!(vs.shape(), &shape[..]);
            for i in 0..r {
                *value.at2_mut(i, b) = vs.at2(i, b);
            }
        }
        self.push(
            steps.to_vec(),
            Payload::Op(Op::TimeGatherCols {
                step_of_col: step_of_col.to_vec(),
            }),
            value,
        )
    }

    pub fn attn_scores(&mut self, pack: NodeId, query: NodeId) -> NodeId {
        let vp = self.value(pack);
        let vq = self.value(query);
        assert_eq!(vp.shape().len(), 3, "attn_scores wants (T,H,B) pack");
        let (t, h, b) = (vp.shape()[0], vp.shape()[1], vp.shape()[2]);
        assert_eq!(vq.shape(), &[h, b], "attn_scores query shape");
        let mut value = Tensor::zeros(&[t, b]);
        let pd = vp.data();
        for ti in 0..t {
            for bi in 0..b {
                let mut s = F::ZERO;
                for hi in 0..h {
                    s += pd[(ti * h + hi) * b + bi] * vq.at2(hi, bi);
                }
                *value.at2_mut(ti, bi) = s;
            }
        }
        self.push(vec![pack, query], Payload::Op(Op::AttnScores), value)
    }

    pub fn attn_context(&mut self, pack: NodeId, weights: NodeId) -> NodeId {
        let vp = self.value(pack);
        let vw = self.value(weights);
        assert_eq!(vp.shape().len(), 3, "attn_context wants (T,H,B) pack");
        let (t, h, b) = (vp.shape()[0], vp.shape()[1], vp.shape()[2]);
        assert_eq!(vw.shape(), &[t, b], "attn_context weights shape");
        let mut value = Tensor::zeros(&[h, b]);
        let pd = vp.data();
        for ti in 0..t {
            for bi in 0..b {
                let w = vw.at2(ti, bi);
                for hi in 0..h {
                    *value.at2_mut(hi, bi) += w * pd[(ti * h + hi) * b + bi];
                }
            }
        }
        self.push(vec![pack, weights], Payload::Op(Op::AttnContext), value)
    }

    /// Inverted dropout: each entry is zeroed with probability `rate` and
    /// survivors are scaled by `1/(1-rate)`, so inference needs no rescaling.
    pub fn dropout(&mut self, x: NodeId, sampler: &mut DropoutSampler) -> NodeId {
        assert!(
            (0.0..1.0).contains(&sampler.rate),
            "dropout rate must be in [0,1)"
        );
        if sampler.rate == 0.0 {
            return x;
        }
        let keep_scale = F::from_f64(1.0 / (1.0 - sampler.rate));
        let vx = self.value(x);
        let mask: Vec<F> = (0..vx.len())
            .map(|_| {
                if sampler.rng.random::<f64>() < sampler.rate {
                    F::ZERO
                } else {
                    keep_scale
                }
            })
            .collect();
        let mut value = vx.clone();
        for (v, m) in value.data_mut().iter_mut().zip(&mask) {
            *v *= *m;
        }
        self.push(vec![x], Payload::Op(Op::Dropout { mask }), value)
    }

    /// Sum over unmasked columns of the negative log softmax probability of
    /// the target id. Returns a 1×1 node.
    pub fn nll_sum(&mut self, logits: NodeId, targets: &[u32], mask: &[bool]) -> NodeId {
        let vl = self.value(logits);
        assert!(vl.is_matrix(), "nll_sum wants (V×B) logits");
        let (v, b) = (vl.rows(), vl.cols());
        assert_eq!(targets.len(), b);
        assert_eq!(mask.len(), b);
        assert!(
            targets.iter().all(|&t| (t as usize) < v),
            "target id out of range"
        );
        let mut probs = Tensor::zeros(&[v, b]);
        let mut loss = F::ZERO;
        for bi in 0..b {
            if !mask[bi] {
                continue;
            }
            let mut hi = vl.at2(0, bi);
            for i in 1..v {
                hi = hi.max(vl.at2(i, bi));
            }
            let mut sum = F::ZERO;
            for i in 0..v {
                let e = (vl.at2(i, bi) - hi).exp();
                *probs.at2_mut(i, bi) = e;
                sum += e;
            }
            for i in 0..v {
                *probs.at2_mut(i, bi) = probs.at2(i, bi) / sum;
            }
            let lse = sum.ln() + hi;
            loss += lse - vl.at2(targets[bi] as usize, bi);
        }
        self.push_cached(
            vec![logits],
            Payload::Op(Op::NllSum {
                targets: targets.to_vec(),
                mask: mask.to_vec(),
            }),
            Tensor::scalar(loss),
            probs,
        )
    }

    // ---- backward ----------------------------------------------------------

    /// Reverse pass from a scalar node. Returns the gradients of every model
    /// parameter reached by the graph; leaf gradients stay on the tape and
    /// can be read with [`Graph::grad`].
    pub fn backward(&mut self, loss: NodeId) -> Result<ParamGrads<F>, NeuralError> {
        if self.backward_done {
            return Err(NeuralError::BackwardWithoutForward);
        }
        self.backward_done = true;
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar loss");

        self.nodes[loss.0].grad = Some(Tensor::scalar(F::ONE));
        let model = self.model;
        for i in (0..self.nodes.len()).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            if matches!(node.payload, Payload::Leaf { .. } | Payload::Param(_)) {
                continue;
            }
            let Some(grad) = node.grad.take() else {
                continue;
            };
            let parents = node.parents.clone();

            match match &node.payload {
                Payload::Op(op) => op,
                _ => unreachable!(),
            } {
                Op::MatMul => {
                    let (a, b) = (parents[0], parents[1]);
                    if wants_grad(before, a) {
                        let mut ga = take_grad(before, model, a);
                        gemm_acc(&mut ga, &grad, false, value_ref(before, model, b), true);
                        before[a.0].grad = Some(ga);
                    }
                    if wants_grad(before, b) {
                        let mut gb = take_grad(before, model, b);
                        gemm_acc(&mut gb, value_ref(before, model, a), true, &grad, false);
                        before[b.0].grad = Some(gb);
                    }
                }
                Op::Add | Op::AddN => {
                    for &p in &parents {
                        if wants_grad(before, p) {
                            let mut gp = take_grad(before, model, p);
                            gp.add_scaled(&grad, F::ONE);
                            before[p.0].grad = Some(gp);
                        }
                    }
                }
                Op::AddBias => {
                    let (x, bias) = (parents[0], parents[1]);
                    if wants_grad(before, x) {
                        let mut gx = take_grad(before, model, x);
                        gx.add_scaled(&grad, F::ONE);
                        before[x.0].grad = Some(gx);
                    }
                    if wants_grad(before, bias) {
                        let mut gb = take_grad(before, model, bias);
                        let (m, n) = (grad.rows(), grad.cols());
                        for i in 0..m {
                            let mut s = F::ZERO;
                            for j in 0..n {
                                s += grad.at2(i, j);
                            }
                            gb.data_mut()[i] += s;
                        }
                        before[bias.0].grad = Some(gb);
                    }
                }
                Op::Sigmoid => {
                    let x = parents[0];
                    if wants_grad(before, x) {
                        let mut gx = take_grad(before, model, x);
                        for ((g, &yv), out) in
                            grad.data().iter().zip(node.value.data()).zip(gx.data_mut())
                        {
                            *out += *g * yv * (F::ONE - yv);
                        }
                        before[x.0].grad = Some(gx);
                    }
                }
                Op::Tanh => {
                    let x = parents[0];
                    if wants_grad(before, x) {
                        let mut gx = take_grad(before, model, x);
                        for ((g, &yv), out) in
                            grad.data().iter().zip(node.value.data()).zip(gx.data_mut())
                        {
                            *out += *g * (F::ONE - yv * yv);
                        }
                        before[x.0].grad = Some(gx);
                    }
                }
                Op::Mul => {
                    let (a, b) = (parents[0], parents[1]);
                    if wants_grad(before, a) {
                        let mut ga = take_grad(before, model, a);
                        for ((g, &bv), out) in grad
                            .data()
                            .iter()
                            .zip(value_ref(before, model, b).data())
                            .zip(ga.data_mut())
                        {
                            *out += *g * bv;
                        }
                        before[a.0].grad = Some(ga);
                    }
                    if wants_grad(before, b) {
                        let mut gb = take_grad(before, model, b);
                        for ((g, &av), out) in grad
                            .data()
                            .iter()
                            .zip(value_ref(before, model, a).data())
                            .zip(gb.data_mut())
                        {
                            *out += *g * av;
                        }
                        before[b.0].grad = Some(gb);
                    }
                }
                Op::ConcatRows => {
                    let (a, b) = (parents[0], parents[1]);
                    let ra = grad_shape(before, model, a)[0];
                    let n = grad.cols();
                    if wants_grad(before, a) {
                        let mut ga = take_grad(before, model, a);
                        for (out, g) in ga.data_mut().iter_mut().zip(&grad.data()[..ra * n]) {
                            *out += *g;
                        }
                        before[a.0].grad = Some(ga);
                    }
                    if wants_grad(before, b) {
                        let mut gb = take_grad(before, model, b);
                        for (out, g) in gb.data_mut().iter_mut().zip(&grad.data()[ra * n..]) {
                            *out += *g;
                        }
                        before[b.0].grad = Some(gb);
                    }
                }
                Op::SliceRows { start, len } => {
                    let (start, len) = (*start, *len);
                    let x = parents[0];
                    if wants_grad(before, x) {
                        let mut gx = take_grad(before, model, x);
                        let n = grad.cols();
                        for (out, g) in gx.data_mut()[start * n..(start + len) * n]
                            .iter_mut()
                            .zip(grad.data())
                        {
                            *out += *g;
                        }
                        before[x.0].grad = Some(gx);
                    }
                }
                Op::SoftmaxCols => {
                    let x = parents[0];
                    if wants_grad(before, x) {
                        let y = &node.value;
                        let (m, n) = (y.rows(), y.cols());
                        let mut gx = take_grad(before, model, x);
                        for j in 0..n {
                            let mut dot = F::ZERO;
                            for i in 0..m {
                                dot += grad.at2(i, j) * y.at2(i, j);
                            }
                            for i in 0..m {
                                *gx.at2_mut(i, j) += y.at2(i, j) * (grad.at2(i, j) - dot);
                            }
                        }
                        before[x.0].grad = Some(gx);
                    }
                }
                Op::Scale { factor } => {
                    let factor = *factor;
                    let x = parents[0];
                    if wants_grad(before, x) {
                        let mut gx = take_grad(before, model, x);
                        gx.add_scaled(&grad, factor);
                        before[x.0].grad = Some(gx);
                    }
                }
                Op::EmbedLookup { ids } => {
                    let table = parents[0];
                    if wants_grad(before, table) {
                        let e = grad.rows();
                        let mut gt = take_grad(before, model, table);
                        for (col, &id) in ids.iter().enumerate() {
                            for row in 0..e {
                                *gt.at2_mut(id as usize, row) += grad.at2(row, col);
                            }
                        }
                        before[table.0].grad = Some(gt);
                    }
                }
                Op::PackSteps => {
                    let step_len = grad.len() / parents.len();
                    for (t, &p) in parents.iter().enumerate() {
                        if wants_grad(before, p) {
                            let mut gp = take_grad(before, model, p);
                            for (out, g) in gp
                                .data_mut()
                                .iter_mut()
                                .zip(&grad.data()[t * step_len..(t + 1) * step_len])
                            {
                                *out += *g;
                            }
                            before[p.0].grad = Some(gp);
                        }
                    }
                }
                Op::TimeGatherCols { step_of_col } => {
                    let r = grad.rows();
                    for (b, &t) in step_of_col.iter().enumerate() {
                        let p = parents[t];
                        if wants_grad(before, p) {
                            let mut gp = take_grad(before, model, p);
                            for i in 0..r {
                                *gp.at2_mut(i, b) += grad.at2(i, b);
                            }
                            before[p.0].grad = Some(gp);
                        }
                    }
                }
                Op::AttnScores => {
                    let (pack, query) = (parents[0], parents[1]);
                    let t = grad.rows();
                    let qshape = grad_shape(before, model, query);
                    let (h, b) = (qshape[0], qshape[1]);
                    if wants_grad(before, pack) {
                        let mut gp = take_grad(before, model, pack);
                        {
                            let vq = value_ref(before, model, query);
                            let gpd = gp.data_mut();
                            for ti in 0..t {
                                for bi in 0..b {
                                    let g = grad.at2(ti, bi);
                                    for hi in 0..h {
                                        gpd[(ti * h + hi) * b + bi] += g * vq.at2(hi, bi);
                                    }
                                }
                            }
                        }
                        before[pack.0].grad = Some(gp);
                    }
                    if wants_grad(before, query) {
                        let mut gq = take_grad(before, model, query);
                        {
                            let pd = value_ref(before, model, pack).data();
                            for ti in 0..t {
                                for bi in 0..b {
                                    let g = grad.at2(ti, bi);
                                    for hi in 0..h {
                                        *gq.at2_mut(hi, bi) += g * pd[(ti * h + hi) * b + bi];
                                    }
                                }
                            }
                        }
                        before[query.0].grad = Some(gq);
                    }
                }
                Op::AttnContext => {
                    let (pack, weights) = (parents[0], parents[1]);
                    let h = grad.rows();
                    let wshape = grad_shape(before, model, weights);
                    let (t, b) = (wshape[0], wshape[1]);
                    if wants_grad(before, pack) {
                        let mut gp = take_grad(before, model, pack);
                        {
                            let vw = value_ref(before, model, weights);
                            let gpd = gp.data_mut();
                            for ti in 0..t {
                                for bi in 0..b {
                                    let w = vw.at2(ti, bi);
                                    for hi in 0..h {
                                        gpd[(ti * h + hi) * b + bi] += w * grad.at2(hi, bi);
                                    }
                                }
                            }
                        }
                        before[pack.0].grad = Some(gp);
                    }
                    if wants_grad(before, weights) {
                        let mut gw = take_grad(before, model, weights);
                        {
                            let pd = value_ref(before, model, pack).data();
                            for ti in 0..t {
                                for bi in 0..b {
                                    let mut s = F::ZERO;
                                    for hi in 0..h {
                                        s += grad.at2(hi, bi) * pd[(ti * h + hi) * b + bi];
                                    }
                                    *gw.at2_mut(ti, bi) += s;
                                }
                            }
                        }
                        before[weights.0].grad = Some(gw);
                    }
                }
                Op::Dropout { mask } => {
                    let x = parents[0];
                    if wants_grad(before, x) {
                        let mut gx = take_grad(before, model, x);
                        for ((g, m), out) in grad.data().iter().zip(mask).zip(gx.data_mut()) {
                            *out += *g * *m;
                        }
                        before[x.0].grad = Some(gx);
                    }
                }
                Op::NllSum { targets, mask } => {
                    let logits = parents[0];
                    if wants_grad(before, logits) {
                        let probs = node.cache.as_ref().expect("nll cache");
                        let (v, b) = (probs.rows(), probs.cols());
                        let gs = grad.item();
                        let mut gl = take_grad(before, model, logits);
                        for bi in 0..b {
                            if !mask[bi] {
                                continue;
                            }
                            for i in 0..v {
                                let indicator = if i == targets[bi] as usize {
                                    F::ONE
                                } else {
                                    F::ZERO
                                };
                                *gl.at2_mut(i, bi) += gs * (probs.at2(i, bi) - indicator);
                            }
                        }
                        before[logits.0].grad = Some(gl);
                    }
                }
            }
        }

        let mut updates = Vec::new();
        for (&pid, &nid) in &self.param_nodes {
            if let Some(grad) = self.nodes[nid.0].grad.take() {
                updates.push((pid, grad));
            }
        }
        updates.sort_by_key(|(pid, _)| *pid);
        Ok(ParamGrads { updates })
    }
}

fn wants_grad<F: Scalar>(nodes: &[Node<F>], id: NodeId) -> bool {
    !matches!(
        nodes[id.0].payload,
        Payload::Leaf {
            requires_grad: false
        }
    )
}

fn value_ref<'a, F: Scalar>(
    nodes: &'a [Node<F>],
    model: Option<&'a Model<F>>,
    id: NodeId,
) -> &'a Tensor<F> {
    match &nodes[id.0].payload {
        Payload::Param(pid) => model.expect("param in detached graph").param_value(*pid),
        _ => &nodes[id.0].value,
    }
}

fn grad_shape<F: Scalar>(nodes: &[Node<F>], model: Option<&Model<F>>, id: NodeId) -> Vec<usize> {
    value_ref(nodes, model, id).shape().to_vec()
}

fn take_grad<F: Scalar>(nodes: &mut [Node<F>], model: Option<&Model<F>>, id: NodeId) -> Tensor<F> {
    match nodes[id.0].grad.take() {
        Some(g) => g,
        None => Tensor::zeros(&grad_shape(nodes, model, id)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite differences against the analytic gradients for a
    /// scalar-valued graph built from variable leaves.
    fn fd_check(
        build: impl Fn(&mut Graph<'_, f64>, &[NodeId]) -> NodeId,
        inputs: &[Tensor<f64>],
        tol: f64,
    ) {
        let eval = |inputs: &[Tensor<f64>]| -> f64 {
            let mut g = Graph::detached();
            let vars: Vec<NodeId> = inputs.iter().map(|t| g.var(t.clone())).collect();
            let out = build(&mut g, &vars);
            g.value(out).item()
        };

        let mut g = Graph::detached();
        let vars: Vec<NodeId> = inputs.iter().map(|t| g.var(t.clone())).collect();
        let out = build(&mut g, &vars);
        g.backward(out).unwrap();

        let eps = 1e-6;
        for (vi, var) in vars.iter().enumerate() {
            let analytic = g
                .grad(*var)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(inputs[vi].shape()));
            for k in 0..inputs[vi].len() {
                let mut plus = inputs.to_vec();
                plus[vi].data_mut()[k] += eps;
                let mut minus = inputs.to_vec();
                minus[vi].data_mut()[k] -= eps;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * eps);
                let a = analytic.data()[k];
                let denom = a.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (a - fd).abs() / denom <= tol,
                    "input {vi} entry {k}: analytic {a} vs fd {fd}"
                );
            }
        }
    }

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_add_bias_grads() {
        fd_check(
            |g, v| {
                let y = g.matmul(v[0], v[1]);
                let z = g.add_bias(y, v[2]);
                let s = g.tanh(z);
                let t = g.nll_sum(s, &[1, 0], &[true, true]);
                g.scale(t, 0.5)
            },
            &[
                t(&[3, 2], &[0.1, -0.2, 0.3, 0.5, -0.4, 0.2]),
                t(&[2, 2], &[0.7, -0.1, 0.2, 0.4]),
                t(&[3, 1], &[0.05, -0.03, 0.11]),
            ],
            1e-6,
        );
    }

    #[test]
    fn elementwise_grads() {
        fd_check(
            |g, v| {
                let a = g.sigmoid(v[0]);
                let b = g.tanh(v[1]);
                let m = g.mul(a, b);
                let s = g.add(m, v[2]);
                g.nll_sum(s, &[2], &[true])
            },
            &[
                t(&[4, 1], &[0.3, -0.7, 1.2, 0.0]),
                t(&[4, 1], &[-0.2, 0.9, 0.1, -1.5]),
                t(&[4, 1], &[0.01, 0.02, -0.03, 0.04]),
            ],
            1e-6,
        );
    }

    #[test]
    fn concat_slice_softmax_grads() {
        fd_check(
            |g, v| {
                let c = g.concat_rows(v[0], v[1]);
                let s = g.slice_rows(c, 1, 3);
                let p = g.softmax_cols(s);
                let l = g.tanh(p);
                g.nll_sum(l, &[0, 2], &[true, true])
            },
            &[
                t(&[2, 2], &[0.5, -0.5, 0.25, 0.1]),
                t(&[2, 2], &[1.0, 0.3, -0.7, 0.2]),
            ],
            1e-6,
        );
    }

    #[test]
    fn attention_op_grads() {
        // pack (T=2, H=3, B=2) built from two steps, then scores + context.
        fd_check(
            |g, v| {
                let pack = g.pack_steps(&[v[0], v[1]]);
                let scores = g.attn_scores(pack, v[2]);
                let w = g.softmax_cols(scores);
                let ctx = g.attn_context(pack, w);
                g.nll_sum(ctx, &[1, 2], &[true, true])
            },
            &[
                t(&[3, 2], &[0.2, -0.4, 0.6, 0.1, -0.3, 0.5]),
                t(&[3, 2], &[-0.1, 0.7, 0.2, -0.6, 0.4, 0.3]),
                t(&[3, 2], &[0.5, 0.2, -0.2, 0.8, 0.3, -0.5]),
            ],
            1e-6,
        );
    }

    #[test]
    fn gather_and_embed_grads() {
        fd_check(
            |g, v| {
                let gathered = g.time_gather_cols(&[v[0], v[1]], &[1, 0, 1]);
                let e = g.embed_lookup(v[2], &[0, 2, 1]);
                let s = g.add(gathered, e);
                g.nll_sum(s, &[0, 1, 0], &[true, false, true])
            },
            &[
                t(&[2, 3], &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
                t(&[2, 3], &[-0.1, -0.2, -0.3, -0.4, -0.5, -0.6]),
                t(&[3, 2], &[0.9, -0.8, 0.7, -0.6, 0.5, -0.4]),
            ],
            1e-6,
        );
    }

    #[test]
    fn dropout_identity_and_mask_stats() {
        use rand::SeedableRng;
        let mut g = Graph::<f32>::detached();
        let x = g.var(Tensor::uniform(
            &[100, 1000],
            -1.0,
            1.0,
            &mut ChaCha12Rng::seed_from_u64(3),
        ));
        let mut sampler = DropoutSampler::new(0.2, ChaCha12Rng::seed_from_u64(9));
        let y = g.dropout(x, &mut sampler);
        let zeros = g.value(y).data().iter().filter(|v| **v == 0.0).count() as f64 / 100_000.0;
        assert!((zeros - 0.2).abs() < 0.01, "zero fraction {zeros}");

        // rate 0 is the identity (same node).
        let mut sampler0 = DropoutSampler::new(0.0, ChaCha12Rng::seed_from_u64(9));
        let z = g.dropout(x, &mut sampler0);
        assert_eq!(z, x);
    }

    #[test]
    fn backward_twice_errors() {
        let mut g = Graph::<f64>::detached();
        let x = g.var(t(&[2, 1], &[0.4, -0.4]));
        let loss = g.nll_sum(x, &[0], &[true]);
        assert!(g.backward(loss).is_ok());
        assert!(matches!(
            g.backward(loss),
            Err(NeuralError::BackwardWithoutForward)
        ));
    }

    #[test]
    fn unused_leaf_has_no_grad_and_scaling_is_linear() {
        let mut g = Graph::<f64>::detached();
        let x = g.var(t(&[3, 1], &[0.2, -0.1, 0.4]));
        let unused = g.var(t(&[2, 1], &[1.0, 2.0]));
        let loss = g.nll_sum(x, &[1], &[true]);
        g.backward(loss).unwrap();
        assert!(g.grad(unused).is_none());
        let gx = g.grad(x).unwrap().clone();

        // doubling the loss doubles the gradient
        let mut g2 = Graph::<f64>::detached();
        let x2 = g2.var(t(&[3, 1], &[0.2, -0.1, 0.4]));
        let l = g2.nll_sum(x2, &[1], &[true]);
        let doubled = g2.scale(l, 2.0);
        g2.backward(doubled).unwrap();
        let gx2 = g2.grad(x2).unwrap();
        for (a, b) in gx.data().iter().zip(gx2.data()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_cols_sums_to_one() {
        let mut g = Graph::<f64>::detached();
        let x = g.var(t(
            &[4, 2],
            &[0.1, 100.0, -3.0, 100.0, 2.5, 100.0, 0.0, 100.0],
        ));
        let p = g.softmax_cols(x);
        let v = g.value(p);
        for j in 0..2 {
            let s: f64 = (0..4).map(|i| v.at2(i, j)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // equal scores → uniform weights
        for i in 0..4 {
            assert!((v.at2(i, 1) - 0.25).abs() < 1e-12);
        }
    }
}
