//! The assembled toy model: encoders → fusion → mean pooling → per-task
//! classifier heads, with a hand-rolled backward pass.
//!
//! Heads share nothing across tasks; encoders and fusion parameters are
//! shared, which is where cross-task redundancy effects live. The forward
//! pass over a [`Sample`] is a pure function, so analytic gradients can be
//! verified against central finite differences parameter by parameter.

use rand::Rng;

use super::fusion::{Fusion, FusionGrads, FusionSpec, FusionTrace};
use super::math::{softmax, Mat};
use super::{Encoder, EncoderSpec, HeadSpec, Sample, SimWorld};
use crate::core::EncoderSubset;
use crate::error::{Error, Result};

/// Probability floor used inside the cross-entropy loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Dense {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Dense {
    // biases get a small random init so no ReLU pre-activation sits exactly
    // on the kink when every encoder is masked (pooled input all zeros)
    fn random<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        Self {
            w: Mat::gaussian(out_dim, in_dim, 1.0 / (in_dim as f64).sqrt(), rng),
            b: Mat::gaussian(1, out_dim, 0.01, rng).as_slice().to_vec(),
        }
    }
}

/// Classifier head: hidden ReLU layers ending in class logits.
#[derive(Debug, Clone)]
pub struct Head {
    pub layers: Vec<Dense>,
}

impl Head {
    fn random<R: Rng>(input_dim: usize, spec: &HeadSpec, classes: usize, rng: &mut R) -> Self {
        let mut dims = vec![input_dim];
        dims.extend(&spec.hidden);
        dims.push(classes);
        let layers = (0..dims.len() - 1)
            .map(|i| Dense::random(dims[i + 1], dims[i], rng))
            .collect();
        Self { layers }
    }

    pub fn class_count(&self) -> usize {
        self.layers.last().expect("head has layers").w.rows()
    }
}

#[derive(Debug, Clone)]
pub struct HeadTrace {
    /// Post-ReLU activation of each hidden layer.
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Per-encoder latent restricted to visible channels.
    pub inputs: Vec<Vec<f64>>,
    /// Per-encoder gated token grids (exact zeros when masked).
    pub tokens: Vec<Mat>,
    pub fusion: FusionTrace,
    pub fused: Mat,
    pub pooled: Vec<f64>,
    pub head: HeadTrace,
    pub probs: Vec<f64>,
}

/// Gradients for every trainable parameter group, in model layout.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub encoders: Vec<Mat>,
    pub fusion: FusionGrads,
    pub heads: Vec<Vec<Dense>>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        let encoders = model
            .encoders
            .iter()
            .map(|e| Mat::zeros(e.weights.rows(), e.weights.cols()))
            .collect();
        let fusion = match &model.fusion {
            Fusion::SequenceAppend | Fusion::ChannelConcat => FusionGrads::None,
            Fusion::SharedMlp { w1, b1, w2, b2 } => FusionGrads::SharedMlp {
                w1: Mat::zeros(w1.rows(), w1.cols()),
                b1: vec![0.0; b1.len()],
                w2: Mat::zeros(w2.rows(), w2.cols()),
                b2: vec![0.0; b2.len()],
            },
            Fusion::CrossAttention { queries, wk, wv } => FusionGrads::CrossAttention {
                queries: Mat::zeros(queries.rows(), queries.cols()),
                wk: wk.iter().map(|m| Mat::zeros(m.rows(), m.cols())).collect(),
                wv: wv.iter().map(|m| Mat::zeros(m.rows(), m.cols())).collect(),
            },
        };
        let heads = model
            .heads
            .iter()
            .map(|h| {
                h.layers
                    .iter()
                    .map(|l| Dense {
                        w: Mat::zeros(l.w.rows(), l.w.cols()),
                        b: vec![0.0; l.b.len()],
                    })
                    .collect()
            })
            .collect();
        Self {
            encoders,
            fusion,
            heads,
        }
    }

    pub fn scale(&mut self, c: f64) {
        for m in &mut self.encoders {
            m.scale(c);
        }
        match &mut self.fusion {
            FusionGrads::None => {}
            FusionGrads::SharedMlp { w1, b1, w2, b2 } => {
                w1.scale(c);
                w2.scale(c);
                b1.iter_mut().for_each(|v| *v *= c);
                b2.iter_mut().for_each(|v| *v *= c);
            }
            FusionGrads::CrossAttention { queries, wk, wv } => {
                queries.scale(c);
                wk.iter_mut().for_each(|m| m.scale(c));
                wv.iter_mut().for_each(|m| m.scale(c));
            }
        }
        for head in &mut self.heads {
            for layer in head {
                layer.w.scale(c);
                layer.b.iter_mut().for_each(|v| *v *= c);
            }
        }
    }

    fn accumulate_fusion(&mut self, delta: FusionGrads) {
        match (&mut self.fusion, delta) {
            (FusionGrads::None, FusionGrads::None) => {}
            (
                FusionGrads::SharedMlp { w1, b1, w2, b2 },
                FusionGrads::SharedMlp {
                    w1: dw1,
                    b1: db1,
                    w2: dw2,
                    b2: db2,
                },
            ) => {
                w1.add_assign(&dw1);
                w2.add_assign(&dw2);
                b1.iter_mut().zip(&db1).for_each(|(a, d)| *a += d);
                b2.iter_mut().zip(&db2).for_each(|(a, d)| *a += d);
            }
            (
                FusionGrads::CrossAttention { queries, wk, wv },
                FusionGrads::CrossAttention {
                    queries: dq,
                    wk: dwk,
                    wv: dwv,
                },
            ) => {
                queries.add_assign(&dq);
                wk.iter_mut().zip(&dwk).for_each(|(a, d)| a.add_assign(d));
                wv.iter_mut().zip(&dwv).for_each(|(a, d)| a.add_assign(d));
            }
            _ => unreachable!("gradient kind always matches fusion kind"),
        }
    }
}

/// Which parameter groups receive updates.
#[derive(Debug, Clone, Copy)]
pub struct Trainable {
    pub head: bool,
    pub fusion: bool,
    pub encoders: bool,
}

impl Default for Trainable {
    fn default() -> Self {
        Self {
            head: true,
            fusion: true,
            encoders: false,
        }
    }
}

/// Flat parameter addressing for optimizers and the gradient checker.
/// Order: encoder weights, fusion parameters, head layers.
#[derive(Debug, Clone)]
pub struct GradTape {
    /// (group label, length) in traversal order.
    pub groups: Vec<(String, usize)>,
}

impl GradTape {
    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.1).sum()
    }

    /// Group label and in-group offset for a flat index.
    pub fn locate(&self, mut index: usize) -> (String, usize) {
        for (name, len) in &self.groups {
            if index < *len {
                return (name.clone(), index);
            }
            index -= len;
        }
        panic!("parameter index out of range");
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub world: SimWorld,
    pub encoders: Vec<Encoder>,
    pub fusion: Fusion,
    pub heads: Vec<Head>,
    pub head_spec: HeadSpec,
}

impl Model {
    /// Build a model with randomly initialized parameters. `rng` drives all
    /// initialization, so equal seeds give bitwise-equal models.
    pub fn build<R: Rng>(
        world: SimWorld,
        encoder_specs: Vec<EncoderSpec>,
        fusion_spec: &FusionSpec,
        head_spec: HeadSpec,
        rng: &mut R,
    ) -> Result<Self> {
        if encoder_specs.is_empty() {
            return Err(Error::Config("model needs at least one encoder".into()));
        }
        if encoder_specs.len() > crate::core::MAX_ENCODERS {
            return Err(Error::EncoderCountOutOfRange(encoder_specs.len()));
        }
        head_spec.validate()?;
        let mut encoders = Vec::with_capacity(encoder_specs.len());
        for spec in encoder_specs {
            encoders.push(Encoder::random(spec, world.channels, rng)?);
        }
        Self::assemble(world, encoders, fusion_spec, head_spec, rng)
    }

    /// Build from already-constructed encoders (used for clone setups).
    pub fn assemble<R: Rng>(
        world: SimWorld,
        encoders: Vec<Encoder>,
        fusion_spec: &FusionSpec,
        head_spec: HeadSpec,
        rng: &mut R,
    ) -> Result<Self> {
        let mut names: Vec<&str> = encoders.iter().map(|e| e.spec.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != encoders.len() {
            return Err(Error::Config("duplicate encoder names".into()));
        }
        let shapes: Vec<(usize, usize)> = encoders
            .iter()
            .map(|e| (e.spec.tokens_out, e.spec.token_dim))
            .collect();
        let fusion = Fusion::build(fusion_spec, &shapes, rng)?;
        let (_, fused_dim) = fusion.output_shape(&shapes);
        head_spec.validate()?;
        let heads = world
            .tasks
            .iter()
            .map(|t| Head::random(fused_dim, &head_spec, t.class_count, rng))
            .collect();
        Ok(Self {
            world,
            encoders,
            fusion,
            heads,
            head_spec,
        })
    }

    pub fn encoder_count(&self) -> usize {
        self.encoders.len()
    }

    pub fn full_subset(&self) -> EncoderSubset {
        EncoderSubset::full(self.encoder_count()).expect("validated encoder count")
    }

    /// Forward pass over a fully materialized sample.
    pub fn forward(&self, sample: &Sample) -> Result<Trace> {
        if sample.z.len() != self.world.channels {
            return Err(Error::ShapeMismatch(format!(
                "latent length {} != channel count {}",
                sample.z.len(),
                self.world.channels
            )));
        }
        if sample.task >= self.heads.len() {
            return Err(Error::ShapeMismatch(format!(
                "task index {} out of range",
                sample.task
            )));
        }
        let mut inputs = Vec::with_capacity(self.encoders.len());
        let mut tokens = Vec::with_capacity(self.encoders.len());
        for (k, enc) in self.encoders.iter().enumerate() {
            let u = enc.masked_latent(&sample.z);
            let mut grid = enc.encode_with_noise(&sample.z, sample.noise[k].as_ref())?;
            if sample.gates[k] == 0.0 {
                grid = super::mask(&grid);
            }
            inputs.push(u);
            tokens.push(grid);
        }
        let (fused, fusion_trace) = self.fusion.forward(&tokens)?;
        let pooled = fused.mean_rows();

        let head = &self.heads[sample.task];
        let mut hidden = Vec::with_capacity(head.layers.len() - 1);
        let mut activation = pooled.clone();
        for layer in &head.layers[..head.layers.len() - 1] {
            let mut z = layer.w.matvec(&activation);
            for (zv, bv) in z.iter_mut().zip(&layer.b) {
                *zv = (*zv + bv).max(0.0);
            }
            hidden.push(z.clone());
            activation = z;
        }
        let out_layer = head.layers.last().expect("head has layers");
        let mut logits = out_layer.w.matvec(&activation);
        for (lv, bv) in logits.iter_mut().zip(&out_layer.b) {
            *lv += bv;
        }
        let probs = softmax(&logits);

        Ok(Trace {
            inputs,
            tokens,
            fusion: fusion_trace,
            fused,
            pooled,
            head: HeadTrace { hidden, logits },
            probs,
        })
    }

    /// Convenience forward: draw noise from `rng`, honor `subset`, return
    /// class probabilities for `task`.
    pub fn probabilities<R: Rng>(
        &self,
        subset: EncoderSubset,
        z: &[f64],
        task: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let label = self.world.tasks[task].label(z);
        let noise = self
            .encoders
            .iter()
            .map(|e| {
                if self.world.noise_sigma > 0.0 {
                    Some(Mat::gaussian(
                        e.spec.tokens_out,
                        e.spec.token_dim,
                        self.world.noise_sigma,
                        rng,
                    ))
                } else {
                    None
                }
            })
            .collect();
        let gates = (0..self.encoders.len())
            .map(|i| if subset.contains(i) { 1.0 } else { 0.0 })
            .collect();
        let sample = Sample {
            z: z.to_vec(),
            task,
            label,
            noise,
            gates,
        };
        Ok(self.forward(&sample)?.probs)
    }

    /// Cross-entropy of the traced prediction against the sample label.
    pub fn sample_loss(trace: &Trace, label: usize) -> Result<f64> {
        if label >= trace.probs.len() {
            return Err(Error::LabelOutOfRange {
                label,
                classes: trace.probs.len(),
            });
        }
        Ok(-trace.probs[label].max(PROB_FLOOR).ln())
    }

    /// Accumulate analytic gradients of the sample loss into `grads`.
    pub fn backward(&self, sample: &Sample, trace: &Trace, grads: &mut Gradients) -> Result<()> {
        let label = sample.label;
        if label >= trace.probs.len() {
            return Err(Error::LabelOutOfRange {
                label,
                classes: trace.probs.len(),
            });
        }
        // d loss / d logits for -ln(softmax); zero once the floor clamps.
        let mut d_logits = trace.probs.clone();
        if trace.probs[label] >= PROB_FLOOR {
            d_logits[label] -= 1.0;
        } else {
            d_logits.fill(0.0);
        }

        let head = &self.heads[sample.task];
        let head_grads = &mut grads.heads[sample.task];
        let n_layers = head.layers.len();
        let mut d_out = d_logits;
        for l in (0..n_layers).rev() {
            let input: &[f64] = if l == 0 {
                &trace.pooled
            } else {
                &trace.head.hidden[l - 1]
            };
            head_grads[l].w.add_outer(&d_out, input);
            for (b, d) in head_grads[l].b.iter_mut().zip(&d_out) {
                *b += d;
            }
            let mut d_in = head.layers[l].w.matvec_t(&d_out);
            if l > 0 {
                for (dv, hv) in d_in.iter_mut().zip(&trace.head.hidden[l - 1]) {
                    if *hv <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
            d_out = d_in;
        }
        let d_pooled = d_out;

        // pooled = mean over fused rows
        let m = trace.fused.rows() as f64;
        let mut d_fused = Mat::zeros(trace.fused.rows(), trace.fused.cols());
        for r in 0..trace.fused.rows() {
            for (slot, dv) in d_fused.row_mut(r).iter_mut().zip(&d_pooled) {
                *slot = dv / m;
            }
        }

        let (d_tokens, d_fusion) = self.fusion.backward(&trace.tokens, &trace.fusion, &d_fused);
        grads.accumulate_fusion(d_fusion);

        // gated tokens = gate * (W u + noise): gate zero kills the path.
        for (k, enc_grad) in grads.encoders.iter_mut().enumerate() {
            if sample.gates[k] == 0.0 {
                continue;
            }
            enc_grad.add_outer(d_tokens[k].as_slice(), &trace.inputs[k]);
        }
        Ok(())
    }

    /// Mean loss and mean gradients over a batch.
    pub fn batch_loss_and_grads(&self, batch: &[Sample]) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let mut loss_sum = 0.0;
        for sample in batch {
            let trace = self.forward(sample)?;
            loss_sum += Self::sample_loss(&trace, sample.label)?;
            self.backward(sample, &trace, &mut grads)?;
        }
        let inv = 1.0 / batch.len() as f64;
        grads.scale(inv);
        Ok((loss_sum * inv, grads))
    }

    /// Mean loss only (used by the finite-difference checker).
    pub fn batch_loss(&self, batch: &[Sample]) -> Result<f64> {
        let mut sum = 0.0;
        for sample in batch {
            let trace = self.forward(sample)?;
            sum += Self::sample_loss(&trace, sample.label)?;
        }
        Ok(sum / batch.len() as f64)
    }

    /// Layout of the trainable parameter groups.
    pub fn tape(&self, trainable: Trainable) -> GradTape {
        let mut groups = Vec::new();
        if trainable.encoders {
            for e in &self.encoders {
                if !e.spec.frozen {
                    groups.push((format!("encoder:{}", e.spec.name), e.weights.len()));
                }
            }
        }
        if trainable.fusion {
            match &self.fusion {
                Fusion::SequenceAppend | Fusion::ChannelConcat => {}
                Fusion::SharedMlp { w1, b1, w2, b2 } => {
                    groups.push(("fusion:w1".into(), w1.len()));
                    groups.push(("fusion:b1".into(), b1.len()));
                    groups.push(("fusion:w2".into(), w2.len()));
                    groups.push(("fusion:b2".into(), b2.len()));
                }
                Fusion::CrossAttention { queries, wk, wv } => {
                    groups.push(("fusion:queries".into(), queries.len()));
                    for (i, m) in wk.iter().enumerate() {
                        groups.push((format!("fusion:wk{i}"), m.len()));
                    }
                    for (i, m) in wv.iter().enumerate() {
                        groups.push((format!("fusion:wv{i}"), m.len()));
                    }
                }
            }
        }
        if trainable.head {
            for (t, head) in self.heads.iter().enumerate() {
                for (l, layer) in head.layers.iter().enumerate() {
                    groups.push((format!("head{t}:w{l}"), layer.w.len()));
                    groups.push((format!("head{t}:b{l}"), layer.b.len()));
                }
            }
        }
        GradTape { groups }
    }

    fn for_each_param_slot<F: FnMut(&mut f64)>(&mut self, trainable: Trainable, mut f: F) {
        if trainable.encoders {
            for e in &mut self.encoders {
                if !e.spec.frozen {
                    e.weights.as_mut_slice().iter_mut().for_each(&mut f);
                }
            }
        }
        if trainable.fusion {
            match &mut self.fusion {
                Fusion::SequenceAppend | Fusion::ChannelConcat => {}
                Fusion::SharedMlp { w1, b1, w2, b2 } => {
                    w1.as_mut_slice().iter_mut().for_each(&mut f);
                    b1.iter_mut().for_each(&mut f);
                    w2.as_mut_slice().iter_mut().for_each(&mut f);
                    b2.iter_mut().for_each(&mut f);
                }
                Fusion::CrossAttention { queries, wk, wv } => {
                    queries.as_mut_slice().iter_mut().for_each(&mut f);
                    for m in wk {
                        m.as_mut_slice().iter_mut().for_each(&mut f);
                    }
                    for m in wv {
                        m.as_mut_slice().iter_mut().for_each(&mut f);
                    }
                }
            }
        }
        if trainable.head {
            for head in &mut self.heads {
                for layer in &mut head.layers {
                    layer.w.as_mut_slice().iter_mut().for_each(&mut f);
                    layer.b.iter_mut().for_each(&mut f);
                }
            }
        }
    }

    /// Flattened view of the trainable parameters, tape order.
    pub fn collect_params(&self, trainable: Trainable) -> Vec<f64> {
        let mut out = Vec::new();
        let mut clone = self.clone();
        clone.for_each_param_slot(trainable, |v| out.push(*v));
        out
    }

    /// Overwrite the trainable parameters from a flat vector, tape order.
    pub fn set_params(&mut self, trainable: Trainable, values: &[f64]) {
        let mut iter = values.iter();
        self.for_each_param_slot(trainable, |v| {
            *v = *iter.next().expect("parameter vector too short");
        });
        assert!(iter.next().is_none(), "parameter vector too long");
    }

    /// Flatten `grads` to match [`Model::collect_params`] order.
    pub fn flatten_grads(&self, grads: &Gradients, trainable: Trainable) -> Vec<f64> {
        let mut out = Vec::new();
        if trainable.encoders {
            for (e, g) in self.encoders.iter().zip(&grads.encoders) {
                if !e.spec.frozen {
                    out.extend_from_slice(g.as_slice());
                }
            }
        }
        if trainable.fusion {
            match &grads.fusion {
                FusionGrads::None => {}
                FusionGrads::SharedMlp { w1, b1, w2, b2 } => {
                    out.extend_from_slice(w1.as_slice());
                    out.extend_from_slice(b1);
                    out.extend_from_slice(w2.as_slice());
                    out.extend_from_slice(b2);
                }
                FusionGrads::CrossAttention { queries, wk, wv } => {
                    out.extend_from_slice(queries.as_slice());
                    for m in wk {
                        out.extend_from_slice(m.as_slice());
                    }
                    for m in wv {
                        out.extend_from_slice(m.as_slice());
                    }
                }
            }
        }
        if trainable.head {
            for head in &grads.heads {
                for layer in head {
                    out.extend_from_slice(layer.w.as_slice());
                    out.extend_from_slice(&layer.b);
                }
            }
        }
        out
    }

    /// Apply `delta` (already scaled) to the trainable parameters.
    pub fn apply_update(&mut self, delta: &[f64], trainable: Trainable) {
        let mut iter = delta.iter();
        self.for_each_param_slot(trainable, |v| {
            *v += *iter.next().expect("update vector too short");
        });
    }
}
