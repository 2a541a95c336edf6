//! Deterministic gradient-based training of the toy model, plus the
//! finite-difference gradient checker and held-out evaluation.
//!
//! The optimizer is plain SGD with momentum so that every gradient the
//! backward pass produces is observable and checkable. Encoder dropout
//! randomly zero-masks encoder outputs during training, which puts
//! inference-time masking on-distribution; with dropout 0 masking is purely
//! out-of-distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::core::EncoderSubset;
use crate::error::{Error, Result};
use crate::simkit::model::{Model, Trainable, PROB_FLOOR};
use crate::simkit::Sample;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub steps: usize,
    /// Per-sample probability of zero-masking each encoder independently.
    pub encoder_dropout: f64,
    pub seed: u64,
    pub trainable: Trainable,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.15,
            momentum: 0.9,
            batch_size: 32,
            steps: 3000,
            encoder_dropout: 0.3,
            seed: 0,
            trainable: Trainable::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.encoder_dropout) {
            return Err(Error::Config(format!(
                "encoder dropout {} must lie in [0, 1)",
                self.encoder_dropout
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum {} must lie in [0, 1)",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Cross-entropy of a predicted distribution against the true label, with
/// the probability clamped at 1e-12 from below.
pub fn loss(probabilities: &[f64], label: usize) -> Result<f64> {
    if label >= probabilities.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: probabilities.len(),
        });
    }
    Ok(-probabilities[label].max(PROB_FLOOR).ln())
}

/// Deterministic seed derivation (splitmix64 over the parts).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9e3779b97f4a7c15u64;
    for &p in parts {
        let mut x = h ^ p.wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        h = x ^ (x >> 31);
    }
    h
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub tolerance: f64,
    /// Check at least this many randomly sampled parameters (all if fewer).
    pub min_params: usize,
    pub seed: u64,
    pub trainable: Trainable,
    /// Test hook: negate the largest analytic gradient entry of this tape
    /// group before comparing, to prove the checker catches sign errors.
    pub corrupt_group: Option<usize>,
    /// Restrict the comparison to one tape group's parameters.
    pub only_group: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            min_params: 100,
            seed: 0,
            trainable: Trainable {
                head: true,
                fusion: true,
                encoders: true,
            },
            corrupt_group: None,
            only_group: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// (tape group, in-group offset) of the worst parameter.
    pub worst_param: (String, usize),
    pub passed: bool,
}

const FD_STEP: f64 = 1e-4;

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compare analytic gradients against central finite differences on a
/// random sample of parameters.
pub fn grad_check(model: &Model, batch: &[Sample], opts: &GradCheckOptions) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::Config("gradient check needs a nonempty batch".into()));
    }
    let trainable = opts.trainable;
    let tape = model.tape(trainable);
    let total = tape.total();
    if total == 0 {
        return Err(Error::Config("no trainable parameters to check".into()));
    }

    let (_, grads) = model.batch_loss_and_grads(batch)?;
    let mut analytic = model.flatten_grads(&grads, trainable);
    for (i, g) in analytic.iter().enumerate() {
        if !g.is_finite() {
            let (group, offset) = tape.locate(i);
            return Err(Error::GradCheck(format!(
                "non-finite analytic gradient at {group}[{offset}]"
            )));
        }
    }

    let group_span = |group_idx: usize| -> Result<(usize, usize)> {
        let mut start = 0;
        for (i, (_, len)) in tape.groups.iter().enumerate() {
            if i == group_idx {
                return Ok((start, *len));
            }
            start += len;
        }
        Err(Error::Config(format!("no tape group {group_idx}")))
    };

    if let Some(group_idx) = opts.corrupt_group {
        let (start, len) = group_span(group_idx)?;
        let slice = &mut analytic[start..start + len];
        if let Some(j) = (0..slice.len()).max_by(|&a, &b| {
            slice[a].abs().partial_cmp(&slice[b].abs()).expect("finite")
        }) {
            slice[j] = -slice[j];
        }
    }

    let mut indices: Vec<usize> = match opts.only_group {
        Some(group_idx) => {
            let (start, len) = group_span(group_idx)?;
            (start..start + len).collect()
        }
        None => (0..total).collect(),
    };
    if indices.len() > opts.min_params {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for i in (1..indices.len()).rev() {
            indices.swap(i, rng.gen_range(0..=i));
        }
        indices.truncate(opts.min_params);
    }

    let params = model.collect_params(trainable);
    let mut probe = model.clone();
    let mut worst = (0.0f64, 0usize);
    for &i in &indices {
        let mut plus = params.clone();
        plus[i] += FD_STEP;
        probe.set_params(trainable, &plus);
        let loss_plus = probe.batch_loss(batch)?;
        let mut minus = params.clone();
        minus[i] -= FD_STEP;
        probe.set_params(trainable, &minus);
        let loss_minus = probe.batch_loss(batch)?;
        let numeric = (loss_plus - loss_minus) / (2.0 * FD_STEP);
        if !numeric.is_finite() {
            let (group, offset) = tape.locate(i);
            return Err(Error::GradCheck(format!(
                "non-finite numeric gradient at {group}[{offset}]"
            )));
        }
        let err = relative_error(analytic[i], numeric);
        if err > worst.0 {
            worst = (err, i);
        }
    }

    let (group, offset) = tape.locate(worst.1);
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        checked: indices.len(),
        worst_param: (group, offset),
        passed: worst.0 < opts.tolerance,
    })
}

/// Draw a training batch: uniform task choice, full subset, dropout gates.
pub fn draw_batch<R: Rng>(
    model: &Model,
    batch_size: usize,
    dropout: f64,
    rng: &mut R,
) -> Vec<Sample> {
    let full = model.full_subset();
    (0..batch_size)
        .map(|_| {
            let task = rng.gen_range(0..model.world.tasks.len());
            Sample::draw(&model.world, &model.encoders, task, full, dropout, rng)
        })
        .collect()
}

/// Batch for gradient checking: covers every task and, in the second half,
/// masks one encoder per sample. Partial masking exercises the gated
/// backward path while keeping the network off exact ReLU kinks (an
/// all-masked sample would put every pre-activation exactly at its bias).
pub fn grad_check_batch<R: Rng>(model: &Model, batch_size: usize, rng: &mut R) -> Vec<Sample> {
    let full = model.full_subset();
    let n = model.encoder_count();
    (0..batch_size)
        .map(|i| {
            let task = i % model.world.tasks.len();
            let mut sample = Sample::draw(&model.world, &model.encoders, task, full, 0.0, rng);
            if n >= 2 && i >= batch_size / 2 {
                sample.gates[i % n] = 0.0;
            }
            sample
        })
        .collect()
}

/// Train in place; returns the per-step loss curve.
pub fn train(model: &mut Model, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let trainable = config.trainable;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let param_count = model.tape(trainable).total();
    let mut velocity = vec![0.0f64; param_count];
    let mut curve = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let batch = draw_batch(model, config.batch_size, config.encoder_dropout, &mut rng);
        let (loss_value, grads) = model.batch_loss_and_grads(&batch)?;
        if !loss_value.is_finite() {
            return Err(Error::Divergence { step });
        }
        curve.push(loss_value);
        if param_count == 0 {
            continue;
        }
        let flat = model.flatten_grads(&grads, trainable);
        for (v, g) in velocity.iter_mut().zip(&flat) {
            *v = config.momentum * *v - config.learning_rate * g;
        }
        model.apply_update(&velocity, trainable);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskAccuracy {
    pub task: String,
    pub category: crate::core::Category,
    pub accuracy: f64,
}

/// Accuracy per task on freshly sampled held-out data. Deterministic per
/// (seed, subset, task); no dropout is applied at evaluation time.
pub fn evaluate(
    model: &Model,
    subset: EncoderSubset,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<TaskAccuracy>> {
    if n_samples == 0 {
        return Err(Error::Config("evaluation needs at least one sample".into()));
    }
    if subset.encoder_count() != model.encoder_count() {
        return Err(Error::ShapeMismatch(format!(
            "subset over {} encoders evaluated on a model with {}",
            subset.encoder_count(),
            model.encoder_count()
        )));
    }
    let mut out = Vec::with_capacity(model.world.tasks.len());
    for (t, task) in model.world.tasks.iter().enumerate() {
        let stream = mix_seed(&[seed, u64::from(subset.bits()), t as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let mut correct = 0usize;
        for _ in 0..n_samples {
            let sample = Sample::draw(&model.world, &model.encoders, t, subset, 0.0, &mut rng);
            let trace = model.forward(&sample)?;
            let predicted = trace
                .probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .map(|(i, _)| i)
                .expect("nonempty distribution");
            if predicted == sample.label {
                correct += 1;
            }
        }
        out.push(TaskAccuracy {
            task: task.name.clone(),
            category: task.category,
            accuracy: correct as f64 / n_samples as f64,
        });
    }
    Ok(out)
}
