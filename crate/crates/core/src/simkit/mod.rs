//! Toy multi-encoder model with controllable ground-truth redundancy.
//!
//! A world draws latent vectors z with i.i.d. standard-normal channels.
//! Each encoder sees a fixed channel subset through a frozen random linear
//! map; redundancy is controlled purely by how the visible channel sets
//! overlap (disjoint = complementary, nested/equal = redundant). Encoder
//! masking replaces the token grid with exact zeros. Tasks label z by the
//! sign pattern of orthonormal linear functionals over their relevant
//! channels, so class marginals are uniform by construction.

pub mod fusion;
pub mod math;
pub mod model;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::core::{Category, EncoderSubset};
use crate::error::{Error, Result};
pub use fusion::{Fusion, FusionSpec, FusionTrace};
pub use math::Mat;
pub use model::{GradTape, Gradients, Head, HeadTrace, Model, Trace};

/// One synthetic benchmark: a classification rule over latent channels.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub name: String,
    pub category: Category,
    pub relevant_channels: Vec<usize>,
    pub class_count: usize,
    /// Orthonormal rows, one per label bit.
    label_weights: Mat,
}

impl TaskSpec {
    pub fn new<R: Rng>(
        name: impl Into<String>,
        category: Category,
        relevant_channels: Vec<usize>,
        class_count: usize,
        channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let name = name.into();
        if relevant_channels.is_empty() {
            return Err(Error::Config(format!("task '{name}': no relevant channels")));
        }
        let mut seen = vec![false; channels];
        for &c in &relevant_channels {
            if c >= channels {
                return Err(Error::Config(format!(
                    "task '{name}': channel {c} out of range 0..{channels}"
                )));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::Config(format!("task '{name}': duplicate channel {c}")));
            }
        }
        if class_count < 2 || !class_count.is_power_of_two() {
            return Err(Error::Config(format!(
                "task '{name}': class count {class_count} must be a power of two >= 2"
            )));
        }
        let bits = class_count.trailing_zeros() as usize;
        if bits > relevant_channels.len() {
            return Err(Error::Config(format!(
                "task '{name}': {class_count} classes need {bits} functionals but only {} channels",
                relevant_channels.len()
            )));
        }
        let mut label_weights = Mat::gaussian(bits, relevant_channels.len(), 1.0, rng);
        math::orthonormalize_rows(&mut label_weights);
        Ok(Self {
            name,
            category,
            relevant_channels,
            class_count,
            label_weights,
        })
    }

    /// Class of a latent vector: sign pattern of the label functionals.
    pub fn label(&self, z: &[f64]) -> usize {
        let zr: Vec<f64> = self.relevant_channels.iter().map(|&c| z[c]).collect();
        let mut label = 0usize;
        for bit in 0..self.label_weights.rows() {
            if math::dot(self.label_weights.row(bit), &zr) > 0.0 {
                label |= 1 << bit;
            }
        }
        label
    }
}

/// The synthetic generative task suite.
#[derive(Debug, Clone)]
pub struct SimWorld {
    pub channels: usize,
    pub noise_sigma: f64,
    pub tasks: Vec<TaskSpec>,
}

impl SimWorld {
    pub fn new(channels: usize, noise_sigma: f64, tasks: Vec<TaskSpec>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Config("world needs at least one channel".into()));
        }
        if noise_sigma < 0.0 || !noise_sigma.is_finite() {
            return Err(Error::Config(format!("invalid noise sigma {noise_sigma}")));
        }
        if tasks.is_empty() {
            return Err(Error::Config("world needs at least one task".into()));
        }
        Ok(Self {
            channels,
            noise_sigma,
            tasks,
        })
    }

    pub fn sample_latent<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.channels)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Categories present among the tasks, canonical order.
    pub fn categories(&self) -> Vec<Category> {
        Category::ALL
            .into_iter()
            .filter(|c| self.tasks.iter().any(|t| t.category == *c))
            .collect()
    }
}

/// Configuration of one encoder: which channels it sees and its token grid.
#[derive(Debug, Clone)]
pub struct EncoderSpec {
    pub name: String,
    pub visible_channels: Vec<usize>,
    pub tokens_out: usize,
    pub token_dim: usize,
    pub frozen: bool,
}

impl EncoderSpec {
    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.visible_channels.is_empty() {
            return Err(Error::Config(format!(
                "encoder '{}': no visible channels",
                self.name
            )));
        }
        for &c in &self.visible_channels {
            if c >= channels {
                return Err(Error::Config(format!(
                    "encoder '{}': channel {c} out of range 0..{channels}",
                    self.name
                )));
            }
        }
        if self.tokens_out == 0 || self.token_dim == 0 {
            return Err(Error::Config(format!(
                "encoder '{}': token grid must be at least 1x1",
                self.name
            )));
        }
        Ok(())
    }
}

/// An encoder with its (fixed unless trained) linear map.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub spec: EncoderSpec,
    /// (tokens_out * token_dim) x channels.
    pub weights: Mat,
}

impl Encoder {
    pub fn random<R: Rng>(spec: EncoderSpec, channels: usize, rng: &mut R) -> Result<Self> {
        spec.validate(channels)?;
        let rows = spec.tokens_out * spec.token_dim;
        let scale = 1.0 / (channels as f64).sqrt();
        Ok(Self {
            weights: Mat::gaussian(rows, channels, scale, rng),
            spec,
        })
    }

    /// Same weights and visibility under a new name.
    pub fn clone_as(&self, name: impl Into<String>) -> Self {
        let mut out = self.clone();
        out.spec.name = name.into();
        out
    }

    /// Latent restricted to the visible channels, zeros elsewhere.
    pub fn masked_latent(&self, z: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; z.len()];
        for &c in &self.spec.visible_channels {
            u[c] = z[c];
        }
        u
    }

    /// tokens = weights · masked(z) + noise_term, as a tokens_out x token_dim grid.
    pub fn encode_with_noise(&self, z: &[f64], noise_term: Option<&Mat>) -> Result<Mat> {
        if z.len() != self.weights.cols() {
            return Err(Error::ShapeMismatch(format!(
                "encoder '{}' expects latent of length {}, got {}",
                self.spec.name,
                self.weights.cols(),
                z.len()
            )));
        }
        let u = self.masked_latent(z);
        let flat = self.weights.matvec(&u);
        let mut tokens = Mat::zeros(self.spec.tokens_out, self.spec.token_dim);
        tokens.as_mut_slice().copy_from_slice(&flat);
        if let Some(noise) = noise_term {
            tokens.add_assign(noise);
        }
        Ok(tokens)
    }

    /// tokens = weights · masked(z) + sigma · fresh gaussian noise.
    pub fn encode<R: Rng>(&self, z: &[f64], sigma: f64, rng: &mut R) -> Result<Mat> {
        let noise = if sigma > 0.0 {
            Some(Mat::gaussian(
                self.spec.tokens_out,
                self.spec.token_dim,
                sigma,
                rng,
            ))
        } else {
            None
        };
        self.encode_with_noise(z, noise.as_ref())
    }
}

/// Replace a token grid by the zero tensor of the same shape.
pub fn mask(tokens: &Mat) -> Mat {
    Mat::zeros(tokens.rows(), tokens.cols())
}

/// Classifier head shape: hidden widths plus default class count.
#[derive(Debug, Clone)]
pub struct HeadSpec {
    pub hidden: Vec<usize>,
    pub class_count: usize,
}

impl HeadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("head hidden widths must be >= 1".into()));
        }
        if self.class_count < 2 {
            return Err(Error::Config("head class count must be >= 2".into()));
        }
        Ok(())
    }
}

impl Default for HeadSpec {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            class_count: 4,
        }
    }
}

/// One fully materialized training/evaluation example: latent, task, label,
/// pre-drawn observation noise and per-encoder activity gates. Forward
/// passes over a sample are pure functions of (model, sample).
#[derive(Debug, Clone)]
pub struct Sample {
    pub z: Vec<f64>,
    pub task: usize,
    pub label: usize,
    /// Per-encoder additive token noise, already scaled by sigma.
    pub noise: Vec<Option<Mat>>,
    /// 1.0 = active, 0.0 = masked (subset and/or dropout).
    pub gates: Vec<f64>,
}

impl Sample {
    pub fn draw<R: Rng>(
        world: &SimWorld,
        encoders: &[Encoder],
        task: usize,
        subset: EncoderSubset,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let z = world.sample_latent(rng);
        let label = world.tasks[task].label(&z);
        let noise = encoders
            .iter()
            .map(|e| {
                if world.noise_sigma > 0.0 {
                    Some(Mat::gaussian(
                        e.spec.tokens_out,
                        e.spec.token_dim,
                        world.noise_sigma,
                        rng,
                    ))
                } else {
                    None
                }
            })
            .collect();
        let gates = (0..encoders.len())
            .map(|i| {
                let active = subset.contains(i) && (dropout == 0.0 || rng.gen::<f64>() >= dropout);
                if active {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            z,
            task,
            label,
            noise,
            gates,
        }
    }
}
