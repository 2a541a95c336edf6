//! Simulator configuration file (TOML): world, encoders, fusion, head and
//! training hyperparameters in one declarative document.
//!
//! ```toml
//! name = "clone-world"
//! seed = 42
//!
//! [world]
//! channels = 8
//! noise_sigma = 0.0
//!
//! [[world.tasks]]
//! name = "shared"
//! category = "General"       # General | Knowledge | OCR & Chart | Vision-Centric
//! channels = [0, 1, 2, 3]
//! classes = 2                # power of two; defaults to head.classes
//!
//! [[encoders]]
//! name = "a"
//! channels = [0, 1, 2, 3]
//! tokens = 4
//! dim = 8
//!
//! [[encoders]]
//! name = "b"
//! clone_of = "a"             # identical weights and visibility
//!
//! [fusion]
//! strategy = "channel_concat"  # sequence_append | channel_concat |
//!                              # shared_mlp (dim) | cross_attention (queries, kv_dim)
//!
//! [head]
//! hidden = [32]
//! classes = 2
//!
//! [train]
//! steps = 3000
//! encoder_dropout = 0.3
//!
//! [eval]
//! samples = 4096
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::core::Category;
use crate::error::{Error, Result};
use crate::simkit::model::Trainable;
use crate::simkit::{Encoder, EncoderSpec, FusionSpec, HeadSpec, Model, SimWorld, TaskSpec};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub world: WorldConfig,
    pub encoders: Vec<EncoderConfig>,
    pub fusion: FusionConfig,
    #[serde(default)]
    pub head: HeadConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_name() -> String {
    "simulated".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub channels: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    pub tasks: Vec<TaskConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub name: String,
    pub category: String,
    pub channels: Vec<usize>,
    pub classes: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub name: String,
    #[serde(default)]
    pub channels: Option<Vec<usize>>,
    #[serde(default)]
    pub tokens: Option<usize>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub frozen: bool,
    /// Copy weights and visibility from an earlier encoder.
    #[serde(default)]
    pub clone_of: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub strategy: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub queries: Option<usize>,
    #[serde(default)]
    pub kv_dim: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_classes")]
    pub classes: usize,
}

fn default_hidden() -> Vec<usize> {
    vec![32]
}

fn default_classes() -> usize {
    4
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            classes: default_classes(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub encoder_dropout: f64,
    pub train_head: bool,
    pub train_fusion: bool,
    pub train_encoders: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        Self {
            learning_rate: base.learning_rate,
            momentum: base.momentum,
            batch_size: base.batch_size,
            steps: base.steps,
            encoder_dropout: base.encoder_dropout,
            train_head: true,
            train_fusion: true,
            train_encoders: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { samples: 4096 }
    }
}

/// A fully built simulation: model plus training/evaluation settings.
pub struct SimSetup {
    pub name: String,
    pub seed: u64,
    pub model: Model,
    pub train: TrainConfig,
    pub eval_samples: usize,
}

pub fn parse_config(text: &str) -> Result<SimConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

impl SimConfig {
    /// Materialize the model and training plan. All randomness derives from
    /// `seed_override.unwrap_or(self.seed)`.
    pub fn build(&self, seed_override: Option<u64>) -> Result<SimSetup> {
        let seed = seed_override.unwrap_or(self.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut tasks = Vec::with_capacity(self.world.tasks.len());
        for t in &self.world.tasks {
            let category: Category = t.category.parse()?;
            let classes = t.classes.unwrap_or(self.head.classes);
            tasks.push(TaskSpec::new(
                t.name.clone(),
                category,
                t.channels.clone(),
                classes,
                self.world.channels,
                &mut rng,
            )?);
        }
        let world = SimWorld::new(self.world.channels, self.world.noise_sigma, tasks)?;

        let mut encoders: Vec<Encoder> = Vec::with_capacity(self.encoders.len());
        for e in &self.encoders {
            if let Some(source_name) = &e.clone_of {
                if e.channels.is_some() || e.tokens.is_some() || e.dim.is_some() {
                    return Err(Error::Config(format!(
                        "encoder '{}': clone_of replaces channels/tokens/dim",
                        e.name
                    )));
                }
                let source = encoders
                    .iter()
                    .find(|enc| enc.spec.name == *source_name)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "encoder '{}': clone_of references unknown or later encoder '{source_name}'",
                            e.name
                        ))
                    })?;
                let mut clone = source.clone_as(e.name.clone());
                clone.spec.frozen = e.frozen;
                encoders.push(clone);
                continue;
            }
            let channels = e.channels.clone().ok_or_else(|| {
                Error::Config(format!("encoder '{}': missing channels", e.name))
            })?;
            let spec = EncoderSpec {
                name: e.name.clone(),
                visible_channels: channels,
                tokens_out: e.tokens.unwrap_or(4),
                token_dim: e.dim.unwrap_or(8),
                frozen: e.frozen,
            };
            encoders.push(Encoder::random(spec, self.world.channels, &mut rng)?);
        }

        let fusion_spec = match self.fusion.strategy.as_str() {
            "sequence_append" => FusionSpec::SequenceAppend,
            "channel_concat" => FusionSpec::ChannelConcat,
            "shared_mlp" => FusionSpec::SharedMlp {
                dim: self.fusion.dim.ok_or_else(|| {
                    Error::Config("shared_mlp fusion needs `dim`".into())
                })?,
            },
            "cross_attention" => FusionSpec::CrossAttention {
                queries: self.fusion.queries.ok_or_else(|| {
                    Error::Config("cross_attention fusion needs `queries`".into())
                })?,
                kv_dim: self.fusion.kv_dim.ok_or_else(|| {
                    Error::Config("cross_attention fusion needs `kv_dim`".into())
                })?,
            },
            other => {
                return Err(Error::Config(format!("unknown fusion strategy '{other}'")))
            }
        };

        let head_spec = HeadSpec {
            hidden: self.head.hidden.clone(),
            class_count: self.head.classes,
        };
        let model = Model::assemble(world, encoders, &fusion_spec, head_spec, &mut rng)?;

        let train = TrainConfig {
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            batch_size: self.train.batch_size,
            steps: self.train.steps,
            encoder_dropout: self.train.encoder_dropout,
            seed: crate::train::mix_seed(&[seed, 0x7261696e]),
            trainable: Trainable {
                head: self.train.train_head,
                fusion: self.train.train_fusion,
                encoders: self.train.train_encoders,
            },
        };
        train.validate()?;
        if self.eval.samples == 0 {
            return Err(Error::Config("eval.samples must be >= 1".into()));
        }

        Ok(SimSetup {
            name: self.name.clone(),
            seed,
            model,
            train,
            eval_samples: self.eval.samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "mini"
seed = 5

[world]
channels = 4

[[world.tasks]]
name = "t"
category = "General"
channels = [0, 1]
classes = 2

[[encoders]]
name = "a"
channels = [0, 1, 2, 3]

[fusion]
strategy = "sequence_append"
"#;

    #[test]
    fn minimal_config_builds() {
        let config = parse_config(MINIMAL).unwrap();
        let setup = config.build(None).unwrap();
        assert_eq!(setup.name, "mini");
        assert_eq!(setup.model.encoder_count(), 1);
        assert_eq!(setup.model.heads[0].class_count(), 2);
        assert_eq!(setup.eval_samples, 4096);
    }

    #[test]
    fn clone_of_copies_weights() {
        let text = MINIMAL.replace(
            "[fusion]",
            "[[encoders]]\nname = \"b\"\nclone_of = \"a\"\n\n[fusion]",
        );
        let setup = parse_config(&text).unwrap().build(None).unwrap();
        assert_eq!(setup.model.encoders.len(), 2);
        assert_eq!(
            setup.model.encoders[0].weights,
            setup.model.encoders[1].weights
        );
    }

    #[test]
    fn clone_of_rejects_conflicting_shape_fields() {
        let text = MINIMAL.replace(
            "[fusion]",
            "[[encoders]]\nname = \"b\"\nclone_of = \"a\"\ntokens = 2\n\n[fusion]",
        );
        assert!(parse_config(&text).unwrap().build(None).is_err());
    }

    #[test]
    fn unknown_fields_and_strategies_are_rejected() {
        assert!(parse_config(&MINIMAL.replace("seed = 5", "sed = 5")).is_err());
        let bad = MINIMAL.replace("sequence_append", "mean_pool");
        assert!(parse_config(&bad).unwrap().build(None).is_err());
    }

    #[test]
    fn seed_override_changes_initialization() {
        let config = parse_config(MINIMAL).unwrap();
        let a = config.build(None).unwrap();
        let b = config.build(Some(6)).unwrap();
        assert_ne!(a.model.encoders[0].weights, b.model.encoders[0].weights);
        assert_eq!(a.seed, 5);
        assert_eq!(b.seed, 6);
    }
}
