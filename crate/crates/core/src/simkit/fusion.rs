//! The four fusion strategies for combining per-encoder token grids.
//!
//! * sequence append — token grids stacked along the sequence axis;
//! * channel concatenation — token features concatenated per position;
//! * shared MLP — one shared two-layer projection applied per token, then
//!   sequence append;
//! * cross-attention — a fixed number of learnable queries attend over all
//!   tokens through per-encoder key/value maps.
//!
//! Masked encoders still occupy their slots (their grids are exact zeros),
//! so fused shapes never depend on which encoders are active.

use rand::Rng;

use super::math::{softmax, Mat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FusionSpec {
    SequenceAppend,
    ChannelConcat,
    /// One shared two-layer map taking every token to `dim`.
    SharedMlp { dim: usize },
    /// `queries` learnable queries; keys and values both have `kv_dim`.
    CrossAttention { queries: usize, kv_dim: usize },
}

impl FusionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FusionSpec::SequenceAppend => "sequence_append",
            FusionSpec::ChannelConcat => "channel_concat",
            FusionSpec::SharedMlp { .. } => "shared_mlp",
            FusionSpec::CrossAttention { .. } => "cross_attention",
        }
    }
}

/// A fusion strategy with its trainable parameters (if any).
#[derive(Debug, Clone)]
pub enum Fusion {
    SequenceAppend,
    ChannelConcat,
    SharedMlp {
        w1: Mat,
        b1: Vec<f64>,
        w2: Mat,
        b2: Vec<f64>,
    },
    CrossAttention {
        /// queries x kv_dim
        queries: Mat,
        /// per-encoder key map, kv_dim x token_dim
        wk: Vec<Mat>,
        /// per-encoder value map, kv_dim x token_dim
        wv: Vec<Mat>,
    },
}

/// Intermediate activations needed by the backward pass.
#[derive(Debug, Clone)]
pub enum FusionTrace {
    Passthrough,
    SharedMlp {
        /// Post-ReLU hidden activations, one row per fused token.
        hidden: Mat,
    },
    CrossAttention {
        /// All keys stacked, total_tokens x kv_dim.
        keys: Mat,
        /// All values stacked, total_tokens x kv_dim.
        values: Mat,
        /// Softmaxed attention, queries x total_tokens.
        attn: Mat,
    },
}

/// Gradients for the fusion parameters, mirroring [`Fusion`].
#[derive(Debug, Clone)]
pub enum FusionGrads {
    None,
    SharedMlp {
        w1: Mat,
        b1: Vec<f64>,
        w2: Mat,
        b2: Vec<f64>,
    },
    CrossAttention {
        queries: Mat,
        wk: Vec<Mat>,
        wv: Vec<Mat>,
    },
}

impl Fusion {
    /// Instantiate parameters for `spec` given the encoder token shapes
    /// (`(tokens_out, token_dim)` per encoder).
    pub fn build<R: Rng>(spec: &FusionSpec, shapes: &[(usize, usize)], rng: &mut R) -> Result<Self> {
        if shapes.is_empty() {
            return Err(Error::Config("fusion needs at least one encoder".into()));
        }
        match spec {
            FusionSpec::SequenceAppend => {
                let d = shapes[0].1;
                if shapes.iter().any(|s| s.1 != d) {
                    return Err(Error::ShapeMismatch(
                        "sequence_append requires equal token dims across encoders".into(),
                    ));
                }
                Ok(Fusion::SequenceAppend)
            }
            FusionSpec::ChannelConcat => {
                let t = shapes[0].0;
                if shapes.iter().any(|s| s.0 != t) {
                    return Err(Error::ShapeMismatch(
                        "channel_concat requires equal token counts across encoders".into(),
                    ));
                }
                Ok(Fusion::ChannelConcat)
            }
            FusionSpec::SharedMlp { dim } => {
                let d = shapes[0].1;
                if shapes.iter().any(|s| s.1 != d) {
                    return Err(Error::ShapeMismatch(
                        "shared_mlp requires equal token dims across encoders".into(),
                    ));
                }
                if *dim == 0 {
                    return Err(Error::Config("shared_mlp dim must be >= 1".into()));
                }
                let scale_in = 1.0 / (d as f64).sqrt();
                let scale_hidden = 1.0 / (*dim as f64).sqrt();
                // small random biases keep ReLU inputs off the exact kink
                // for all-zero (fully masked) token grids
                Ok(Fusion::SharedMlp {
                    w1: Mat::gaussian(*dim, d, scale_in, rng),
                    b1: Mat::gaussian(1, *dim, 0.01, rng).as_slice().to_vec(),
                    w2: Mat::gaussian(*dim, *dim, scale_hidden, rng),
                    b2: Mat::gaussian(1, *dim, 0.01, rng).as_slice().to_vec(),
                })
            }
            FusionSpec::CrossAttention { queries, kv_dim } => {
                if *queries == 0 || *kv_dim == 0 {
                    return Err(Error::Config(
                        "cross_attention needs at least one query and kv_dim >= 1".into(),
                    ));
                }
                let scale_q = 1.0 / (*kv_dim as f64).sqrt();
                let wk = shapes
                    .iter()
                    .map(|(_, d)| Mat::gaussian(*kv_dim, *d, 1.0 / (*d as f64).sqrt(), rng))
                    .collect();
                let wv = shapes
                    .iter()
                    .map(|(_, d)| Mat::gaussian(*kv_dim, *d, 1.0 / (*d as f64).sqrt(), rng))
                    .collect();
                Ok(Fusion::CrossAttention {
                    queries: Mat::gaussian(*queries, *kv_dim, scale_q, rng),
                    wk,
                    wv,
                })
            }
        }
    }

    /// Fused grid shape `(tokens, dim)` for the given encoder shapes.
    pub fn output_shape(&self, shapes: &[(usize, usize)]) -> (usize, usize) {
        match self {
            Fusion::SequenceAppend => (shapes.iter().map(|s| s.0).sum(), shapes[0].1),
            Fusion::ChannelConcat => (shapes[0].0, shapes.iter().map(|s| s.1).sum()),
            Fusion::SharedMlp { w1, .. } => (shapes.iter().map(|s| s.0).sum(), w1.rows()),
            Fusion::CrossAttention { queries, .. } => (queries.rows(), queries.cols()),
        }
    }

    /// Combine the (already gated) token grids into one fused grid.
    pub fn forward(&self, tokens: &[Mat]) -> Result<(Mat, FusionTrace)> {
        match self {
            Fusion::SequenceAppend => {
                let refs: Vec<&Mat> = tokens.iter().collect();
                let d = refs[0].cols();
                if refs.iter().any(|m| m.cols() != d) {
                    return Err(Error::ShapeMismatch("sequence_append token dims".into()));
                }
                Ok((Mat::vstack(&refs), FusionTrace::Passthrough))
            }
            Fusion::ChannelConcat => {
                let refs: Vec<&Mat> = tokens.iter().collect();
                let t = refs[0].rows();
                if refs.iter().any(|m| m.rows() != t) {
                    return Err(Error::ShapeMismatch("channel_concat token counts".into()));
                }
                Ok((Mat::hstack(&refs), FusionTrace::Passthrough))
            }
            Fusion::SharedMlp { w1, b1, w2, b2 } => {
                let refs: Vec<&Mat> = tokens.iter().collect();
                let stacked = Mat::vstack(&refs);
                if stacked.cols() != w1.cols() {
                    return Err(Error::ShapeMismatch(format!(
                        "shared_mlp expects token dim {}, got {}",
                        w1.cols(),
                        stacked.cols()
                    )));
                }
                let mut hidden = Mat::zeros(stacked.rows(), w1.rows());
                let mut fused = Mat::zeros(stacked.rows(), w2.rows());
                for r in 0..stacked.rows() {
                    let mut h = w1.matvec(stacked.row(r));
                    for (hv, bv) in h.iter_mut().zip(b1) {
                        *hv = (*hv + bv).max(0.0);
                    }
                    let mut y = w2.matvec(&h);
                    for (yv, bv) in y.iter_mut().zip(b2) {
                        *yv += bv;
                    }
                    hidden.row_mut(r).copy_from_slice(&h);
                    fused.row_mut(r).copy_from_slice(&y);
                }
                Ok((fused, FusionTrace::SharedMlp { hidden }))
            }
            Fusion::CrossAttention { queries, wk, wv } => {
                if tokens.len() != wk.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "cross_attention built for {} encoders, got {}",
                        wk.len(),
                        tokens.len()
                    )));
                }
                let mut key_blocks = Vec::with_capacity(tokens.len());
                let mut value_blocks = Vec::with_capacity(tokens.len());
                for (k, grid) in tokens.iter().enumerate() {
                    if grid.cols() != wk[k].cols() {
                        return Err(Error::ShapeMismatch(format!(
                            "cross_attention key map {k} expects dim {}, got {}",
                            wk[k].cols(),
                            grid.cols()
                        )));
                    }
                    key_blocks.push(grid.mul_nt(&wk[k]));
                    value_blocks.push(grid.mul_nt(&wv[k]));
                }
                let keys = Mat::vstack(&key_blocks.iter().collect::<Vec<_>>());
                let values = Mat::vstack(&value_blocks.iter().collect::<Vec<_>>());
                let inv_sqrt = 1.0 / (queries.cols() as f64).sqrt();
                let mut scores = queries.mul_nt(&keys);
                scores.scale(inv_sqrt);
                let mut attn = Mat::zeros(scores.rows(), scores.cols());
                for r in 0..scores.rows() {
                    attn.row_mut(r).copy_from_slice(&softmax(scores.row(r)));
                }
                let fused = attn.mul(&values);
                Ok((fused, FusionTrace::CrossAttention { keys, values, attn }))
            }
        }
    }

    /// Backpropagate `d_fused` through the fusion. Returns the gradient with
    /// respect to each (gated) token grid plus parameter gradients.
    pub fn backward(
        &self,
        tokens: &[Mat],
        trace: &FusionTrace,
        d_fused: &Mat,
    ) -> (Vec<Mat>, FusionGrads) {
        match (self, trace) {
            (Fusion::SequenceAppend, FusionTrace::Passthrough) => {
                let mut out = Vec::with_capacity(tokens.len());
                let mut offset = 0;
                for grid in tokens {
                    let mut g = Mat::zeros(grid.rows(), grid.cols());
                    for r in 0..grid.rows() {
                        g.row_mut(r).copy_from_slice(d_fused.row(offset + r));
                    }
                    offset += grid.rows();
                    out.push(g);
                }
                (out, FusionGrads::None)
            }
            (Fusion::ChannelConcat, FusionTrace::Passthrough) => {
                let mut out = Vec::with_capacity(tokens.len());
                let mut offset = 0;
                for grid in tokens {
                    let mut g = Mat::zeros(grid.rows(), grid.cols());
                    for r in 0..grid.rows() {
                        g.row_mut(r)
                            .copy_from_slice(&d_fused.row(r)[offset..offset + grid.cols()]);
                    }
                    offset += grid.cols();
                    out.push(g);
                }
                (out, FusionGrads::None)
            }
            (Fusion::SharedMlp { w1, w2, .. }, FusionTrace::SharedMlp { hidden }) => {
                let mut d_w1 = Mat::zeros(w1.rows(), w1.cols());
                let mut d_b1 = vec![0.0; w1.rows()];
                let mut d_w2 = Mat::zeros(w2.rows(), w2.cols());
                let mut d_b2 = vec![0.0; w2.rows()];
                let mut d_tokens: Vec<Mat> = tokens
                    .iter()
                    .map(|g| Mat::zeros(g.rows(), g.cols()))
                    .collect();
                let mut row = 0;
                for (k, grid) in tokens.iter().enumerate() {
                    for r in 0..grid.rows() {
                        let dy = d_fused.row(row);
                        let h = hidden.row(row);
                        d_w2.add_outer(dy, h);
                        for (b, v) in d_b2.iter_mut().zip(dy) {
                            *b += v;
                        }
                        let mut dh = w2.matvec_t(dy);
                        for (dhv, hv) in dh.iter_mut().zip(h) {
                            if *hv <= 0.0 {
                                *dhv = 0.0;
                            }
                        }
                        d_w1.add_outer(&dh, grid.row(r));
                        for (b, v) in d_b1.iter_mut().zip(&dh) {
                            *b += v;
                        }
                        let dx = w1.matvec_t(&dh);
                        d_tokens[k].row_mut(r).copy_from_slice(&dx);
                        row += 1;
                    }
                }
                (
                    d_tokens,
                    FusionGrads::SharedMlp {
                        w1: d_w1,
                        b1: d_b1,
                        w2: d_w2,
                        b2: d_b2,
                    },
                )
            }
            (
                Fusion::CrossAttention { queries, wk, wv },
                FusionTrace::CrossAttention { keys, values, attn },
            ) => {
                // d_attn = d_fused · valuesᵀ ; d_values = attnᵀ · d_fused
                let d_attn = d_fused.mul_nt(values);
                let mut d_values = attn.mul_tn(d_fused);
                // softmax backward per query row
                let mut d_scores = Mat::zeros(attn.rows(), attn.cols());
                for r in 0..attn.rows() {
                    let a = attn.row(r);
                    let da = d_attn.row(r);
                    let inner: f64 = a.iter().zip(da).map(|(x, y)| x * y).sum();
                    let out = d_scores.row_mut(r);
                    for t in 0..a.len() {
                        out[t] = a[t] * (da[t] - inner);
                    }
                }
                let inv_sqrt = 1.0 / (queries.cols() as f64).sqrt();
                d_scores.scale(inv_sqrt);
                // scores = Q · Kᵀ (scaled): dQ = dS · K ; dK = dSᵀ · Q
                let d_queries = d_scores.mul(keys);
                let mut d_keys = d_scores.mul_tn(queries);
                // split keys/values back into encoder blocks
                let mut d_tokens = Vec::with_capacity(tokens.len());
                let mut d_wk = Vec::with_capacity(tokens.len());
                let mut d_wv = Vec::with_capacity(tokens.len());
                let mut row = 0;
                for (k, grid) in tokens.iter().enumerate() {
                    let t_k = grid.rows();
                    let mut dk_block = Mat::zeros(t_k, keys.cols());
                    let mut dv_block = Mat::zeros(t_k, values.cols());
                    for r in 0..t_k {
                        dk_block.row_mut(r).copy_from_slice(d_keys.row_mut(row + r));
                        dv_block.row_mut(r).copy_from_slice(d_values.row_mut(row + r));
                    }
                    row += t_k;
                    // K_k = X_k · wkᵀ: dwk = dK_kᵀ · X_k ; dX_k = dK_k · wk
                    d_wk.push(dk_block.mul_tn(grid));
                    d_wv.push(dv_block.mul_tn(grid));
                    let mut dx = dk_block.mul(&wk[k]);
                    dx.add_assign(&dv_block.mul(&wv[k]));
                    d_tokens.push(dx);
                }
                (
                    d_tokens,
                    FusionGrads::CrossAttention {
                        queries: d_queries,
                        wk: d_wk,
                        wv: d_wv,
                    },
                )
            }
            _ => unreachable!("trace kind always matches fusion kind"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn channel_concat_dimension_arithmetic() {
        let mut r = rng(1);
        let f = Fusion::build(&FusionSpec::ChannelConcat, &[(2, 3), (2, 5)], &mut r).unwrap();
        let a = Mat::gaussian(2, 3, 1.0, &mut r);
        let b = Mat::gaussian(2, 5, 1.0, &mut r);
        let (fused, _) = f.forward(&[a, b]).unwrap();
        assert_eq!((fused.rows(), fused.cols()), (2, 8));
    }

    #[test]
    fn cross_attention_output_length_is_query_count() {
        let mut r = rng(2);
        for n_enc in 1..=3 {
            let shapes: Vec<(usize, usize)> = (0..n_enc).map(|i| (2 + i, 3 + i)).collect();
            let spec = FusionSpec::CrossAttention {
                queries: 4,
                kv_dim: 6,
            };
            let f = Fusion::build(&spec, &shapes, &mut r).unwrap();
            let tokens: Vec<Mat> = shapes
                .iter()
                .map(|&(t, d)| Mat::gaussian(t, d, 1.0, &mut r))
                .collect();
            let (fused, _) = f.forward(&tokens).unwrap();
            assert_eq!((fused.rows(), fused.cols()), (4, 6));
        }
    }

    #[test]
    fn sequence_append_keeps_masked_blocks_in_place() {
        let mut r = rng(3);
        let f = Fusion::build(&FusionSpec::SequenceAppend, &[(2, 4), (3, 4)], &mut r).unwrap();
        let a = Mat::gaussian(2, 4, 1.0, &mut r);
        let b = super::super::mask(&Mat::gaussian(3, 4, 1.0, &mut r));
        let (fused, _) = f.forward(&[a.clone(), b]).unwrap();
        assert_eq!(fused.rows(), 5);
        for r_i in 0..2 {
            assert_eq!(fused.row(r_i), a.row(r_i));
        }
        for r_i in 2..5 {
            assert!(fused.row(r_i).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn mismatched_shapes_are_rejected_per_strategy() {
        let mut r = rng(4);
        assert!(Fusion::build(&FusionSpec::ChannelConcat, &[(2, 3), (3, 3)], &mut r).is_err());
        assert!(Fusion::build(&FusionSpec::SequenceAppend, &[(2, 3), (2, 4)], &mut r).is_err());
        assert!(Fusion::build(&FusionSpec::SharedMlp { dim: 8 }, &[(2, 3), (2, 4)], &mut r).is_err());
    }
}
