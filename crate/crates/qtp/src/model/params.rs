//! Model parameter storage.
//!
//! Every tensor is a 2-d array (biases are 1×n rows) so optimizer state,
//! EMA shadows, and gradient accumulators can all reuse this container
//! and walk the tensors in one fixed order.

use ndarray::Array2;
use rand::Rng;

use super::ModelConfig;

/// Per-block weights: per-head attention projections, the output
/// projection, two layer norms, and the position-wise feed-forward pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub attn_q: Vec<Array2<f64>>,
    pub attn_k: Vec<Array2<f64>>,
    pub attn_v: Vec<Array2<f64>>,
    pub attn_out: Array2<f64>,
    pub ln1_gain: Array2<f64>,
    pub ln1_bias: Array2<f64>,
    pub ffn_w1: Array2<f64>,
    pub ffn_b1: Array2<f64>,
    pub ffn_w2: Array2<f64>,
    pub ffn_b2: Array2<f64>,
    pub ln2_gain: Array2<f64>,
    pub ln2_bias: Array2<f64>,
}

/// All weights of the shared encoder plus both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub token_embed: Array2<f64>,
    pub pos_embed: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub corr_w: Array2<f64>,
    pub corr_b: Array2<f64>,
    pub eval_w: Array2<f64>,
    pub eval_b: Array2<f64>,
}

fn uniform_init<R: Rng>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Array2<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let mut m = Array2::zeros((rows, cols));
    for v in m.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
    m
}

impl ModelParams {
    /// Seeded symmetric-uniform initialization scaled by 1/√fan_in.
    /// Layer-norm gains start at 1 and all biases at 0.
    pub fn init<R: Rng>(config: &ModelConfig, rng: &mut R) -> Self {
        let d = config.d_model;
        let hd = config.head_dim();
        let f = config.ffn_dim;
        let v = config.vocab.len();
        let blocks = (0..config.num_blocks)
            .map(|_| BlockParams {
                attn_q: (0..config.heads).map(|_| uniform_init(d, hd, d, rng)).collect(),
                attn_k: (0..config.heads).map(|_| uniform_init(d, hd, d, rng)).collect(),
                attn_v: (0..config.heads).map(|_| uniform_init(d, hd, d, rng)).collect(),
                attn_out: uniform_init(d, d, d, rng),
                ln1_gain: Array2::ones((1, d)),
                ln1_bias: Array2::zeros((1, d)),
                ffn_w1: uniform_init(d, f, d, rng),
                ffn_b1: Array2::zeros((1, f)),
                ffn_w2: uniform_init(f, d, f, rng),
                ffn_b2: Array2::zeros((1, d)),
                ln2_gain: Array2::ones((1, d)),
                ln2_bias: Array2::zeros((1, d)),
            })
            .collect();
        Self {
            token_embed: uniform_init(v, d, d, rng),
            pos_embed: uniform_init(config.max_len, d, d, rng),
            blocks,
            corr_w: uniform_init(d, v, d, rng),
            corr_b: Array2::zeros((1, v)),
            eval_w: uniform_init(d, 1, d, rng),
            eval_b: Array2::zeros((1, 1)),
        }
    }

    /// Same shapes, all zero — gradient and moment accumulators.
    pub fn zeros_like(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| BlockParams {
                attn_q: b.attn_q.iter().map(|m| Array2::zeros(m.raw_dim())).collect(),
                attn_k: b.attn_k.iter().map(|m| Array2::zeros(m.raw_dim())).collect(),
                attn_v: b.attn_v.iter().map(|m| Array2::zeros(m.raw_dim())).collect(),
                attn_out: Array2::zeros(b.attn_out.raw_dim()),
                ln1_gain: Array2::zeros(b.ln1_gain.raw_dim()),
                ln1_bias: Array2::zeros(b.ln1_bias.raw_dim()),
                ffn_w1: Array2::zeros(b.ffn_w1.raw_dim()),
                ffn_b1: Array2::zeros(b.ffn_b1.raw_dim()),
                ffn_w2: Array2::zeros(b.ffn_w2.raw_dim()),
                ffn_b2: Array2::zeros(b.ffn_b2.raw_dim()),
                ln2_gain: Array2::zeros(b.ln2_gain.raw_dim()),
                ln2_bias: Array2::zeros(b.ln2_bias.raw_dim()),
            })
            .collect();
        Self {
            token_embed: Array2::zeros(self.token_embed.raw_dim()),
            pos_embed: Array2::zeros(self.pos_embed.raw_dim()),
            blocks,
            corr_w: Array2::zeros(self.corr_w.raw_dim()),
            corr_b: Array2::zeros(self.corr_b.raw_dim()),
            eval_w: Array2::zeros(self.eval_w.raw_dim()),
            eval_b: Array2::zeros(self.eval_b.raw_dim()),
        }
    }

    /// Tensors with stable names, in the fixed traversal order used by
    /// the optimizer and the checkpoint format.
    pub fn named_tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![
            ("token_embed".into(), &self.token_embed),
            ("pos_embed".into(), &self.pos_embed),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            for (h, m) in b.attn_q.iter().enumerate() {
                out.push((format!("block{i}.head{h}.wq"), m));
            }
            for (h, m) in b.attn_k.iter().enumerate() {
                out.push((format!("block{i}.head{h}.wk"), m));
            }
            for (h, m) in b.attn_v.iter().enumerate() {
                out.push((format!("block{i}.head{h}.wv"), m));
            }
            out.push((format!("block{i}.wo"), &b.attn_out));
            out.push((format!("block{i}.ln1.gain"), &b.ln1_gain));
            out.push((format!("block{i}.ln1.bias"), &b.ln1_bias));
            out.push((format!("block{i}.ffn.w1"), &b.ffn_w1));
            out.push((format!("block{i}.ffn.b1"), &b.ffn_b1));
            out.push((format!("block{i}.ffn.w2"), &b.ffn_w2));
            out.push((format!("block{i}.ffn.b2"), &b.ffn_b2));
            out.push((format!("block{i}.ln2.gain"), &b.ln2_gain));
            out.push((format!("block{i}.ln2.bias"), &b.ln2_bias));
        }
        out.push(("correction.w".into(), &self.corr_w));
        out.push(("correction.b".into(), &self.corr_b));
        out.push(("evaluation.w".into(), &self.eval_w));
        out.push(("evaluation.b".into(), &self.eval_b));
        out
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = vec![&mut self.token_embed, &mut self.pos_embed];
        for b in &mut self.blocks {
            out.extend(b.attn_q.iter_mut());
            out.extend(b.attn_k.iter_mut());
            out.extend(b.attn_v.iter_mut());
            out.push(&mut b.attn_out);
            out.push(&mut b.ln1_gain);
            out.push(&mut b.ln1_bias);
            out.push(&mut b.ffn_w1);
            out.push(&mut b.ffn_b1);
            out.push(&mut b.ffn_w2);
            out.push(&mut b.ffn_b2);
            out.push(&mut b.ln2_gain);
            out.push(&mut b.ln2_bias);
        }
        out.push(&mut self.corr_w);
        out.push(&mut self.corr_b);
        out.push(&mut self.eval_w);
        out.push(&mut self.eval_b);
        out
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Vocab;
    use crate::rng::{SeedStreams, StreamPurpose};

    fn small_config() -> ModelConfig {
        let vocab = Vocab::new(["a", "b", "c"]).unwrap();
        let mut cfg = ModelConfig::new(vocab);
        cfg.num_blocks = 2;
        cfg.d_model = 8;
        cfg.heads = 2;
        cfg.ffn_dim = 16;
        cfg.max_len = 10;
        cfg
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = small_config();
        let streams = SeedStreams::new(42);
        let a = ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        let b = ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn mutable_and_shared_walk_same_tensors() {
        let cfg = small_config();
        let streams = SeedStreams::new(1);
        let mut p = ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        let shapes: Vec<_> = p.tensors().iter().map(|t| t.raw_dim()).collect();
        let shapes_mut: Vec<_> = p.tensors_mut().iter().map(|t| t.raw_dim()).collect();
        assert_eq!(shapes, shapes_mut);
        assert_eq!(shapes.len(), p.named_tensors().len());
    }

    #[test]
    fn zeros_like_matches_shapes() {
        let cfg = small_config();
        let streams = SeedStreams::new(1);
        let p = ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        let z = p.zeros_like();
        assert_eq!(p.scalar_count(), z.scalar_count());
        assert!(z.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }
}
