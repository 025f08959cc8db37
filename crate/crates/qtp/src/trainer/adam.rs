//! Adaptive-moment optimizer with bias correction.

use ndarray::Array2;

use crate::error::TrainError;
use crate::model::ModelParams;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for every model tensor.
pub struct AdamState {
    m: ModelParams,
    v: ModelParams,
    step: u64,
}

impl AdamState {
    pub fn new(template: &ModelParams) -> Self {
        Self {
            m: template.zeros_like(),
            v: template.zeros_like(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all tensors. Aborts on the first non-finite
    /// gradient, naming the offending tensor.
    pub fn step(
        &mut self,
        params: &mut ModelParams,
        grads: &ModelParams,
        lr: f64,
    ) -> Result<(), TrainError> {
        for (name, g) in grads.named_tensors() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::NonFiniteGradient { tensor: name });
            }
        }
        self.step += 1;
        let t = self.step;
        let Self { m, v, .. } = self;
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(m.tensors_mut())
            .zip(v.tensors_mut())
        {
            adam_update_tensor(p, g, m, v, t, lr);
        }
        Ok(())
    }
}

/// The standard bias-corrected update on one tensor.
pub(crate) fn adam_update_tensor(
    p: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    t: u64,
    lr: f64,
) {
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // f(w) = w² at w = 1: gradient 2, first update ≈ lr.
        let mut p = array![[1.0]];
        let mut m = array![[0.0]];
        let mut v = array![[0.0]];
        let g = array![[2.0]];
        adam_update_tensor(&mut p, &g, &mut m, &mut v, 1, 0.1);
        assert!((p[[0, 0]] - 0.9).abs() < 1e-6, "got {}", p[[0, 0]]);
    }

    #[test]
    fn zero_gradient_leaves_fresh_params_unchanged() {
        let mut p = array![[3.0, -1.5]];
        let mut m = array![[0.0, 0.0]];
        let mut v = array![[0.0, 0.0]];
        let g = array![[0.0, 0.0]];
        adam_update_tensor(&mut p, &g, &mut m, &mut v, 1, 0.1);
        assert_eq!(p, array![[3.0, -1.5]]);
    }

    #[test]
    fn non_finite_gradient_aborts_with_tensor_name() {
        use crate::model::{ModelConfig, ModelParams, Vocab};
        use crate::rng::{SeedStreams, StreamPurpose};
        let vocab = Vocab::new(["a"]).unwrap();
        let mut cfg = ModelConfig::new(vocab);
        cfg.num_blocks = 1;
        cfg.d_model = 4;
        cfg.heads = 1;
        cfg.ffn_dim = 8;
        let streams = SeedStreams::new(1);
        let mut params =
            ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        let mut grads = params.zeros_like();
        grads.pos_embed[[0, 0]] = f64::NAN;
        let mut adam = AdamState::new(&params);
        let err = adam.step(&mut params, &grads, 0.1).unwrap_err();
        assert!(err.to_string().contains("pos_embed"), "{err}");
    }

    #[test]
    fn converges_on_quadratic() {
        let mut p = array![[1.0]];
        let mut m = array![[0.0]];
        let mut v = array![[0.0]];
        for t in 1..=500 {
            let g = array![[2.0 * p[[0, 0]]]];
            adam_update_tensor(&mut p, &g, &mut m, &mut v, t, 0.05);
        }
        assert!(p[[0, 0]].abs() < 1e-2, "got {}", p[[0, 0]]);
    }
}
