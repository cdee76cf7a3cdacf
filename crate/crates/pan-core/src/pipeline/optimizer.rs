//! Per-bag parameter updates: plain SGD and Adam.
//!
//! State is a flat list aligned with the canonical tensor order of
//! [`ModelParams::tensors`], which is what makes checkpoints and training
//! resumable and mode-independent.

use alloc::vec::Vec;

use thiserror::Error;

use crate::mathx;
use crate::model::{ModelParams, ParamGroup};
use crate::numerics::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Option<OptimizerKind> {
        match s {
            "sgd" => Some(OptimizerKind::Sgd),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("gradient list has {got} tensors, parameters have {want}")]
    GradCount { got: usize, want: usize },
    #[error("gradient {index} shaped {got:?}, parameter {group} shaped {want:?}")]
    GradShape {
        index: usize,
        group: &'static str,
        got: Vec<usize>,
        want: Vec<usize>,
    },
    #[error("non-finite gradient for {group} (tensor {index})")]
    NonFiniteGrad { index: usize, group: &'static str },
}

/// One optimizer instance owns the moment state for one model.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    /// First/second moments per tensor (unused for SGD).
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    /// Running β^t factors for bias correction.
    beta1_pow: f64,
    beta2_pow: f64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Optimizer {
        let zeros: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|(_, t)| Tensor::zeros_like(t))
            .collect();
        Optimizer {
            kind,
            lr,
            m: zeros.clone(),
            v: zeros,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    fn check(
        &self,
        groups: &[(ParamGroup, &Tensor)],
        grads: &[Tensor],
    ) -> Result<(), OptimError> {
        if grads.len() != groups.len() {
            return Err(OptimError::GradCount {
                got: grads.len(),
                want: groups.len(),
            });
        }
        for (index, ((group, t), g)) in groups.iter().zip(grads).enumerate() {
            if t.shape() != g.shape() {
                return Err(OptimError::GradShape {
                    index,
                    group: group.name(),
                    got: g.shape().to_vec(),
                    want: t.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(OptimError::NonFiniteGrad {
                    index,
                    group: group.name(),
                });
            }
        }
        Ok(())
    }

    /// Apply one update from gradients in canonical tensor order.
    pub fn step(&mut self, params: &mut ModelParams, grads: &[Tensor]) -> Result<(), OptimError> {
        {
            let groups = params.tensors();
            self.check(&groups, grads)?;
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for ((_, t), g) in params.tensors_mut().into_iter().zip(grads) {
                    for (x, dx) in t.data_mut().iter_mut().zip(g.data()) {
                        *x -= self.lr * dx;
                    }
                }
            }
            OptimizerKind::Adam => {
                self.beta1_pow *= ADAM_BETA1;
                self.beta2_pow *= ADAM_BETA2;
                let c1 = 1.0 - self.beta1_pow;
                let c2 = 1.0 - self.beta2_pow;
                for (k, ((_, t), g)) in params.tensors_mut().into_iter().zip(grads).enumerate() {
                    let m = self.m[k].data_mut();
                    let v = self.v[k].data_mut();
                    for ((x, dx), (mi, vi)) in t
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.iter_mut().zip(v.iter_mut()))
                    {
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * dx;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * dx * dx;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *x -= self.lr * m_hat / (mathx::sqrt(v_hat) + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::Mode;
    use crate::encoder::EncoderKind;
    use crate::model::Dims;

    fn tiny_params() -> ModelParams {
        let dims = Dims { d_w: 2, d_h: 2, d: 2 };
        ModelParams::init(0, 4, 3, dims, EncoderKind::MeanPool, Mode::An)
    }

    fn zero_grads(p: &ModelParams) -> Vec<Tensor> {
        p.tensors().iter().map(|(_, t)| Tensor::zeros_like(t)).collect()
    }

    #[test]
    fn sgd_moves_against_the_gradient() {
        let mut p = tiny_params();
        let before = p.encoder.embeddings.data()[0];
        let mut grads = zero_grads(&p);
        grads[0].data_mut()[0] = 2.0;
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &p);
        opt.step(&mut p, &grads).unwrap();
        // θ = θ − lr·g: with θ scaled to 1 this is the 1 − 0.1·2 = 0.8 rule.
        assert!((p.encoder.embeddings.data()[0] - (before - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_change_nothing() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut p = tiny_params();
            let reference = p.clone();
            let grads = zero_grads(&p);
            let mut opt = Optimizer::new(kind, 0.5, &p);
            opt.step(&mut p, &grads).unwrap();
            opt.step(&mut p, &grads).unwrap();
            assert_eq!(p, reference, "{}", kind.as_str());
        }
    }

    #[test]
    fn adam_first_step_magnitude_is_the_learning_rate() {
        let mut p = tiny_params();
        let before = p.encoder.embeddings.data().to_vec();
        let mut grads = zero_grads(&p);
        for x in grads[0].data_mut() {
            *x = 1.0;
        }
        let lr = 0.01;
        let mut opt = Optimizer::new(OptimizerKind::Adam, lr, &p);
        opt.step(&mut p, &grads).unwrap();
        for (after, b) in p.encoder.embeddings.data().iter().zip(&before) {
            // First bias-corrected step with g=1: Δθ = −lr/(1+ε).
            assert!((after - (b - lr / (1.0 + ADAM_EPS))).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_scale_invariance_on_constant_gradients() {
        // With a constant gradient the step size is lr regardless of the
        // gradient's magnitude — the defining contrast with SGD.
        let run = |scale: f64| {
            let mut p = tiny_params();
            let mut grads = zero_grads(&p);
            grads[0].data_mut()[0] = scale;
            let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, &p);
            let before = p.encoder.embeddings.data()[0];
            for _ in 0..3 {
                opt.step(&mut p, &grads).unwrap();
            }
            before - p.encoder.embeddings.data()[0]
        };
        assert!((run(1.0) - run(100.0)).abs() < 1e-6);
    }

    #[test]
    fn shape_and_count_mismatches_are_rejected() {
        let mut p = tiny_params();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &p);
        let short = zero_grads(&p)[1..].to_vec();
        assert!(matches!(
            opt.step(&mut p, &short),
            Err(OptimError::GradCount { .. })
        ));
        let mut wrong = zero_grads(&p);
        wrong[0] = Tensor::zeros(&[1]);
        assert!(matches!(
            opt.step(&mut p, &wrong),
            Err(OptimError::GradShape { index: 0, .. })
        ));
    }

    #[test]
    fn non_finite_gradients_abort_before_touching_parameters() {
        let mut p = tiny_params();
        let reference = p.clone();
        let mut grads = zero_grads(&p);
        grads[2].data_mut()[0] = f64::NAN;
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, &p);
        let err = opt.step(&mut p, &grads).unwrap_err();
        assert!(matches!(err, OptimError::NonFiniteGrad { index: 2, .. }));
        assert_eq!(p, reference);
    }
}
