use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::layers::Parameters;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators, one buffer per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new<P: Parameters>(params: &P) -> Self {
        let sizes: Vec<usize> = params.param_refs().iter().map(|p| p.tensor.len()).collect();
        AdamState {
            first: sizes.iter().map(|&n| alloc::vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| alloc::vec![0.0; n]).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Rejects the whole step, leaving
/// parameters and moments untouched, if any gradient entry is non-finite.
pub fn adam_step<P: Parameters>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let grad_refs = grads.param_refs();
    if grad_refs.len() != state.first.len() {
        return Err(Error::shape("adam_step", &[grad_refs.len()], &[state.first.len()]));
    }
    for g in &grad_refs {
        if !g.tensor.is_finite() {
            return Err(Error::NonFiniteGradient {
                block: g.name.clone(),
                epoch: 0,
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let c2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(&grad_refs)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        if p.len() != g.tensor.len() {
            return Err(Error::shape("adam_step", p.shape(), g.tensor.shape()));
        }
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.tensor.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv -= lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::DenseParams;
    use crate::Tensor;
    use alloc::vec;

    fn scalar(v: f64) -> DenseParams {
        DenseParams::new(Tensor::matrix(1, 1, vec![v]).unwrap(), Tensor::zeros(&[1])).unwrap()
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let mut p = scalar(0.3);
        let mut state = AdamState::new(&p);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &scalar(1.0), &mut state, 1e-3, &cfg).unwrap();
        let (m, v) = (state.first[0][0], state.second[0][0]);
        adam_step(&mut p, &scalar(0.0), &mut state, 1e-3, &cfg).unwrap();
        assert_eq!(state.first[0][0], cfg.beta1 * m);
        assert_eq!(state.second[0][0], cfg.beta2 * v);
    }

    #[test]
    fn genuinely_zero_state_is_a_fixed_point() {
        let mut p = scalar(0.3);
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &scalar(0.0), &mut state, 1e-3, &AdamConfig::default()).unwrap();
        assert_eq!(p.weight.data()[0], 0.3);
    }

    #[test]
    fn first_step_on_square_moves_by_lr() {
        // f(θ) = θ², θ = 1: g = 2, m̂ = 2, v̂ = 4, step = lr · 2 / (2 + eps)
        let mut p = scalar(1.0);
        let mut state = AdamState::new(&p);
        let lr = 1e-3;
        adam_step(&mut p, &scalar(2.0), &mut state, lr, &AdamConfig::default()).unwrap();
        let expected = 1.0 - lr * 2.0 / (2.0 + 1e-8);
        assert!((p.weight.data()[0] - expected).abs() < 1e-15);
        assert!((1.0 - p.weight.data()[0] - lr).abs() < 1e-10);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut p = scalar(1.0);
        let mut state = AdamState::new(&p);
        let mut g = scalar(0.0);
        g.bias.data_mut()[0] = f64::NAN;
        let err = adam_step(&mut p, &g, &mut state, 1e-3, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref block, .. } if block == "bias"));
        assert_eq!(state.step, 0);
        assert_eq!(p.weight.data()[0], 1.0);
    }
}
