use gmoe_core::layers::{Mode, Parameters};
use gmoe_core::loss::{regularization, LossConfig, MotionNorm};
use gmoe_core::model::{init_gmoe, GmoeConfig, TaskConfig};
use gmoe_core::train::{Batch, Trainable};
use gmoe_core::{SeededRng, Tensor};

/// Direct evaluation of `b1·L1 + b2·L2 + reg` with its own loops.
fn oracle(probs: &Tensor, mixture: &Tensor, batch: &Batch, cfg: &LossConfig, reg: f64) -> f64 {
    let m = batch.inputs.shape()[0] as f64;
    let (t, k, d) = (batch.actions.shape()[1], batch.actions.shape()[2], batch.motions.shape()[2]);
    let (mut ce, mut mo) = (0.0, 0.0);
    for s in 0..batch.inputs.shape()[0] {
        for j in 0..t {
            for i in 0..k {
                let idx = (s * t + j) * k + i;
                if batch.actions.data()[idx] == 1.0 {
                    ce -= probs.data()[idx].max(1e-12).ln();
                }
            }
            let mut sq = 0.0;
            for c in 0..d {
                let idx = (s * t + j) * d + c;
                sq += (mixture.data()[idx] - batch.motions.data()[idx]).powi(2);
            }
            mo += match cfg.motion_norm {
                MotionNorm::Squared => sq,
                MotionNorm::Euclidean => sq.sqrt(),
            };
        }
    }
    cfg.b1 * ce / (2.0 * m) + cfg.b2 * mo / (2.0 * m) + reg
}

#[test]
fn total_loss_decomposes() {
    let mut rng = SeededRng::new(31);
    for trial in 0..50 {
        let mut cfg = GmoeConfig {
            task: TaskConfig::new(2, 1, &["a", "b", "c"], 2, 3),
            expert_hidden: 4,
            gate_hidden: 5,
            dropout_rate: 0.0,
        };
        cfg.task.horizon = 1 + trial % 4;
        let model = init_gmoe(cfg, &mut rng).unwrap();
        let task = &model.config.task;
        let samples = 1 + rng.below(6);
        let (w, f, t, k) = (task.window_len(), task.feature_width(), task.horizon, task.num_actions);
        let mut actions = Tensor::zeros(&[samples, t, k]);
        for r in 0..samples * t {
            actions.data_mut()[r * k + rng.below(k)] = 1.0;
        }
        let batch = Batch {
            inputs: rng.gaussian_tensor(&[samples, w, f]),
            actions,
            motions: rng.gaussian_tensor(&[samples, t, f]),
        };
        let loss_cfg = LossConfig {
            b1: rng.uniform_range(0.0, 2.0),
            b2: rng.uniform_range(0.0, 2.0),
            motion_norm: if trial % 2 == 0 { MotionNorm::Squared } else { MotionNorm::Euclidean },
            l1_coeff: rng.uniform_range(0.0, 1e-3),
            l2_coeff: rng.uniform_range(0.0, 1e-3),
            ..LossConfig::default()
        };
        let reg = regularization(&model.params.param_refs(), &loss_cfg);
        let total = model.evaluate(&batch, &loss_cfg).unwrap().metrics(&loss_cfg).loss + reg;
        let (out, _) = model.forward_batch(&batch.inputs, Mode::Eval, None).unwrap();
        let want = oracle(&out.gate_probs, &out.mixture, &batch, &loss_cfg, reg);
        assert!((total - want).abs() <= 1e-12, "trial {trial}: {total} vs {want}");
    }
}

#[test]
fn regularization_skips_biases() {
    let mut rng = SeededRng::new(32);
    let model = init_gmoe(GmoeConfig::desk(), &mut rng).unwrap();
    let cfg = LossConfig { l1_coeff: 1.0, ..LossConfig::default() };
    let refs = model.params.param_refs();
    let weights: f64 = refs.iter().filter(|p| !p.name.ends_with("bias")).flat_map(|p| p.tensor.data()).map(|v| v.abs()).sum();
    assert!((regularization(&refs, &cfg) - weights).abs() <= 1e-9 * weights);
}
