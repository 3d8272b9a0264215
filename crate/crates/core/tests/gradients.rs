//! Central finite-difference checks of every analytic gradient.

use gmoe_core::layers::{
    dense_backward, dense_forward, lstm_backward, lstm_forward, DenseParams, LstmParams, Mode, Parameters,
};
use gmoe_core::loss::{
    action_loss, action_loss_grad, add_regularization_grad, competitive_motion_loss, motion_loss, regularization,
    LossConfig, MotionNorm,
};
use gmoe_core::model::{
    init_baseline, init_gmoe, softmax_backward, softmax_steps, BaselineConfig, GmoeConfig, TaskConfig,
};
use gmoe_core::train::{Batch, Trainable};
use gmoe_core::{SeededRng, Tensor};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn perturbed<P: Parameters + Clone>(p: &P, block: usize, i: usize, delta: f64) -> P {
    let mut q = p.clone();
    q.tensors_mut()[block].data_mut()[i] += delta;
    q
}

/// Compares `analytic` against central differences of `f` for every scalar
/// in every block of `p`. Returns the number of scalars checked.
fn check_params<P: Parameters + Clone>(label: &str, p: &P, analytic: &P, f: impl Fn(&P) -> f64) -> usize {
    let refs = p.param_refs();
    let grads = analytic.param_refs();
    let mut checked = 0;
    for (b, (r, g)) in refs.iter().zip(&grads).enumerate() {
        for i in 0..r.tensor.len() {
            let num = (f(&perturbed(p, b, i, EPS)) - f(&perturbed(p, b, i, -EPS))) / (2.0 * EPS);
            let ana = g.tensor.data()[i];
            let e = rel_err(ana, num);
            assert!(e <= TOL, "{label}: {}[{i}] analytic {ana} numeric {num} rel {e}", r.name);
            checked += 1;
        }
    }
    checked
}

fn check_tensor(label: &str, x: &Tensor, analytic: &Tensor, f: impl Fn(&Tensor) -> f64) {
    for i in 0..x.len() {
        let mut up = x.clone();
        up.data_mut()[i] += EPS;
        let mut down = x.clone();
        down.data_mut()[i] -= EPS;
        let num = (f(&up) - f(&down)) / (2.0 * EPS);
        let ana = analytic.data()[i];
        assert!(rel_err(ana, num) <= TOL, "{label}[{i}] analytic {ana} numeric {num}");
    }
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

#[test]
fn dense_layer() {
    let mut rng = SeededRng::new(1);
    let p = DenseParams::init(4, 3, &mut rng);
    let x = rng.gaussian_tensor(&[5, 4]);
    let r = rng.gaussian_tensor(&[5, 3]);
    let (_, cache) = dense_forward(&p, &x).unwrap();
    let g = dense_backward(&p, &cache, &r).unwrap();
    let n = check_params("dense", &p, &g.params, |q| dot(&dense_forward(q, &x).unwrap().0, &r));
    assert_eq!(n, 4 * 3 + 3);
    check_tensor("dense input", &x, &g.input, |xx| dot(&dense_forward(&p, xx).unwrap().0, &r));
}

#[test]
fn lstm_through_time() {
    let mut rng = SeededRng::new(2);
    let (w, input, hidden, batch) = (4, 3, 5, 2);
    let p = LstmParams::init(input, hidden, &mut rng);
    let xs: Vec<Tensor> = (0..w).map(|_| rng.gaussian_tensor(&[batch, input])).collect();
    let rs: Vec<Tensor> = (0..w).map(|_| rng.gaussian_tensor(&[batch, hidden])).collect();
    let h0 = rng.gaussian_tensor(&[batch, hidden]).scale(0.5);
    let c0 = rng.gaussian_tensor(&[batch, hidden]).scale(0.5);
    let objective = |q: &LstmParams, xs: &[Tensor]| -> f64 {
        let (hs, _) = lstm_forward(q, xs, &h0, &c0).unwrap();
        hs.iter().zip(&rs).map(|(h, r)| dot(h, r)).sum()
    };
    let (_, cache) = lstm_forward(&p, &xs, &h0, &c0).unwrap();
    let (g, gx) = lstm_backward(&p, &cache, &rs).unwrap();
    let n = check_params("lstm", &p, &g, |q| objective(q, &xs));
    assert_eq!(n, 4 * hidden * (input + hidden + 1));
    for t in 0..w {
        check_tensor("lstm input", &xs[t], &gx[t], |x| {
            let mut seq = xs.clone();
            seq[t] = x.clone();
            objective(&p, &seq)
        });
    }
}

#[test]
fn softmax_cross_entropy() {
    let mut rng = SeededRng::new(3);
    let (b, t, k) = (3, 2, 4);
    let logits = rng.gaussian_tensor(&[b, t, k]).scale(2.0);
    let mut targets = Tensor::zeros(&[b, t, k]);
    for r in 0..b * t {
        targets.data_mut()[r * k + rng.below(k)] = 1.0;
    }
    let loss = |z: &Tensor| action_loss(&softmax_steps(z, k), &targets).unwrap();
    let probs = softmax_steps(&logits, k);
    let dz = softmax_backward(&probs, &action_loss_grad(&probs, &targets).unwrap(), k).unwrap();
    // Closed form for softmax followed by cross-entropy: (p − a) / 2M.
    for ((g, p), a) in dz.data().iter().zip(probs.data()).zip(targets.data()) {
        assert!((g - (p - a) / (2.0 * b as f64)).abs() < 1e-15);
    }
    check_tensor("softmax+ce", &logits, &dz, loss);
}

fn tiny_task() -> TaskConfig {
    TaskConfig::new(2, 1, &["a", "b"], 2, 3)
}

fn tiny_batch(task: &TaskConfig, rng: &mut SeededRng, samples: usize) -> Batch {
    let (w, f, t, k) = (task.window_len(), task.feature_width(), task.horizon, task.num_actions);
    let mut actions = Tensor::zeros(&[samples, t, k]);
    for r in 0..samples * t {
        actions.data_mut()[r * k + rng.below(k)] = 1.0;
    }
    Batch {
        inputs: rng.gaussian_tensor(&[samples, w, f]),
        actions,
        motions: rng.gaussian_tensor(&[samples, t, f]),
    }
}

fn tiny_gmoe(rng: &mut SeededRng) -> gmoe_core::model::GmoeModel {
    let cfg = GmoeConfig {
        task: tiny_task(),
        expert_hidden: 4,
        gate_hidden: 4,
        dropout_rate: 0.0,
    };
    init_gmoe(cfg, rng).unwrap()
}

fn gmoe_objective(model: &gmoe_core::model::GmoeModel, batch: &Batch, cfg: &LossConfig) -> f64 {
    let (out, _) = model.forward_batch(&batch.inputs, Mode::Eval, None).unwrap();
    let l1 = action_loss(&out.gate_probs, &batch.actions).unwrap();
    let l2 = if cfg.competitive {
        competitive_motion_loss(&out.expert_outputs, &out.gate_probs, &batch.motions).unwrap()
    } else {
        motion_loss(&out.mixture, &batch.motions, cfg.motion_norm).unwrap()
    };
    cfg.b1 * l1 + cfg.b2 * l2 + regularization(&model.params.param_refs(), cfg)
}

fn check_gmoe(label: &str, cfg: LossConfig) {
    let mut rng = SeededRng::new(4);
    let model = tiny_gmoe(&mut rng);
    let batch = tiny_batch(&model.config.task, &mut rng, 3);
    let (_, mut grads) = model.loss_and_grad(&batch, &cfg, &mut rng).unwrap();
    add_regularization_grad(&model.params.param_refs(), &mut grads.tensors_mut(), &cfg);
    let n = check_params(label, &model.params, &grads, |p| {
        let mut m = model.clone();
        m.params = p.clone();
        gmoe_objective(&m, &batch, &cfg)
    });
    assert_eq!(n, model.param_count());
}

#[test]
fn gmoe_total_loss() {
    check_gmoe(
        "gmoe",
        LossConfig {
            l2_coeff: 1e-3,
            ..LossConfig::default()
        },
    );
}

#[test]
fn gmoe_euclidean_motion_norm() {
    check_gmoe(
        "gmoe euclidean",
        LossConfig {
            motion_norm: MotionNorm::Euclidean,
            ..LossConfig::default()
        },
    );
}

#[test]
fn gmoe_competitive_loss() {
    check_gmoe(
        "gmoe competitive",
        LossConfig {
            competitive: true,
            ..LossConfig::default()
        },
    );
}

#[test]
fn baseline_total_loss() {
    let mut rng = SeededRng::new(5);
    let cfg = BaselineConfig {
        task: tiny_task(),
        hidden: 3,
        layers: 2,
        dropout_rate: 0.0,
    };
    let model = init_baseline(cfg, &mut rng).unwrap();
    let batch = tiny_batch(&model.config.task, &mut rng, 2);
    let loss_cfg = LossConfig::default();
    let (_, grads) = model.loss_and_grad(&batch, &loss_cfg, &mut rng).unwrap();
    let n = check_params("baseline", &model.params, &grads, |p| {
        let mut m = model.clone();
        m.params = p.clone();
        let (out, _) = m.forward_batch(&batch.inputs, Mode::Eval, None).unwrap();
        loss_cfg.b1 * action_loss(&out.action_probs, &batch.actions).unwrap()
            + loss_cfg.b2 * motion_loss(&out.motion, &batch.motions, loss_cfg.motion_norm).unwrap()
    });
    assert_eq!(n, model.param_count());
}
