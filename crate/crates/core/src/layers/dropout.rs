use alloc::format;

use super::Mode;
use crate::{Error, Result, SeededRng, Tensor};

/// Inverted dropout. Returns the output and a `{0, 1}` keep mask.
///
/// In training mode each entry is zeroed with probability `rate` and the
/// survivors are scaled by `1 / (1 - rate)`. Evaluation mode is the identity.
pub fn dropout_forward(
    x: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut SeededRng,
) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), Tensor::filled(x.shape(), 1.0)));
    }
    let scale = 1.0 / (1.0 - rate);
    let mut mask = x.zeros_like();
    let mut y = x.zeros_like();
    for ((m, out), &v) in mask.data_mut().iter_mut().zip(y.data_mut()).zip(x.data()) {
        if rng.uniform() >= rate {
            *m = 1.0;
            *out = v * scale;
        }
    }
    Ok((y, mask))
}

pub fn dropout_backward(upstream: &Tensor, mask: &Tensor, rate: f64) -> Result<Tensor> {
    if upstream.shape() != mask.shape() {
        return Err(Error::shape("dropout_backward", upstream.shape(), mask.shape()));
    }
    if rate == 0.0 {
        return Ok(upstream.clone());
    }
    let scale = 1.0 / (1.0 - rate);
    Ok(upstream.hadamard(mask)?.scale(scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_zero_is_identity() {
        let mut rng = SeededRng::new(0);
        let x = rng.gaussian_tensor(&[4, 4]);
        let (y, mask) = dropout_forward(&x, 0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(mask.data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn eval_is_identity() {
        let mut rng = SeededRng::new(0);
        let x = rng.gaussian_tensor(&[4, 4]);
        let (y, _) = dropout_forward(&x, 0.7, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn rate_one_rejected() {
        let mut rng = SeededRng::new(0);
        assert!(dropout_forward(&Tensor::zeros(&[2]), 1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn preserves_expectation() {
        let mut rng = SeededRng::new(5);
        let x = Tensor::filled(&[100_000], 1.5);
        let (y, mask) = dropout_forward(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let mean = y.sum() / y.len() as f64;
        assert!((mean - 1.5).abs() / 1.5 < 0.02, "mean {mean}");
        let g = dropout_backward(&Tensor::filled(&[100_000], 1.0), &mask, 0.5).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
