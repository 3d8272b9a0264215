use gmoe_core::layers::{dropout_forward, Mode, Standardizer};
use gmoe_core::tensor::{matmul, softmax_rows};
use gmoe_core::{SeededRng, Tensor};
use proptest::prelude::*;

fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a.data()[i * k + p] * b.data()[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

#[test]
fn matmul_matches_triple_loop_exactly() {
    let mut rng = SeededRng::new(11);
    for (m, k, n) in [(1, 1, 1), (3, 5, 2), (7, 4, 9), (16, 33, 8)] {
        let a = rng.gaussian_tensor(&[m, k]);
        let b = rng.gaussian_tensor(&[k, n]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[m, n]);
        let want = naive_matmul(&a, &b);
        for (x, y) in c.data().iter().zip(&want) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn softmax_matches_naive_exponentials() {
    let mut rng = SeededRng::new(12);
    let z = rng.gaussian_tensor(&[20, 6]).scale(3.0);
    let p = softmax_rows(&z);
    for r in 0..20 {
        let e: Vec<f64> = z.row(r).iter().map(|v| v.exp()).collect();
        let s: f64 = e.iter().sum();
        for (got, ev) in p.row(r).iter().zip(&e) {
            assert!((got - ev / s).abs() <= 1e-15);
        }
    }
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-50.0f64..50.0, rows * cols).prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(z in matrix(4, 5)) {
        let p = softmax_rows(&z);
        for r in 0..4 {
            let s: f64 = p.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(p.row(r).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn softmax_is_shift_invariant(z in matrix(1, 6), c in -100.0f64..100.0) {
        let a = softmax_rows(&z);
        let b = softmax_rows(&z.map(|v| v + c));
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn standardizer_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..20)) {
        let s = Standardizer::fit(rows.iter().map(Vec::as_slice)).unwrap();
        for r in &rows {
            let mut z = r.clone();
            s.apply_slice(&mut z);
            s.invert_slice(&mut z);
            for (a, b) in z.iter().zip(r) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn eval_dropout_is_identity(x in matrix(3, 4), rate in 0.0f64..0.9, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let (y, _) = dropout_forward(&x, rate, Mode::Eval, &mut rng).unwrap();
        prop_assert_eq!(y, x);
    }

    #[test]
    fn transpose_is_an_involution(x in matrix(3, 7)) {
        prop_assert_eq!(x.transpose().transpose(), x);
    }
}
