use gmoe_core::data::{generate_synthetic, m_shape_force, SyntheticConfig};

fn local_maxima(xs: &[f64]) -> usize {
    xs.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

#[test]
fn m_shape_has_two_maxima_per_cycle_analytically() {
    let n = 10_000;
    // Two cycles plus wrap-around neighbours, finely sampled.
    let xs: Vec<f64> = (-1..=2 * n).map(|i| m_shape_force(i as f64 / n as f64, 700.0)).collect();
    assert_eq!(local_maxima(&xs), 4);
}

#[test]
fn noiseless_walking_force_has_two_maxima_per_gait_cycle() {
    let cfg = SyntheticConfig {
        noise_sigma: 0.0,
        ..SyntheticConfig::desk(7)
    };
    let ds = generate_synthetic(&cfg).unwrap();
    let walking = ds.action_index("walking").unwrap();
    let rate = ds.rate_hz as usize;
    let labels: Vec<usize> = ds.records.iter().map(|r| r.action).collect();
    // Whole cycles (gait frequency 1 Hz, phase 0 on integer seconds) whose
    // span plus the crossfade margin is labelled walking.
    let margin = rate / 2;
    let mut cycles = 0;
    for second in 1..(ds.len() / rate - 2) {
        let (start, end) = (second * rate, (second + 1) * rate);
        if labels[start - margin..end + margin].iter().any(|&l| l != walking) {
            continue;
        }
        for channel in 0..ds.wrench_dims {
            let xs: Vec<f64> = ds.records[start - 1..=end].iter().map(|r| r.wrenches[channel]).collect();
            assert_eq!(local_maxima(&xs[..rate + 1]), 2, "cycle at {second} s, channel {channel}");
        }
        cycles += 1;
    }
    assert!(cycles >= 20, "only {cycles} clean walking cycles");
}
