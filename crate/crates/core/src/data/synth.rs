//! Synthetic multi-action motion and ground-reaction data.
//!
//! Actions follow a semi-Markov schedule: each dwell lasts a uniform random
//! time in `[dwell_min, dwell_max]`, then the next action is drawn from the
//! transition matrix (uniform over the other actions by default). Around
//! each switch the two regimes are blended with a raised-cosine weight over
//! `crossfade` seconds; the label flips at the middle of the blend.
//!
//! Within a regime joint `j` follows `A sin(2π f t + φ) + c` with its
//! analytic derivative as the velocity. Wrench channels follow the regime's
//! pattern; channel `c` belongs to foot `c % 2`, and the second foot runs half
//! a cycle behind the first.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{MotionDataset, MotionRecord};
use crate::{Error, Result, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointWave {
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// Radians.
    pub phase: f64,
    pub offset: f64,
}

impl JointWave {
    pub fn angle(&self, t: f64) -> f64 {
        self.amplitude * libm::sin(2.0 * PI * self.frequency * t + self.phase) + self.offset
    }

    pub fn velocity(&self, t: f64) -> f64 {
        2.0 * PI * self.frequency * self.amplitude * libm::cos(2.0 * PI * self.frequency * t + self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WrenchPattern {
    /// Double-peaked vertical force per stride; see [`m_shape_force`].
    MShapeGait { frequency: f64, body_weight: f64 },
    ConstantWeight { weight: f64 },
    Sinusoidal { mean: f64, amplitude: f64, frequency: f64 },
    NoiseFloor { level: f64 },
}

/// Heel-strike and push-off peaks of a stance phase, as fractions of the
/// gait cycle.
const HEEL_PEAK: (f64, f64) = (0.12, 0.55);
const PUSH_PEAK: (f64, f64) = (0.40, 0.50);
const PEAK_WIDTH: f64 = 0.055;

/// Vertical ground reaction force of one foot at gait phase `phase`
/// (cycles; any real value). Periodic with period 1 and two maxima per
/// cycle.
pub fn m_shape_force(phase: f64, body_weight: f64) -> f64 {
    let p = phase - libm::floor(phase);
    let bump = |center: f64| {
        (-1..=1)
            .map(|k| {
                let d = p - center - k as f64;
                libm::exp(-d * d / (2.0 * PEAK_WIDTH * PEAK_WIDTH))
            })
            .sum::<f64>()
    };
    body_weight * (HEEL_PEAK.1 * bump(HEEL_PEAK.0) + PUSH_PEAK.1 * bump(PUSH_PEAK.0))
}

impl WrenchPattern {
    pub fn value(&self, t: f64, channel: usize) -> f64 {
        let foot = (channel % 2) as f64;
        match *self {
            WrenchPattern::MShapeGait {
                frequency,
                body_weight,
            } => m_shape_force(frequency * t - 0.5 * foot, body_weight),
            WrenchPattern::ConstantWeight { weight } => weight,
            WrenchPattern::Sinusoidal {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * libm::sin(2.0 * PI * frequency * t + PI * foot),
            WrenchPattern::NoiseFloor { level } => level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRegime {
    pub name: String,
    pub joints: Vec<JointWave>,
    pub wrench: WrenchPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionConfig {
    pub dwell_min: f64,
    pub dwell_max: f64,
    pub crossfade: f64,
    /// Row-stochastic `K × K` matrix; `None` means uniform over the other
    /// actions.
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            dwell_min: 2.0,
            dwell_max: 6.0,
            crossfade: 0.4,
            matrix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub regimes: Vec<ActionRegime>,
    pub wrench_dims: usize,
    pub duration: f64,
    pub rate_hz: f64,
    pub transitions: TransitionConfig,
    /// Standard deviation of the additive Gaussian noise on every channel.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Walking, rotating, standing and none; 4 joints, 2 feet, 8 minutes at
    /// 25 Hz.
    pub fn desk(seed: u64) -> Self {
        SyntheticConfig {
            regimes: desk_regimes(4),
            wrench_dims: 2,
            duration: 480.0,
            rate_hz: 25.0,
            transitions: TransitionConfig::default(),
            noise_sigma: 0.01,
            seed,
        }
    }

    /// 66 joints and 12 wrench channels.
    pub fn paper_scale(seed: u64) -> Self {
        SyntheticConfig {
            regimes: desk_regimes(66),
            wrench_dims: 12,
            ..Self::desk(seed)
        }
    }

    fn issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let k = self.regimes.len();
        if k < 2 {
            issues.push(format!("need at least 2 regimes, got {k}"));
        }
        if !(self.duration >= 10.0) {
            issues.push(format!("duration must be >= 10 s, got {}", self.duration));
        }
        if !(self.rate_hz > 0.0) {
            issues.push(format!("rate must be positive, got {}", self.rate_hz));
        }
        if !(self.noise_sigma >= 0.0) {
            issues.push(format!("noise sigma must be >= 0, got {}", self.noise_sigma));
        }
        let tr = &self.transitions;
        if !(tr.dwell_min > tr.crossfade && tr.dwell_max >= tr.dwell_min) {
            issues.push(format!(
                "need crossfade < dwell_min <= dwell_max, got {} / {} / {}",
                tr.crossfade, tr.dwell_min, tr.dwell_max
            ));
        }
        if !(tr.crossfade >= 0.0) {
            issues.push(String::from("crossfade must be >= 0"));
        }
        if let Some(m) = &tr.matrix {
            let ok = m.len() == k
                && m.iter().all(|row| {
                    row.len() == k
                        && row.iter().all(|&p| p >= 0.0)
                        && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9
                });
            if !ok {
                issues.push(format!("transition matrix must be {k}x{k} and row-stochastic"));
            }
        }
        if let Some(first) = self.regimes.first() {
            let d = first.joints.len();
            if d == 0 {
                issues.push(String::from("regimes need at least one joint"));
            }
            for r in &self.regimes {
                if r.joints.len() != d {
                    issues.push(format!("regime `{}` has {} joints, expected {d}", r.name, r.joints.len()));
                }
            }
            for j in 0..d {
                for a in 0..k {
                    for b in a + 1..k {
                        let (fa, fb) = (
                            self.regimes[a].joints.get(j).map(|w| w.frequency),
                            self.regimes[b].joints.get(j).map(|w| w.frequency),
                        );
                        if fa.is_some() && fa == fb {
                            issues.push(format!(
                                "regimes `{}` and `{}` share frequency {:?} on joint {j}",
                                self.regimes[a].name, self.regimes[b].name, fa
                            ));
                        }
                    }
                }
            }
        }
        issues
    }
}

/// Default regime table for `d` joints. Joints alternate hip-like and
/// knee-like waves; frequencies are distinct per regime.
pub fn desk_regimes(num_joints: usize) -> Vec<ActionRegime> {
    // (name, frequency, [hip amp, knee amp], [hip offset, knee offset], wrench)
    let table: [(&str, f64, [f64; 2], [f64; 2], WrenchPattern); 4] = [
        (
            "walking",
            1.0,
            [0.45, 0.6],
            [0.05, 0.35],
            WrenchPattern::MShapeGait {
                frequency: 1.0,
                body_weight: 700.0,
            },
        ),
        (
            "rotating",
            0.5,
            [0.15, 0.2],
            [0.25, 0.15],
            WrenchPattern::Sinusoidal {
                mean: 350.0,
                amplitude: 120.0,
                frequency: 0.5,
            },
        ),
        ("standing", 0.2, [0.03, 0.03], [0.0, 0.05], WrenchPattern::ConstantWeight { weight: 350.0 }),
        ("none", 1.7, [0.25, 0.3], [0.4, 0.8], WrenchPattern::NoiseFloor { level: 150.0 }),
    ];
    table
        .iter()
        .map(|(name, f, amp, off, wrench)| ActionRegime {
            name: String::from(*name),
            joints: (0..num_joints)
                .map(|j| JointWave {
                    amplitude: amp[j % 2],
                    frequency: *f,
                    phase: 0.5 * PI * j as f64,
                    offset: off[j % 2],
                })
                .collect(),
            wrench: *wrench,
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Switch {
    time: f64,
    from: usize,
    to: usize,
}

fn schedule(cfg: &SyntheticConfig, rng: &mut SeededRng) -> (usize, Vec<Switch>) {
    let k = cfg.regimes.len();
    let tr = &cfg.transitions;
    let first = rng.below(k);
    let mut switches = Vec::new();
    let mut current = first;
    let mut t = 0.0;
    loop {
        t += rng.uniform_range(tr.dwell_min, tr.dwell_max);
        if t >= cfg.duration {
            break;
        }
        let next = match &tr.matrix {
            Some(m) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut pick = k - 1;
                for (j, p) in m[current].iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                pick
            }
            None => {
                let j = rng.below(k - 1);
                if j >= current {
                    j + 1
                } else {
                    j
                }
            }
        };
        switches.push(Switch {
            time: t,
            from: current,
            to: next,
        });
        current = next;
    }
    (first, switches)
}

/// Raised-cosine blend weight and its time derivative at `u ∈ [0, 1]` of a
/// crossfade lasting `width` seconds.
fn blend(u: f64, width: f64) -> (f64, f64) {
    (0.5 - 0.5 * libm::cos(PI * u), 0.5 * PI * libm::sin(PI * u) / width)
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<MotionDataset> {
    let issues = cfg.issues();
    if !issues.is_empty() {
        return Err(Error::InvalidConfig(issues));
    }
    let mut rng = SeededRng::new(cfg.seed);
    let (first, switches) = schedule(cfg, &mut rng);
    let d = cfg.regimes[0].joints.len();
    let w = cfg.wrench_dims;
    let n = libm::round(cfg.duration * cfg.rate_hz) as usize;
    let half = 0.5 * cfg.transitions.crossfade;
    let mut records = Vec::with_capacity(n);
    let mut next_switch = 0;
    let mut label = first;
    for idx in 0..n {
        let t = idx as f64 / cfg.rate_hz;
        while next_switch < switches.len() && switches[next_switch].time <= t {
            label = switches[next_switch].to;
            next_switch += 1;
        }
        // Nearest switch whose crossfade covers t, if any.
        let fading = [next_switch.checked_sub(1), Some(next_switch)]
            .into_iter()
            .flatten()
            .filter_map(|i| switches.get(i))
            .find(|s| half > 0.0 && (t - s.time).abs() < half)
            .copied();
        let mut joints = vec![0.0; d];
        let mut velocities = vec![0.0; d];
        let mut wrenches = vec![0.0; w];
        match fading {
            Some(s) => {
                let (a, b) = (&cfg.regimes[s.from], &cfg.regimes[s.to]);
                let (beta, dbeta) = blend((t - (s.time - half)) / (2.0 * half), 2.0 * half);
                for j in 0..d {
                    let (sa, sb) = (a.joints[j].angle(t), b.joints[j].angle(t));
                    joints[j] = (1.0 - beta) * sa + beta * sb;
                    velocities[j] = (1.0 - beta) * a.joints[j].velocity(t)
                        + beta * b.joints[j].velocity(t)
                        + dbeta * (sb - sa);
                }
                for (c, f) in wrenches.iter_mut().enumerate() {
                    *f = (1.0 - beta) * a.wrench.value(t, c) + beta * b.wrench.value(t, c);
                }
            }
            None => {
                let r = &cfg.regimes[label];
                for j in 0..d {
                    joints[j] = r.joints[j].angle(t);
                    velocities[j] = r.joints[j].velocity(t);
                }
                for (c, f) in wrenches.iter_mut().enumerate() {
                    *f = r.wrench.value(t, c);
                }
            }
        }
        records.push(MotionRecord {
            time: t,
            joints,
            velocities,
            wrenches,
            action: label,
        });
    }
    if cfg.noise_sigma > 0.0 {
        for r in &mut records {
            for v in r.joints.iter_mut().chain(r.velocities.iter_mut()).chain(r.wrenches.iter_mut()) {
                *v += cfg.noise_sigma * rng.gaussian();
            }
        }
    }
    Ok(MotionDataset {
        num_joints: d,
        wrench_dims: w,
        actions: cfg.regimes.iter().map(|r| r.name.clone()).collect(),
        rate_hz: cfg.rate_hz,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            noise_sigma: 0.0,
            duration: 120.0,
            ..SyntheticConfig::desk(seed)
        }
    }

    #[test]
    fn desk_record_count() {
        let ds = generate_synthetic(&SyntheticConfig::desk(7)).unwrap();
        assert_eq!(ds.len(), 12_000);
        ds.validate().unwrap();
        let short = SyntheticConfig {
            duration: 10.0,
            ..SyntheticConfig::desk(7)
        };
        assert_eq!(generate_synthetic(&short).unwrap().len(), 250);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&SyntheticConfig::desk(3)).unwrap();
        let b = generate_synthetic(&SyntheticConfig::desk(3)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticConfig::desk(4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_regime_velocity_is_derivative() {
        // One long dwell: only check samples before the first switch.
        let cfg = SyntheticConfig {
            transitions: TransitionConfig {
                dwell_min: 30.0,
                dwell_max: 30.0,
                ..TransitionConfig::default()
            },
            ..noiseless(1)
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let r0 = &cfg.regimes[ds.records[0].action];
        for rec in ds.records.iter().take_while(|r| r.time < 29.5) {
            for (j, wave) in r0.joints.iter().enumerate() {
                let h = 1e-6;
                let numeric = (wave.angle(rec.time + h) - wave.angle(rec.time - h)) / (2.0 * h);
                assert!((rec.velocities[j] - numeric).abs() < 1e-7);
                assert!((rec.velocities[j] - wave.velocity(rec.time)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dwell_lengths_stay_in_range() {
        let cfg = noiseless(11);
        let ds = generate_synthetic(&cfg).unwrap();
        let dt = 1.0 / cfg.rate_hz;
        let mut changes = Vec::new();
        for i in 1..ds.len() {
            if ds.records[i].action != ds.records[i - 1].action {
                changes.push(ds.records[i].time);
            }
        }
        assert!(changes.len() > 10);
        for pair in changes.windows(2) {
            let dwell = pair[1] - pair[0];
            assert!(dwell >= 2.0 - dt && dwell <= 6.0 + dt, "dwell {dwell}");
        }
    }

    #[test]
    fn crossfade_stays_inside_envelope() {
        let cfg = noiseless(5);
        let mut rng = SeededRng::new(cfg.seed);
        let (_, switches) = schedule(&cfg, &mut rng);
        let ds = generate_synthetic(&cfg).unwrap();
        for s in &switches {
            for rec in ds.records.iter().filter(|r| (r.time - s.time).abs() < 0.2) {
                for j in 0..4 {
                    let a = cfg.regimes[s.from].joints[j].angle(rec.time);
                    let b = cfg.regimes[s.to].joints[j].angle(rec.time);
                    assert!(rec.joints[j] >= a.min(b) - 1e-12 && rec.joints[j] <= a.max(b) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn invalid_tables_are_rejected() {
        let mut cfg = SyntheticConfig::desk(0);
        cfg.regimes.truncate(1);
        assert!(generate_synthetic(&cfg).is_err());
        let mut cfg = SyntheticConfig::desk(0);
        cfg.regimes[1].joints[0].frequency = cfg.regimes[0].joints[0].frequency;
        assert!(matches!(generate_synthetic(&cfg), Err(Error::InvalidConfig(_))));
        let cfg = SyntheticConfig {
            duration: 5.0,
            ..SyntheticConfig::desk(0)
        };
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn transition_matrix_is_followed() {
        // Deterministic cycle walking -> rotating -> standing -> none -> walking.
        let mut cfg = noiseless(2);
        cfg.transitions.matrix = Some(
            (0..4)
                .map(|i| (0..4).map(|j| if j == (i + 1) % 4 { 1.0 } else { 0.0 }).collect())
                .collect(),
        );
        let ds = generate_synthetic(&cfg).unwrap();
        for pair in ds.records.windows(2) {
            if pair[0].action != pair[1].action {
                assert_eq!(pair[1].action, (pair[0].action + 1) % 4);
            }
        }
    }
}
