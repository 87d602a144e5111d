//! Bounded disturbance signals and additive measurement noise.
//!
//! Every signal is a deterministic function of time once built, so RK4 stages
//! can sample it at arbitrary instants and a run is reproducible from its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Serializable description of a disturbance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceSpec {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * sin(w1 t) * sin(w2 t)`.
    SinusoidalProduct {
        offset: f64,
        amplitude: f64,
        w1: f64,
        w2: f64,
    },
    /// Random offset plus a random sum of sinusoids, never exceeding `bound`.
    BoundedRandom {
        bound: f64,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_max_omega")]
        max_omega: f64,
    },
    /// Raised-cosine pulse of height `peak` on `[onset, onset + duration]`.
    Gust {
        peak: f64,
        onset: f64,
        duration: f64,
    },
}

fn default_components() -> usize {
    4
}
fn default_max_omega() -> f64 {
    3.0
}

impl DisturbanceSpec {
    pub fn zero() -> Self {
        DisturbanceSpec::Constant { value: 0.0 }
    }

    /// Certified bound on `|d(t)|`.
    pub fn bound(&self) -> f64 {
        match self {
            DisturbanceSpec::Constant { value } => value.abs(),
            DisturbanceSpec::SinusoidalProduct { offset, amplitude, .. } => offset.abs() + amplitude.abs(),
            DisturbanceSpec::BoundedRandom { bound, .. } => bound.abs(),
            DisturbanceSpec::Gust { peak, .. } => peak.abs(),
        }
    }

    pub fn build(&self, seed: u64) -> Disturbance {
        let kind = match self {
            DisturbanceSpec::Constant { value } => Kind::Constant(*value),
            DisturbanceSpec::SinusoidalProduct { offset, amplitude, w1, w2 } => {
                Kind::Product { offset: *offset, amplitude: *amplitude, w1: *w1, w2: *w2 }
            }
            DisturbanceSpec::BoundedRandom { bound, components, max_omega } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // Split the budget: the offset takes a random share, the
                // sinusoids split the rest with random weights.
                let share: f64 = rng.gen_range(0.0..1.0);
                let offset = bound * share * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let rest = bound * (1.0 - share);
                let n = (*components).max(1);
                let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = weights.iter().sum();
                let waves = weights
                    .iter()
                    .map(|w| Wave {
                        amplitude: rest * w / total,
                        omega: rng.gen_range(0.05..=max_omega.max(0.05)),
                        phase: rng.gen_range(0.0..std::f64::consts::TAU),
                    })
                    .collect();
                Kind::Random { offset, waves }
            }
            DisturbanceSpec::Gust { peak, onset, duration } => {
                Kind::Gust { peak: *peak, onset: *onset, duration: *duration }
            }
        };
        Disturbance { kind, bound: self.bound() }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Wave {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Constant(f64),
    Product { offset: f64, amplitude: f64, w1: f64, w2: f64 },
    Random { offset: f64, waves: Vec<Wave> },
    Gust { peak: f64, onset: f64, duration: f64 },
}

/// A built disturbance signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    kind: Kind,
    pub bound: f64,
}

impl Disturbance {
    pub fn sample(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Constant(v) => *v,
            Kind::Product { offset, amplitude, w1, w2 } => offset + amplitude * (w1 * t).sin() * (w2 * t).sin(),
            Kind::Random { offset, waves } => {
                offset + waves.iter().map(|w| w.amplitude * (w.omega * t + w.phase).sin()).sum::<f64>()
            }
            Kind::Gust { peak, onset, duration } => {
                let s = t - onset;
                if s < 0.0 || s > *duration || *duration <= 0.0 {
                    0.0
                } else {
                    0.5 * peak * (1.0 - (std::f64::consts::TAU * s / duration).cos())
                }
            }
        }
    }
}

/// Additive noise on one measured output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    None,
    Sine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Uniform on `[-bound, bound]`, independent per sampling instant.
    BoundedRandom { bound: f64 },
}

impl NoiseSpec {
    pub fn bound(&self) -> f64 {
        match self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Sine { amplitude, .. } => amplitude.abs(),
            NoiseSpec::BoundedRandom { bound } => bound.abs(),
        }
    }

    pub fn sample(&self, t: f64, seed: u64) -> f64 {
        match self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Sine { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
            NoiseSpec::BoundedRandom { bound } => {
                if *bound == 0.0 {
                    return 0.0;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t.to_bits());
                rng.gen_range(-bound.abs()..=bound.abs())
            }
        }
    }
}

/// Noise on the position and velocity outputs of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseModel {
    #[serde(default)]
    pub position: NoiseSpec,
    #[serde(default)]
    pub velocity: NoiseSpec,
}

/// Truth plus additive noise: `(y1, y2) = (x1 + n1, x2 + n2)`.
pub fn measure(x1: f64, x2: f64, noise: &NoiseModel, t: f64, seed: u64) -> (f64, f64) {
    (x1 + noise.position.sample(t, seed), x2 + noise.velocity.sample(t, seed.rotate_left(17)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_bound_is_certified() {
        let spec = DisturbanceSpec::SinusoidalProduct { offset: 3.0, amplitude: 2.0, w1: 0.3, w2: 1.6 };
        assert_eq!(spec.bound(), 5.0);
        let d = spec.build(0);
        let sup = (0..200_000).map(|i| d.sample(i as f64 * 1e-3).abs()).fold(0.0, f64::max);
        assert!(sup <= 5.0 && sup > 4.9);
    }

    #[test]
    fn random_respects_bound_and_seed() {
        let spec = DisturbanceSpec::BoundedRandom { bound: 4.5, components: 5, max_omega: 3.0 };
        for seed in 0..20 {
            let d = spec.build(seed);
            for i in 0..10_000 {
                assert!(d.sample(i as f64 * 0.01).abs() <= 4.5 + 1e-12);
            }
        }
        assert_eq!(spec.build(7), spec.build(7));
        assert_ne!(spec.build(7), spec.build(8));
    }

    #[test]
    fn gust_shape() {
        let d = DisturbanceSpec::Gust { peak: 2.0, onset: 1.0, duration: 2.0 }.build(0);
        assert_eq!(d.sample(0.5), 0.0);
        assert!((d.sample(2.0) - 2.0).abs() < 1e-12);
        assert_eq!(d.sample(3.5), 0.0);
    }

    #[test]
    fn zero_noise_is_identity() {
        assert_eq!(measure(1.5, -0.3, &NoiseModel::default(), 2.0, 1), (1.5, -0.3));
    }

    #[test]
    fn sine_noise_is_additive() {
        let n = NoiseModel {
            position: NoiseSpec::Sine { amplitude: 0.01, omega: 50.0, phase: 0.0 },
            velocity: NoiseSpec::None,
        };
        let t = 0.123;
        let (y1, y2) = measure(2.0, 0.5, &n, t, 0);
        assert!((y1 - 2.0 - 0.01 * (50.0 * t).sin()).abs() < 1e-15);
        assert_eq!(y2, 0.5);
    }

    #[test]
    fn random_noise_bound() {
        let n = NoiseSpec::BoundedRandom { bound: 0.02 };
        let mut sup: f64 = 0.0;
        for i in 0..1_000_000 {
            sup = sup.max(n.sample(i as f64 * 1e-4, 11).abs());
        }
        assert!(sup <= 0.02);
        assert!(sup > 0.019);
    }
}
