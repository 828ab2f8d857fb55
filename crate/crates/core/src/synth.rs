//! Deterministic synthetic feature sets with planted time structure.
//!
//! A sample taken at minute `t` has phase `theta = 2 pi t / 1440`. Its
//! feature vector has two kinds of coordinates:
//!
//! * unambiguous: `a_j * exp(kappa * (cos(theta - phi_j) - 1))`, a response to
//!   the angular distance between `(cos theta, sin theta)` and a prototype
//!   phase `phi_j`;
//! * confuser: `c_j * |sin(pi t / 1440)|`, identical for `t` and `1440 - t`
//!   (the sunrise/sunset aliasing of overall illumination).
//!
//! Gaussian noise of standard deviation `noise_sigma` is added to every
//! coordinate. Each class draws from its own ChaCha stream, so generation
//! is reproducible regardless of the order classes are produced in.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::time::{ClockTime, Dataset, FeatureRecord, TimeLabelSpace, MINUTES_PER_DAY};

/// Sharpness of the unambiguous prototype responses.
pub const PROTOTYPE_KAPPA: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub samples_per_class: usize,
    pub num_classes: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    /// Fraction of coordinates that carry only the mirror-symmetric signal.
    pub confuser_strength: f64,
    /// Optional per-class sampling weights (scaled so the largest is 1).
    pub skew: Option<Vec<f64>>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_class == 0 {
            return Err(Error::invalid("samples_per_class", "must be at least 1"));
        }
        TimeLabelSpace::new(self.num_classes)?;
        if self.dim < 4 {
            return Err(Error::invalid("dim", format!("{} is below the minimum of 4", self.dim)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma", "must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.confuser_strength) {
            return Err(Error::invalid("confuser_strength", "must lie in [0, 1]"));
        }
        if let Some(w) = &self.skew {
            if w.len() != self.num_classes {
                return Err(Error::DimensionMismatch {
                    context: "skew weights",
                    expected: self.num_classes,
                    actual: w.len(),
                });
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::invalid("skew", "weights must be positive"));
            }
        }
        Ok(())
    }

    /// Number of confuser coordinates.
    pub fn confuser_dims(&self) -> usize {
        (self.confuser_strength * self.dim as f64).round() as usize
    }

    /// Per-class sample counts implied by the skew weights.
    pub fn class_counts(&self) -> Vec<usize> {
        match &self.skew {
            None => vec![self.samples_per_class; self.num_classes],
            Some(w) => {
                let max = w.iter().cloned().fold(f64::MIN, f64::max);
                w.iter()
                    .map(|x| ((self.samples_per_class as f64 * x / max).round() as usize).max(1))
                    .collect()
            }
        }
    }
}

/// Fixed per-dimension layout drawn from the global stream.
struct Layout {
    /// `(amplitude, phase)` per unambiguous coordinate.
    prototypes: Vec<(f64, f64)>,
    confuser_scales: Vec<f64>,
    /// `(lat, lon)` anchor per class.
    anchors: Vec<(f64, f64)>,
}

impl Layout {
    fn draw(spec: &SynthSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let n_conf = spec.confuser_dims();
        let n_unamb = spec.dim - n_conf;
        let prototypes = (0..n_unamb)
            .map(|j| {
                let amp = rng.random_range(0.5..1.5);
                let jitter = rng.random_range(-0.5..0.5) * TAU / n_unamb as f64;
                (amp, TAU * j as f64 / n_unamb as f64 + jitter)
            })
            .collect();
        let confuser_scales = (0..n_conf).map(|_| rng.random_range(0.5..1.5)).collect();
        let anchors = (0..spec.num_classes)
            .map(|_| (rng.random_range(-60.0..60.0), rng.random_range(-179.0..179.0)))
            .collect();
        Self {
            prototypes,
            confuser_scales,
            anchors,
        }
    }

    fn clean_features(&self, t: ClockTime) -> Vec<f64> {
        let theta = TAU * t.minute_of_day() as f64 / MINUTES_PER_DAY as f64;
        // Fold onto [0, 720] first so t and 1440 - t give bit-identical values.
        let folded = t.circular_diff(ClockTime::MIDNIGHT) as f64;
        let mirror = (PI * folded / MINUTES_PER_DAY as f64).sin();
        self.prototypes
            .iter()
            .map(|&(a, phi)| a * (PROTOTYPE_KAPPA * ((theta - phi).cos() - 1.0)).exp())
            .chain(self.confuser_scales.iter().map(|c| c * mirror))
            .collect()
    }
}

/// Noise-free feature vector for time `t` under `spec`'s layout.
pub fn clean_features(spec: &SynthSpec, t: ClockTime) -> Vec<f64> {
    Layout::draw(spec).clean_features(t)
}

/// Generates the dataset, class-major, records ordered by class then draw.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let layout = Layout::draw(spec);
    let space = TimeLabelSpace::new(spec.num_classes)?;
    let bin = space.bin_minutes();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let counts = spec.class_counts();

    let mut records = Vec::with_capacity(counts.iter().sum());
    for (class, &count) in counts.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(class as u64 + 1);
        let (alat, alon) = layout.anchors[class];
        let start = class as u16 * bin;
        for i in 0..count {
            let t = ClockTime::from_minutes(start + rng.random_range(0..bin)).expect("inside the day");
            let mut features = layout.clean_features(t);
            for v in &mut features {
                *v += spec.noise_sigma * normal.sample(&mut rng);
            }
            let theta = TAU * t.minute_of_day() as f64 / MINUTES_PER_DAY as f64;
            let daylight = (-theta.cos()).max(0.0);
            let brightness = (25.0 + 190.0 * daylight + 10.0 * normal.sample(&mut rng)).clamp(0.0, 255.0);
            let mut r = FeatureRecord::new(format!("synth-{class:03}-{i:05}"), features, t);
            r.lat = Some((alat + 0.5 * normal.sample(&mut rng)).clamp(-90.0, 90.0));
            r.lon = Some((alon + 0.5 * normal.sample(&mut rng)).clamp(-180.0, 180.0));
            r.date = Some(format!(
                "2023-{:02}-{:02}",
                rng.random_range(1..=12u32),
                rng.random_range(1..=28u32)
            ));
            r.brightness = Some(brightness);
            records.push(r);
        }
    }
    Dataset::new(spec.dim, records)
}

pub const SUITE_NAMES: [&str; 3] = ["separable", "confuser", "skewed"];

/// Day-heavy class weights for 24 hourly classes: few samples at night,
/// most during the day.
pub fn day_skew_weights() -> Vec<f64> {
    (0..24)
        .map(|h| match h {
            0..=4 => 0.08,
            5 | 23 => 0.15,
            6 | 22 => 0.3,
            7 | 20 | 21 => 0.6,
            19 => 0.8,
            _ => 1.0,
        })
        .collect()
}

/// Named suites with fixed seeds.
pub fn suite(name: &str) -> Option<SynthSpec> {
    let separable = SynthSpec {
        samples_per_class: 200,
        num_classes: 24,
        dim: 32,
        noise_sigma: 0.05,
        confuser_strength: 0.2,
        skew: None,
        seed: 20_240_601,
    };
    match name {
        "separable" => Some(separable),
        "confuser" => Some(SynthSpec {
            confuser_strength: 0.9,
            seed: 20_240_602,
            ..separable
        }),
        "skewed" => Some(SynthSpec {
            skew: Some(day_skew_weights()),
            seed: 20_240_603,
            ..separable
        }),
        _ => None,
    }
}

pub fn standard_suites() -> Vec<(&'static str, SynthSpec)> {
    SUITE_NAMES
        .iter()
        .map(|&n| (n, suite(n).expect("known suite")))
        .collect()
}
