//! Alternate clock-time encodings: cyclic (cos, sin), random Fourier
//! features and Time2Vec.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{ClockTime, MINUTES_PER_DAY};

/// Default output width of the random Fourier feature map.
pub const RFF_DEFAULT_DIM: usize = 512;

/// Maps a clock time onto the unit circle, closing at midnight.
pub fn cyclic_encode(t: ClockTime) -> (f64, f64) {
    let theta = TAU * t.minute_of_day() as f64 / MINUTES_PER_DAY as f64;
    (theta.cos(), theta.sin())
}

/// Inverse of [`cyclic_encode`] for any non-zero vector; rounds to the
/// nearest minute.
pub fn cyclic_decode(c: f64, s: f64) -> Result<ClockTime> {
    if !(c.is_finite() && s.is_finite()) {
        return Err(Error::NonFinite("cyclic vector".into()));
    }
    if c == 0.0 && s == 0.0 {
        return Err(Error::Undecodable);
    }
    let theta = s.atan2(c).rem_euclid(TAU);
    let minutes = (theta * MINUTES_PER_DAY as f64 / TAU).round() as i64;
    Ok(ClockTime::wrapping(minutes))
}

/// Random Fourier features over `(hour, minute)`:
/// `z(x) = sqrt(2/Dr) * cos(W x + b)`, `W ~ N(0, 1/sigma^2)`, `b ~ U[0, 2pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffParams {
    /// `Dr` rows of `(w_hour, w_minute)`.
    pub projection: Vec<[f64; 2]>,
    pub offsets: Vec<f64>,
    pub sigma: f64,
}

impl RffParams {
    pub fn sample(seed: u64, dim: usize, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("rff dim", "must be at least 1"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("rff sigma", format!("{sigma} must be positive")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / sigma).expect("positive std");
        let projection = (0..dim)
            .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        let offsets = (0..dim).map(|_| rng.random_range(0.0..TAU)).collect();
        Ok(Self {
            projection,
            offsets,
            sigma,
        })
    }

    pub fn dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn encode(&self, t: ClockTime) -> Vec<f64> {
        let (h, m) = (t.hour() as f64, t.minute() as f64);
        let scale = (2.0 / self.dim() as f64).sqrt();
        self.projection
            .iter()
            .zip(&self.offsets)
            .map(|(w, b)| scale * (w[0] * h + w[1] * m + b).cos())
            .collect()
    }
}

/// Time2Vec: one linear component followed by periodic `sin` components,
/// evaluated on minute-of-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Time2VecParams {
    pub omegas: Vec<f64>,
    pub phis: Vec<f64>,
}

impl Time2VecParams {
    pub fn new(omegas: Vec<f64>, phis: Vec<f64>) -> Result<Self> {
        if omegas.len() != phis.len() {
            return Err(Error::DimensionMismatch {
                context: "time2vec phases",
                expected: omegas.len(),
                actual: phis.len(),
            });
        }
        if omegas.len() < 2 {
            return Err(Error::invalid("time2vec dim", "needs one linear and at least one periodic component"));
        }
        Ok(Self { omegas, phis })
    }

    /// Linear slope `1/1440`, periodic frequencies at the daily harmonics
    /// `2 pi i / 1440` and uniformly random phases.
    pub fn sample(seed: u64, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("time2vec dim", "needs one linear and at least one periodic component"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let day = MINUTES_PER_DAY as f64;
        let mut omegas = vec![1.0 / day];
        let mut phis = vec![0.0];
        for i in 1..dim {
            omegas.push(TAU * i as f64 / day);
            phis.push(rng.random_range(-PI..PI));
        }
        Self::new(omegas, phis)
    }

    pub fn dim(&self) -> usize {
        self.omegas.len()
    }

    pub fn encode(&self, t: ClockTime) -> Vec<f64> {
        let x = t.minute_of_day() as f64;
        self.omegas
            .iter()
            .zip(&self.phis)
            .enumerate()
            .map(|(i, (w, p))| if i == 0 { w * x + p } else { (w * x + p).sin() })
            .collect()
    }
}
