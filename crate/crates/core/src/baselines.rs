//! Linear regression heads over raw features: a scalar minute regressor
//! and a cyclic (cos, sin) regressor. Both are fit by ridge-regularized
//! least squares with an unpenalized-in-practice ridge of 1e-8.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encoders::{cyclic_decode, cyclic_encode};
use crate::error::{Error, Result};
use crate::time::{ClockTime, Dataset};

pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarRegressor {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicRegressor {
    /// `D` rows of `(w_cos, w_sin)`.
    pub weights: Vec<[f64; 2]>,
    pub bias: [f64; 2],
}

/// Design matrix with a trailing bias column.
fn design(dataset: &Dataset) -> Result<DMatrix<f64>> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let d = dataset.dim();
    Ok(DMatrix::from_fn(dataset.len(), d + 1, |i, j| {
        if j < d {
            dataset.records()[i].features[j]
        } else {
            1.0
        }
    }))
}

/// Solves `(X^T X + ridge I) W = X^T Y` for every column of `Y`.
fn solve(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.ncols();
    let gram = x.transpose() * x + DMatrix::identity(n, n) * RIDGE;
    let rhs = x.transpose() * y;
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Model("normal equations are singular".into()))?,
    };
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares solution".into()));
    }
    Ok(w)
}

fn check_dim(expected: usize, features: &[f64]) -> Result<()> {
    if features.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "regressor input",
            expected,
            actual: features.len(),
        });
    }
    Ok(())
}

pub fn fit_scalar(dataset: &Dataset) -> Result<ScalarRegressor> {
    let x = design(dataset)?;
    let y = DMatrix::from_iterator(
        dataset.len(),
        1,
        dataset.records().iter().map(|r| r.time.minute_of_day() as f64),
    );
    let w = solve(&x, &y)?;
    let d = dataset.dim();
    Ok(ScalarRegressor {
        weights: (0..d).map(|j| w[(j, 0)]).collect(),
        bias: w[(d, 0)],
    })
}

pub fn fit_cyclic(dataset: &Dataset) -> Result<CyclicRegressor> {
    let x = design(dataset)?;
    let mut y = DMatrix::zeros(dataset.len(), 2);
    for (i, r) in dataset.records().iter().enumerate() {
        let (c, s) = cyclic_encode(r.time);
        y[(i, 0)] = c;
        y[(i, 1)] = s;
    }
    let w = solve(&x, &y)?;
    let d = dataset.dim();
    Ok(CyclicRegressor {
        weights: (0..d).map(|j| [w[(j, 0)], w[(j, 1)]]).collect(),
        bias: [w[(d, 0)], w[(d, 1)]],
    })
}

impl ScalarRegressor {
    /// Raw output in minutes, before wrapping.
    pub fn raw(&self, features: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), features)?;
        let v = DVector::from_column_slice(&self.weights).dot(&DVector::from_column_slice(features)) + self.bias;
        if !v.is_finite() {
            return Err(Error::NonFinite("scalar regressor output".into()));
        }
        Ok(v)
    }

    pub fn predict(&self, features: &[f64]) -> Result<ClockTime> {
        Ok(wrap_minutes(self.raw(features)?))
    }
}

impl CyclicRegressor {
    pub fn raw(&self, features: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.weights.len(), features)?;
        let (mut c, mut s) = (self.bias[0], self.bias[1]);
        for (w, x) in self.weights.iter().zip(features) {
            c += w[0] * x;
            s += w[1] * x;
        }
        Ok((c, s))
    }

    pub fn predict(&self, features: &[f64]) -> Result<ClockTime> {
        let (c, s) = self.raw(features)?;
        cyclic_decode(c, s)
    }
}

/// Wraps a real-valued minute count onto the clock face, rounding to the
/// nearest minute.
pub fn wrap_minutes(raw: f64) -> ClockTime {
    ClockTime::wrapping(raw.round() as i64)
}

/// Either baseline, for code paths that treat them uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Scalar(ScalarRegressor),
    Cyclic(CyclicRegressor),
}

impl Regressor {
    pub fn predict(&self, features: &[f64]) -> Result<ClockTime> {
        match self {
            Regressor::Scalar(r) => r.predict(features),
            Regressor::Cyclic(r) => r.predict(features),
        }
    }
}

pub fn predict(regressor: &Regressor, features: &[f64]) -> Result<ClockTime> {
    regressor.predict(features)
}
