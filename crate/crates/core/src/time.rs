//! Clock-time arithmetic, time label spaces and the feature record model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u16 = 1440;

/// A local clock time with minute resolution. Serialized as `"HH:MM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ClockTime(u16);

impl ClockTime {
    pub const MIDNIGHT: ClockTime = ClockTime(0);

    pub fn from_minutes(minute_of_day: u16) -> Result<Self> {
        if minute_of_day >= MINUTES_PER_DAY {
            return Err(Error::invalid(
                "minute_of_day",
                format!("{minute_of_day} is outside [0, 1440)"),
            ));
        }
        Ok(ClockTime(minute_of_day))
    }

    /// Wraps any signed minute count onto the 24-hour dial.
    pub fn wrapping(minutes: i64) -> Self {
        ClockTime(minutes.rem_euclid(MINUTES_PER_DAY as i64) as u16)
    }

    pub fn from_hm(hour: u16, minute: u16) -> Result<Self> {
        if hour > 23 || minute > 59 {
            return Err(Error::invalid("time", format!("{hour}:{minute} is not a clock time")));
        }
        Ok(ClockTime(hour * 60 + minute))
    }

    pub fn minute_of_day(self) -> u16 {
        self.0
    }

    pub fn hour(self) -> u16 {
        self.0 / 60
    }

    pub fn minute(self) -> u16 {
        self.0 % 60
    }

    /// Circular distance in minutes, in `[0, 720]`.
    pub fn circular_diff(self, other: ClockTime) -> u16 {
        let d = self.0.abs_diff(other.0);
        d.min(MINUTES_PER_DAY - d)
    }
}

/// Parses `"HH:MM"` into a clock time.
pub fn parse_clock(text: &str) -> Result<ClockTime> {
    let err = |field, reason: &str| Error::ParseClock {
        text: text.to_string(),
        field,
        reason: reason.to_string(),
    };
    let (hh, mm) = text.split_once(':').ok_or_else(|| err("separator", "missing ':'"))?;
    let parse_field = |s: &str, field, max: u16| -> Result<u16> {
        if s.len() != 2 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err(field, "must be two digits"));
        }
        let v: u16 = s.parse().map_err(|_| err(field, "must be two digits"))?;
        if v > max {
            return Err(err(field, &format!("must be at most {max:02}")));
        }
        Ok(v)
    };
    let h = parse_field(hh, "hour", 23)?;
    let m = parse_field(mm, "minute", 59)?;
    Ok(ClockTime(h * 60 + m))
}

impl FromStr for ClockTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_clock(s)
    }
}

impl fmt::Display for ClockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour(), self.minute())
    }
}

impl From<ClockTime> for String {
    fn from(t: ClockTime) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for ClockTime {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        parse_clock(&s)
    }
}

pub fn circular_diff(a: ClockTime, b: ClockTime) -> u16 {
    a.circular_diff(b)
}

/// Extra attribute multiplied into a label space, e.g. `month` with 12 values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFactor {
    pub name: String,
    pub cardinality: usize,
}

/// Partition of the day into `C` equal bins, optionally crossed with extra
/// attributes. Flattened indices are row-major with the time-of-day bin
/// varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeLabelSpace {
    hour_classes: usize,
    factors: Vec<LabelFactor>,
}

impl TimeLabelSpace {
    pub fn new(hour_classes: usize) -> Result<Self> {
        if hour_classes < 2 {
            return Err(Error::LabelSpace(format!(
                "need at least 2 time classes, got {hour_classes}"
            )));
        }
        if !(MINUTES_PER_DAY as usize).is_multiple_of(hour_classes) {
            return Err(Error::LabelSpace(format!(
                "{hour_classes} classes do not divide the 1440-minute day"
            )));
        }
        Ok(Self {
            hour_classes,
            factors: Vec::new(),
        })
    }

    /// Crosses the space with another attribute (outer, slower-varying than
    /// the existing ones).
    pub fn with_factor(mut self, name: impl Into<String>, cardinality: usize) -> Result<Self> {
        let name = name.into();
        if cardinality == 0 {
            return Err(Error::LabelSpace(format!("factor {name:?} has cardinality 0")));
        }
        if name != "month" {
            return Err(Error::LabelSpace(format!(
                "unsupported factor {name:?} (only \"month\" can be read from records)"
            )));
        }
        self.factors.insert(0, LabelFactor { name, cardinality });
        Ok(self)
    }

    /// Number of time-of-day bins.
    pub fn hour_classes(&self) -> usize {
        self.hour_classes
    }

    pub fn factors(&self) -> &[LabelFactor] {
        &self.factors
    }

    /// Total number of flattened classes.
    pub fn num_classes(&self) -> usize {
        self.factors
            .iter()
            .map(|f| f.cardinality)
            .product::<usize>()
            * self.hour_classes
    }

    /// Width of one time-of-day bin in minutes.
    pub fn bin_minutes(&self) -> u16 {
        MINUTES_PER_DAY / self.hour_classes as u16
    }

    /// Time-of-day bin of `t`.
    pub fn class_of(&self, t: ClockTime) -> usize {
        (t.minute_of_day() / self.bin_minutes()) as usize
    }

    /// Midpoint of the time-of-day bin of a (possibly flattened) class.
    pub fn class_midpoint(&self, idx: usize) -> ClockTime {
        let bin = self.bin_minutes();
        let hour_idx = (idx % self.hour_classes) as u16;
        ClockTime(hour_idx * bin + bin / 2)
    }

    /// Flattens a time bin and the extra factor values (outermost first).
    pub fn flatten(&self, hour_class: usize, factor_values: &[usize]) -> Result<usize> {
        if factor_values.len() != self.factors.len() {
            return Err(Error::DimensionMismatch {
                context: "label factors",
                expected: self.factors.len(),
                actual: factor_values.len(),
            });
        }
        if hour_class >= self.hour_classes {
            return Err(Error::LabelSpace(format!(
                "time class {hour_class} out of range for C={}",
                self.hour_classes
            )));
        }
        let mut idx = 0;
        for (factor, &v) in self.factors.iter().zip(factor_values) {
            if v >= factor.cardinality {
                return Err(Error::LabelSpace(format!(
                    "{} value {v} out of range 0..{}",
                    factor.name, factor.cardinality
                )));
            }
            idx = idx * factor.cardinality + v;
        }
        Ok(idx * self.hour_classes + hour_class)
    }

    /// Flattened class label of a record.
    pub fn label_of(&self, record: &FeatureRecord) -> Result<usize> {
        self.label_for(record.time, record.date.as_deref())
            .map_err(|e| match e {
                Error::LabelSpace(msg) => Error::LabelSpace(format!("record {:?}: {msg}", record.id)),
                other => other,
            })
    }

    /// Flattened class label from a capture time and optional date.
    pub fn label_for(&self, time: ClockTime, date: Option<&str>) -> Result<usize> {
        let hour_class = self.class_of(time);
        if self.factors.is_empty() {
            return Ok(hour_class);
        }
        let values = self
            .factors
            .iter()
            .map(|f| match f.name.as_str() {
                "month" => {
                    let month = date
                        .ok_or_else(|| Error::LabelSpace("no date for the month factor".into()))
                        .and_then(month_of)?;
                    // Months 1..=12 are folded onto the factor cardinality.
                    Ok((month as usize - 1) * f.cardinality / 12)
                }
                other => Err(Error::LabelSpace(format!("unsupported factor {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        self.flatten(hour_class, &values)
    }

    pub fn labels(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        dataset.records.iter().map(|r| self.label_of(r)).collect()
    }
}

/// Month (1..=12) of a `YYYY-MM-DD` date string.
pub fn month_of(date: &str) -> Result<u32> {
    let bad = || Error::invalid("date", format!("{date:?} is not YYYY-MM-DD"));
    let parts: Vec<&str> = date.split('-').collect();
    if parts.len() != 3 || parts[0].len() != 4 || parts[1].len() != 2 || parts[2].len() != 2 {
        return Err(bad());
    }
    let month: u32 = parts[1].parse().map_err(|_| bad())?;
    let day: u32 = parts[2].parse().map_err(|_| bad())?;
    parts[0].parse::<u32>().map_err(|_| bad())?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return Err(bad());
    }
    Ok(month)
}

pub fn one_hot(idx: usize, num_classes: usize) -> Vec<f64> {
    assert!(idx < num_classes, "class {idx} out of range for {num_classes} classes");
    let mut v = vec![0.0; num_classes];
    v[idx] = 1.0;
    v
}

/// One sample: a precomputed image feature vector and its capture metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub time: ClockTime,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub date: Option<String>,
    pub brightness: Option<f64>,
}

impl FeatureRecord {
    pub fn new(id: impl Into<String>, features: Vec<f64>, time: ClockTime) -> Self {
        Self {
            id: id.into(),
            features,
            time,
            lat: None,
            lon: None,
            date: None,
            brightness: None,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.features.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "record features",
                expected: dim,
                actual: self.features.len(),
            });
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("features of record {:?}", self.id)));
        }
        if let Some(lat) = self.lat {
            if !(-90.0..=90.0).contains(&lat) {
                return Err(Error::invalid("lat", format!("{lat} outside [-90, 90] in record {:?}", self.id)));
            }
        }
        if let Some(lon) = self.lon {
            if !(-180.0..=180.0).contains(&lon) {
                return Err(Error::invalid("lon", format!("{lon} outside [-180, 180] in record {:?}", self.id)));
            }
        }
        if let Some(b) = self.brightness {
            if !(0.0..=255.0).contains(&b) {
                return Err(Error::invalid(
                    "brightness",
                    format!("{b} outside [0, 255] in record {:?}", self.id),
                ));
            }
        }
        Ok(())
    }
}

/// An ordered collection of records sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    records: Vec<FeatureRecord>,
}

impl Dataset {
    pub fn new(dim: usize, records: Vec<FeatureRecord>) -> Result<Self> {
        for r in &records {
            r.validate(dim)?;
        }
        Ok(Self { dim, records })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<FeatureRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sub-dataset made of the given record indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            dim: self.dim,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn times(&self) -> Vec<ClockTime> {
        self.records.iter().map(|r| r.time).collect()
    }
}
