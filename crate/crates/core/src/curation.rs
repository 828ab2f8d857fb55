//! Dataset curation operators: brightness and night filtering, block-based
//! SNR, per-hour DBSCAN outlier detection, stratified splitting and an
//! approximate UTC-to-local conversion.
//!
//! Nothing here deletes data. Filters emit flags for review.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::time::{ClockTime, Dataset, TimeLabelSpace};
use crate::train::feature_matrix;

pub const NIGHT_BRIGHTNESS: f64 = 100.0;
/// Records at or beyond this absolute latitude are kept regardless of
/// brightness (polar day).
pub const POLAR_LATITUDE: f64 = 75.0;
pub const SNR_BLOCK: usize = 16;
pub const SNR_DISCARD_DB: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                context: "image pixels",
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if let Some(i) = pixels.iter().position(|p| !(0.0..=255.0).contains(p)) {
            return Err(Error::invalid("pixel", format!("pixel {i} = {} is outside [0, 255]", pixels[i])));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Binary PGM (P5) with maxval 255. Pixels are rounded to bytes.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|p| p.round() as u8));
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::invalid("pgm", msg);
        let mut pos = 0usize;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad(format!("header truncated at byte {pos}")));
            }
            tokens.push((start, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
        }
        if tokens[0].1 != "P5" {
            return Err(bad(format!("magic {:?} at byte 0, expected \"P5\"", tokens[0].1)));
        }
        let num = |i: usize| -> Result<usize> {
            tokens[i]
                .1
                .parse()
                .map_err(|_| bad(format!("{:?} at byte {} is not a number", tokens[i].1, tokens[i].0)))
        };
        let (width, height, maxval) = (num(1)?, num(2)?, num(3)?);
        if maxval != 255 {
            return Err(bad(format!("maxval {maxval} at byte {}, only 255 is supported", tokens[3].0)));
        }
        // exactly one whitespace byte separates the header from the raster
        let data = &bytes[(pos + 1).min(bytes.len())..];
        if data.len() != width * height {
            return Err(bad(format!(
                "raster at byte {} holds {} bytes, expected {}",
                pos + 1,
                data.len(),
                width * height
            )));
        }
        Self::new(width, height, data.iter().map(|&b| b as f64).collect())
    }
}

pub fn mean_brightness(img: &GrayImage) -> f64 {
    if img.pixels.is_empty() {
        return 0.0;
    }
    img.pixels.iter().sum::<f64>() / img.pixels.len() as f64
}

/// Local hours treated as night.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NightWindow {
    pub hours: Vec<u16>,
}

impl Default for NightWindow {
    fn default() -> Self {
        Self {
            hours: vec![22, 23, 0, 1, 2, 3],
        }
    }
}

impl NightWindow {
    pub fn contains(&self, t: ClockTime) -> bool {
        self.hours.contains(&t.hour())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NightFlag {
    Keep,
    Review,
}

/// Bright images taken at night are flagged, except near the poles.
/// A missing latitude cannot claim the polar exception.
pub fn night_brightness_flag(time: ClockTime, brightness: f64, lat: Option<f64>, window: &NightWindow) -> NightFlag {
    let polar = lat.is_some_and(|l| l.abs() >= POLAR_LATITUDE);
    if window.contains(time) && brightness >= NIGHT_BRIGHTNESS && !polar {
        NightFlag::Review
    } else {
        NightFlag::Keep
    }
}

/// Per-record flags; `None` where a record has no brightness.
pub fn night_review(dataset: &Dataset, window: &NightWindow) -> Vec<Option<NightFlag>> {
    dataset
        .records()
        .iter()
        .map(|r| r.brightness.map(|b| night_brightness_flag(r.time, b, r.lat, window)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrReport {
    pub snr_db: f64,
    pub noise_var: f64,
    pub signal_var: f64,
    pub total_var: f64,
    pub blocks_used: usize,
}

impl SnrReport {
    pub fn discard(&self) -> bool {
        self.snr_db <= SNR_DISCARD_DB
    }
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
}

/// Block-based SNR: the noise floor is the mean variance of the quietest
/// 10% (at least one) of the full 16x16 blocks.
pub fn snr_estimate(img: &GrayImage) -> Result<SnrReport> {
    if img.width < SNR_BLOCK || img.height < SNR_BLOCK {
        return Err(Error::invalid(
            "image",
            format!("{}x{} is smaller than one {SNR_BLOCK}x{SNR_BLOCK} block", img.width, img.height),
        ));
    }
    let (bw, bh) = (img.width / SNR_BLOCK, img.height / SNR_BLOCK);
    let mut block_vars: Vec<f64> = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            let px = (0..SNR_BLOCK * SNR_BLOCK)
                .map(move |i| (bx * SNR_BLOCK + i % SNR_BLOCK, by * SNR_BLOCK + i / SNR_BLOCK))
                .map(|(x, y)| img.get(x, y));
            block_vars.push(population_variance(px));
        }
    }
    block_vars.sort_by(f64::total_cmp);
    let used = (block_vars.len() as f64 * 0.10).ceil().max(1.0) as usize;
    let noise_var = block_vars[..used].iter().sum::<f64>() / used as f64;
    let total_var = population_variance(img.pixels.iter().copied());
    if noise_var == 0.0 {
        return Err(Error::Noiseless);
    }
    let signal_var = total_var - noise_var;
    if signal_var <= 0.0 {
        return Err(Error::NoSignal { total_var, noise_var });
    }
    Ok(SnrReport {
        snr_db: 10.0 * (signal_var / noise_var).log10(),
        noise_var,
        signal_var,
        total_var,
        blocks_used: used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanConfig {
    pub epsilon: f64,
    pub min_pts: usize,
}

impl Default for DbscanConfig {
    fn default() -> Self {
        Self {
            epsilon: 10.0,
            min_pts: 100,
        }
    }
}

impl DbscanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", format!("{} must be positive", self.epsilon)));
        }
        if self.min_pts == 0 {
            return Err(Error::invalid("min_pts", "must be at least 1"));
        }
        Ok(())
    }
}

/// Indices within `epsilon` (inclusive, Euclidean) of each point, itself
/// included.
fn neighbourhoods(points: ArrayView2<f64>, epsilon: f64) -> Vec<Vec<usize>> {
    let n = points.nrows();
    let eps2 = epsilon * epsilon;
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        out[i].push(i);
        for j in (i + 1)..n {
            let d2: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 <= eps2 {
                out[i].push(j);
                out[j].push(i);
            }
        }
    }
    out
}

/// Density clustering over the rows of `points`. Returns a cluster id per
/// point (`None` for noise). Clusters are numbered in scan order; a border
/// point reachable from several clusters joins the first to expand.
pub fn dbscan(points: ArrayView2<f64>, cfg: &DbscanConfig) -> Result<Vec<Option<usize>>> {
    cfg.validate()?;
    let n = points.nrows();
    let hoods = neighbourhoods(points, cfg.epsilon);
    let core: Vec<bool> = hoods.iter().map(|h| h.len() >= cfg.min_pts).collect();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0usize;
    for start in 0..n {
        if labels[start].is_some() || !core[start] {
            continue;
        }
        let id = next;
        next += 1;
        labels[start] = Some(id);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &hoods[p] {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierFlag {
    Majority,
    Outlier,
}

/// Runs DBSCAN separately on each local hour's records. The largest
/// cluster of an hour (lowest id on ties) is the majority; everything else
/// in that hour is an outlier.
pub fn hourly_outlier_scan(dataset: &Dataset, cfg: &DbscanConfig) -> Result<Vec<OutlierFlag>> {
    cfg.validate()?;
    let features = feature_matrix(dataset);
    let mut flags = vec![OutlierFlag::Outlier; dataset.len()];
    for hour in 0..24u16 {
        let members: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.records()[i].time.hour() == hour)
            .collect();
        if members.is_empty() {
            continue;
        }
        let pts = features.select(ndarray::Axis(0), &members);
        let labels = dbscan(pts.view(), cfg)?;
        let clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; clusters];
        for l in labels.iter().flatten() {
            sizes[*l] += 1;
        }
        // max_by_key keeps the last maximum; scan reversed to prefer lower ids
        let majority = (0..clusters).rev().max_by_key(|&c| sizes[c]);
        for (&i, l) in members.iter().zip(&labels) {
            if l.is_some() && *l == majority {
                flags[i] = OutlierFlag::Majority;
            }
        }
        log::debug!("hour {hour}: {} records, {clusters} clusters", members.len());
    }
    Ok(flags)
}

/// Train:test proportions such as 9:1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatio {
    pub train: u32,
    pub test: u32,
}

impl SplitRatio {
    pub fn test_fraction(&self) -> f64 {
        self.test as f64 / (self.train + self.test) as f64
    }
}

impl std::str::FromStr for SplitRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("ratio", format!("{s:?} is not TRAIN:TEST with positive integers"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let train: u32 = a.trim().parse().map_err(|_| bad())?;
        let test: u32 = b.trim().parse().map_err(|_| bad())?;
        if train == 0 || test == 0 {
            return Err(bad());
        }
        Ok(Self { train, test })
    }
}

/// Per-class test counts: floors of the ideal shares, with the remaining
/// samples of the overall target given to the largest remainders (lower
/// class first on ties).
pub fn test_allocation(class_sizes: &[usize], ratio: SplitRatio) -> Vec<usize> {
    let f = ratio.test_fraction();
    let ideal: Vec<f64> = class_sizes.iter().map(|&n| n as f64 * f).collect();
    let mut alloc: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let total: usize = class_sizes.iter().sum();
    let target = (total as f64 * f).round() as usize;
    let mut spare = target.saturating_sub(alloc.iter().sum());
    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())).then(a.cmp(&b)));
    for c in order {
        if spare == 0 {
            break;
        }
        if alloc[c] < class_sizes[c] && ideal[c] > alloc[c] as f64 {
            alloc[c] += 1;
            spare -= 1;
        }
    }
    alloc
}

/// Index sets (each in input order) of a seeded stratified split.
pub fn stratified_split_indices(
    dataset: &Dataset,
    ratio: SplitRatio,
    seed: u64,
    space: &TimeLabelSpace,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels = space.labels(dataset)?;
    let mut by_class = vec![Vec::new(); space.num_classes()];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let alloc = test_allocation(&sizes, ratio);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; dataset.len()];
    for (members, &k) in by_class.iter_mut().zip(&alloc) {
        members.shuffle(&mut rng);
        for &i in &members[..k] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..dataset.len()).partition(|&i| is_test[i]);
    Ok((train, test))
}

pub fn stratified_split(
    dataset: &Dataset,
    ratio: SplitRatio,
    seed: u64,
    space: &TimeLabelSpace,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_indices(dataset, ratio, seed, space)?;
    Ok((dataset.select(&train), dataset.select(&test)))
}

/// Shifts a UTC clock time by `round(lon / 15)` hours. A stand-in for real
/// timezone data.
pub fn utc_to_local_approx(utc: ClockTime, lon: f64) -> Result<ClockTime> {
    if !(lon.is_finite() && (-180.0..=180.0).contains(&lon)) {
        return Err(Error::invalid("lon", format!("{lon} is outside [-180, 180]")));
    }
    let offset = (lon / 15.0).round() as i64;
    Ok(ClockTime::wrapping(utc.minute_of_day() as i64 + 60 * offset))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HourBrightness {
    pub hour: u16,
    pub count: usize,
    /// `None` when the hour has no records with brightness.
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub std: Option<f64>,
}

pub fn brightness_by_hour(dataset: &Dataset) -> Vec<HourBrightness> {
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); 24];
    for r in dataset.records() {
        if let Some(b) = r.brightness {
            groups[r.time.hour() as usize].push(b);
        }
    }
    groups
        .iter()
        .enumerate()
        .map(|(h, g)| {
            let (mean, std) = if g.is_empty() {
                (None, None)
            } else {
                let m = g.iter().sum::<f64>() / g.len() as f64;
                (Some(m), Some(population_variance(g.iter().copied()).sqrt()))
            };
            HourBrightness {
                hour: h as u16,
                count: g.len(),
                mean,
                std,
            }
        })
        .collect()
}

/// Rows as an `N x D` matrix, for callers holding plain vectors.
pub fn points_matrix(points: &[Vec<f64>]) -> Result<Array2<f64>> {
    let d = points.first().map_or(0, Vec::len);
    if let Some(i) = points.iter().position(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            context: "point dimension",
            expected: d,
            actual: points[i].len(),
        });
    }
    Ok(Array2::from_shape_vec((points.len(), d), points.concat()).expect("uniform rows"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::{parse_clock, FeatureRecord};
    use ndarray::array;

    fn t(s: &str) -> ClockTime {
        parse_clock(s).unwrap()
    }

    #[test]
    fn brightness_examples() {
        let c = GrayImage::from_fn(8, 8, |_, _| 128.0).unwrap();
        assert_eq!(mean_brightness(&c), 128.0);
        let half = GrayImage::from_fn(8, 8, |x, _| if x < 4 { 0.0 } else { 255.0 }).unwrap();
        assert_eq!(mean_brightness(&half), 127.5);
        assert!(GrayImage::new(2, 2, vec![0.0, 1.0, 2.0, 300.0]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn pgm_round_trip_and_errors() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 40 + y) as f64).unwrap();
        let bytes = img.to_pgm();
        assert_eq!(GrayImage::from_pgm(&bytes).unwrap(), img);
        let commented = [b"P5\n# note\n5 3\n255\n".as_slice(), &bytes[bytes.len() - 15..]].concat();
        assert_eq!(GrayImage::from_pgm(&commented).unwrap(), img);
        assert!(GrayImage::from_pgm(&bytes[..bytes.len() - 1]).is_err());
        assert!(GrayImage::from_pgm(b"P2\n1 1\n255\n\x00").is_err());
        assert!(GrayImage::from_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn night_flag_examples() {
        let w = NightWindow::default();
        assert_eq!(night_brightness_flag(t("23:00"), 128.0, Some(40.0), &w), NightFlag::Review);
        assert_eq!(night_brightness_flag(t("23:00"), 128.0, Some(80.0), &w), NightFlag::Keep);
        assert_eq!(night_brightness_flag(t("23:00"), 128.0, Some(-75.0), &w), NightFlag::Keep);
        assert_eq!(night_brightness_flag(t("12:00"), 200.0, Some(40.0), &w), NightFlag::Keep);
        assert_eq!(night_brightness_flag(t("03:59"), 100.0, None, &w), NightFlag::Review);
        assert_eq!(night_brightness_flag(t("04:00"), 250.0, None, &w), NightFlag::Keep);
        assert_eq!(night_brightness_flag(t("01:00"), 99.9, Some(0.0), &w), NightFlag::Keep);
    }

    #[test]
    fn constant_image_is_noiseless() {
        let img = GrayImage::from_fn(64, 64, |_, _| 77.0).unwrap();
        assert!(matches!(snr_estimate(&img), Err(Error::Noiseless)));
        assert!(snr_estimate(&GrayImage::from_fn(15, 40, |_, _| 1.0).unwrap()).is_err());
    }

    #[test]
    fn snr_parts_add_up_and_threshold_applies() {
        // checkerboard of quiet and busy blocks: noise floor from quiet ones
        let img = GrayImage::from_fn(64, 64, |x, y| {
            let busy = (x / 16 + y / 16) % 2 == 0;
            let base = 40.0 + (x + y) as f64;
            if busy {
                base + if (x + y) % 2 == 0 { 10.0 } else { -10.0 }
            } else {
                base
            }
        })
        .unwrap();
        let r = snr_estimate(&img).unwrap();
        assert_eq!(r.signal_var, r.total_var - r.noise_var);
        assert_eq!(r.blocks_used, 2);
        assert_eq!(r.discard(), r.snr_db <= 15.0);
        let hi = SnrReport { snr_db: 15.0, ..r };
        assert!(hi.discard());
        let ok = SnrReport { snr_db: 15.01, ..r };
        assert!(!ok.discard());
    }

    #[test]
    fn dbscan_two_blobs() {
        let mut pts = Vec::new();
        for i in 0..12 {
            pts.push(vec![(i % 4) as f64 * 0.1, (i / 4) as f64 * 0.1]);
        }
        for i in 0..12 {
            pts.push(vec![100.0 + (i % 4) as f64 * 0.1, (i / 4) as f64 * 0.1]);
        }
        let m = points_matrix(&pts).unwrap();
        let labels = dbscan(m.view(), &DbscanConfig { epsilon: 1.0, min_pts: 10 }).unwrap();
        assert!(labels[..12].iter().all(|l| *l == Some(0)));
        assert!(labels[12..].iter().all(|l| *l == Some(1)));
    }

    #[test]
    fn dbscan_sparse_is_all_noise() {
        let m = Array2::from_shape_fn((10, 2), |(i, j)| (i * 10 + j) as f64);
        let labels = dbscan(m.view(), &DbscanConfig { epsilon: 1.0, min_pts: 2 }).unwrap();
        assert!(labels.iter().all(Option::is_none));
        // min_pts 1: every point is its own core
        let own = dbscan(m.view(), &DbscanConfig { epsilon: 1.0, min_pts: 1 }).unwrap();
        assert_eq!(own, (0..10).map(Some).collect::<Vec<_>>());
        assert!(dbscan(m.view(), &DbscanConfig { epsilon: 0.0, min_pts: 1 }).is_err());
    }

    #[test]
    fn dbscan_inclusive_radius_counts_self() {
        let m = array![[0.0, 0.0], [1.0, 0.0]];
        let labels = dbscan(m.view(), &DbscanConfig { epsilon: 1.0, min_pts: 2 }).unwrap();
        assert_eq!(labels, vec![Some(0), Some(0)]);
    }

    #[test]
    fn hourly_scan_flags_distant_points() {
        let mut recs = Vec::new();
        for i in 0..20 {
            recs.push(FeatureRecord::new(format!("d{i}"), vec![(i % 5) as f64 * 0.01, 0.0], t("10:15")));
        }
        for (i, x) in [50.0, 80.0, -60.0].iter().enumerate() {
            recs.push(FeatureRecord::new(format!("o{i}"), vec![*x, 0.0], t("10:40")));
        }
        recs.push(FeatureRecord::new("lonely", vec![0.0, 0.0], t("18:00")));
        let d = Dataset::new(2, recs).unwrap();
        let flags = hourly_outlier_scan(&d, &DbscanConfig { epsilon: 1.0, min_pts: 5 }).unwrap();
        let outliers: Vec<&str> = d
            .records()
            .iter()
            .zip(&flags)
            .filter(|(_, f)| **f == OutlierFlag::Outlier)
            .map(|(r, _)| r.id.as_str())
            .collect();
        assert_eq!(outliers, vec!["o0", "o1", "o2", "lonely"]);
    }

    #[test]
    fn split_examples() {
        assert_eq!(test_allocation(&[20], SplitRatio { train: 9, test: 1 }), vec![2]);
        let recs: Vec<_> = (0..20)
            .map(|i| FeatureRecord::new(format!("r{i}"), vec![i as f64], t("05:10")))
            .collect();
        let d = Dataset::new(1, recs).unwrap();
        let space = TimeLabelSpace::new(24).unwrap();
        let (tr, te) = stratified_split_indices(&d, "9:1".parse().unwrap(), 7, &space).unwrap();
        assert_eq!((tr.len(), te.len()), (18, 2));
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        assert_eq!(stratified_split_indices(&d, "9:1".parse().unwrap(), 7, &space).unwrap(), (tr, te));
        assert!("9-1".parse::<SplitRatio>().is_err());
        assert!("0:1".parse::<SplitRatio>().is_err());
    }

    #[test]
    fn utc_examples() {
        assert_eq!(utc_to_local_approx(t("13:37"), 0.0).unwrap(), t("13:37"));
        assert_eq!(utc_to_local_approx(t("12:00"), 150.0).unwrap(), t("22:00"));
        assert_eq!(utc_to_local_approx(t("02:00"), -75.0).unwrap(), t("21:00"));
        assert!(utc_to_local_approx(t("02:00"), 181.0).is_err());
    }

    #[test]
    fn brightness_by_hour_examples() {
        let mut recs = Vec::new();
        for (i, h) in [9u16, 9, 10, 14].iter().enumerate() {
            let mut r = FeatureRecord::new(format!("r{i}"), vec![0.0], ClockTime::from_hm(*h, 5).unwrap());
            r.brightness = Some(200.0);
            recs.push(r);
        }
        recs.push(FeatureRecord::new("dark", vec![0.0], t("09:00")));
        let rows = brightness_by_hour(&Dataset::new(1, recs).unwrap());
        assert_eq!(rows.len(), 24);
        assert_eq!((rows[9].count, rows[9].mean, rows[9].std), (2, Some(200.0), Some(0.0)));
        assert_eq!(rows[14].mean, Some(200.0));
        assert_eq!(rows[3].mean, None);
        assert_eq!(rows[3].count, 0);
    }
}
