//! Exact cosine search over adapted embeddings, Recall@k, error histograms
//! and joint geo-time localization.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{normalize_rows, ModelParams};
use crate::time::{ClockTime, Dataset, FeatureRecord};
use crate::train::feature_matrix;

/// Retrieved items within this many minutes of the query count as positives.
pub const POSITIVE_MINUTES: u16 = 30;
/// L1 degree threshold of the joint localization rule.
pub const GEO_HIT_DEGREES: f64 = 0.01;
pub const TIME_BIN_MINUTES: u16 = 30;
/// 24 bins of 30 minutes; the last also holds a difference of exactly 720.
pub const TIME_BINS: usize = 24;
/// Upper edges of the log-spaced geo bins; a final bin is open-ended.
pub const GEO_BIN_EDGES: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalleryEntry {
    pub id: String,
    pub time: ClockTime,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub date: Option<String>,
}

impl GalleryEntry {
    pub fn from_record(r: &FeatureRecord) -> Self {
        Self {
            id: r.id.clone(),
            time: r.time,
            lat: r.lat,
            lon: r.lon,
            date: r.date.clone(),
        }
    }

    fn geo(&self) -> Option<(f64, f64)> {
        Some((self.lat?, self.lon?))
    }
}

/// Read-only table of unit embeddings and their metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryIndex {
    embeddings: Array2<f64>,
    entries: Vec<GalleryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    /// Insertion index in the gallery.
    pub index: usize,
    pub similarity: f64,
    pub entry: GalleryEntry,
}

/// A query after embedding, with its ground-truth metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub embedding: Array1<f64>,
    pub entry: GalleryEntry,
}

impl GalleryIndex {
    /// Normalizes the rows; zero or non-finite rows are rejected.
    pub fn from_embeddings(embeddings: Array2<f64>, entries: Vec<GalleryEntry>) -> Result<Self> {
        if embeddings.nrows() != entries.len() {
            return Err(Error::DimensionMismatch {
                context: "gallery metadata",
                expected: embeddings.nrows(),
                actual: entries.len(),
            });
        }
        let (unit, norms) = normalize_rows(embeddings);
        if let Some(i) = norms.iter().position(|n| !(n.is_finite() && *n > 0.0)) {
            return Err(Error::invalid(
                "gallery embeddings",
                format!("row {i} has norm {} and cannot be normalized", norms[i]),
            ));
        }
        Ok(Self {
            embeddings: unit,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn embed_dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn embeddings(&self) -> &Array2<f64> {
        &self.embeddings
    }

    pub fn entries(&self) -> &[GalleryEntry] {
        &self.entries
    }

    /// Indices of the whole gallery ranked by descending similarity to
    /// `embedding`, ties by ascending index, skipping `exclude_id`.
    /// Only the first `k` are sorted.
    pub fn ranked(&self, embedding: ArrayView1<f64>, k: usize, exclude_id: Option<&str>) -> Result<Vec<Hit>> {
        if embedding.len() != self.embed_dim() {
            return Err(Error::DimensionMismatch {
                context: "query embedding",
                expected: self.embed_dim(),
                actual: embedding.len(),
            });
        }
        let sims = self.embeddings.dot(&embedding);
        let mut order: Vec<usize> = (0..self.len())
            .filter(|&i| exclude_id.is_none_or(|id| self.entries[i].id != id))
            .collect();
        let cmp = |a: &usize, b: &usize| similarity_order((*a, sims[*a]), (*b, sims[*b]));
        let k = k.min(order.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_unstable_by(cmp);
        Ok(order
            .into_iter()
            .map(|i| Hit {
                index: i,
                similarity: sims[i],
                entry: self.entries[i].clone(),
            })
            .collect())
    }
}

/// Embeds every record of `dataset` with the adaptor.
pub fn build_index(params: &ModelParams, dataset: &Dataset) -> Result<GalleryIndex> {
    if dataset.dim() != params.feature_dim() {
        return Err(Error::DimensionMismatch {
            context: "gallery feature dim",
            expected: params.feature_dim(),
            actual: dataset.dim(),
        });
    }
    let raw = params.adaptor.forward(feature_matrix(dataset).view());
    let entries = dataset.records().iter().map(GalleryEntry::from_record).collect();
    GalleryIndex::from_embeddings(raw, entries)
}

pub fn embed_queries(params: &ModelParams, dataset: &Dataset) -> Result<Vec<Query>> {
    dataset
        .records()
        .iter()
        .map(|r| {
            Ok(Query {
                embedding: params.image_embed(&r.features)?,
                entry: GalleryEntry::from_record(r),
            })
        })
        .collect()
}

/// Top-`k` gallery items for one feature vector.
pub fn query(index: &GalleryIndex, features: &[f64], params: &ModelParams, k: usize) -> Result<Vec<Hit>> {
    index.ranked(params.image_embed(features)?.view(), k, None)
}

/// Whether queries drawn from the gallery's own dataset skip their own id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchOptions {
    pub exclude_self: bool,
}

fn search(index: &GalleryIndex, q: &Query, k: usize, opts: SearchOptions) -> Result<Vec<Hit>> {
    let exclude = opts.exclude_self.then_some(q.entry.id.as_str());
    index.ranked(q.embedding.view(), k, exclude)
}

fn nonempty(queries: &[Query]) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::Empty("queries"));
    }
    Ok(())
}

/// Fraction of queries with at least one top-`k` item within 30 minutes.
pub fn recall_at_k(index: &GalleryIndex, queries: &[Query], k: usize, opts: SearchOptions) -> Result<f64> {
    Ok(recall_curve(index, queries, &[k], opts)?[0].1)
}

/// Recall at several cutoffs from one search per query.
pub fn recall_curve(
    index: &GalleryIndex,
    queries: &[Query],
    ks: &[usize],
    opts: SearchOptions,
) -> Result<Vec<(usize, f64)>> {
    nonempty(queries)?;
    if ks.contains(&0) {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let mut hits = vec![0usize; ks.len()];
    for q in queries {
        let ranked = search(index, q, kmax, opts)?;
        let first = ranked
            .iter()
            .position(|h| h.entry.time.circular_diff(q.entry.time) <= POSITIVE_MINUTES);
        if let Some(rank) = first {
            for (h, &k) in hits.iter_mut().zip(ks) {
                if rank < k {
                    *h += 1;
                }
            }
        }
    }
    let n = queries.len() as f64;
    Ok(ks.iter().zip(hits).map(|(&k, h)| (k, h as f64 / n)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorHistograms {
    /// `TIME_BINS` counts of circular time difference.
    pub time: Vec<u64>,
    /// `GEO_BIN_EDGES.len() + 1` counts of L1 (lat, lon) difference in degrees.
    pub geo: Vec<u64>,
    /// Retrieved pairs left out of `geo` because either side lacks coordinates.
    pub geo_excluded: u64,
}

pub fn time_bin(diff: u16) -> usize {
    (diff / TIME_BIN_MINUTES).min(TIME_BINS as u16 - 1) as usize
}

pub fn geo_bin(l1: f64) -> usize {
    GEO_BIN_EDGES.iter().position(|&e| l1 < e).unwrap_or(GEO_BIN_EDGES.len())
}

fn geo_l1(a: &GalleryEntry, b: &GalleryEntry) -> Option<f64> {
    let (la, oa) = a.geo()?;
    let (lb, ob) = b.geo()?;
    Some((la - lb).abs() + (oa - ob).abs())
}

/// Histograms over the top-`top_n` results of every query.
pub fn error_distributions(
    index: &GalleryIndex,
    queries: &[Query],
    top_n: usize,
    opts: SearchOptions,
) -> Result<ErrorHistograms> {
    let mut out = ErrorHistograms {
        time: vec![0; TIME_BINS],
        geo: vec![0; GEO_BIN_EDGES.len() + 1],
        geo_excluded: 0,
    };
    for q in queries {
        for h in search(index, q, top_n, opts)? {
            out.time[time_bin(h.entry.time.circular_diff(q.entry.time))] += 1;
            match geo_l1(&h.entry, &q.entry) {
                Some(d) => out.geo[geo_bin(d)] += 1,
                None => out.geo_excluded += 1,
            }
        }
    }
    Ok(out)
}

/// Fraction of queries whose top-1 lies within 0.01 degrees (L1) and
/// 30 minutes (circular). Missing coordinates count as a miss.
pub fn joint_geo_time_hit(index: &GalleryIndex, queries: &[Query], opts: SearchOptions) -> Result<f64> {
    nonempty(queries)?;
    let mut hits = 0usize;
    for q in queries {
        if let Some(top) = search(index, q, 1, opts)?.first() {
            let time_ok = top.entry.time.circular_diff(q.entry.time) <= POSITIVE_MINUTES;
            let geo_ok = geo_l1(&top.entry, &q.entry).is_some_and(|d| d <= GEO_HIT_DEGREES);
            if time_ok && geo_ok {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / queries.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub recall_at_k: Vec<(usize, f64)>,
    pub histograms: ErrorHistograms,
    pub joint_hit_rate: f64,
}

pub fn evaluate_retrieval(
    index: &GalleryIndex,
    queries: &[Query],
    ks: &[usize],
    top_n: usize,
    opts: SearchOptions,
) -> Result<RetrievalReport> {
    Ok(RetrievalReport {
        recall_at_k: recall_curve(index, queries, ks, opts)?,
        histograms: error_distributions(index, queries, top_n, opts)?,
        joint_hit_rate: joint_geo_time_hit(index, queries, opts)?,
    })
}

/// `k,recall` rows.
pub fn recall_csv(curve: &[(usize, f64)]) -> String {
    let mut s = String::from("k,recall\n");
    for (k, r) in curve {
        s.push_str(&format!("{k},{r}\n"));
    }
    s
}

/// `bin_start_minutes,bin_end_minutes,count` rows.
pub fn time_histogram_csv(h: &ErrorHistograms) -> String {
    let mut s = String::from("bin_start_minutes,bin_end_minutes,count\n");
    for (i, c) in h.time.iter().enumerate() {
        let lo = i as u16 * TIME_BIN_MINUTES;
        s.push_str(&format!("{lo},{},{c}\n", lo + TIME_BIN_MINUTES));
    }
    s
}

/// `bin_start_degrees,bin_end_degrees,count` rows plus a trailing
/// `excluded` row; the open last bin has an empty end.
pub fn geo_histogram_csv(h: &ErrorHistograms) -> String {
    let mut s = String::from("bin_start_degrees,bin_end_degrees,count\n");
    let mut lo = 0.0;
    for (i, c) in h.geo.iter().enumerate() {
        match GEO_BIN_EDGES.get(i) {
            Some(hi) => {
                s.push_str(&format!("{lo},{hi},{c}\n"));
                lo = *hi;
            }
            None => s.push_str(&format!("{lo},,{c}\n")),
        }
    }
    s.push_str(&format!("excluded,,{}\n", h.geo_excluded));
    s
}

/// Cosine order used by every search: descending similarity, then index.
pub fn similarity_order(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}
