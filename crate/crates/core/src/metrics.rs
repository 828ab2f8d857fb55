//! Inference pipelines (class-table classification, nearest-neighbour) and
//! evaluation metrics.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::retrieval::{similarity_order, GalleryIndex};
use crate::time::{ClockTime, Dataset, TimeLabelSpace};

/// A prediction within this many minutes counts as an hour-accuracy hit.
pub const HOUR_HIT_MINUTES: u16 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prediction {
    /// Distinct classes, most similar first.
    pub classes: Vec<usize>,
    /// Midpoint of the top-1 class.
    pub time: ClockTime,
}

impl Prediction {
    pub fn top1(&self) -> usize {
        self.classes[0]
    }
}

/// Class indices sorted by descending score, ties by lower index, cut to `k`.
pub fn rank_scores(scores: ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| similarity_order((a, scores[a]), (b, scores[b])));
    order.truncate(k);
    order
}

fn check_k(k: usize, num_classes: usize) -> Result<()> {
    if k == 0 || k > num_classes {
        return Err(Error::invalid("k", format!("{k} is outside 1..={num_classes}")));
    }
    Ok(())
}

/// Classifier over a fixed table of unit class embeddings.
#[derive(Debug, Clone)]
pub struct Classifier {
    table: Array2<f64>,
    space: TimeLabelSpace,
}

impl Classifier {
    pub fn new(params: &ModelParams, space: &TimeLabelSpace) -> Result<Self> {
        Self::from_table(params.class_embedding_table(), space)
    }

    pub fn from_table(table: Array2<f64>, space: &TimeLabelSpace) -> Result<Self> {
        if table.nrows() != space.num_classes() {
            return Err(Error::DimensionMismatch {
                context: "class table rows",
                expected: space.num_classes(),
                actual: table.nrows(),
            });
        }
        Ok(Self {
            table,
            space: space.clone(),
        })
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    /// Ranks classes for an already adapted embedding.
    pub fn predict_embedding(&self, embedding: ArrayView1<f64>, k: usize) -> Result<Prediction> {
        check_k(k, self.space.num_classes())?;
        if embedding.len() != self.table.ncols() {
            return Err(Error::DimensionMismatch {
                context: "image embedding",
                expected: self.table.ncols(),
                actual: embedding.len(),
            });
        }
        let classes = rank_scores(self.table.dot(&embedding).view(), k);
        Ok(Prediction {
            time: self.space.class_midpoint(classes[0]),
            classes,
        })
    }
}

pub fn classify(params: &ModelParams, features: &[f64], space: &TimeLabelSpace, k: usize) -> Result<Prediction> {
    Classifier::new(params, space)?.predict_embedding(params.image_embed(features)?.view(), k)
}

/// Classifies every record, sharing one class table.
pub fn classify_dataset(params: &ModelParams, dataset: &Dataset, space: &TimeLabelSpace, k: usize) -> Result<Vec<Prediction>> {
    let clf = Classifier::new(params, space)?;
    dataset
        .records()
        .iter()
        .map(|r| clf.predict_embedding(params.image_embed(&r.features)?.view(), k))
        .collect()
}

/// Nearest-neighbour inference for an adapted embedding: neighbours in
/// cosine order, their classes deduplicated in first-seen order.
pub fn knn_predict_embedding(
    gallery: &GalleryIndex,
    embedding: ArrayView1<f64>,
    space: &TimeLabelSpace,
    k: usize,
    exclude_id: Option<&str>,
) -> Result<Prediction> {
    if gallery.is_empty() {
        return Err(Error::Empty("gallery"));
    }
    check_k(k, space.num_classes())?;
    let neighbours = gallery.ranked(embedding, gallery.len(), exclude_id)?;
    let first = neighbours.first().ok_or(Error::Empty("gallery after self-match exclusion"))?;
    let time = space.class_midpoint(space.class_of(first.entry.time));
    let mut seen = vec![false; space.num_classes()];
    let mut classes = Vec::with_capacity(k);
    for h in &neighbours {
        let c = space.label_for(h.entry.time, h.entry.date.as_deref())?;
        if !seen[c] {
            seen[c] = true;
            classes.push(c);
            if classes.len() == k {
                break;
            }
        }
    }
    Ok(Prediction { classes, time })
}

pub fn knn_predict(
    gallery: &GalleryIndex,
    features: &[f64],
    params: &ModelParams,
    space: &TimeLabelSpace,
    k: usize,
) -> Result<Prediction> {
    knn_predict_embedding(gallery, params.image_embed(features)?.view(), space, k, None)
}

fn same_len(context: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            context,
            expected: a,
            actual: b,
        });
    }
    if a == 0 {
        return Err(Error::Empty(context));
    }
    Ok(())
}

pub fn topk_accuracy(preds: &[Prediction], labels: &[usize], k: usize) -> Result<f64> {
    same_len("predictions vs labels", preds.len(), labels.len())?;
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let hits = preds
        .iter()
        .zip(labels)
        .filter(|(p, y)| p.classes.iter().take(k).any(|c| c == *y))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Mean circular difference in minutes.
pub fn time_mae(preds: &[ClockTime], gts: &[ClockTime]) -> Result<f64> {
    same_len("predicted vs true times", preds.len(), gts.len())?;
    let total: u64 = preds.iter().zip(gts).map(|(p, g)| p.circular_diff(*g) as u64).sum();
    Ok(total as f64 / preds.len() as f64)
}

/// Counts indexed `[truth, predicted]`.
pub fn confusion_matrix(pred_classes: &[usize], labels: &[usize], num_classes: usize) -> Result<Array2<u64>> {
    same_len("predictions vs labels", pred_classes.len(), labels.len())?;
    let mut m = Array2::zeros((num_classes, num_classes));
    for (&p, &g) in pred_classes.iter().zip(labels) {
        if p >= num_classes || g >= num_classes {
            return Err(Error::invalid("class", format!("({g}, {p}) outside {num_classes} classes")));
        }
        m[[g, p]] += 1;
    }
    Ok(m)
}

/// Fraction of predictions within 30 minutes (circular) of the truth.
pub fn hour_accuracy(preds: &[ClockTime], gts: &[ClockTime]) -> Result<f64> {
    same_len("predicted vs true times", preds.len(), gts.len())?;
    let hits = preds
        .iter()
        .zip(gts)
        .filter(|(p, g)| p.circular_diff(**g) <= HOUR_HIT_MINUTES)
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Mean distance from each time to its class midpoint: the error floor of
/// reporting class midpoints.
pub fn observational_error(gts: &[ClockTime], space: &TimeLabelSpace) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::Empty("times"));
    }
    let total: u64 = gts
        .iter()
        .map(|&t| t.circular_diff(space.class_midpoint(space.class_of(t))) as u64)
        .sum();
    Ok(total as f64 / gts.len() as f64)
}

/// Softmax over dot products with the rows of `table`.
pub fn affinity_from_table(table: ArrayView2<f64>, external: &[f64]) -> Result<Vec<f64>> {
    if external.len() != table.ncols() {
        return Err(Error::DimensionMismatch {
            context: "external embedding",
            expected: table.ncols(),
            actual: external.len(),
        });
    }
    if external.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("external embedding".into()));
    }
    let logits = table.dot(&ArrayView1::from(external));
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Class probabilities for an embedding produced outside this model
/// (e.g. a text encoder sharing the space).
pub fn class_affinity(params: &ModelParams, external: &[f64]) -> Result<Vec<f64>> {
    affinity_from_table(params.class_embedding_table().view(), external)
}

/// Population variance of each dimension across frames, averaged over
/// dimensions.
pub fn intra_video_variance(frames: ArrayView2<f64>) -> Result<f64> {
    if frames.nrows() == 0 || frames.ncols() == 0 {
        return Err(Error::Empty("frames"));
    }
    Ok(frames.var_axis(Axis(0), 0.0).mean().expect("non-empty"))
}

/// Cosine distance between the adapted embedding and the target class
/// embedding, for steering external generators.
pub fn time_guidance_loss(params: &ModelParams, features: &[f64], target: usize) -> Result<f64> {
    if target >= params.num_classes() {
        return Err(Error::invalid(
            "target class",
            format!("{target} is outside 0..{}", params.num_classes()),
        ));
    }
    let img = params.image_embed(features)?;
    let cos = img.dot(&params.time_embed(target));
    Ok((1.0 - cos).clamp(0.0, 2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub samples: usize,
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
    pub time_mae_minutes: f64,
    pub hour_accuracy: f64,
    /// Rows are ground truth.
    #[serde(skip)]
    pub confusion: Array2<u64>,
}

/// Full report for predictions against a labelled dataset.
pub fn evaluate(preds: &[Prediction], dataset: &Dataset, space: &TimeLabelSpace) -> Result<EvalReport> {
    let labels = space.labels(dataset)?;
    let gts = dataset.times();
    let times: Vec<ClockTime> = preds.iter().map(|p| p.time).collect();
    let top1: Vec<usize> = preds.iter().map(Prediction::top1).collect();
    Ok(EvalReport {
        samples: preds.len(),
        top1: topk_accuracy(preds, &labels, 1)?,
        top3: topk_accuracy(preds, &labels, 3)?,
        top5: topk_accuracy(preds, &labels, 5)?,
        time_mae_minutes: time_mae(&times, &gts)?,
        hour_accuracy: hour_accuracy(&times, &gts)?,
        confusion: confusion_matrix(&top1, &labels, space.num_classes())?,
    })
}

/// `metric,value` rows in a fixed order.
pub fn report_csv(r: &EvalReport) -> String {
    format!(
        "metric,value\nsamples,{}\ntop1,{}\ntop3,{}\ntop5,{}\ntime_mae_minutes,{}\nhour_accuracy,{}\n",
        r.samples, r.top1, r.top3, r.top5, r.time_mae_minutes, r.hour_accuracy
    )
}

/// Header `truth,0,1,...,C-1`; one row per true class.
pub fn confusion_csv(m: &Array2<u64>) -> String {
    let mut s = String::from("truth");
    for p in 0..m.ncols() {
        s.push_str(&format!(",{p}"));
    }
    s.push('\n');
    for (g, row) in m.rows().into_iter().enumerate() {
        s.push_str(&g.to_string());
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};
    use crate::retrieval::GalleryEntry;
    use crate::time::parse_clock;
    use ndarray::{array, Array1};

    fn t(s: &str) -> ClockTime {
        parse_clock(s).unwrap()
    }

    fn pred(classes: Vec<usize>) -> Prediction {
        Prediction {
            classes,
            time: ClockTime::MIDNIGHT,
        }
    }

    #[test]
    fn classify_orthonormal_table() {
        let space = TimeLabelSpace::new(24).unwrap();
        let clf = Classifier::from_table(Array2::eye(24), &space).unwrap();
        let p = clf.predict_embedding(Array2::<f64>::eye(24).row(9), 1).unwrap();
        assert_eq!(p.classes, vec![9]);
        assert_eq!(p.time, t("09:30"));
        let full = clf.predict_embedding(Array2::<f64>::eye(24).row(3), 24).unwrap();
        let mut sorted = full.classes.clone();
        sorted.sort();
        assert_eq!(sorted, (0..24).collect::<Vec<_>>());
        assert!(clf.predict_embedding(Array2::<f64>::eye(24).row(3), 25).is_err());
    }

    #[test]
    fn ties_go_to_lower_class() {
        let space = TimeLabelSpace::new(8).unwrap();
        let clf = Classifier::from_table(Array2::eye(8), &space).unwrap();
        let mut e = Array1::zeros(8);
        e[3] = 0.5f64.sqrt();
        e[7] = 0.5f64.sqrt();
        assert_eq!(clf.predict_embedding(e.view(), 2).unwrap().classes, vec![3, 7]);
    }

    #[test]
    fn knn_single_item_and_dedup() {
        let space = TimeLabelSpace::new(24).unwrap();
        let entry = |tt: &str| GalleryEntry {
            id: tt.into(),
            time: t(tt),
            lat: None,
            lon: None,
            date: None,
        };
        let one = GalleryIndex::from_embeddings(array![[1.0, 0.0]], vec![entry("13:45")]).unwrap();
        for q in [array![1.0, 0.0], array![-1.0, 0.0], array![0.0, 1.0]] {
            let p = knn_predict_embedding(&one, q.view(), &space, 1, None).unwrap();
            assert_eq!(p.classes, vec![13]);
            assert_eq!(p.time, t("13:30"));
        }
        let g = GalleryIndex::from_embeddings(
            array![[1.0, 0.0], [0.9, 0.1], [0.5, 0.5], [0.0, 1.0]],
            vec![entry("02:10"), entry("02:50"), entry("07:00"), entry("02:20")],
        )
        .unwrap();
        let p = knn_predict_embedding(&g, array![1.0, 0.0].view(), &space, 3, None).unwrap();
        assert_eq!(p.classes, vec![2, 7]);
        let empty = GalleryIndex::from_embeddings(Array2::zeros((0, 2)), vec![]).unwrap();
        assert!(knn_predict_embedding(&empty, array![1.0, 0.0].view(), &space, 1, None).is_err());
    }

    #[test]
    fn topk_hand_case() {
        let preds = [pred(vec![0, 1, 2, 3]), pred(vec![1, 2, 3, 0]), pred(vec![2, 1, 0, 3])];
        // truth ranks 1, 4, 2
        let labels = [0, 0, 1];
        assert!((topk_accuracy(&preds, &labels, 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(topk_accuracy(&preds, &labels, 4).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&preds, &[0, 1, 2], 1).unwrap(), 1.0);
    }

    #[test]
    fn mae_examples() {
        let a = [t("01:00"), t("13:07")];
        assert_eq!(time_mae(&a, &a).unwrap(), 0.0);
        assert_eq!(time_mae(&[t("00:30"); 3], &[t("23:30"); 3]).unwrap(), 60.0);
        assert!(time_mae(&[], &[]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let m = confusion_matrix(&[5], &[0], 6).unwrap();
        assert_eq!(m[[0, 5]], 1);
        assert_eq!(m.sum(), 1);
        let perfect = confusion_matrix(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(perfect, array![[1, 0, 0], [0, 1, 0], [0, 0, 2]]);
        assert!(confusion_matrix(&[3], &[0], 3).is_err());
    }

    #[test]
    fn hour_accuracy_boundary() {
        assert_eq!(hour_accuracy(&[t("07:30")], &[t("07:59")]).unwrap(), 1.0);
        assert_eq!(hour_accuracy(&[t("07:30")], &[t("08:00")]).unwrap(), 1.0);
        assert_eq!(hour_accuracy(&[t("07:30")], &[t("08:01")]).unwrap(), 0.0);
        assert_eq!(hour_accuracy(&[t("23:50")], &[t("00:15")]).unwrap(), 1.0);
        let space = TimeLabelSpace::new(24).unwrap();
        let gts: Vec<ClockTime> = (0..1440).map(|m| ClockTime::from_minutes(m).unwrap()).collect();
        let mids: Vec<ClockTime> = gts.iter().map(|&g| space.class_midpoint(space.class_of(g))).collect();
        assert_eq!(hour_accuracy(&mids, &gts).unwrap(), 1.0);
    }

    #[test]
    fn observational_error_examples() {
        let space = TimeLabelSpace::new(24).unwrap();
        let hour: Vec<ClockTime> = (0..60).map(|m| ClockTime::from_minutes(420 + m).unwrap()).collect();
        assert_eq!(observational_error(&hour, &space).unwrap(), 15.0);
        let brute: f64 = (0..60).map(|m: i32| (m - 30).abs() as f64).sum::<f64>() / 60.0;
        assert_eq!(brute, 15.0);
        let mids: Vec<ClockTime> = (0..24).map(|c| space.class_midpoint(c)).collect();
        assert_eq!(observational_error(&mids, &space).unwrap(), 0.0);
    }

    #[test]
    fn affinity_examples() {
        let table = Array2::<f64>::eye(4);
        let p = affinity_from_table(table.view(), &[0.0; 4]).unwrap();
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let p = affinity_from_table(table.view(), &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(rank_scores(Array1::from(p.clone()).view(), 1), vec![2]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn variance_examples() {
        assert_eq!(intra_video_variance(array![[1.0, 2.0], [1.0, 2.0]].view()).unwrap(), 0.0);
        let v = [0.3, -1.2, 2.0];
        let frames = array![[v[0], v[1], v[2]], [-v[0], -v[1], -v[2]]];
        let expect = v.iter().map(|x| x * x).sum::<f64>() / 3.0;
        assert!((intra_video_variance(frames.view()).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn guidance_loss_extremes() {
        let cfg = ModelConfig::new(4, 3, 3).with_hidden(vec![5], vec![]);
        let mut p = init_params(2, &cfg).unwrap();
        // residual + identity weights: the adapted embedding is parallel to the feature
        p.adaptor.layers_mut()[0].weights = Array2::eye(3);
        p.adaptor.layers_mut()[0].bias.fill(0.0);
        let target = p.time_embed(1).to_vec();
        assert!(time_guidance_loss(&p, &target, 1).unwrap() < 1e-12);
        let neg: Vec<f64> = target.iter().map(|v| -v).collect();
        assert!((time_guidance_loss(&p, &neg, 1).unwrap() - 2.0).abs() < 1e-12);
        assert!(time_guidance_loss(&p, &target, 4).is_err());
    }

    #[test]
    fn report_and_csv() {
        let space = TimeLabelSpace::new(4).unwrap();
        let recs = vec![
            crate::time::FeatureRecord::new("a", vec![0.0], t("01:00")),
            crate::time::FeatureRecord::new("b", vec![0.0], t("07:00")),
        ];
        let d = Dataset::new(1, recs).unwrap();
        let preds = [
            Prediction {
                classes: vec![0, 1, 2, 3],
                time: space.class_midpoint(0),
            },
            Prediction {
                classes: vec![0, 1, 2, 3],
                time: space.class_midpoint(0),
            },
        ];
        let r = evaluate(&preds, &d, &space).unwrap();
        assert_eq!(r.top1, 0.5);
        assert_eq!(r.top3, 1.0);
        assert_eq!(r.confusion.sum(), 2);
        assert_eq!(r.time_mae_minutes, (120.0 + 240.0) / 2.0);
        let csv = confusion_csv(&r.confusion);
        assert_eq!(csv.lines().next().unwrap(), "truth,0,1,2,3");
        assert_eq!(csv.lines().nth(2).unwrap(), "1,1,0,0,0");
        assert!(report_csv(&r).starts_with("metric,value\nsamples,2\ntop1,0.5\n"));
    }
}
