use std::fmt::Write as _;
use std::path::Path;

use log::info;
use serde::Deserialize;
use ticl_core::baselines::{fit_cyclic, fit_scalar, Regressor};
use ticl_core::curation::{
    brightness_by_hour, hourly_outlier_scan, night_review, snr_estimate, stratified_split, utc_to_local_approx,
    NightFlag, OutlierFlag,
};
use ticl_core::io::{decode_features, load_model, read_bytes, read_dataset, save_model, write_atomic, write_dataset};
use ticl_core::metrics::{
    class_affinity, classify_dataset, confusion_csv, evaluate, hour_accuracy, knn_predict, report_csv, time_guidance_loss,
    time_mae,
};
use ticl_core::retrieval::{build_index, embed_queries, evaluate_retrieval, geo_histogram_csv, recall_csv, time_histogram_csv};
use ticl_core::synth::{generate, suite};
use ticl_core::train::train;
use ticl_core::{
    Activation, ClockTime, Dataset, DbscanConfig, Error, GrayImage, LossMode, ModelConfig, ModelParams, NightWindow,
    Prediction, Result, SearchOptions, SplitRatio, TimeInputKind, TimeLabelSpace, TrainConfig,
};

use crate::{
    BaselineCmd, BaselineKind, Command, CurateCmd, DataArgs, EvalCmd, EvalMode, GuidanceCmd, AffinityCmd, RetrieveCmd,
    SpaceArgs, Suite, SynthCmd, TimeInputArg, TrainCmd,
};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(c) => synth(c),
        Command::Train(c) => train_cmd(c),
        Command::Eval(c) => eval(c),
        Command::Baseline(c) => baseline(c),
        Command::Retrieve(c) => retrieve(c),
        Command::Curate(c) => curate(c),
        Command::Guidance(c) => guidance(c),
        Command::Affinity(c) => affinity(c),
        Command::Validate(d) => {
            let data = load(&d)?;
            println!("records {} dim {}", data.len(), data.dim());
            Ok(())
        }
    }
}

fn flag(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}

fn load(d: &DataArgs) -> Result<Dataset> {
    let data = read_dataset(&d.features, &d.meta)?;
    info!("loaded {} records of dim {} from {}", data.len(), data.dim(), d.features.display());
    Ok(data)
}

/// Writes to `path` atomically, or to stdout without one.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn space_for(args: &SpaceArgs, default_classes: usize) -> Result<TimeLabelSpace> {
    let space = TimeLabelSpace::new(args.classes.unwrap_or(default_classes))
        .map_err(|e| flag("--classes", e.to_string()))?;
    if args.month_factor {
        space.with_factor("month", 12)
    } else {
        Ok(space)
    }
}

fn synth(c: SynthCmd) -> Result<()> {
    let name = match c.suite {
        Suite::Separable => "separable",
        Suite::Confuser => "confuser",
        Suite::Skewed => "skewed",
    };
    let mut spec = suite(name).expect("suite names are fixed");
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if let Some(n) = c.samples_per_class {
        spec.samples_per_class = n;
    }
    if let Some(s) = c.noise {
        spec.noise_sigma = s;
    }
    if let Some(f) = c.confuser {
        spec.confuser_strength = f;
    }
    if let Some(d) = c.dim {
        spec.dim = d;
    }
    let data = generate(&spec)?;
    write_dataset(&data, &c.out.features, &c.out.meta)?;
    info!("wrote {} records", data.len());
    Ok(())
}

/// `--config` file contents. Everything is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    classes: Option<usize>,
    month_factor: bool,
    model: ModelSection,
    train: TrainConfig,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ModelSection {
    embed_dim: usize,
    time_hidden: Vec<usize>,
    adaptor_hidden: Vec<usize>,
    activation: Activation,
    residual_adaptor: bool,
    zero_init_adaptor_output: bool,
    time_input: TimeInputKind,
}

impl Default for ModelSection {
    fn default() -> Self {
        let base = ModelConfig::new(1, 1, ticl_core::model::DEFAULT_EMBED_DIM);
        Self {
            embed_dim: base.embed_dim,
            time_hidden: base.time_hidden,
            adaptor_hidden: base.adaptor_hidden,
            activation: base.activation,
            residual_adaptor: base.residual_adaptor,
            zero_init_adaptor_output: base.zero_init_adaptor_output,
            time_input: base.time_input,
        }
    }
}

fn read_config(path: &Path) -> Result<RunConfig> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: format!("line {} column {}: {e}", e.line(), e.column()),
    })
}

fn train_cmd(c: TrainCmd) -> Result<()> {
    let mut cfg = match &c.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    let m = &mut cfg.model;
    if let Some(k) = c.embed_dim {
        m.embed_dim = k;
    }
    if let Some(h) = c.time_hidden {
        m.time_hidden = h;
    }
    if let Some(h) = c.adaptor_hidden {
        m.adaptor_hidden = h;
    }
    if let Some(a) = &c.activation {
        m.activation = a.parse().map_err(|_| flag("--activation", format!("{a:?} is not relu or gelu-approx")))?;
    }
    if let Some(t) = c.time_input {
        m.time_input = match t {
            TimeInputArg::Onehot => TimeInputKind::OneHot,
            TimeInputArg::Rff => TimeInputKind::Rff {
                dim: c.time_input_dim,
                sigma: c.rff_sigma,
            },
            TimeInputArg::Time2vec => TimeInputKind::Time2Vec { dim: c.time_input_dim },
        };
    }
    let t = &mut cfg.train;
    if let Some(v) = c.epochs {
        t.epochs = v;
    }
    if let Some(v) = c.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = c.lr {
        t.lr0 = v;
    }
    if let Some(v) = c.weight_decay {
        t.weight_decay = v;
    }
    if let Some(v) = c.halve_every {
        t.halve_every = v;
    }
    if let Some(v) = &c.loss_mode {
        t.loss_mode = v.parse::<LossMode>().map_err(|_| flag("--loss-mode", format!("{v:?} is not class or batch")))?;
    }
    if let Some(v) = c.seed {
        t.seed = v;
    }
    let space_args = SpaceArgs {
        classes: c.space.classes.or(cfg.classes),
        month_factor: c.space.month_factor || cfg.month_factor,
    };
    let space = space_for(&space_args, 24)?;

    let data = load(&c.data)?;
    let m = cfg.model;
    let model_config = ModelConfig {
        num_classes: space.num_classes(),
        feature_dim: data.dim(),
        embed_dim: m.embed_dim,
        time_hidden: m.time_hidden,
        adaptor_hidden: m.adaptor_hidden,
        activation: m.activation,
        residual_adaptor: m.residual_adaptor,
        zero_init_adaptor_output: m.zero_init_adaptor_output,
        time_input: m.time_input,
    };
    let out = train(&data, &space, &model_config, &cfg.train)?;
    save_model(&c.model, &out.params, cfg.train.loss_mode)?;
    if let Some(p) = &c.loss_csv {
        let mut s = String::from("epoch,lr,mean_loss\n");
        for e in &out.trace {
            writeln!(s, "{},{},{}", e.epoch, e.lr, e.mean_loss).unwrap();
        }
        write_atomic(p, s.as_bytes())?;
    }
    Ok(())
}

fn load_params(path: &Path) -> Result<ModelParams> {
    Ok(load_model(path)?.0)
}

/// Label space for classifying with `params`: `--classes` defaults to what
/// the model was trained with.
fn model_space(args: &SpaceArgs, params: &ModelParams) -> Result<TimeLabelSpace> {
    let c = params.num_classes();
    let default = if args.month_factor { c / 12 } else { c };
    let space = space_for(args, default)?;
    if space.num_classes() != c {
        return Err(flag(
            "--classes",
            format!("label space has {} classes but the model has {c}", space.num_classes()),
        ));
    }
    Ok(space)
}

fn eval(c: EvalCmd) -> Result<()> {
    let params = load_params(&c.model)?;
    let data = load(&c.data)?;
    let (space, preds) = match c.mode {
        EvalMode::Classify => {
            let space = model_space(&c.space, &params)?;
            let k = c.k.min(space.num_classes());
            (space.clone(), classify_dataset(&params, &data, &space, k)?)
        }
        EvalMode::Knn => {
            let (Some(gf), Some(gm)) = (&c.gallery.gallery_features, &c.gallery.gallery_meta) else {
                return Err(flag("--gallery-features", "knn mode needs --gallery-features and --gallery-meta"));
            };
            let space = space_for(&c.space, 24)?;
            let gallery = read_dataset(gf, gm)?;
            let index = build_index(&params, &gallery)?;
            let k = c.k.min(space.num_classes());
            let preds = data
                .records()
                .iter()
                .map(|r| knn_predict(&index, &r.features, &params, &space, k))
                .collect::<Result<Vec<_>>>()?;
            (space, preds)
        }
    };
    let report = evaluate(&preds, &data, &space)?;
    info!("top-1 {:.4} time MAE {:.2} min", report.top1, report.time_mae_minutes);
    emit(c.report.as_deref(), &report_csv(&report))?;
    if let Some(p) = &c.confusion {
        write_atomic(p, confusion_csv(&report.confusion).as_bytes())?;
    }
    if let Some(p) = &c.predictions {
        write_atomic(p, predictions_csv(&data, &preds, &space)?.as_bytes())?;
    }
    Ok(())
}

fn predictions_csv(data: &Dataset, preds: &[Prediction], space: &TimeLabelSpace) -> Result<String> {
    let mut s = String::from("id,time,true_class,pred_time,pred_classes\n");
    for (r, p) in data.records().iter().zip(preds) {
        let classes: Vec<String> = p.classes.iter().map(usize::to_string).collect();
        writeln!(s, "{},{},{},{},{}", r.id, r.time, space.label_of(r)?, p.time, classes.join(" ")).unwrap();
    }
    Ok(s)
}

fn baseline(c: BaselineCmd) -> Result<()> {
    let train_set = read_dataset(&c.train_features, &c.train_meta)?;
    let test_set = read_dataset(&c.test_features, &c.test_meta)?;
    let model = match c.kind {
        BaselineKind::Scalar => Regressor::Scalar(fit_scalar(&train_set)?),
        BaselineKind::Cyclic => Regressor::Cyclic(fit_cyclic(&train_set)?),
    };
    let preds = test_set
        .records()
        .iter()
        .map(|r| model.predict(&r.features))
        .collect::<Result<Vec<ClockTime>>>()?;
    let gts = test_set.times();
    let text = format!(
        "metric,value\nsamples,{}\ntime_mae_minutes,{}\nhour_accuracy,{}\n",
        preds.len(),
        time_mae(&preds, &gts)?,
        hour_accuracy(&preds, &gts)?
    );
    emit(c.report.as_deref(), &text)
}

fn retrieve(c: RetrieveCmd) -> Result<()> {
    if c.ks.is_empty() || c.ks.contains(&0) {
        return Err(flag("--ks", "every cutoff must be at least 1"));
    }
    if c.top_n == 0 {
        return Err(flag("--top-n", "must be at least 1"));
    }
    let params = load_params(&c.model)?;
    let gallery = read_dataset(&c.gallery_features, &c.gallery_meta)?;
    let queries = read_dataset(&c.query_features, &c.query_meta)?;
    let index = build_index(&params, &gallery)?;
    let q = embed_queries(&params, &queries)?;
    let opts = SearchOptions {
        exclude_self: c.exclude_self,
    };
    let report = evaluate_retrieval(&index, &q, &c.ks, c.top_n, opts)?;
    emit(c.recall.as_deref(), &recall_csv(&report.recall_at_k))?;
    if let Some(p) = &c.time_hist {
        write_atomic(p, time_histogram_csv(&report.histograms).as_bytes())?;
    }
    if let Some(p) = &c.geo_hist {
        write_atomic(p, geo_histogram_csv(&report.histograms).as_bytes())?;
    }
    println!("joint_geo_time_hit,{}", report.joint_hit_rate);
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn keep_subset(data: &Dataset, keep: impl Fn(usize) -> bool, features: &Option<std::path::PathBuf>, meta: &Option<std::path::PathBuf>) -> Result<()> {
    if let (Some(f), Some(m)) = (features, meta) {
        let idx: Vec<usize> = (0..data.len()).filter(|&i| keep(i)).collect();
        write_dataset(&data.select(&idx), f, m)?;
        info!("kept {} of {} records", idx.len(), data.len());
    }
    Ok(())
}

fn curate(c: CurateCmd) -> Result<()> {
    match c {
        CurateCmd::Snr { images, out } => {
            let mut s = String::from("path,status,snr_db,noise_var,signal_var,total_var,blocks_used,discard\n");
            for path in &images {
                let img = GrayImage::from_pgm(&read_bytes(path)?).map_err(|e| Error::Format {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                let p = path.display();
                match snr_estimate(&img) {
                    Ok(r) => writeln!(
                        s,
                        "{p},ok,{},{},{},{},{},{}",
                        r.snr_db,
                        r.noise_var,
                        r.signal_var,
                        r.total_var,
                        r.blocks_used,
                        r.discard()
                    ),
                    Err(Error::Noiseless) => writeln!(s, "{p},noiseless,,,,,,"),
                    Err(Error::NoSignal { total_var, noise_var }) => {
                        writeln!(s, "{p},no-signal,,{noise_var},,{total_var},,true")
                    }
                    Err(e) => return Err(e),
                }
                .unwrap();
            }
            emit(out.as_deref(), &s)
        }
        CurateCmd::Night {
            data,
            hours,
            out,
            keep_features,
            keep_meta,
        } => {
            let window = match hours {
                Some(h) => {
                    if let Some(bad) = h.iter().find(|&&x| x > 23) {
                        return Err(flag("--hours", format!("{bad} is not an hour in 0..=23")));
                    }
                    NightWindow { hours: h }
                }
                None => NightWindow::default(),
            };
            let data = load(&data)?;
            let flags = night_review(&data, &window);
            let mut s = String::from("id,time,brightness,lat,flag\n");
            for (r, f) in data.records().iter().zip(&flags) {
                let f = match f {
                    Some(NightFlag::Keep) => "keep",
                    Some(NightFlag::Review) => "review",
                    None => "unknown",
                };
                writeln!(s, "{},{},{},{},{f}", r.id, r.time, opt(r.brightness), opt(r.lat)).unwrap();
            }
            emit(out.as_deref(), &s)?;
            keep_subset(&data, |i| flags[i] != Some(NightFlag::Review), &keep_features, &keep_meta)
        }
        CurateCmd::Outliers {
            data,
            epsilon,
            min_pts,
            out,
            keep_features,
            keep_meta,
        } => {
            let cfg = DbscanConfig { epsilon, min_pts };
            cfg.validate().map_err(|e| flag("--epsilon/--min-pts", e.to_string()))?;
            let data = load(&data)?;
            let flags = hourly_outlier_scan(&data, &cfg)?;
            let mut s = String::from("id,hour,flag\n");
            for (r, f) in data.records().iter().zip(&flags) {
                let f = match f {
                    OutlierFlag::Majority => "majority",
                    OutlierFlag::Outlier => "outlier",
                };
                writeln!(s, "{},{},{f}", r.id, r.time.hour()).unwrap();
            }
            emit(out.as_deref(), &s)?;
            keep_subset(&data, |i| flags[i] == OutlierFlag::Majority, &keep_features, &keep_meta)
        }
        CurateCmd::Split {
            data,
            ratio,
            seed,
            space,
            train_features,
            train_meta,
            test_features,
            test_meta,
        } => {
            let ratio: SplitRatio = ratio.parse().map_err(|e: Error| flag("--ratio", e.to_string()))?;
            let space = space_for(&space, 24)?;
            let data = load(&data)?;
            let (train_set, test_set) = stratified_split(&data, ratio, seed, &space)?;
            write_dataset(&train_set, &train_features, &train_meta)?;
            write_dataset(&test_set, &test_features, &test_meta)?;
            info!("split {} into {} train and {} test", data.len(), train_set.len(), test_set.len());
            Ok(())
        }
        CurateCmd::BrightnessByHour { data, out } => {
            let data = load(&data)?;
            let mut s = String::from("hour,count,mean,std\n");
            for h in brightness_by_hour(&data) {
                writeln!(s, "{},{},{},{}", h.hour, h.count, opt(h.mean), opt(h.std)).unwrap();
            }
            emit(out.as_deref(), &s)
        }
        CurateCmd::UtcApprox {
            data,
            out_features,
            out_meta,
        } => {
            let data = load(&data)?;
            let dim = data.dim();
            let records = data
                .into_records()
                .into_iter()
                .enumerate()
                .map(|(i, mut r)| {
                    let lon = r.lon.ok_or_else(|| Error::InvalidArgument {
                        name: "lon",
                        reason: format!("record {} ({:?}) has no longitude", i + 1, r.id),
                    })?;
                    r.time = utc_to_local_approx(r.time, lon)?;
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()?;
            write_dataset(&Dataset::new(dim, records)?, &out_features, &out_meta)
        }
    }
}

fn guidance(c: GuidanceCmd) -> Result<()> {
    let params = load_params(&c.model)?;
    if c.target >= params.num_classes() {
        return Err(flag("--target", format!("{} is outside 0..{}", c.target, params.num_classes())));
    }
    let data = load(&c.data)?;
    let mut s = String::from("id,loss\n");
    for r in data.records() {
        writeln!(s, "{},{}", r.id, time_guidance_loss(&params, &r.features, c.target)?).unwrap();
    }
    emit(c.out.as_deref(), &s)
}

fn affinity(c: AffinityCmd) -> Result<()> {
    let params = load_params(&c.model)?;
    let (dim, rows) = decode_features(&c.embeddings, &read_bytes(&c.embeddings)?)?;
    if dim != params.embed_dim() {
        return Err(flag(
            "--embeddings",
            format!("rows have dim {dim} but the model embeds into {}", params.embed_dim()),
        ));
    }
    let mut s = String::from("row");
    for k in 0..params.num_classes() {
        write!(s, ",p_{k}").unwrap();
    }
    s.push('\n');
    for (i, row) in rows.iter().enumerate() {
        write!(s, "{i}").unwrap();
        for p in class_affinity(&params, row)? {
            write!(s, ",{p}").unwrap();
        }
        s.push('\n');
    }
    emit(c.out.as_deref(), &s)
}
