use std::fs;
use std::path::{Path, PathBuf};

use crowdshield_core::analysis::{
    cohens_kappa, dataset_stats, stance_claim_csv, stance_claim_matrix, transitions_csv,
    TransitionMode,
};
use crowdshield_core::classifier::{train_classifier, ClfCheckpoint};
use crowdshield_core::config::derive_seed;
use crowdshield_core::evaluation::{
    ablation_run, alpha_sweep, early_detection_sweep, early_detection_sweep_retrain, reports_to_csv,
};
use crowdshield_core::fusion::WeightRule;
use crowdshield_core::pipeline::{feature_rows, thread_features};
use crowdshield_core::q_learning::{export_q_table, train_q, QNetCheckpoint};
use crowdshield_core::synth::generate_dataset;
use crowdshield_core::text_encoder::{build_encoder, EncoderKind};
use crowdshield_core::thread_model::{
    load_threads, split_train_dev, validate_thread, write_native,
};
use crowdshield_core::{
    Ablation, Dataset, EvalReport, LinearClassifier, Milestone, ModelError, QNetwork, RunConfig,
    Split, Stance, TextEncoder, Thread, TrainedPipeline, VeracityLabel,
};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::{Command, EncoderArg, GlobalArgs};

const REPORT_FORMAT: &str = "crowdshield-report/1";

struct Ctx {
    cfg: RunConfig,
    parallel: usize,
    qnet: Option<PathBuf>,
    clf: Option<PathBuf>,
}

fn resolve_config(g: &GlobalArgs) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    if let Some(f) = &g.format {
        cfg.dataset.format = f.parse().map_err(CliError::usage)?;
    }
    if let Some(i) = &g.input {
        cfg.dataset.path = Some(i.clone());
    }
    if let Some(c) = &g.claim_sidecar {
        cfg.dataset.claim_sidecar = Some(c.clone());
    }
    if let Some(e) = g.encoder {
        cfg.encoder.kind = match e {
            EncoderArg::Hashing => EncoderKind::Hashing,
            EncoderArg::External => EncoderKind::External,
        };
    }
    if let Some(e) = &g.endpoint {
        cfg.encoder.endpoint = Some(e.clone());
    }
    if g.retrain_per_milestone {
        cfg.retrain_per_milestone = true;
    }
    if g.literal_eq12 {
        cfg.fusion.weight_rule = WeightRule::Literal;
    }
    cfg.resolve_seeds();
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(g: &GlobalArgs, cmd: &Command) -> CliResult<()> {
    let cfg = resolve_config(g)?;
    let ctx = Ctx {
        cfg,
        parallel: g.parallel_conditions.unwrap_or(1) as usize,
        qnet: g.qnet.clone(),
        clf: g.clf.clone(),
    };
    match cmd {
        Command::Ingest => ingest(&ctx),
        Command::Validate => validate(&ctx),
        Command::Stats { chronological } => stats(&ctx, *chronological),
        Command::Synth { n_threads } => synth(&ctx, *n_threads),
        Command::TrainQ => train_q_cmd(&ctx),
        Command::ExportQ => export_q(&ctx),
        Command::Fuse => fuse(&ctx),
        Command::Train => train(&ctx),
        Command::Evaluate => evaluate(&ctx),
        Command::EarlyDetect { milestones } => early_detect(&ctx, milestones.as_deref()),
        Command::Ablate => ablate(&ctx),
        Command::AlphaSweep { alphas } => alpha_sweep_cmd(&ctx, alphas.as_deref()),
        Command::Kappa { a, b } => kappa(&ctx, a, b),
        Command::Pipeline => pipeline(&ctx),
    }
}

fn load_dataset(cfg: &RunConfig) -> CliResult<Dataset> {
    let d = &cfg.dataset;
    if let Some(path) = &d.path {
        let ds = load_threads(path, d.format, d.claim_sidecar.as_deref())?;
        info!("loaded {} threads from {}", ds.len(), path.display());
        return Ok(ds);
    }
    if let Some(s) = &d.synth {
        return Ok(generate_dataset(s)?);
    }
    Err(CliError::usage(
        "no corpus given: pass --input or set dataset.path or dataset.synth in the config",
    ))
}

fn encoder(cfg: &RunConfig) -> CliResult<Box<dyn TextEncoder>> {
    Ok(build_encoder(&cfg.encoder)?)
}

fn write_out(cfg: &RunConfig, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::runtime(e).context(format!("creating {}", cfg.out_dir.display())))?;
    let path = cfg.out_dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::runtime(e).context(format!("writing {}", path.display())))?;
    Ok(path)
}

fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, value: &T) -> CliResult<PathBuf> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    s.push('\n');
    write_out(cfg, name, &s)
}

fn read_checkpoint<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read checkpoint {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("bad checkpoint {}: {e}", path.display())))
}

fn load_qnet(ctx: &Ctx, enc: &dyn TextEncoder) -> CliResult<QNetwork> {
    let path = ctx
        .qnet
        .clone()
        .unwrap_or_else(|| ctx.cfg.out_dir.join("qnet.json"));
    let ck: QNetCheckpoint = read_checkpoint(&path)?;
    let q = QNetwork::from_checkpoint(&ck)
        .map_err(|e| CliError::from(e).context(path.display().to_string()))?;
    if q.state_dim() != enc.dim() + 2 {
        return Err(CliError::data(format!(
            "{}: state dim {} does not match encoder dim {} + 2",
            path.display(),
            q.state_dim(),
            enc.dim()
        )));
    }
    Ok(q)
}

fn load_clf(ctx: &Ctx) -> CliResult<LinearClassifier> {
    let path = ctx
        .clf
        .clone()
        .unwrap_or_else(|| ctx.cfg.out_dir.join("clf.json"));
    let ck: ClfCheckpoint = read_checkpoint(&path)?;
    LinearClassifier::from_checkpoint(&ck)
        .map_err(|e| CliError::from(e).context(path.display().to_string()))
}

fn qnet_checkpoint(cfg: &RunConfig, q: &QNetwork) -> QNetCheckpoint {
    q.to_checkpoint(serde_json::json!({ "encoder": cfg.encoder, "q": cfg.q }))
}

fn split_of(ds: &Dataset, split: Split) -> CliResult<Vec<Thread>> {
    let ts = ds.threads_in(split);
    if ts.is_empty() {
        return Err(CliError::data(format!(
            "corpus has no {} threads",
            split.as_str()
        )));
    }
    Ok(ts)
}

/// The train part of the training split, as used for Q-learning.
fn train_dev(ctx: &Ctx, ds: &Dataset) -> CliResult<(Vec<Thread>, Vec<Thread>)> {
    let pc = ctx.cfg.pipeline_config();
    Ok(split_train_dev(
        &split_of(ds, Split::Train)?,
        pc.dev_fraction,
        pc.split_seed,
    )?)
}

#[derive(Serialize)]
struct ReportFile<'a> {
    format: &'static str,
    seed: u64,
    reports: &'a [EvalReport],
}

fn write_reports(ctx: &Ctx, reports: &[EvalReport]) -> CliResult<()> {
    write_json(
        &ctx.cfg,
        "report.json",
        &ReportFile {
            format: REPORT_FORMAT,
            seed: ctx.cfg.seed,
            reports,
        },
    )?;
    write_out(&ctx.cfg, "report.csv", &reports_to_csv(reports))?;
    for r in reports {
        println!("{:<16} macro-F1 {:.4}", r.condition, r.macro_f1);
    }
    Ok(())
}

/// Runs independent conditions, at most `ctx.parallel` at a time, keeping
/// input order.
fn run_conditions<T, F>(ctx: &Ctx, items: &[T], f: F) -> CliResult<Vec<EvalReport>>
where
    T: Sync,
    F: Fn(&T) -> Result<Vec<EvalReport>, ModelError> + Sync,
{
    let nested: Vec<Vec<EvalReport>> = if ctx.parallel <= 1 || items.len() <= 1 {
        items.iter().map(&f).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.parallel)
            .build()
            .map_err(CliError::runtime)?;
        pool.install(|| items.par_iter().map(&f).collect::<Result<_, _>>())?
    };
    Ok(nested.into_iter().flatten().collect())
}

fn ingest(ctx: &Ctx) -> CliResult<()> {
    let ds = load_dataset(&ctx.cfg)?;
    fs::create_dir_all(&ctx.cfg.out_dir).map_err(CliError::runtime)?;
    let path = ctx.cfg.out_dir.join("threads.jsonl");
    write_native(&ds, &path).map_err(CliError::runtime)?;
    println!("wrote {} threads to {}", ds.len(), path.display());
    Ok(())
}

fn validate(ctx: &Ctx) -> CliResult<()> {
    let ds = load_dataset(&ctx.cfg)?;
    let mut bad = 0;
    for t in &ds.threads {
        for v in validate_thread(t) {
            println!("{}: {v}", t.thread_id);
            bad += 1;
        }
    }
    if bad > 0 {
        return Err(CliError::data(format!("{bad} violations")));
    }
    println!("{} threads valid", ds.len());
    Ok(())
}

fn stats(ctx: &Ctx, chronological: bool) -> CliResult<()> {
    let ds = load_dataset(&ctx.cfg)?;
    let s = dataset_stats(&ds);
    println!(
        "{:<6} {:>7} {:>6} {:>6} {:>8} {:>6} {:>6} {:>8}",
        "split", "threads", "misinf", "non", "support", "deny", "query", "comment"
    );
    let rows = s
        .splits
        .iter()
        .map(|(k, v)| (k.as_str(), v))
        .chain([("total", &s.total)]);
    for (name, v) in rows {
        println!(
            "{:<6} {:>7} {:>6} {:>6} {:>8} {:>6} {:>6} {:>8}",
            name,
            v.threads,
            v.veracity[VeracityLabel::Misinformation.index()],
            v.veracity[VeracityLabel::NonMisinformation.index()],
            v.stances[Stance::Support.index()],
            v.stances[Stance::Deny.index()],
            v.stances[Stance::Query.index()],
            v.stances[Stance::Comment.index()],
        );
    }
    let mode = if chronological {
        TransitionMode::Chronological
    } else {
        TransitionMode::Tree
    };
    write_out(&ctx.cfg, "stats.csv", &s.to_csv())?;
    write_out(&ctx.cfg, "transitions.csv", &transitions_csv(&ds, mode))?;
    write_out(
        &ctx.cfg,
        "stance_claim.csv",
        &stance_claim_csv(&stance_claim_matrix(&ds)),
    )?;
    Ok(())
}

fn synth(ctx: &Ctx, n_threads: Option<usize>) -> CliResult<()> {
    let mut sc = ctx.cfg.dataset.synth.clone().unwrap_or_default();
    sc.seed = derive_seed(ctx.cfg.seed, "synth");
    if let Some(n) = n_threads {
        sc.n_threads = n;
    }
    let ds = generate_dataset(&sc)?;
    fs::create_dir_all(&ctx.cfg.out_dir).map_err(CliError::runtime)?;
    let path = ctx.cfg.out_dir.join("synth.jsonl");
    write_native(&ds, &path).map_err(CliError::runtime)?;
    println!("wrote {} threads to {}", ds.len(), path.display());
    Ok(())
}

fn train_q_cmd(ctx: &Ctx) -> CliResult<()> {
    let ds = load_dataset(&ctx.cfg)?;
    let enc = encoder(&ctx.cfg)?;
    let (tr, _) = train_dev(ctx, &ds)?;
    let (q, log) = train_q(&tr, enc.as_ref(), &ctx.cfg.q)?;
    write_json(&ctx.cfg, "qnet.json", &qnet_checkpoint(&ctx.cfg, &q))?;
    write_out(&ctx.cfg, "trainlog.csv", &log.to_csv())?;
    println!(
        "trained on {} threads over {} episodes",
        tr.len(),
        log.episodes.len()
    );
    Ok(())
}

fn export_q(ctx: &Ctx) -> CliResult<()> {
    let ds = load_dataset(&ctx.cfg)?;
    let enc = encoder(&ctx.cfg)?;
    let q = load_qnet(ctx, enc.as_ref())?;
    let table = export_q_table(&q, &ds.threads, enc.as_ref())?;
    let path = write_json(&ctx.cfg, "qtable.json", &table)?;
    println!("wrote {} rows to {}", table.len(), path.display());
    Ok(())
}

fn fuse(ctx: &Ctx) -> CliResult<()> {
    let ds = load_dataset(&ctx.cfg)?;
    let enc = encoder(&ctx.cfg)?;
    let q = load_qnet(ctx, enc.as_ref())?;
    let rows = feature_rows(&ds.threads, enc.as_ref(), &q, &ctx.cfg.fusion)?;
    let mut out = String::new();
    for r in &rows {
        out.push_str(&serde_json::to_string(r).map_err(CliError::runtime)?);
        out.push('\n');
    }
    let path = write_out(&ctx.cfg, "features.jsonl", &out)?;
    println!("wrote {} vectors to {}", rows.len(), path.display());
    Ok(())
}

fn train(ctx: &Ctx) -> CliResult<()> {
    let ds = load_dataset(&ctx.cfg)?;
    let enc = encoder(&ctx.cfg)?;
    let q = load_qnet(ctx, enc.as_ref())?;
    let (tr, dev) = train_dev(ctx, &ds)?;
    let feats = |ts: &[Thread]| -> CliResult<(Vec<_>, Vec<_>)> {
        let x = ts
            .iter()
            .map(|t| thread_features(t, enc.as_ref(), &q, &ctx.cfg.fusion, Ablation::Full))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((x, ts.iter().map(|t| t.veracity).collect()))
    };
    let (x, y) = feats(&tr)?;
    let (dx, dy) = feats(&dev)?;
    let (clf, history) = train_classifier(&x, &y, &dx, &dy, &ctx.cfg.classifier)?;
    write_json(&ctx.cfg, "clf.json", &clf.to_checkpoint())?;
    write_json(&ctx.cfg, "history.json", &history)?;
    println!(
        "trained {} epochs, kept epoch {:?}",
        history.epochs.len(),
        history.best_epoch
    );
    Ok(())
}

fn saved_pipeline(ctx: &Ctx, enc: &dyn TextEncoder) -> CliResult<TrainedPipeline> {
    let q = load_qnet(ctx, enc)?;
    let clf = load_clf(ctx)?;
    Ok(TrainedPipeline::from_parts(q, clf, ctx.cfg.fusion.clone()))
}

fn evaluate(ctx: &Ctx) -> CliResult<()> {
    let enc = encoder(&ctx.cfg)?;
    let trained = saved_pipeline(ctx, enc.as_ref())?;
    let ds = load_dataset(&ctx.cfg)?;
    let test = split_of(&ds, Split::Test)?;
    let report = trained.evaluate(&test, enc.as_ref(), &Milestone::All.tag())?;
    write_reports(ctx, &[report])
}

fn parse_milestones(raw: Option<&[String]>, cfg: &RunConfig) -> CliResult<Vec<Milestone>> {
    match raw {
        Some(v) => v
            .iter()
            .map(|s| s.parse::<Milestone>().map_err(CliError::usage))
            .collect(),
        None => Ok(cfg.milestones.clone()),
    }
}

fn fit(ctx: &Ctx, ds: &Dataset, enc: &dyn TextEncoder) -> CliResult<TrainedPipeline> {
    Ok(TrainedPipeline::fit(
        &split_of(ds, Split::Train)?,
        enc,
        &ctx.cfg.pipeline_config(),
    )?)
}

fn milestone_reports(
    ctx: &Ctx,
    ds: &Dataset,
    enc: &dyn TextEncoder,
    trained: &TrainedPipeline,
    milestones: &[Milestone],
) -> CliResult<Vec<EvalReport>> {
    if ctx.cfg.retrain_per_milestone {
        let pc = ctx.cfg.pipeline_config();
        run_conditions(ctx, milestones, |&m| {
            early_detection_sweep_retrain(ds, &[m], enc, &pc)
        })
    } else {
        Ok(early_detection_sweep(
            trained,
            &split_of(ds, Split::Test)?,
            milestones,
            enc,
        )?)
    }
}

fn early_detect(ctx: &Ctx, raw: Option<&[String]>) -> CliResult<()> {
    let milestones = parse_milestones(raw, &ctx.cfg)?;
    let ds = load_dataset(&ctx.cfg)?;
    let enc = encoder(&ctx.cfg)?;
    let reports = if ctx.cfg.retrain_per_milestone {
        let pc = ctx.cfg.pipeline_config();
        run_conditions(ctx, &milestones, |&m| {
            early_detection_sweep_retrain(&ds, &[m], enc.as_ref(), &pc)
        })?
    } else {
        let trained = if ctx.qnet.is_some() || ctx.clf.is_some() {
            saved_pipeline(ctx, enc.as_ref())?
        } else {
            fit(ctx, &ds, enc.as_ref())?
        };
        early_detection_sweep(
            &trained,
            &split_of(&ds, Split::Test)?,
            &milestones,
            enc.as_ref(),
        )?
    };
    write_reports(ctx, &reports)
}

fn ablation_reports(
    ctx: &Ctx,
    ds: &Dataset,
    enc: &dyn TextEncoder,
    modes: &[Ablation],
) -> CliResult<Vec<EvalReport>> {
    let pc = ctx.cfg.pipeline_config();
    run_conditions(ctx, modes, |&m| Ok(vec![ablation_run(ds, m, enc, &pc)?]))
}

fn alpha_reports(
    ctx: &Ctx,
    ds: &Dataset,
    enc: &dyn TextEncoder,
    alphas: &[f64],
) -> CliResult<Vec<EvalReport>> {
    let pc = ctx.cfg.pipeline_config();
    run_conditions(ctx, alphas, |&a| alpha_sweep(ds, &[a], enc, &pc))
}

fn ablate(ctx: &Ctx) -> CliResult<()> {
    let ds = load_dataset(&ctx.cfg)?;
    let enc = encoder(&ctx.cfg)?;
    let reports = ablation_reports(ctx, &ds, enc.as_ref(), &Ablation::ALL)?;
    write_reports(ctx, &reports)
}

fn alpha_sweep_cmd(ctx: &Ctx, raw: Option<&[f64]>) -> CliResult<()> {
    let alphas: Vec<f64> = match raw {
        Some(a) => a.to_vec(),
        None if !ctx.cfg.alphas.is_empty() => ctx.cfg.alphas.clone(),
        None => vec![1.0, 2.0, 3.0],
    };
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(CliError::usage(format!("alpha must be >= 0, got {a}")));
    }
    let ds = load_dataset(&ctx.cfg)?;
    let enc = encoder(&ctx.cfg)?;
    let reports = alpha_reports(ctx, &ds, enc.as_ref(), &alphas)?;
    write_reports(ctx, &reports)
}

fn read_labels(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn kappa(ctx: &Ctx, a: &Path, b: &Path) -> CliResult<()> {
    let la = read_labels(a)?;
    let lb = read_labels(b)?;
    if la.is_empty() || la.len() != lb.len() {
        return Err(CliError::data(format!(
            "label files must be nonempty and equally long ({} vs {})",
            la.len(),
            lb.len()
        )));
    }
    let k = cohens_kappa(&la, &lb)?;
    write_json(
        &ctx.cfg,
        "kappa.json",
        &serde_json::json!({ "kappa": k, "n": la.len() }),
    )?;
    println!("kappa {k:.4} over {} items", la.len());
    Ok(())
}

fn pipeline(ctx: &Ctx) -> CliResult<()> {
    let ds = load_dataset(&ctx.cfg)?;
    let enc = encoder(&ctx.cfg)?;
    let enc = enc.as_ref();
    let trained = fit(ctx, &ds, enc)?;
    write_json(
        &ctx.cfg,
        "qnet.json",
        &qnet_checkpoint(&ctx.cfg, &trained.qnet),
    )?;
    write_json(&ctx.cfg, "clf.json", &trained.clf.to_checkpoint())?;
    write_out(&ctx.cfg, "trainlog.csv", &trained.q_log.to_csv())?;
    write_json(&ctx.cfg, "history.json", &trained.history)?;

    let mut reports = milestone_reports(ctx, &ds, enc, &trained, &ctx.cfg.milestones)?;
    reports.extend(ablation_reports(ctx, &ds, enc, &ctx.cfg.ablations)?);
    reports.extend(alpha_reports(ctx, &ds, enc, &ctx.cfg.alphas)?);
    write_reports(ctx, &reports)
}
