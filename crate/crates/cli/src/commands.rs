use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use chanorder_core::baselines::SoftmaxClasses;
use chanorder_core::checkpoint::{write_atomic, Checkpoint, Model};
use chanorder_core::data::{generate_synthetic, load_corpus, save_corpus, Corpus, SynthSpec};
use chanorder_core::detectors::DEFAULT_TAU;
use chanorder_core::eval::{
    evaluate_bgr, evaluate_ordering, gray_metrics, gray_statistics, neargray_set, plot_statistics, sweep_tau, Direction,
    GrayReport, GrayStatistic,
};
use chanorder_core::train::{train_bgr, train_orderer, train_shallow, train_softmax, EpochLog, TrainConfig};
use chanorder_core::Exec;

use crate::manifest::RunManifest;
use crate::{usage, Command, Ctx, EvalArgs, KindArg, SplitArg, SweepArgs, SynthArgs, Task, TrainArgs};

/// Entropy threshold for the softmax baseline: near-gray iff the entropy
/// of its six-way output exceeds this.
pub const ENTROPY_TAU: f64 = 1.79;

pub fn default_tau(direction: Direction) -> f64 {
    match direction {
        Direction::Below => DEFAULT_TAU,
        Direction::Above => ENTROPY_TAU,
    }
}

/// Runs `command`. `resolved` carries the config recorded by an earlier run
/// and replaces config-file reading and flag overrides.
pub fn dispatch(command: Command, ctx: &Ctx, resolved: Option<serde_json::Value>) -> anyhow::Result<()> {
    match &command {
        Command::Synth(a) => synth(&command, a, ctx, resolved),
        Command::Train(a) => train(&command, a, ctx, resolved),
        Command::Eval(a) => eval(&command, a, ctx),
        Command::Fix(a) => crate::fix::fix(&command, a, ctx),
        Command::SweepTau(a) => sweep(&command, a, ctx),
        Command::Rerun { manifest } => {
            let m = RunManifest::load(manifest)?;
            if m.tool_version != env!("CARGO_PKG_VERSION") {
                log::warn!("manifest was written by version {}; results may differ", m.tool_version);
            }
            if m.threads != ctx.threads && !m.sequential {
                log::warn!(
                    "manifest ran with {} threads, this run has {}; outputs are only guaranteed identical for the same count",
                    m.threads,
                    ctx.threads
                );
            }
            let ctx = Ctx {
                exec: if m.sequential { Exec::Sequential } else { ctx.exec },
                ..ctx.clone()
            };
            if matches!(m.command, Command::Rerun { .. }) {
                return Err(usage("a manifest cannot record a rerun"));
            }
            dispatch(m.command, &ctx, m.config)
        }
    }
}

/// Writes the manifest, runs `body`, then records the outcome.
fn with_manifest(
    command: &Command,
    ctx: &Ctx,
    default_path: PathBuf,
    fill: impl FnOnce(&mut RunManifest),
    body: impl FnOnce() -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let path = ctx.manifest.clone().unwrap_or(default_path);
    let mut m = RunManifest::start(command, ctx.threads, ctx.exec == Exec::Sequential);
    fill(&mut m);
    m.write(&path)?;
    let outcome = body();
    if let Err(e) = m.finish(&path, &outcome) {
        log::warn!("could not update {}: {e:#}", path.display());
    }
    log::debug!("manifest: {}", path.display());
    outcome
}

fn read_config_file(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_split(root: &Path, split: SplitArg, exec: Exec) -> anyhow::Result<Corpus> {
    let corpus = load_corpus(root, exec)?;
    let corpus = match split.split() {
        Some(s) => corpus.split(s),
        None => corpus,
    };
    if corpus.is_empty() {
        return Err(usage(format!(
            "{}: no images in the {split:?} split",
            root.display()
        )));
    }
    Ok(corpus)
}

fn synth(command: &Command, a: &SynthArgs, ctx: &Ctx, resolved: Option<serde_json::Value>) -> anyhow::Result<()> {
    let spec = match resolved {
        Some(v) => serde_json::from_value(v).map_err(|e| usage(format!("recorded synth spec: {e}")))?,
        None => {
            let mut spec = match &a.spec {
                Some(p) => SynthSpec::from_toml(&read_config_file(p)?)?,
                None => SynthSpec::default(),
            };
            if let Some(seed) = a.seed {
                spec.seed = seed;
            }
            if let Some(size) = a.size {
                spec.height = size;
                spec.width = size;
            }
            spec.validate()?;
            spec
        }
    };
    let count = a.count as usize;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    with_manifest(
        command,
        ctx,
        a.out.join("manifest.json"),
        |m| {
            m.config = serde_json::to_value(&spec).ok();
            m.seed = Some(spec.seed);
            m.corpus = Some(a.out.clone());
        },
        || {
            let corpus = generate_synthetic(&spec, count, ctx.exec)?;
            save_corpus(&corpus, &a.out)?;
            println!("wrote {count} samples ({} classes) to {}", corpus.vocab.len(), a.out.display());
            Ok(())
        },
    )
}

/// The training config after file values, flag overrides and validation.
fn resolve_train_config(a: &TrainArgs, resolved: Option<serde_json::Value>) -> anyhow::Result<TrainConfig> {
    if let Some(v) = resolved {
        let cfg: TrainConfig = serde_json::from_value(v).map_err(|e| usage(format!("recorded config: {e}")))?;
        cfg.validate()?;
        return Ok(cfg);
    }
    let mut cfg = match &a.config {
        Some(p) => {
            let (cfg, defaulted) = TrainConfig::from_toml(&read_config_file(p)?)?;
            let values = serde_json::to_value(&cfg)?;
            for k in defaulted {
                log::info!("config key `{k}` not set in {}; using default {}", p.display(), values[&k]);
            }
            cfg
        }
        None => {
            log::info!("no config file; using the default (full-scale) settings");
            TrainConfig::default()
        }
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = a.lr {
        cfg.initial_lr = lr;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(command: &Command, a: &TrainArgs, ctx: &Ctx, resolved: Option<serde_json::Value>) -> anyhow::Result<()> {
    let cfg = resolve_train_config(a, resolved)?;
    let kind = a.kind.kind();
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{kind}.ckpt")));
    let log_path = a.log.clone().unwrap_or_else(|| sibling(&out, ".loss.jsonl"));
    with_manifest(
        command,
        ctx,
        sibling(&out, ".manifest.json"),
        |m| {
            m.config = serde_json::to_value(&cfg).ok();
            m.seed = Some(cfg.seed);
            m.checkpoint = Some(out.clone());
            m.corpus = Some(a.corpus.clone());
        },
        || {
            let corpus = load_split(&a.corpus, a.split, ctx.exec)?;
            if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let mut log_file =
                fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
            let mut write_err = None;
            // Each line is flushed as soon as its epoch ends, so a diverged
            // run leaves every completed epoch on disk.
            let on_epoch = |e: &EpochLog| {
                let line = serde_json::to_string(e).expect("log line serializes");
                if let Err(err) = writeln!(log_file, "{line}").and_then(|_| log_file.flush()) {
                    write_err.get_or_insert(err);
                }
            };
            log::info!("training {kind} on {} images", corpus.len());
            let model = match a.kind {
                KindArg::Orderer => Model::Orderer(train_orderer(&corpus, &cfg, ctx.exec, on_epoch)?.0),
                KindArg::Bgr => Model::Bgr(train_bgr(&corpus, &cfg, ctx.exec, on_epoch)?.0),
                KindArg::Softmax6 => {
                    Model::Softmax(train_softmax(&corpus, &cfg, SoftmaxClasses::Six, ctx.exec, on_epoch)?.0)
                }
                KindArg::Softmax2 => {
                    Model::Softmax(train_softmax(&corpus, &cfg, SoftmaxClasses::Two, ctx.exec, on_epoch)?.0)
                }
                KindArg::Shallow => Model::Shallow(train_shallow(&corpus, &cfg, ctx.exec, on_epoch)?.0),
            };
            if let Some(err) = write_err {
                return Err(anyhow::Error::from(err).context(format!("writing {}", log_path.display())));
            }
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Checkpoint::new(model, cfg.seed, cfg.ranking, Some(cfg.clone())).save(&out)?;
            println!("wrote {} ({kind}); loss log {}", out.display(), log_path.display());
            Ok(())
        },
    )
}

fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    Ok(Checkpoint::load(path)?)
}

fn gray_statistic(ck: &Checkpoint) -> anyhow::Result<&dyn GrayStatistic> {
    ck.model.as_gray_statistic().ok_or_else(|| {
        usage(format!(
            "a {} checkpoint has no near-gray statistic; use an orderer or softmax6 checkpoint",
            ck.kind()
        ))
    })
}

#[derive(Serialize)]
struct GrayOutput<'a> {
    report: &'a GrayReport,
    /// `(statistic, is_near_gray)` per evaluated image.
    statistics: &'a [(f64, bool)],
}

fn eval(command: &Command, a: &EvalArgs, ctx: &Ctx) -> anyhow::Result<()> {
    let task = match a.task {
        Task::Order => "order",
        Task::Bgr => "bgr",
        Task::Gray => "gray",
    };
    with_manifest(
        command,
        ctx,
        a.out.join(format!("manifest-{task}.json")),
        |m| {
            m.seed = Some(a.seed);
            m.checkpoint = Some(a.ckpt.clone());
            m.corpus = Some(a.corpus.clone());
        },
        || {
            let ck = load_checkpoint(&a.ckpt)?;
            let name = ck.kind().name();
            // Check compatibility before paying for corpus loading.
            match a.task {
                Task::Order if ck.model.as_layout_predictor().is_none() => {
                    return Err(usage(format!(
                        "a {name} checkpoint cannot predict six-way layouts; use `eval bgr`"
                    )))
                }
                Task::Bgr if ck.model.as_bgr_predictor().is_none() => {
                    return Err(usage(format!("a {name} checkpoint cannot run BGR detection")))
                }
                Task::Gray => {
                    gray_statistic(&ck)?;
                }
                _ => {}
            }
            let corpus = load_split(&a.corpus, a.split, ctx.exec)?;
            match a.task {
                Task::Order => {
                    let report = evaluate_ordering(ck.model.as_layout_predictor().unwrap(), name, &corpus, ctx.exec)?;
                    print!("{}", report.to_table());
                    write_text(&a.out.join("order.txt"), &report.to_table())?;
                    write_text(&a.out.join("order.json"), &report.to_json())?;
                }
                Task::Bgr => {
                    let report = evaluate_bgr(ck.model.as_bgr_predictor().unwrap(), name, &corpus, ctx.exec)?;
                    println!("{}", report.to_line());
                    write_json(&a.out.join("bgr.json"), &report)?;
                }
                Task::Gray => {
                    let stat = gray_statistic(&ck)?;
                    let tau = a.tau.unwrap_or_else(|| default_tau(stat.direction()));
                    let items = neargray_set(&corpus, a.seed, a.patch_probability);
                    let stats = gray_statistics(stat, &corpus, &items, ctx.exec)?;
                    let report = gray_metrics(name, &stats, tau, stat.direction())?;
                    println!("{}", report.to_line());
                    write_json(
                        &a.out.join("gray.json"),
                        &GrayOutput {
                            report: &report,
                            statistics: &stats,
                        },
                    )?;
                    plot_statistics(&stats, tau, &a.out.join("gray.png"))?;
                }
            }
            println!("reports in {}", a.out.display());
            Ok(())
        },
    )
}

fn sweep(command: &Command, a: &SweepArgs, ctx: &Ctx) -> anyhow::Result<()> {
    with_manifest(
        command,
        ctx,
        a.out.join("manifest-sweep.json"),
        |m| {
            m.seed = Some(a.seed);
            m.checkpoint = Some(a.ckpt.clone());
            m.corpus = Some(a.corpus.clone());
        },
        || {
            let ck = load_checkpoint(&a.ckpt)?;
            let stat = gray_statistic(&ck)?;
            let corpus = load_split(&a.corpus, a.split, ctx.exec)?;
            let items = neargray_set(&corpus, a.seed, a.patch_probability);
            let stats = gray_statistics(stat, &corpus, &items, ctx.exec)?;
            let sweep = sweep_tau(&stats, stat.direction())?;
            let report = gray_metrics(ck.kind().name(), &stats, sweep.tau, stat.direction())?;
            println!("tau {:.6}  F1 {:.4}  ({} candidates)", sweep.tau, sweep.f1, sweep.candidates);
            if let Some(w) = &sweep.warning {
                log::warn!("{w}");
            }
            println!("{}", report.to_line());
            write_json(&a.out.join("sweep.json"), &serde_json::json!({ "sweep": sweep, "report": report }))?;
            plot_statistics(&stats, sweep.tau, &a.out.join("sweep.png"))?;
            Ok(())
        },
    )
}
