use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use chanorder_core::checkpoint::{Checkpoint, Model};
use chanorder_core::data::read_label_map;
use chanorder_core::eval::{BgrPredictor, GrayStatistic, LayoutPredictor};
use chanorder_core::{permute_channels, ChannelPermutation, MaskStack, TriChannelImage};

use crate::commands::default_tau;
use crate::manifest::RunManifest;
use crate::{usage, Command, Ctx, FixArgs};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

enum Predictor<'a> {
    Layout(&'a dyn LayoutPredictor),
    Bgr(&'a dyn BgrPredictor),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Action {
    /// Predicted RGB: the input file was copied byte for byte.
    Copied,
    /// Channels reordered and written as PNG.
    Restored,
    /// Near-gray: copied unmodified.
    PassedThrough,
    /// Nothing written (--detect-only).
    Detected,
}

#[derive(Debug, Serialize)]
struct FixRecord {
    input: PathBuf,
    /// Predicted stored layout, or `NEARGRAY` when skipped as near-gray.
    layout: String,
    near_gray_statistic: Option<f64>,
    action: Option<Action>,
    output: Option<PathBuf>,
    error: Option<String>,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Files as given, directories expanded to their image files (sorted).
fn expand_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_image(f))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn output_name(input: &Path, restored: bool) -> PathBuf {
    if restored {
        let stem = input.file_stem().unwrap_or_default();
        PathBuf::from(stem).with_extension("png")
    } else {
        PathBuf::from(input.file_name().unwrap_or_default())
    }
}

/// Refuses runs where two inputs would share an output name or an output
/// would land on an input.
fn check_outputs(inputs: &[PathBuf], out: &Path) -> anyhow::Result<()> {
    let mut seen: HashMap<PathBuf, &Path> = HashMap::new();
    for input in inputs {
        for restored in [true, false] {
            let name = output_name(input, restored);
            if let Some(prev) = seen.get(&name).filter(|p| **p != input.as_path()) {
                return Err(usage(format!(
                    "{} and {} would both write {}",
                    prev.display(),
                    input.display(),
                    name.display()
                )));
            }
            seen.insert(name.clone(), input);
            let target = out.join(&name);
            if let (Ok(a), Ok(b)) = (fs::canonicalize(&target), fs::canonicalize(input)) {
                if a == b {
                    return Err(usage(format!(
                        "output {} would overwrite an input; choose another --out",
                        target.display()
                    )));
                }
            }
        }
    }
    Ok(())
}

struct Setup<'a> {
    predictor: Predictor<'a>,
    gray: Option<(&'a dyn GrayStatistic, f64)>,
    /// Vocabulary of label maps under `masks`, for models that need them.
    masks: Option<(&'a Path, &'a [String])>,
    out: Option<&'a Path>,
}

fn masks_for(setup: &Setup, input: &Path, image: &TriChannelImage) -> anyhow::Result<MaskStack> {
    let (h, w) = (image.height(), image.width());
    let Some((dir, vocab)) = setup.masks else {
        return Ok(MaskStack::whole_image(h, w));
    };
    let stem = input.file_stem().unwrap_or_default();
    let path = dir.join(stem).with_extension("png");
    let (mh, mw, labels) = read_label_map(&path)?;
    if (mh, mw) != (h, w) {
        anyhow::bail!("mask {} is {mh}x{mw} but the image is {h}x{w}", path.display());
    }
    Ok(MaskStack::from_label_map(h, w, &labels, vocab.to_vec())?)
}

fn process(setup: &Setup, input: &Path) -> anyhow::Result<FixRecord> {
    let image = TriChannelImage::load(input)?;
    let masks = masks_for(setup, input, &image)?;
    let mut record = FixRecord {
        input: input.to_path_buf(),
        layout: String::new(),
        near_gray_statistic: None,
        action: None,
        output: None,
        error: None,
    };
    if let Some((stat, tau)) = setup.gray {
        let s = stat.statistic(&image, &masks)?;
        record.near_gray_statistic = Some(s);
        if stat.direction().is_gray(s, tau) {
            record.layout = "NEARGRAY".into();
            if let Some(out) = setup.out {
                let target = out.join(output_name(input, false));
                fs::copy(input, &target).with_context(|| format!("copying to {}", target.display()))?;
                record.output = Some(target);
                record.action = Some(Action::PassedThrough);
            } else {
                record.action = Some(Action::Detected);
            }
            return Ok(record);
        }
    }
    let layout = match setup.predictor {
        Predictor::Layout(p) => p.predict_layout(&image, &masks)?,
        Predictor::Bgr(p) => p.predict_bgr(&image, &masks)?.permutation(),
    };
    record.layout = layout.to_string();
    let Some(out) = setup.out else {
        record.action = Some(Action::Detected);
        return Ok(record);
    };
    if layout == ChannelPermutation::Rgb {
        let target = out.join(output_name(input, false));
        fs::copy(input, &target).with_context(|| format!("copying to {}", target.display()))?;
        record.output = Some(target);
        record.action = Some(Action::Copied);
    } else {
        let target = out.join(output_name(input, true));
        permute_channels(&image, layout.inverse()).save(&target)?;
        record.output = Some(target);
        record.action = Some(Action::Restored);
    }
    Ok(record)
}

pub fn fix(command: &Command, a: &FixArgs, ctx: &Ctx) -> anyhow::Result<()> {
    if !a.detect_only && a.out.is_none() {
        return Err(usage("--out is required unless --detect-only is given"));
    }
    let out = if a.detect_only { None } else { a.out.as_deref() };
    let ck = Checkpoint::load(&a.ckpt)?;
    let predictor = match &ck.model {
        Model::Bgr(_) => Predictor::Bgr(ck.model.as_bgr_predictor().unwrap()),
        m => match m.as_layout_predictor() {
            Some(p) => Predictor::Layout(p),
            None => Predictor::Bgr(m.as_bgr_predictor().ok_or_else(|| usage("checkpoint cannot predict layouts"))?),
        },
    };
    let gray = if a.gray_skip {
        let stat = ck.model.as_gray_statistic().ok_or_else(|| {
            usage(format!("--gray-skip needs an orderer or softmax6 checkpoint, not {}", ck.kind()))
        })?;
        Some((stat, a.tau.unwrap_or_else(|| default_tau(stat.direction()))))
    } else {
        None
    };
    let masks = match &ck.model {
        Model::Orderer(m) => {
            let dir = a.masks.as_deref().ok_or_else(|| {
                usage("orderer checkpoints need --masks DIR holding a label map per image (same file stem, .png)")
            })?;
            Some((dir, m.vocab()))
        }
        _ => None,
    };
    let inputs = expand_inputs(&a.inputs)?;
    if inputs.is_empty() {
        return Err(usage("no input images found"));
    }
    if let Some(out) = out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        check_outputs(&inputs, out)?;
    }
    let setup = Setup {
        predictor,
        gray,
        masks,
        out,
    };
    let body = || {
        let records = ctx.exec.map(&inputs, |p| {
            process(&setup, p).unwrap_or_else(|e| FixRecord {
                input: p.clone(),
                layout: String::new(),
                near_gray_statistic: None,
                action: None,
                output: None,
                error: Some(format!("{e:#}")),
            })
        });
        let mut failures = 0;
        for r in &records {
            match &r.error {
                Some(e) => {
                    failures += 1;
                    log::warn!("skipping {}: {e}", r.input.display());
                }
                None => {
                    let written = r.output.as_ref().map(|o| format!("\t{}", o.display())).unwrap_or_default();
                    println!("{}\t{}{written}", r.input.display(), r.layout);
                }
            }
        }
        if let Some(out) = out {
            let mut json = serde_json::to_string_pretty(&records)?;
            json.push('\n');
            chanorder_core::checkpoint::write_atomic(&out.join("fix.json"), json.as_bytes())?;
        }
        if failures == records.len() {
            anyhow::bail!("none of the {failures} inputs could be processed");
        }
        Ok(())
    };
    let manifest_path = ctx.manifest.clone().or_else(|| out.map(|o| o.join("manifest.json")));
    let Some(path) = manifest_path else {
        return body();
    };
    let mut m = RunManifest::start(command, ctx.threads, ctx.exec == chanorder_core::Exec::Sequential);
    m.checkpoint = Some(a.ckpt.clone());
    m.write(&path)?;
    let outcome = body();
    if let Err(e) = m.finish(&path, &outcome) {
        log::warn!("could not update {}: {e:#}", path.display());
    }
    outcome
}
