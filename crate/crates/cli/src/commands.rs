use std::path::{Path, PathBuf};

use log::info;
use sslsod::datakit::{
    gen_synth, load_split, write_contours, write_gray8, write_manifest, write_split, LoadOptions, Plane, SynthManifest,
    SynthSpec, CONTOUR_DIR, DEPTH_DIR,
};
use sslsod::metrics::{evaluate_dirs, reports_csv};
use sslsod::network::SodModel;
use sslsod::trainer::{
    predict, prepare, run_downstream, run_stage1, run_stage2, sod_model_from_checkpoint, Checkpoint, Float,
    PretextWeights, StageTag, TrainConfig, TrainReport,
};
use sslsod::Error;
use sslsod_tensor::{Session, Tensor};

use crate::output::{check_file, echo, prepare_dir, write, CliError, Result};
use crate::{ContourArgs, DumpArgs, EvalArgs, Init, Pretrain1Args, Pretrain2Args, RunArgs, SynthArgs, TrainArgs};

pub const RGB2DEPTH_FILE: &str = "rgb2depth.ckpt";
pub const DEPTH2RGB_FILE: &str = "depth2rgb.ckpt";
pub const STAGE2_FILE: &str = "stage2.ckpt";
pub const SOD_FILE: &str = "sod.ckpt";
pub const REPORT_FILE: &str = "report.json";
pub const PRED_DIR: &str = "pred";

pub fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        size: a.size,
        count: a.count,
        min_shapes: a.min_shapes,
        max_shapes: a.max_shapes,
        noise: a.noise,
        seed: a.seed,
        ..SynthSpec::default()
    };
    spec.validate()?;
    prepare_dir(&a.out, a.force)?;
    let samples = gen_synth(&spec)?;
    write_split(&a.out, &samples)?;
    write_manifest(&a.out, &SynthManifest::new(&spec, &samples))?;
    info!("wrote {} samples to {}", samples.len(), a.out.display());
    Ok(())
}

pub fn contour_gt(a: ContourArgs) -> Result<()> {
    let out = a.data.join(CONTOUR_DIR);
    if !a.data.join(DEPTH_DIR).is_dir() {
        return Err(Error::Dataset(format!("{} has no `{DEPTH_DIR}` directory", a.data.display())).into());
    }
    if out.exists() {
        prepare_dir(&out, a.force)?;
    }
    let opts = LoadOptions {
        depth_norm: if a.per_image_minmax {
            sslsod::datakit::DepthNorm::PerImageMinMax
        } else {
            sslsod::datakit::DepthNorm::BitDepth
        },
        ..LoadOptions::default()
    };
    let n = write_contours(&a.data, a.m, &opts)?;
    info!("wrote {n} contour maps to {}", out.display());
    Ok(())
}

/// Resolves the configuration and prepares the output directory.
fn start(run: &RunArgs, extra: &[String]) -> Result<TrainConfig> {
    let mut overrides = run.overrides.clone();
    if let Some(seed) = run.seed {
        overrides.push(format!("seed={seed}"));
    }
    overrides.extend_from_slice(extra);
    let config = TrainConfig::load(run.config.as_deref(), &overrides)?;
    prepare_dir(&run.out, run.force)?;
    echo(&run.out, &config)?;
    Ok(config)
}

fn finish(dir: &Path, report: &TrainReport) -> Result<()> {
    write(&dir.join(REPORT_FILE), &report.to_json())?;
    if let Some(reason) = &report.stopped_early {
        log::warn!("{} stopped early: {reason}", report.stage);
    }
    Ok(())
}

fn load_checkpoint(path: &Path, stage: StageTag) -> Result<Checkpoint<Float>> {
    if !path.is_file() {
        return Err(Error::MissingCheckpoint { stage: format!("{stage} ({})", path.display()) }.into());
    }
    let ck = Checkpoint::load(path)?;
    ck.expect_stage(stage)?;
    Ok(ck)
}

fn load_stage1(dir: &Path) -> Result<(Checkpoint<Float>, Checkpoint<Float>)> {
    Ok((
        load_checkpoint(&dir.join(RGB2DEPTH_FILE), StageTag::Stage1RgbToDepth)?,
        load_checkpoint(&dir.join(DEPTH2RGB_FILE), StageTag::Stage1DepthToRgb)?,
    ))
}

pub fn pretrain1(a: Pretrain1Args) -> Result<()> {
    let config = start(&a.run, &[])?;
    let samples = load_split(&a.run.data, &config.load_options(false))?;
    let out = run_stage1(&samples, &config)?;
    out.rgb_to_depth.save(&a.run.out.join(RGB2DEPTH_FILE))?;
    out.depth_to_rgb.save(&a.run.out.join(DEPTH2RGB_FILE))?;
    finish(&a.run.out, &out.report)
}

pub fn pretrain2(a: Pretrain2Args) -> Result<()> {
    let stage1 = a.stage1.as_deref().map(load_stage1).transpose()?;
    let config = start(&a.run, &[])?;
    let samples = load_split(&a.run.data, &config.load_options(false))?;
    let out = run_stage2(&samples, &config, stage1.as_ref().map(|(rd, dr)| (rd, dr)))?;
    out.checkpoint.save(&a.run.out.join(STAGE2_FILE))?;
    finish(&a.run.out, &out.report)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let (p1, p2) = match a.init {
        Init::None => (false, false),
        Init::P1 => (true, false),
        Init::P2 => (true, true),
    };
    let need = |flag: bool, dir: &Option<PathBuf>, stage: StageTag| -> Result<()> {
        if flag && dir.is_none() {
            return Err(Error::MissingCheckpoint { stage: stage.to_string() }.into());
        }
        Ok(())
    };
    need(p1, &a.stage1, StageTag::Stage1RgbToDepth)?;
    need(p2, &a.stage2, StageTag::Stage2Contour)?;
    let stage1 = if p1 { a.stage1.as_deref().map(load_stage1).transpose()? } else { None };
    let stage2 = match (&a.stage2, p2) {
        (Some(dir), true) => Some(load_checkpoint(&dir.join(STAGE2_FILE), StageTag::Stage2Contour)?),
        _ => None,
    };

    let config = start(&a.run, &[format!("init_p1={p1}"), format!("init_p2={p2}")])?;
    let train = load_split(&a.run.data, &config.load_options(true))?;
    let val = a.val.as_deref().map(|d| load_split(d, &config.load_options(true))).transpose()?;
    let pretext = PretextWeights { stage1: stage1.as_ref().map(|(rd, dr)| (rd, dr)), stage2: stage2.as_ref() };
    let out = run_downstream(&train, val.as_deref(), &config, pretext)?;
    out.checkpoint.save(&a.run.out.join(SOD_FILE))?;
    if let Some(val) = &val {
        let model = sod_model_from_checkpoint(&out.checkpoint)?;
        let maps = predict(&model, &prepare(val, &config)?, config.batch_size)?;
        let dir = a.run.out.join(PRED_DIR);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (sample, map) in val.iter().zip(&maps) {
            let (h, w) = sample.size();
            write_gray8(&dir.join(format!("{}.png", sample.id)), &map.resize_bilinear(h, w))?;
        }
        if let Some(mae) = out.report.validation_mae {
            info!("validation MAE {mae:.4} over {} samples", val.len());
        }
    }
    finish(&a.run.out, &out.report)
}

fn parse_dataset(raw: &str) -> Result<(String, PathBuf, PathBuf)> {
    let bad = || CliError::Usage(format!("dataset `{raw}` is not of the form NAME=PRED_DIR,GT_DIR"));
    let (name, dirs) = raw.split_once('=').ok_or_else(bad)?;
    let (pred, gt) = dirs.split_once(',').ok_or_else(bad)?;
    if name.is_empty() || pred.is_empty() || gt.is_empty() {
        return Err(bad());
    }
    Ok((name.to_string(), pred.into(), gt.into()))
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut reports = Vec::with_capacity(a.datasets.len());
    for raw in &a.datasets {
        let (name, pred, gt) = parse_dataset(raw)?;
        reports.push(evaluate_dirs(&name, &pred, &gt)?);
    }
    let csv = reports_csv(&reports)?;
    match &a.out {
        Some(path) => {
            check_file(path, a.force)?;
            write(path, &csv)
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

/// Mean over channels of one batch item, stretched to span [0, 1].
fn channel_mean(t: &Tensor<Float>) -> Plane {
    let (c, h, w) = (t.channels(), t.height(), t.width());
    let mut mean = Plane::zeros(h, w);
    for ch in 0..c {
        for (m, v) in mean.data_mut().iter_mut().zip(t.plane(0, ch)) {
            *m += *v as f64 / c as f64;
        }
    }
    let (lo, hi) = (mean.min(), mean.max());
    if hi > lo {
        mean.map(|v| (v - lo) / (hi - lo))
    } else {
        Plane::zeros(h, w)
    }
}

pub fn dump_features(a: DumpArgs) -> Result<()> {
    let ck = Checkpoint::<Float>::load(&a.checkpoint)?;
    let model: SodModel<Float> = sod_model_from_checkpoint(&ck)?;
    let config = TrainConfig::load(None, &[format!("image_size={}", a.size)])?;
    let samples = load_split(&a.data, &config.load_options(false))?;
    let sample = samples
        .iter()
        .find(|s| s.id == a.sample)
        .ok_or_else(|| Error::Dataset(format!("{} has no sample `{}`", a.data.display(), a.sample)))?;
    let input = prepare(std::slice::from_ref(sample), &config)?;
    prepare_dir(&a.out, a.force)?;

    let batch = sslsod::datakit::Batch::<Float>::from_samples(&input);
    let s = Session::new(model.params());
    let (fwd, _) = model.forward_sod(&s, s.input(batch.rgb), s.input(batch.depth))?;
    let mut written = 0;
    for (site, cda) in &fwd.sites {
        let mut parts = Vec::with_capacity(4);
        if let Some(g) = &cda.consistency {
            parts.push(("jc", g.out.value()));
        }
        parts.push(("jc_ab", cda.enhanced.value()));
        if let Some(g) = &cda.difference {
            parts.push(("jd", g.out.value()));
        }
        parts.push(("fused", cda.out.value()));
        for (kind, value) in parts {
            write_gray8(&a.out.join(format!("{}_{site}_{kind}.png", a.sample)), &channel_mean(&value))?;
            written += 1;
        }
    }
    info!("wrote {written} feature maps for {} sites to {}", fwd.sites.len(), a.out.display());
    Ok(())
}
