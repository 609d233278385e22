use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sslsod_tensor::{ParamId, ParamStore, Session, Sgd, Tensor};

use super::checkpoint::{Checkpoint, CheckpointMeta, StageTag};
use super::config::TrainConfig;
use super::schedule::Schedule;
use crate::datakit::{augment, depth_contour_gt, gt_pyramid, mean_pyramid, sample_rng, Batch, Plane, RgbdSample};
use crate::error::{Error, Result};
use crate::losses::{contour_loss, recon_loss, sod_loss};
use crate::metrics::mae;
use crate::network::{
    is_encoder_param, transfer_weights, AutoEncoder, Direction, SodConfig, SodModel, TransferPolicy, TransferReport,
    LEVELS,
};

/// Element type used for training.
pub type Float = f32;

/// Independent stream seed derived from the run seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub iter: usize,
    pub loss: f64,
    /// One rate per entry of the series' `lr_groups`.
    pub lr: Vec<f64>,
}

/// Per-iteration trajectory of one optimised network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSeries {
    pub name: String,
    pub lr_groups: Vec<String>,
    pub records: Vec<Record>,
}

impl LossSeries {
    fn new(name: &str, groups: &[&str]) -> Self {
        Self { name: name.into(), lr_groups: groups.iter().map(|g| g.to_string()).collect(), records: Vec::new() }
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn first(&self) -> Option<f64> {
        self.records.first().map(|r| r.loss)
    }

    pub fn last(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub stage: StageTag,
    pub planned_iterations: usize,
    pub completed_iterations: usize,
    pub series: Vec<LossSeries>,
    /// Reason training ended before the planned budget, if it did.
    pub stopped_early: Option<String>,
    pub transfer: Option<TransferReport>,
    pub frozen_tensors: usize,
    pub validation_mae: Option<f64>,
}

impl TrainReport {
    fn new(stage: StageTag, planned: usize, series: Vec<LossSeries>) -> Self {
        Self {
            stage,
            planned_iterations: planned,
            completed_iterations: 0,
            series,
            stopped_early: None,
            transfer: None,
            frozen_tensors: 0,
            validation_mae: None,
        }
    }

    pub fn series(&self, name: &str) -> Option<&LossSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub struct Stage1Output {
    pub rgb_to_depth: Checkpoint<Float>,
    pub depth_to_rgb: Checkpoint<Float>,
    pub report: TrainReport,
}

pub struct StageOutput {
    pub checkpoint: Checkpoint<Float>,
    pub report: TrainReport,
}

/// Pretext checkpoints offered to the downstream run.
#[derive(Clone, Copy, Default)]
pub struct PretextWeights<'a> {
    pub stage1: Option<(&'a Checkpoint<Float>, &'a Checkpoint<Float>)>,
    pub stage2: Option<&'a Checkpoint<Float>>,
}

/// Resizes every sample to the configured square training resolution.
pub fn prepare(samples: &[RgbdSample], config: &TrainConfig) -> Result<Vec<RgbdSample>> {
    if samples.is_empty() {
        return Err(Error::Dataset("is empty".into()));
    }
    let s = config.image_size;
    Ok(samples.iter().map(|x| if x.size() == (s, s) { x.clone() } else { x.resized(s, s) }).collect())
}

/// Cycles through the dataset in a fresh seeded order every epoch.
struct Sampler {
    seed: u64,
    order: Vec<usize>,
    cursor: usize,
    epoch: u64,
}

impl Sampler {
    fn new(n: usize, seed: u64) -> Self {
        let mut s = Self { seed, order: (0..n).collect(), cursor: 0, epoch: 0 };
        s.shuffle();
        s
    }

    fn shuffle(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &format!("shuffle/{}", self.epoch)));
        self.order.shuffle(&mut rng);
    }

    /// Next `size` indices, each with the epoch it was drawn in.
    fn draw(&mut self, size: usize) -> Vec<(usize, u64)> {
        (0..size)
            .map(|_| {
                if self.cursor == self.order.len() {
                    self.epoch += 1;
                    self.cursor = 0;
                    self.shuffle();
                }
                self.cursor += 1;
                (self.order[self.cursor - 1], self.epoch)
            })
            .collect()
    }
}

fn next_batch(samples: &[RgbdSample], sampler: &mut Sampler, config: &TrainConfig) -> Vec<RgbdSample> {
    let spec = config.augment_spec();
    sampler
        .draw(config.batch_size)
        .into_iter()
        .map(|(i, epoch)| {
            if config.augment {
                augment(&samples[i], &spec, &mut sample_rng(spec.seed, &samples[i].id, epoch))
            } else {
                samples[i].clone()
            }
        })
        .collect()
}

/// Side-out resolutions for a square input, coarsest first.
fn side_resolutions(size: usize) -> Vec<(usize, usize)> {
    (0..LEVELS).rev().map(|l| (size >> l, size >> l)).collect()
}

fn stack_levels(per_sample: Vec<Vec<Plane>>) -> Vec<Tensor<Float>> {
    (0..LEVELS)
        .map(|l| Tensor::stack(&per_sample.iter().map(|levels| levels[l].to_tensor()).collect::<Vec<_>>()))
        .collect()
}

fn saliency_targets(batch: &[RgbdSample], size: usize) -> Result<Vec<Tensor<Float>>> {
    let res = side_resolutions(size);
    let levels = batch.iter().map(|s| gt_pyramid(&s.gt, &res)).collect::<Result<Vec<_>>>()?;
    Ok(stack_levels(levels))
}

fn contour_targets(batch: &[RgbdSample], size: usize, window: usize) -> Result<Vec<Tensor<Float>>> {
    let res = side_resolutions(size);
    let levels =
        batch.iter().map(|s| mean_pyramid(&depth_contour_gt(&s.depth, window)?, &res)).collect::<Result<Vec<_>>>()?;
    Ok(stack_levels(levels))
}

fn finite(loss: f64, iter: usize, report: &mut TrainReport) -> bool {
    if loss.is_finite() {
        return true;
    }
    report.stopped_early = Some(format!("non-finite loss at iteration {iter}"));
    false
}

/// One forward/backward pass of an autoencoder; returns loss and gradients.
fn autoencoder_step(
    ae: &AutoEncoder<Float>,
    batch: &Batch<Float>,
    ssim_weight: f64,
) -> Result<(f64, Vec<(ParamId, Vec<Float>)>)> {
    let s = Session::new(ae.params());
    let (input, target) = match ae.direction() {
        Direction::RgbToDepth => (&batch.rgb, &batch.depth),
        Direction::DepthToRgb => (&batch.depth, &batch.rgb),
    };
    let pred = ae.forward(&s, s.input(input.clone()))?;
    let loss = recon_loss(pred, s.input(target.clone()), ssim_weight)?;
    let value = loss.value().item() as f64;
    let grads = s.backward(loss);
    Ok((value, s.param_grads(&grads)))
}

fn autoencoder_meta(ae: &AutoEncoder<Float>, iteration: usize, seed: u64) -> CheckpointMeta {
    let stage = match ae.direction() {
        Direction::RgbToDepth => StageTag::Stage1RgbToDepth,
        Direction::DepthToRgb => StageTag::Stage1DepthToRgb,
    };
    CheckpointMeta {
        stage,
        fingerprint: ae.fingerprint(),
        iteration: iteration as u64,
        architecture: serde_json::json!({ "model": "autoencoder", "direction": ae.direction(), "backbone": ae.config() }),
        rng_seed: Some(seed),
    }
}

fn sod_meta(model: &SodModel<Float>, stage: StageTag, iteration: usize, seed: u64) -> CheckpointMeta {
    CheckpointMeta {
        stage,
        fingerprint: model.fingerprint(),
        iteration: iteration as u64,
        architecture: serde_json::json!({ "model": "sod", "config": model.config() }),
        rng_seed: Some(seed),
    }
}

/// Stage 1: the RGB-to-depth and depth-to-RGB autoencoders, trained side by
/// side on the same batches with independent optimisers.
pub fn run_stage1(samples: &[RgbdSample], config: &TrainConfig) -> Result<Stage1Output> {
    config.validate()?;
    let data = prepare(samples, config)?;
    let backbone = config.backbone()?;
    let mut nets = [
        AutoEncoder::<Float>::new(
            backbone.clone(),
            Direction::RgbToDepth,
            derive_seed(config.seed, "stage1/rgb2depth"),
        )?,
        AutoEncoder::<Float>::new(backbone, Direction::DepthToRgb, derive_seed(config.seed, "stage1/depth2rgb"))?,
    ];
    let mut opts = [
        Sgd::new(config.momentum as Float, config.weight_decay as Float),
        Sgd::new(config.momentum as Float, config.weight_decay as Float),
    ];
    let total = config.total_iterations(data.len());
    let schedule = config.pretext_schedule_for(total);
    let mut report = TrainReport::new(
        StageTag::Stage1RgbToDepth,
        total,
        vec![LossSeries::new("rgb2depth", &["all"]), LossSeries::new("depth2rgb", &["all"])],
    );
    let mut sampler = Sampler::new(data.len(), derive_seed(config.seed, "stage1/order"));

    'train: for iter in 0..total {
        let lr = schedule.rate_at(iter)?;
        let batch = Batch::<Float>::from_samples(&next_batch(&data, &mut sampler, config));
        let mut steps = Vec::with_capacity(2);
        for net in &nets {
            let (loss, grads) = autoencoder_step(net, &batch, config.ssim_weight)?;
            if !finite(loss, iter, &mut report) {
                break 'train;
            }
            steps.push((loss, grads));
        }
        for (k, (loss, grads)) in steps.into_iter().enumerate() {
            opts[k].step(nets[k].params_mut(), &grads, |_| lr as Float);
            report.series[k].records.push(Record { iter, loss, lr: vec![lr] });
        }
        report.completed_iterations = iter + 1;
        if iter % 50 == 0 {
            log::info!(
                "stage1 iter {iter}/{total} lr {lr:.2e} rgb2depth {:.4} depth2rgb {:.4}",
                report.series[0].last().unwrap_or(f64::NAN),
                report.series[1].last().unwrap_or(f64::NAN)
            );
        }
    }

    let done = report.completed_iterations;
    let [rd, dr] = nets;
    let [opt_rd, opt_dr] = opts;
    let rd_meta = autoencoder_meta(&rd, done, config.seed);
    let dr_meta = autoencoder_meta(&dr, done, config.seed);
    Ok(Stage1Output {
        rgb_to_depth: Checkpoint::new(rd_meta, rd.params().clone()).with_optimizer(&opt_rd),
        depth_to_rgb: Checkpoint::new(dr_meta, dr.params().clone()).with_optimizer(&opt_dr),
        report,
    })
}

fn check_stage1(rgb_to_depth: &Checkpoint<Float>, depth_to_rgb: &Checkpoint<Float>, fingerprint: &str) -> Result<()> {
    rgb_to_depth.expect_stage(StageTag::Stage1RgbToDepth)?;
    depth_to_rgb.expect_stage(StageTag::Stage1DepthToRgb)?;
    rgb_to_depth.check_fingerprint(fingerprint)?;
    depth_to_rgb.check_fingerprint(fingerprint)
}

/// Loads both encoders from the stage-1 autoencoders; every encoder tensor must be covered.
fn load_encoders(
    model: &mut SodModel<Float>,
    rgb_to_depth: &Checkpoint<Float>,
    depth_to_rgb: &Checkpoint<Float>,
) -> Result<TransferReport> {
    let fp = model.fingerprint();
    check_stage1(rgb_to_depth, depth_to_rgb, &fp)?;
    let report = transfer_weights(
        &[&rgb_to_depth.params, &depth_to_rgb.params],
        model.params_mut(),
        TransferPolicy::EncodersOnly,
    )?;
    if let Some(missing) = report.reinitialized.iter().find(|n| is_encoder_param(n)) {
        return Err(Error::Incompatible(format!("stage-1 checkpoints do not provide `{missing}`")));
    }
    Ok(report)
}

fn merge(into: &mut TransferReport, other: TransferReport) {
    // a tensor counts as loaded if any source provided it
    let loaded: Vec<String> = into.loaded.iter().chain(&other.loaded).cloned().collect();
    into.reinitialized.retain(|n| other.reinitialized.contains(n));
    into.shape_mismatches.retain(|n| !loaded.contains(n));
    for n in other.shape_mismatches {
        if !loaded.contains(&n) && !into.shape_mismatches.contains(&n) {
            into.shape_mismatches.push(n);
        }
    }
    into.loaded = loaded;
}

/// Forward/backward through the fusion network under either objective.
enum Objective {
    Contour { window: usize },
    Saliency,
}

fn sod_step(
    model: &SodModel<Float>,
    samples: &[RgbdSample],
    size: usize,
    objective: &Objective,
) -> Result<(f64, Vec<(ParamId, Vec<Float>)>)> {
    let batch = Batch::<Float>::from_samples(samples);
    let s = Session::new(model.params());
    let (rgb, depth) = (s.input(batch.rgb), s.input(batch.depth));
    let loss = match objective {
        Objective::Contour { window } => {
            let targets = contour_targets(samples, size, *window)?;
            contour_loss(&model.forward_contour(&s, rgb, depth)?, &targets)?
        }
        Objective::Saliency => {
            let targets = saliency_targets(samples, size)?;
            sod_loss(&model.forward(&s, rgb, depth)?.side_outs, &targets)?
        }
    };
    let value = loss.value().item() as f64;
    let grads = s.backward(loss);
    Ok((value, s.param_grads(&grads)))
}

/// Stage 2: depth-contour estimation through the fusion network with the
/// stage-1 encoders loaded and frozen. `None` trains from random encoders
/// (still frozen).
pub fn run_stage2(
    samples: &[RgbdSample],
    config: &TrainConfig,
    stage1: Option<(&Checkpoint<Float>, &Checkpoint<Float>)>,
) -> Result<StageOutput> {
    config.validate()?;
    let data = prepare(samples, config)?;
    let sod_config = config.ablation().sod_config(config.backbone()?);
    let mut model = SodModel::<Float>::new(sod_config, derive_seed(config.seed, "stage2/init"))?;
    let total = config.total_iterations(data.len());
    let mut report = TrainReport::new(StageTag::Stage2Contour, total, vec![LossSeries::new("contour", &["decoder"])]);
    if let Some((rd, dr)) = stage1 {
        report.transfer = Some(load_encoders(&mut model, rd, dr)?);
    }
    report.frozen_tensors = model.freeze_encoders();

    let schedule = config.pretext_schedule_for(total);
    let mut opt = Sgd::new(config.momentum as Float, config.weight_decay as Float);
    let mut sampler = Sampler::new(data.len(), derive_seed(config.seed, "stage2/order"));
    let objective = Objective::Contour { window: config.contour_window };
    for iter in 0..total {
        let lr = schedule.rate_at(iter)?;
        let batch = next_batch(&data, &mut sampler, config);
        let (loss, grads) = sod_step(&model, &batch, config.image_size, &objective)?;
        if !finite(loss, iter, &mut report) {
            break;
        }
        opt.step(model.params_mut(), &grads, |_| lr as Float);
        report.series[0].records.push(Record { iter, loss, lr: vec![lr] });
        report.completed_iterations = iter + 1;
        if iter % 50 == 0 {
            log::info!("stage2 iter {iter}/{total} lr {lr:.2e} contour {loss:.4}");
        }
    }
    let meta = sod_meta(&model, StageTag::Stage2Contour, report.completed_iterations, config.seed);
    Ok(StageOutput { checkpoint: Checkpoint::new(meta, model.params().clone()).with_optimizer(&opt), report })
}

/// Applies the ablation's initialisation flags to a freshly built model.
pub fn initialise_downstream(
    model: &mut SodModel<Float>,
    config: &TrainConfig,
    pretext: PretextWeights<'_>,
) -> Result<Option<TransferReport>> {
    let ablation = config.ablation();
    let mut report: Option<TransferReport> = None;
    if ablation.init_p1 {
        let (rd, dr) =
            pretext.stage1.ok_or_else(|| Error::MissingCheckpoint { stage: StageTag::Stage1RgbToDepth.to_string() })?;
        report = Some(load_encoders(model, rd, dr)?);
    }
    if ablation.init_p2 {
        let s2 =
            pretext.stage2.ok_or_else(|| Error::MissingCheckpoint { stage: StageTag::Stage2Contour.to_string() })?;
        s2.expect_stage(StageTag::Stage2Contour)?;
        s2.check_fingerprint(&model.fingerprint())?;
        let policy =
            if config.reuse_stage2_heads { TransferPolicy::DecoderOnly } else { TransferPolicy::DecoderWithoutHeads };
        let r = transfer_weights(&[&s2.params], model.params_mut(), policy)?;
        match report.as_mut() {
            Some(acc) => merge(acc, r),
            None => report = Some(r),
        }
    }
    Ok(report)
}

/// Downstream saliency training with two learning-rate groups (encoders and
/// everything else). Nothing is frozen.
pub fn run_downstream(
    samples: &[RgbdSample],
    validation: Option<&[RgbdSample]>,
    config: &TrainConfig,
    pretext: PretextWeights<'_>,
) -> Result<StageOutput> {
    config.validate()?;
    let data = prepare(samples, config)?;
    if data.iter().all(|s| s.gt.max() == 0.0) {
        return Err(Error::Dataset("has no ground-truth masks; saliency training needs gt".into()));
    }
    let sod_config = config.ablation().sod_config(config.backbone()?);
    let mut model = SodModel::<Float>::new(sod_config, derive_seed(config.seed, "downstream/init"))?;
    let total = config.total_iterations(data.len());
    let mut report =
        TrainReport::new(StageTag::DownstreamSod, total, vec![LossSeries::new("saliency", &["backbone", "rest"])]);
    report.transfer = initialise_downstream(&mut model, config, pretext)?;

    let (backbone_sched, head_sched) = (config.backbone_schedule(total), config.head_schedule(total));
    let is_backbone: Vec<bool> = model.params().iter().map(|(_, e)| is_encoder_param(&e.name)).collect();
    let mut opt = Sgd::new(config.momentum as Float, config.weight_decay as Float);
    let mut sampler = Sampler::new(data.len(), derive_seed(config.seed, "downstream/order"));
    for iter in 0..total {
        let (lr_b, lr_h) = (backbone_sched.rate_at(iter)?, head_sched.rate_at(iter)?);
        let batch = next_batch(&data, &mut sampler, config);
        let (loss, grads) = sod_step(&model, &batch, config.image_size, &Objective::Saliency)?;
        if !finite(loss, iter, &mut report) {
            break;
        }
        opt.step(model.params_mut(), &grads, |id| if is_backbone[id.0] { lr_b as Float } else { lr_h as Float });
        report.series[0].records.push(Record { iter, loss, lr: vec![lr_b, lr_h] });
        report.completed_iterations = iter + 1;
        if iter % 50 == 0 {
            log::info!("downstream iter {iter}/{total} lr {lr_b:.2e}/{lr_h:.2e} saliency {loss:.4}");
        }
    }
    if let Some(val) = validation {
        report.validation_mae = Some(mean_mae(&model, &prepare(val, config)?, config.batch_size)?);
    }
    let meta = sod_meta(&model, StageTag::DownstreamSod, report.completed_iterations, config.seed);
    Ok(StageOutput { checkpoint: Checkpoint::new(meta, model.params().clone()).with_optimizer(&opt), report })
}

/// Full-resolution saliency maps, in input order.
pub fn predict(model: &SodModel<Float>, samples: &[RgbdSample], batch_size: usize) -> Result<Vec<Plane>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let batch = Batch::<Float>::from_samples(chunk);
        let s = Session::new(model.params());
        let (_, map) = model.forward_sod(&s, s.input(batch.rgb), s.input(batch.depth))?;
        let value = map.value();
        out.extend((0..chunk.len()).map(|n| Plane::from_tensor(&value, n, 0)));
    }
    Ok(out)
}

/// Mean per-image MAE of the model's maps against the samples' masks.
pub fn mean_mae(model: &SodModel<Float>, samples: &[RgbdSample], batch_size: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Dataset("is empty".into()));
    }
    let maps = predict(model, samples, batch_size)?;
    let mut total = 0.0;
    for (map, s) in maps.iter().zip(samples) {
        total += mae(map, &s.gt)?;
    }
    Ok(total / samples.len() as f64)
}

/// Sample-weighted mean of a per-batch loss over the whole set, without augmentation.
fn mean_loss(
    samples: &[RgbdSample],
    batch_size: usize,
    mut f: impl FnMut(&[RgbdSample]) -> Result<f64>,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Dataset("is empty".into()));
    }
    let mut total = 0.0;
    for chunk in samples.chunks(batch_size.max(1)) {
        total += f(chunk)? * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Reconstruction loss of an autoencoder over a dataset.
pub fn recon_loss_on(ae: &AutoEncoder<Float>, samples: &[RgbdSample], config: &TrainConfig) -> Result<f64> {
    let data = prepare(samples, config)?;
    mean_loss(&data, config.batch_size, |chunk| {
        Ok(autoencoder_step(ae, &Batch::from_samples(chunk), config.ssim_weight)?.0)
    })
}

/// Contour loss of a fusion network over a dataset.
pub fn contour_loss_on(model: &SodModel<Float>, samples: &[RgbdSample], config: &TrainConfig) -> Result<f64> {
    let data = prepare(samples, config)?;
    let objective = Objective::Contour { window: config.contour_window };
    mean_loss(&data, config.batch_size, |chunk| Ok(sod_step(model, chunk, config.image_size, &objective)?.0))
}

#[derive(Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
enum Architecture {
    Autoencoder { direction: Direction, backbone: crate::network::BackboneConfig },
    Sod { config: SodConfig },
}

fn architecture(ck: &Checkpoint<Float>) -> Result<Architecture> {
    serde_json::from_value(ck.meta.architecture.clone())
        .map_err(|e| Error::CorruptCheckpoint { field: "architecture".into(), reason: e.to_string() })
}

/// Rebuilds the fusion network a checkpoint was saved from.
pub fn sod_model_from_checkpoint(ck: &Checkpoint<Float>) -> Result<SodModel<Float>> {
    match architecture(ck)? {
        Architecture::Sod { config } => {
            let mut model = SodModel::new(config, 0)?;
            let fp = model.fingerprint();
            ck.restore_into(model.params_mut(), &fp, false)?;
            restore_trainable(ck, model.params_mut());
            Ok(model)
        }
        Architecture::Autoencoder { .. } => {
            Err(Error::Incompatible(format!("`{}` checkpoint holds an autoencoder", ck.meta.stage)))
        }
    }
}

/// Rebuilds the autoencoder a stage-1 checkpoint was saved from.
pub fn autoencoder_from_checkpoint(ck: &Checkpoint<Float>) -> Result<AutoEncoder<Float>> {
    match architecture(ck)? {
        Architecture::Autoencoder { direction, backbone } => {
            let mut ae = AutoEncoder::new(backbone, direction, 0)?;
            let fp = ae.fingerprint();
            ck.restore_into(ae.params_mut(), &fp, false)?;
            Ok(ae)
        }
        Architecture::Sod { .. } => {
            Err(Error::Incompatible(format!("`{}` checkpoint holds a fusion network", ck.meta.stage)))
        }
    }
}

fn restore_trainable(ck: &Checkpoint<Float>, target: &mut ParamStore<Float>) {
    let ids: Vec<_> = target.ids().collect();
    for id in ids {
        if let Some(src) = ck.params.id(target.name(id)) {
            let t = ck.params.is_trainable(src);
            target.set_trainable(id, t);
        }
    }
}

/// Learning-rate curve of a schedule over its whole horizon, for reports and plots.
pub fn schedule_curve(schedule: &Schedule) -> Result<Vec<f64>> {
    (0..=schedule.total).map(|i| schedule.rate_at(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{gen_synth, SynthSpec};

    fn tiny_config(iterations: usize) -> TrainConfig {
        TrainConfig {
            image_size: 32,
            batch_size: 2,
            iterations: Some(iterations),
            widths: Some([4, 4, 8, 8, 8]),
            transition_width: Some(4),
            fpn_width: Some(4),
            ..TrainConfig::default()
        }
    }

    fn data(n: usize) -> Vec<RgbdSample> {
        gen_synth(&SynthSpec { size: 32, count: n, ..SynthSpec::default() }).unwrap()
    }

    #[test]
    fn sampler_visits_everything_each_epoch() {
        let mut s = Sampler::new(5, 1);
        let mut first: Vec<_> = s.draw(5).into_iter().map(|(i, e)| (e, i)).collect();
        first.sort();
        assert_eq!(first, (0..5).map(|i| (0, i)).collect::<Vec<_>>());
        assert!(s.draw(1).iter().all(|&(_, e)| e == 1));
    }

    #[test]
    fn zero_iterations_keep_initialisation() {
        let out = run_stage1(&data(2), &tiny_config(0)).unwrap();
        let fresh = AutoEncoder::<Float>::new(
            tiny_config(0).backbone().unwrap(),
            Direction::RgbToDepth,
            derive_seed(0, "stage1/rgb2depth"),
        )
        .unwrap();
        for (_, e) in fresh.params().iter() {
            assert_eq!(out.rgb_to_depth.params.get(&e.name).unwrap(), &e.value);
        }
        assert_eq!(out.report.completed_iterations, 0);
    }

    #[test]
    fn downstream_requires_prerequisites() {
        let cfg = tiny_config(1);
        let err = run_downstream(&data(2), None, &cfg, PretextWeights::default()).err().unwrap();
        assert!(matches!(err, Error::MissingCheckpoint { ref stage } if stage == "stage1_rgb2depth"));
    }

    #[test]
    fn downstream_rejects_missing_gt() {
        let mut d = data(2);
        for s in &mut d {
            s.gt = Plane::zeros(32, 32);
        }
        let mut cfg = tiny_config(1);
        cfg.set_ablation(super::super::AblationConfig::baseline());
        assert!(matches!(run_downstream(&d, None, &cfg, PretextWeights::default()), Err(Error::Dataset(_))));
    }

    #[test]
    fn checkpoint_rebuilds_model() {
        let mut cfg = tiny_config(1);
        cfg.set_ablation(super::super::AblationConfig::baseline());
        let out = run_downstream(&data(2), None, &cfg, PretextWeights::default()).unwrap();
        let model = sod_model_from_checkpoint(&out.checkpoint).unwrap();
        assert_eq!(model.params().numel(), out.checkpoint.params.numel());
        assert!(autoencoder_from_checkpoint(&out.checkpoint).is_err());
    }
}
