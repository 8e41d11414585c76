//! GE2E pretraining and triplet fine-tuning loops.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::features::FeatureStore;
use super::manifest::Manifest;
use crate::audio::MelFrames;
use crate::encoder::{
    backward, forward, init_params, load_checkpoint, save_checkpoint, sgd_step, EncoderParams,
    Gradients,
};
use crate::losses::{ge2e_loss, triplet_loss, Ge2eScale, TripletMargin};
use crate::sampling::{Batch, BatchSampler, Transform, Triplet};
use crate::{par, seed, Error, Result};

pub const PRETRAINED_NAME: &str = "pretrained.dsrk";
pub const FINETUNED_NAME: &str = "finetuned.dsrk";
pub const GE2E_METRICS_NAME: &str = "ge2e_metrics.csv";
pub const TRIPLET_METRICS_NAME: &str = "triplet_metrics.csv";

const GE2E_STREAM: u64 = 0x6E2E;
const TRIPLET_STREAM: u64 = 0x7121;
const EVAL_BATCH_STREAM: u64 = 0xE7A1;

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainOutcome {
    pub checkpoint: PathBuf,
    /// Loss of every iteration, in order.
    pub losses: Vec<f64>,
    pub scale: Ge2eScale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneOutcome {
    pub checkpoint: PathBuf,
    pub losses: Vec<f64>,
    /// Loss on a fixed held-aside batch before and after fine-tuning.
    pub eval_loss_start: f64,
    pub eval_loss_end: f64,
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn feature_store(manifest: &Manifest, config: &RunConfig) -> Result<FeatureStore> {
    let cache = (!config.feature_cache.is_empty()).then(|| Path::new(&config.feature_cache));
    FeatureStore::load(manifest, config.mel(), config.sample_rate, cache)
}

/// Draws the speakers and utterances of one GE2E batch from the training
/// split. Only speakers with at least `m` training utterances qualify.
fn ge2e_pool(manifest: &Manifest, config: &RunConfig) -> Result<Vec<Vec<usize>>> {
    let train = manifest.split(config.eval.held_out).train;
    let mut pool: Vec<Vec<usize>> = manifest
        .by_speaker()
        .into_values()
        .map(|idx| {
            idx.into_iter()
                .filter(|i| train.binary_search(i).is_ok())
                .collect::<Vec<_>>()
        })
        .filter(|idx| idx.len() >= config.ge2e.utterances)
        .collect();
    if pool.len() < config.ge2e.speakers || config.ge2e.speakers < 2 || config.ge2e.utterances < 2 {
        return Err(Error::InsufficientBatch(format!(
            "GE2E batch of {} speakers x {} utterances needs that many training utterances; {} speakers qualify",
            config.ge2e.speakers,
            config.ge2e.utterances,
            pool.len()
        )));
    }
    pool.iter_mut().for_each(|v| v.sort_unstable());
    Ok(pool)
}

/// GE2E pretraining from a seeded initialization. Writes the checkpoint and
/// a per-iteration metrics file into `out_dir`.
pub fn pretrain_ge2e(
    manifest: &Manifest,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<PretrainOutcome> {
    config.validate()?;
    create_dir(out_dir)?;
    let pool = ge2e_pool(manifest, config)?;
    let mut store = feature_store(manifest, config)?;
    let mut params = init_params(&config.encoder())?;
    let g = &config.ge2e;
    let mut scale = Ge2eScale::new(g.init_w, g.init_b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, GE2E_STREAM));
    let mut metrics = String::from("iteration,loss,w,b\n");
    let mut losses = Vec::with_capacity(g.iterations);

    for it in 1..=g.iterations {
        let mut speakers: Vec<usize> = (0..pool.len()).collect();
        speakers.shuffle(&mut rng);
        let mut ids = Vec::with_capacity(g.speakers * g.utterances);
        for &s in &speakers[..g.speakers] {
            let mut utts = pool[s].clone();
            utts.shuffle(&mut rng);
            ids.extend_from_slice(&utts[..g.utterances]);
        }
        let wanted: Vec<(usize, Transform)> =
            ids.iter().map(|&i| (i, Transform::Identity)).collect();
        let feats = store.features(&wanted)?;
        let traces = par::try_map(&feats, |f| forward(&params, f))?;
        let grouped: Vec<Vec<&[f64]>> = traces
            .chunks(g.utterances)
            .map(|c| c.iter().map(|t| t.embedding().as_slice()).collect())
            .collect();
        let out = ge2e_loss(&grouped, scale)?;
        let jobs: Vec<(&MelFrames, &_, &[f64])> = feats
            .iter()
            .zip(&traces)
            .zip(out.grad_embeddings.iter().flatten())
            .map(|((f, t), d)| (*f, t, d.as_slice()))
            .collect();
        let grads = par::try_map(&jobs, |&(f, t, d)| backward(&params, f, t, d))?;
        let total = Gradients::sum(params.config, &grads);
        sgd_step(&mut params, &total, g.lr, g.clip)?;
        scale.w -= g.lr * out.grad_w.clamp(-g.clip, g.clip);
        scale.b -= g.lr * out.grad_b.clamp(-g.clip, g.clip);
        scale.project();

        losses.push(out.loss);
        writeln!(
            metrics,
            "{it},{:.9},{:.9},{:.9}",
            out.loss, scale.w, scale.b
        )
        .unwrap();
    }

    let checkpoint = out_dir.join(PRETRAINED_NAME);
    save_checkpoint(&params, &checkpoint)?;
    write_file(&out_dir.join(GE2E_METRICS_NAME), &metrics)?;
    Ok(PretrainOutcome {
        checkpoint,
        losses,
        scale,
    })
}

/// Loads a checkpoint and checks it against the configured architecture.
pub fn load_matching(path: &Path, config: &RunConfig) -> Result<EncoderParams> {
    let params = load_checkpoint(path)?;
    let want = config.encoder();
    let have = params.config;
    if (
        have.n_layers,
        have.hidden_dim,
        have.embed_dim,
        have.input_dim,
    ) != (
        want.n_layers,
        want.hidden_dim,
        want.embed_dim,
        want.input_dim,
    ) {
        return Err(Error::Shape(format!(
            "checkpoint {} is {}x{} embed {} input {}, config wants {}x{} embed {} input {}",
            path.display(),
            have.n_layers,
            have.hidden_dim,
            have.embed_dim,
            have.input_dim,
            want.n_layers,
            want.hidden_dim,
            want.embed_dim,
            want.input_dim
        )));
    }
    Ok(params)
}

fn triplet_keys(t: &Triplet) -> [(usize, Transform); 3] {
    [
        (t.anchor.utterance.id, t.anchor.transform),
        (t.positive.utterance.id, t.positive.transform),
        (t.negative.utterance.id, t.negative.transform),
    ]
}

/// Summed triplet loss of a batch, the number of active triplets, and the
/// summed parameter gradient through all three branches when `with_grad`.
pub fn triplet_batch_loss(
    params: &EncoderParams,
    store: &mut FeatureStore,
    batch: &Batch,
    margin: TripletMargin,
    with_grad: bool,
) -> Result<(f64, usize, Option<Gradients>)> {
    let wanted: Vec<(usize, Transform)> = batch.triplets.iter().flat_map(triplet_keys).collect();
    store.prepare(&wanted)?;
    let store = &*store;
    let per_triplet = par::try_map(&batch.triplets, |t| {
        let keys = triplet_keys(t);
        let feats = keys.map(|(id, tr)| store.get(id, tr));
        let traces = [
            forward(params, feats[0])?,
            forward(params, feats[1])?,
            forward(params, feats[2])?,
        ];
        let out = triplet_loss(
            traces[0].embedding(),
            traces[1].embedding(),
            traces[2].embedding(),
            margin,
        )?;
        if !with_grad || !out.is_active() {
            return Ok((out.loss, None));
        }
        let mut g = backward(params, feats[0], &traces[0], &out.grad_anchor)?;
        g.add_assign(&backward(params, feats[1], &traces[1], &out.grad_positive)?);
        g.add_assign(&backward(params, feats[2], &traces[2], &out.grad_negative)?);
        Ok::<_, Error>((out.loss, Some(g)))
    })?;
    let loss = per_triplet.iter().map(|(l, _)| l).sum();
    let active = per_triplet.iter().filter(|(l, _)| *l > 0.0).count();
    let grads = with_grad.then(|| {
        Gradients::sum(
            params.config,
            per_triplet.iter().filter_map(|(_, g)| g.as_ref()),
        )
    });
    Ok((loss, active, grads))
}

/// Triplet fine-tuning of `base_checkpoint`. Anchors are the training-split
/// utterances of speakers with a severity label; male negatives come from
/// any other training speaker.
pub fn finetune_triplet(
    manifest: &Manifest,
    base_checkpoint: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<FinetuneOutcome> {
    config.validate()?;
    create_dir(out_dir)?;
    let mut params = load_matching(base_checkpoint, config)?;
    let t = &config.triplet;
    let margin = TripletMargin::new(t.alpha)?;
    let profiles = manifest.profiles();
    let split = manifest.split(config.eval.held_out);
    let pool: Vec<_> = split.train.iter().map(|&i| manifest.utterance(i)).collect();
    let anchors: Vec<_> = pool
        .iter()
        .filter(|u| profiles.contains_key(&u.speaker_id))
        .cloned()
        .collect();
    let sampler = |stream| {
        BatchSampler::new(
            anchors.clone(),
            pool.clone(),
            profiles.clone(),
            t.batch_size,
            t.schedule,
            seed::derive(config.seed, stream),
        )
    };
    let mut train_batches = sampler(TRIPLET_STREAM)?;
    let eval_batch = sampler(EVAL_BATCH_STREAM)?.next_batch()?;
    let mut store = feature_store(manifest, config)?;

    let (eval_loss_start, _, _) =
        triplet_batch_loss(&params, &mut store, &eval_batch, margin, false)?;
    let mut metrics = String::from("iteration,loss,active\n");
    let mut losses = Vec::with_capacity(t.iterations);
    for it in 1..=t.iterations {
        let batch = train_batches.next_batch()?;
        let (loss, active, grads) = triplet_batch_loss(&params, &mut store, &batch, margin, true)?;
        if active > 0 {
            sgd_step(
                &mut params,
                &grads.expect("gradients requested"),
                t.lr,
                t.clip,
            )?;
        }
        losses.push(loss);
        writeln!(metrics, "{it},{loss:.9},{active}").unwrap();
    }
    let (eval_loss_end, _, _) =
        triplet_batch_loss(&params, &mut store, &eval_batch, margin, false)?;
    writeln!(
        metrics,
        "eval_start,{eval_loss_start:.9},\neval_end,{eval_loss_end:.9},"
    )
    .unwrap();

    let checkpoint = out_dir.join(FINETUNED_NAME);
    save_checkpoint(&params, &checkpoint)?;
    write_file(&out_dir.join(TRIPLET_METRICS_NAME), &metrics)?;
    Ok(FinetuneOutcome {
        checkpoint,
        losses,
        eval_loss_start,
        eval_loss_end,
    })
}
