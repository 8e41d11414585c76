//! Evaluation: verification EER, gender probe, optional WER and MOS.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::manifest::Manifest;
use super::train::{create_dir, feature_store, load_matching};
use crate::encoder::{centroid, encode_batch, Embedding, EncoderParams};
use crate::eval::{cosine, eer, gender_probe, mos_summary, wer_counts, Report, TrialScore};
use crate::sampling::{Gender, Transform};
use crate::{seed, Error, Result};

pub const REPORT_STEM: &str = "report";
const TRIAL_STREAM: u64 = 0x7A1A;

/// Optional inputs to [`evaluate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalInputs {
    /// Tab-separated `wav_path  hypothesis` lines; paths as in the manifest.
    pub hypotheses: Option<PathBuf>,
    /// Comma-separated `cohort,score` lines after a header row.
    pub mos: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub report: Report,
    /// Fraction in [0, 1].
    pub eer: f64,
    /// Fraction of pitch-shifted held-out female utterances probed female.
    pub probe_female_shifted: f64,
}

/// Scores every pair of embeddings (or a seeded subset of at most
/// `max_trials` pairs when nonzero). Pairs from the same speaker are genuine.
pub fn verification_trials(
    embeddings: &[(String, Embedding)],
    max_trials: usize,
    seed: u64,
) -> Result<Vec<TrialScore>> {
    let mut pairs: Vec<(usize, usize)> = (0..embeddings.len())
        .flat_map(|i| (i + 1..embeddings.len()).map(move |j| (i, j)))
        .collect();
    if max_trials > 0 && pairs.len() > max_trials {
        pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        pairs.truncate(max_trials);
        pairs.sort_unstable();
    }
    pairs
        .into_iter()
        .map(|(i, j)| {
            let (si, ei) = &embeddings[i];
            let (sj, ej) = &embeddings[j];
            let s = cosine(ei, ej)?;
            Ok(if si == sj {
                TrialScore::genuine(s)
            } else {
                TrialScore::impostor(s)
            })
        })
        .collect()
}

/// Fraction of `embeddings` the probe labels female.
pub fn female_rate(embeddings: &[Embedding], female: &Embedding, male: &Embedding) -> Result<f64> {
    if embeddings.is_empty() {
        return Err(Error::EmptyInput("no embeddings to probe".into()));
    }
    let mut hits = 0usize;
    for e in embeddings {
        if gender_probe(e, female, male)?.gender == Gender::Female {
            hits += 1;
        }
    }
    Ok(hits as f64 / embeddings.len() as f64)
}

fn embed(
    params: &EncoderParams,
    store: &mut super::features::FeatureStore,
    ids: &[usize],
    transform: Transform,
) -> Result<Vec<Embedding>> {
    let wanted: Vec<(usize, Transform)> = ids.iter().map(|&i| (i, transform)).collect();
    let feats = store.features(&wanted)?;
    encode_batch(params, &feats)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn corpus_wer(manifest: &Manifest, path: &Path) -> Result<(f64, usize)> {
    let index: HashMap<&str, usize> = manifest
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.wav_path.as_str(), i))
        .collect();
    let (mut errors, mut words, mut n) = (0usize, 0usize, 0usize);
    for (line_no, line) in read_text(path)?.lines().enumerate() {
        let err = |message: String| Error::Manifest {
            path: path.to_path_buf(),
            line: line_no + 1,
            message,
        };
        let (wav, hyp) = line
            .split_once('\t')
            .ok_or_else(|| err("expected wav_path<TAB>hypothesis".into()))?;
        let &i = index
            .get(wav.trim())
            .ok_or_else(|| err(format!("{} is not in the manifest", wav.trim())))?;
        let (e, w) =
            wer_counts(&manifest.records[i].transcript, hyp).map_err(|e| err(e.to_string()))?;
        errors += e;
        words += w;
        n += 1;
    }
    if words == 0 {
        return Err(Error::UndefinedMetric(format!(
            "{} has no scored utterances",
            path.display()
        )));
    }
    Ok((errors as f64 / words as f64, n))
}

fn mos_rows(path: &Path, report: &mut Report) -> Result<()> {
    let mut cohorts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (line_no, line) in read_text(path)?.lines().enumerate().skip(1) {
        let err = |message: String| Error::Manifest {
            path: path.to_path_buf(),
            line: line_no + 1,
            message,
        };
        let (cohort, score) = line
            .split_once(',')
            .ok_or_else(|| err("expected cohort,score".into()))?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| err(format!("bad score {score:?}")))?;
        cohorts
            .entry(cohort.trim().to_string())
            .or_default()
            .push(score);
    }
    for (cohort, scores) in cohorts {
        report.push_mos("mos", &cohort, &mos_summary(&scores)?);
    }
    Ok(())
}

/// Evaluates `checkpoint` on the held-out split and writes
/// `report.txt` / `report.csv` into `out_dir`.
///
/// Gender centroids are the normalized means of the unmodified
/// training-split embeddings of each gender under the same checkpoint.
pub fn evaluate(
    manifest: &Manifest,
    checkpoint: &Path,
    config: &RunConfig,
    inputs: &EvalInputs,
    out_dir: &Path,
) -> Result<EvalOutcome> {
    config.validate()?;
    create_dir(out_dir)?;
    let params = load_matching(checkpoint, config)?;
    let split = manifest.split(config.eval.held_out);
    if split.test.is_empty() {
        return Err(Error::InsufficientTrials("no held-out utterances".into()));
    }
    let mut store = feature_store(manifest, config)?;
    let gender = |i: &usize| manifest.records[*i].gender;

    let test_emb = embed(&params, &mut store, &split.test, Transform::Identity)?;
    let labelled: Vec<(String, Embedding)> = split
        .test
        .iter()
        .zip(&test_emb)
        .map(|(&i, e)| (manifest.records[i].speaker_id.clone(), e.clone()))
        .collect();
    let trials = verification_trials(
        &labelled,
        config.eval.max_trials,
        seed::derive(config.seed, TRIAL_STREAM),
    )?;
    let eer_value = eer(&trials)?;

    let mut report = Report::new(format!(
        "evaluation of {}",
        checkpoint.file_name().map_or_else(
            || checkpoint.display().to_string(),
            |n| n.to_string_lossy().into_owned()
        )
    ));
    report.push("eer_pct", "held_out", 100.0 * eer_value);
    let genuine = trials.iter().filter(|t| t.is_genuine()).count();
    report.push("trials", "genuine", genuine as f64);
    report.push("trials", "impostor", (trials.len() - genuine) as f64);

    let train_f: Vec<usize> = split
        .train
        .iter()
        .copied()
        .filter(|i| gender(i) == Gender::Female)
        .collect();
    let train_m: Vec<usize> = split
        .train
        .iter()
        .copied()
        .filter(|i| gender(i) == Gender::Male)
        .collect();
    let test_f: Vec<usize> = split
        .test
        .iter()
        .copied()
        .filter(|i| gender(i) == Gender::Female)
        .collect();
    let test_m: Vec<usize> = split
        .test
        .iter()
        .copied()
        .filter(|i| gender(i) == Gender::Male)
        .collect();
    let mut probe_female_shifted = f64::NAN;
    if !train_f.is_empty() && !train_m.is_empty() && !test_f.is_empty() {
        let female_c = centroid(&embed(&params, &mut store, &train_f, Transform::Identity)?)?;
        let male_c = centroid(&embed(&params, &mut store, &train_m, Transform::Identity)?)?;
        let pick = |ids: &[usize]| -> Vec<Embedding> {
            ids.iter()
                .map(|i| test_emb[split.test.binary_search(i).expect("held-out id")].clone())
                .collect()
        };
        let shifted = embed(
            &params,
            &mut store,
            &test_f,
            Transform::Pitch(config.eval.probe_pitch_coeff),
        )?;
        probe_female_shifted = female_rate(&shifted, &female_c, &male_c)?;
        report.push(
            "probe_female_pct",
            "female_pitch_shifted",
            100.0 * probe_female_shifted,
        );
        report.push(
            "probe_female_pct",
            "female_original",
            100.0 * female_rate(&pick(&test_f), &female_c, &male_c)?,
        );
        if !test_m.is_empty() {
            report.push(
                "probe_female_pct",
                "male_original",
                100.0 * female_rate(&pick(&test_m), &female_c, &male_c)?,
            );
        }
    } else {
        report
            .notes
            .push("gender probe skipped: needs female and male speakers".into());
    }

    if let Some(path) = &inputs.hypotheses {
        let (w, n) = corpus_wer(manifest, path)?;
        report.push("wer_pct", "all", 100.0 * w);
        report.push("wer_utterances", "all", n as f64);
    }
    if let Some(path) = &inputs.mos {
        mos_rows(path, &mut report)?;
    }
    report.write(out_dir, REPORT_STEM)?;
    Ok(EvalOutcome {
        report,
        eer: eer_value,
        probe_female_shifted,
    })
}
