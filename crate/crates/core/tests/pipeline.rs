mod common;

use std::fs;
use std::path::Path;

use common::dominant_frequency;
use dsr_core::audio::read_wav;
use dsr_core::augment::AugmentCoeffs;
use dsr_core::encoder::Embedding;
use dsr_core::encoder::{encode_checkpoint, init_params, load_checkpoint};
use dsr_core::eval::{eer, Report, CSV_HEADER};
use dsr_core::losses::TripletMargin;
use dsr_core::pipeline::{
    evaluate, finetune_triplet, pretrain_ge2e, synth_corpus, triplet_batch_loss,
    verification_trials, EvalInputs, FeatureStore, Manifest, RunConfig, GE2E_METRICS_NAME,
    MANIFEST_NAME,
};
use dsr_core::sampling::{
    Batch, Gender, NegativeSource, PolicyTag, Sample, Severity, Transform, Triplet,
};
use dsr_core::Error;

fn tiny() -> RunConfig {
    let mut c = RunConfig::default();
    c.corpus.speakers = 4;
    c.corpus.female_speakers = 2;
    c.corpus.utterances = 5;
    c.corpus.duration_s = 0.3;
    c.eval.held_out = 2;
    c.ge2e.speakers = 2;
    c.ge2e.utterances = 2;
    c.ge2e.iterations = 3;
    c.triplet.iterations = 2;
    c.triplet.batch_size = 4;
    c
}

fn corpus(cfg: &RunConfig, dir: &Path) -> Manifest {
    synth_corpus(cfg, dir).unwrap();
    Manifest::load(dir.join(MANIFEST_NAME)).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push((
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            ));
        }
    }
    out.sort();
    out
}

#[test]
fn corpus_counts_pitch_and_determinism() {
    let mut cfg = RunConfig::default();
    cfg.corpus.speakers = 8;
    cfg.corpus.utterances = 10;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = corpus(&cfg, a.path());
    synth_corpus(&cfg, b.path()).unwrap();

    assert_eq!(m.len(), 80);
    assert_eq!(
        fs::read_to_string(a.path().join(MANIFEST_NAME))
            .unwrap()
            .lines()
            .count(),
        80
    );
    assert_eq!(fs::read_dir(a.path().join("wavs")).unwrap().count(), 80);
    assert_eq!(files(a.path()), files(b.path()));

    for i in 0..m.len() {
        let rec = &m.records[i];
        let audio = read_wav(m.resolve(i)).unwrap();
        let f0 = dominant_frequency(audio.samples(), audio.sample_rate() as f64, 60.0, 400.0);
        match rec.gender {
            Gender::Female => assert!(f0 >= 178.0, "{} at {f0} Hz", rec.wav_path),
            Gender::Male => assert!(f0 <= 152.0, "{} at {f0} Hz", rec.wav_path),
        }
    }
}

#[test]
fn manifest_load_reports_missing_audio() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(&tiny(), dir.path());
    let mut text = m.to_tsv();
    text.push_str("wavs/missing.wav\tf00\tfemale\tmoderate_severe\tone\n");
    let path = dir.path().join("broken.tsv");
    fs::write(&path, text).unwrap();
    match Manifest::load(&path) {
        Err(Error::Manifest { line, .. }) => assert_eq!(line, m.len() + 1),
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_iterations_keep_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    let m = corpus(&cfg, &dir.path().join("c"));
    cfg.ge2e.iterations = 0;
    let out = pretrain_ge2e(&m, &cfg, &dir.path().join("p")).unwrap();
    let saved = fs::read(&out.checkpoint).unwrap();
    assert_eq!(
        saved,
        encode_checkpoint(&init_params(&cfg.encoder()).unwrap())
    );
}

#[test]
fn ge2e_pretraining_learns_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.ge2e.iterations = 200;
    let m = corpus(&cfg, &dir.path().join("c"));
    let a = pretrain_ge2e(&m, &cfg, &dir.path().join("a")).unwrap();
    let b = pretrain_ge2e(&m, &cfg, &dir.path().join("b")).unwrap();
    assert!(
        a.losses[199] < a.losses[0],
        "{} vs {}",
        a.losses[199],
        a.losses[0]
    );
    let metrics = |d: &str| fs::read(dir.path().join(d).join(GE2E_METRICS_NAME)).unwrap();
    assert_eq!(metrics("a"), metrics("b"));
    assert_eq!(
        fs::read(&a.checkpoint).unwrap(),
        fs::read(&b.checkpoint).unwrap()
    );
}

#[test]
fn ge2e_needs_enough_speakers() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    let m = corpus(&cfg, &dir.path().join("c"));
    cfg.ge2e.speakers = 5;
    assert!(matches!(
        pretrain_ge2e(&m, &cfg, &dir.path().join("p")),
        Err(Error::InsufficientBatch(_))
    ));
}

#[test]
fn finetuning_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    let m = corpus(&cfg, &dir.path().join("c"));
    let pre = pretrain_ge2e(&m, &cfg, &dir.path().join("p")).unwrap();
    cfg.hidden_dim = 16;
    assert!(matches!(
        finetune_triplet(&m, &pre.checkpoint, &cfg, &dir.path().join("f")),
        Err(Error::Shape(_))
    ));
}

#[test]
fn degenerate_triplets_give_zero_loss_and_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let m = corpus(&cfg, dir.path());
    let params = init_params(&cfg.encoder()).unwrap();
    let mut store = FeatureStore::load(&m, cfg.mel(), cfg.sample_rate, None).unwrap();
    let same = |i: usize| Sample {
        utterance: m.utterance(i),
        transform: Transform::Identity,
    };
    let triplets = (0..4)
        .map(|i| Triplet {
            anchor: same(i),
            positive: same(i),
            negative: same(i),
            policy: PolicyTag {
                gender: Gender::Female,
                severity: Severity::ModerateSevere,
                coeffs: AugmentCoeffs::new(0.5, 0.5).unwrap(),
                negative: NegativeSource::PitchShiftedSelf,
            },
        })
        .collect();
    let batch = Batch {
        triplets,
        short: false,
    };
    let (loss, active, grads) = triplet_batch_loss(
        &params,
        &mut store,
        &batch,
        TripletMargin::new(0.0).unwrap(),
        true,
    )
    .unwrap();
    assert_eq!((loss, active), (0.0, 0));
    assert_eq!(grads.unwrap().max_abs(), 0.0);
}

#[test]
fn finetuning_lowers_fixed_batch_loss() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.triplet.iterations = 40;
    let m = corpus(&cfg, &dir.path().join("c"));
    let pre = pretrain_ge2e(&m, &cfg, &dir.path().join("p")).unwrap();
    let ft = finetune_triplet(&m, &pre.checkpoint, &cfg, &dir.path().join("f")).unwrap();
    assert!(
        ft.eval_loss_end < ft.eval_loss_start,
        "{} -> {}",
        ft.eval_loss_start,
        ft.eval_loss_end
    );
    assert_eq!(ft.losses.len(), 40);
    assert!(load_checkpoint(&ft.checkpoint).is_ok());
}

#[test]
fn evaluation_report_with_wer_and_mos() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let m = corpus(&cfg, &dir.path().join("c"));
    let pre = pretrain_ge2e(&m, &cfg, &dir.path().join("p")).unwrap();
    let hyp = dir.path().join("hyp.tsv");
    let lines: String = m
        .records
        .iter()
        .map(|r| format!("{}\t{}\n", r.wav_path, r.transcript.to_uppercase()))
        .collect();
    fs::write(&hyp, lines).unwrap();
    let mos = dir.path().join("mos.csv");
    fs::write(
        &mos,
        "cohort,score\nfemale,3\nfemale,4\nfemale,5\nmale,4\nmale,4\n",
    )
    .unwrap();
    let inputs = EvalInputs {
        hypotheses: Some(hyp),
        mos: Some(mos),
    };
    let out = evaluate(&m, &pre.checkpoint, &cfg, &inputs, &dir.path().join("e")).unwrap();
    assert_eq!(out.report.get("wer_pct", "all"), Some(0.0));
    assert_eq!(out.report.get("mos", "female"), Some(4.0));
    let text = fs::read_to_string(dir.path().join("e/report.txt")).unwrap();
    assert!(text.contains("4.00 ± 2.48"), "{text}");
    let csv = fs::read_to_string(dir.path().join("e/report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    assert!(csv.contains("probe_female_pct,female_pitch_shifted,"));

    let bad = EvalInputs {
        hypotheses: Some(dir.path().join("nope.tsv")),
        mos: None,
    };
    assert!(matches!(
        evaluate(&m, &pre.checkpoint, &cfg, &bad, &dir.path().join("e2")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn perfect_separation_reports_zero_eer() {
    let emb = |v: Vec<f64>| Embedding::normalized(v).unwrap();
    let labelled = vec![
        ("a".to_string(), emb(vec![1.0, 0.0, 0.0])),
        ("a".to_string(), emb(vec![0.9, 0.1, 0.0])),
        ("b".to_string(), emb(vec![0.0, 1.0, 0.0])),
        ("b".to_string(), emb(vec![0.1, 0.9, 0.0])),
        ("c".to_string(), emb(vec![0.0, 0.0, 1.0])),
        ("c".to_string(), emb(vec![0.0, 0.1, 0.9])),
    ];
    let trials = verification_trials(&labelled, 0, 1).unwrap();
    assert_eq!(trials.len(), 15);
    let mut report = Report::new("synthetic");
    report.push("eer_pct", "held_out", 100.0 * eer(&trials).unwrap());
    assert!(report.to_text().contains("0.00%"));
    assert_eq!(verification_trials(&labelled, 5, 1).unwrap().len(), 5);
}
