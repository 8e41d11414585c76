//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line; exits nonzero if any criterion fails.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use dsr_core::audio::{AudioBuffer, MelFrames};
use dsr_core::augment::{pitch_shift, tempo_change};
use dsr_core::encoder::{encode, encode_backward, init_params, EncoderConfig, EncoderParams};
use dsr_core::eval::{cosine, eer, mos_summary, wer, TrialScore};
use dsr_core::losses::{
    ctc_loss, ge2e_loss, s2s_ce_loss, triplet_loss, Ge2eScale, LogProbSeq, TripletMargin,
};
use dsr_core::pipeline::{
    evaluate, finetune_triplet, pretrain_ge2e, synth_corpus, EvalInputs, Manifest, RunConfig,
    MANIFEST_NAME,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-5;
const INSTANCES: usize = 20;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (
        t < limit,
        format!("{:.1}s of {}s", t.as_secs_f64(), limit.as_secs()),
    )
}

fn flatten(p: &EncoderParams) -> Vec<f64> {
    p.tensors().concat()
}

fn unflatten(template: &EncoderParams, x: &[f64]) -> EncoderParams {
    let mut p = template.clone();
    let mut offset = 0;
    for t in p.tensors_mut() {
        let n = t.len();
        t.copy_from_slice(&x[offset..offset + n]);
        offset += n;
    }
    p
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 5];

    for i in 0..INSTANCES {
        let cfg = EncoderConfig {
            n_layers: 2,
            hidden_dim: 8,
            embed_dim: 8,
            input_dim: 4,
            seed: 100 + i as u64,
        };
        let params = init_params(&cfg).unwrap();
        let frames = MelFrames::from_rows((0..3).map(|_| normal_vec(&mut rng, 4)).collect());
        let grad_out = normal_vec(&mut rng, 8);
        let analytic = flatten(&encode_backward(&params, &frames, &grad_out).unwrap().0);
        let numeric = numeric_grad(&flatten(&params), FD_STEP, |x| {
            let e = encode(&unflatten(&params, x), &frames).unwrap();
            e.iter().zip(&grad_out).map(|(a, b)| a * b).sum()
        });
        worst[0] = worst[0].max(max_rel_err(&analytic, &numeric));
    }

    for _ in 0..INSTANCES {
        let d = 6;
        let x = normal_vec(&mut rng, 3 * d);
        let margin = TripletMargin::new(0.3).unwrap();
        let out = triplet_loss(&x[..d], &x[d..2 * d], &x[2 * d..], margin).unwrap();
        let numeric = numeric_grad(&x, FD_STEP, |v| {
            triplet_loss(&v[..d], &v[d..2 * d], &v[2 * d..], margin)
                .unwrap()
                .loss
        });
        let analytic = [out.grad_anchor, out.grad_positive, out.grad_negative].concat();
        worst[1] = worst[1].max(max_rel_err(&analytic, &numeric));
    }

    for _ in 0..INSTANCES {
        let (n, m, d) = (3, 3, 4);
        let flat = normal_vec(&mut rng, n * m * d);
        let scale = Ge2eScale::new(10.0, -5.0).unwrap();
        let shape = |x: &[f64]| -> Vec<Vec<Vec<f64>>> {
            x.chunks(m * d)
                .map(|s| s.chunks(d).map(<[f64]>::to_vec).collect())
                .collect()
        };
        let out = ge2e_loss(&shape(&flat), scale).unwrap();
        let analytic: Vec<f64> = out
            .grad_embeddings
            .iter()
            .flatten()
            .flatten()
            .copied()
            .collect();
        let numeric = numeric_grad(&flat, FD_STEP, |x| {
            ge2e_loss(&shape(x), scale).unwrap().loss
        });
        let numeric_w = numeric_grad(&[scale.w], FD_STEP, |w| {
            ge2e_loss(
                &shape(&flat),
                Ge2eScale {
                    w: w[0],
                    b: scale.b,
                },
            )
            .unwrap()
            .loss
        });
        worst[2] = worst[2]
            .max(max_rel_err(&analytic, &numeric))
            .max(max_rel_err(&[out.grad_w], &numeric_w));
    }

    let mut done = 0;
    while done < INSTANCES {
        let (t, k) = (4, 3);
        let target: Vec<usize> = (0..rng.random_range(1..=2))
            .map(|_| rng.random_range(1..k))
            .collect();
        let frames = log_softmax_frames(&mut rng, t, k);
        let Ok(out) = ctc_loss(&LogProbSeq::new(frames.clone(), 0).unwrap(), &target) else {
            continue;
        };
        let numeric = numeric_grad(&frames.concat(), FD_STEP, |x| {
            let f = x.chunks(k).map(<[f64]>::to_vec).collect();
            ctc_loss(&LogProbSeq::new_unchecked(f, 0).unwrap(), &target)
                .unwrap()
                .loss
        });
        worst[3] = worst[3].max(max_rel_err(&out.grad.concat(), &numeric));
        done += 1;
    }

    for _ in 0..INSTANCES {
        let frames = log_softmax_frames(&mut rng, 5, 4);
        let target: Vec<usize> = (0..5).map(|_| rng.random_range(0..4)).collect();
        let out = s2s_ce_loss(&frames, &target).unwrap();
        let numeric = numeric_grad(&frames.concat(), FD_STEP, |v| {
            let f: Vec<Vec<f64>> = v.chunks(4).map(<[f64]>::to_vec).collect();
            s2s_ce_loss(&f, &target).unwrap().loss
        });
        worst[4] = worst[4].max(max_rel_err(&out.grad.concat(), &numeric));
    }

    let (fast, time) = within(start, Duration::from_secs(60));
    verdict(
        worst.iter().all(|&w| w < GRAD_TOL) && fast,
        format!(
            "max rel err encoder {:.1e} triplet {:.1e} ge2e {:.1e} ctc {:.1e} ce {:.1e} (tol {GRAD_TOL:.0e}), {time}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn ctc_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut cases = 0;
    while cases < 200 {
        let t = rng.random_range(1..=4);
        let k = rng.random_range(2..=3);
        let target: Vec<usize> = (0..rng.random_range(0..=2))
            .map(|_| rng.random_range(1..k))
            .collect();
        let frames = log_softmax_frames(&mut rng, t, k);
        let Ok(out) = ctc_loss(&LogProbSeq::new(frames.clone(), 0).unwrap(), &target) else {
            continue;
        };
        let brute = -ctc_brute_force_prob(&frames, 0, &target).ln();
        worst = worst.max((out.loss - brute).abs());
        cases += 1;
    }
    let (fast, time) = within(start, Duration::from_secs(10));
    verdict(
        worst <= 1e-9 && fast,
        format!("{cases} cases, max |diff| {worst:.1e} (tol 1e-9), {time}"),
    )
}

fn dsp_calibration() -> Verdict {
    let start = Instant::now();
    let sr = 16_000;
    let tone = AudioBuffer::new(sine(220.0, sr, 1.0, 0.5), sr).unwrap();
    let shifted = pitch_shift(&tone, 0.5).unwrap();
    let f_shift = dominant_frequency(shifted.samples(), sr as f64, 100.0, 400.0);
    let dur_shift = shifted.len() as f64 / tone.len() as f64;
    let slowed = tempo_change(&tone, 0.5).unwrap();
    let f_slow = dominant_frequency(slowed.samples(), sr as f64, 100.0, 400.0);
    let dur_slow = slowed.len() as f64 / tone.len() as f64;

    let pass = (f_shift - 165.0).abs() <= 3.0
        && (dur_shift - 1.0).abs() < 0.01
        && (dur_slow - 2.0).abs() <= 0.02
        && (f_slow - 220.0).abs() / 220.0 < 0.03;
    let (fast, time) = within(start, Duration::from_secs(10));
    verdict(
        pass && fast,
        format!(
            "pitch 0.5: {f_shift:.2} Hz, duration x{dur_shift:.4}; tempo 0.5: duration x{dur_slow:.4}, peak {f_slow:.2} Hz; {time}"
        ),
    )
}

fn ge2e_hand_value() -> Verdict {
    let e = vec![vec![vec![1.0, 0.0]; 2], vec![vec![0.0, 1.0]; 2]];
    let loss = ge2e_loss(&e, Ge2eScale::new(1.0, 0.0).unwrap())
        .unwrap()
        .loss;
    verdict(
        (loss - 1.253046).abs() <= 1e-5,
        format!("loss {loss:.7} (want 1.253046 +- 1e-5)"),
    )
}

/// Files whose bytes must repeat across identical runs.
const RUN_ARTIFACTS: &[&str] = &[
    "corpus/manifest.tsv",
    "pretrain/pretrained.dsrk",
    "pretrain/ge2e_metrics.csv",
    "eval_pretrained/report.txt",
    "eval_pretrained/report.csv",
    "finetune/finetuned.dsrk",
    "finetune/triplet_metrics.csv",
    "eval_finetuned/report.txt",
    "eval_finetuned/report.csv",
];

struct Experiment {
    eer_pre: f64,
    eer_post: f64,
    female_pre: f64,
    female_post: f64,
    n_probe: usize,
    elapsed: Duration,
    dir: PathBuf,
}

fn experiment_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.corpus.speakers = 8;
    cfg.corpus.female_speakers = 4;
    cfg.triplet.alpha = 0.3;
    cfg.triplet.iterations = 300;
    cfg.triplet.batch_size = 64;
    cfg.eval.probe_pitch_coeff = 0.5;
    cfg
}

fn run_experiment(dir: &Path) -> dsr_core::Result<Experiment> {
    let start = Instant::now();
    let cfg = experiment_config();
    synth_corpus(&cfg, &dir.join("corpus"))?;
    let manifest = Manifest::load(dir.join("corpus").join(MANIFEST_NAME))?;
    let pre = pretrain_ge2e(&manifest, &cfg, &dir.join("pretrain"))?;
    let ev_pre = evaluate(
        &manifest,
        &pre.checkpoint,
        &cfg,
        &EvalInputs::default(),
        &dir.join("eval_pretrained"),
    )?;
    let ft = finetune_triplet(&manifest, &pre.checkpoint, &cfg, &dir.join("finetune"))?;
    let ev_post = evaluate(
        &manifest,
        &ft.checkpoint,
        &cfg,
        &EvalInputs::default(),
        &dir.join("eval_finetuned"),
    )?;
    Ok(Experiment {
        eer_pre: ev_pre.eer,
        eer_post: ev_post.eer,
        female_pre: ev_pre.probe_female_shifted,
        female_post: ev_post.probe_female_shifted,
        n_probe: cfg.corpus.female_speakers * cfg.eval.held_out,
        elapsed: start.elapsed(),
        dir: dir.to_path_buf(),
    })
}

fn gender_experiment(run: &dsr_core::Result<Experiment>) -> Verdict {
    let x = match run {
        Ok(x) => x,
        Err(e) => return verdict(false, format!("pipeline error: {e}")),
    };
    let flipped = 1.0 - x.female_pre;
    let degradation = x.eer_post - x.eer_pre;
    let checks = [
        x.eer_pre <= 0.05,
        flipped >= 0.5,
        x.female_post >= 0.75,
        degradation <= 0.03,
        x.elapsed < Duration::from_secs(600),
    ];
    verdict(
        checks.iter().all(|&c| c),
        format!(
            "pretrained EER {:.2}% (<=5), shifted female probed male {:.1}% (>=50), after fine-tuning probed female {:.1}% (>=75) of {} utterances, EER {:.2}% (change {:+.2}pp, <=3), {:.1}s of 600s",
            100.0 * x.eer_pre,
            100.0 * flipped,
            100.0 * x.female_post,
            x.n_probe,
            100.0 * x.eer_post,
            100.0 * degradation,
            x.elapsed.as_secs_f64()
        ),
    )
}

#[allow(clippy::approx_constant)]
fn metric_exactness() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let trials = |g: &[f64], i: &[f64]| -> Vec<TrialScore> {
        g.iter()
            .map(|&s| TrialScore::genuine(s))
            .chain(i.iter().map(|&s| TrialScore::impostor(s)))
            .collect()
    };
    check(
        "wer identical",
        wer("the cat sat", "the cat sat").unwrap() == 0.0,
    );
    check(
        "wer cat/bat",
        wer("the cat sat", "the bat").unwrap() == 2.0 / 3.0,
    );
    check(
        "wer empty hypothesis",
        wer("the cat sat", "").unwrap() == 1.0,
    );
    check("wer empty reference", wer("", "x").is_err());
    check(
        "eer perfect",
        eer(&trials(&[0.9; 3], &[0.1; 3])).unwrap() == 0.0,
    );
    check(
        "eer sweep",
        eer(&trials(&[0.9, 0.8, 0.4], &[0.5, 0.3, 0.2])).unwrap() == 1.0 / 3.0,
    );
    check(
        "eer inverted",
        eer(&trials(&[0.1; 3], &[0.9; 3])).unwrap() == 1.0,
    );
    check("eer one class", eer(&trials(&[0.9], &[])).is_err());
    check(
        "cosine",
        (cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.707107).abs() < 1e-6,
    );
    let mos = mos_summary(&[3.0, 4.0, 5.0]).unwrap();
    check(
        "mos {3,4,5}",
        mos.to_string() == "4.00 ± 2.48" && (mos.half_width_95 - 2.48).abs() <= 0.01,
    );
    check(
        "mos constant",
        mos_summary(&[4.0; 4]).unwrap().to_string() == "4.00 ± 0.00",
    );
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("all 11 examples exact; MOS {{3,4,5}} = {mos}")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn determinism(a: &dsr_core::Result<Experiment>, b: &dsr_core::Result<Experiment>) -> Verdict {
    let (Ok(a), Ok(b)) = (a, b) else {
        return verdict(false, "a pipeline run failed");
    };
    let differing: Vec<&str> = RUN_ARTIFACTS
        .iter()
        .copied()
        .filter(
            |rel| match (fs::read(a.dir.join(rel)), fs::read(b.dir.join(rel))) {
                (Ok(x), Ok(y)) => x != y,
                _ => true,
            },
        )
        .collect();
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{} artifacts byte-identical across two seeded runs",
                RUN_ARTIFACTS.len()
            )
        } else {
            format!("differ or missing: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut report = |n: usize, name: &'static str, v: Verdict| {
        println!(
            "criterion {n} {name}: {} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((name, v));
    };
    report(1, "gradient correctness", gradient_correctness());
    report(2, "CTC oracle equivalence", ctc_oracle());
    report(3, "DSP calibration", dsp_calibration());
    report(4, "GE2E hand value", ge2e_hand_value());

    let root = tempfile::tempdir().expect("temp dir");
    let first = run_experiment(&root.path().join("run1"));
    report(
        5,
        "gender-consistency experiment",
        gender_experiment(&first),
    );
    report(6, "metric exactness", metric_exactness());
    let second = run_experiment(&root.path().join("run2"));
    report(7, "determinism", determinism(&first, &second));

    let failed = results.iter().filter(|(_, v)| !v.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
