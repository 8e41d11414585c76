use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dsr_core::audio::{log_mel, synth_voice, AudioBuffer, MelConfig, MelFrames, VoiceSpec};
use dsr_core::encoder::{encode, init_params, EncoderConfig};
use dsr_core::par;
use std::hint::black_box;

fn voices(n: usize) -> Vec<AudioBuffer> {
    (0..n)
        .map(|i| {
            let spec = VoiceSpec {
                f0: 100.0 + 5.0 * i as f64,
                n_harmonics: 20,
                harmonic_rolloff: 6.0,
                duration_s: 0.5,
                vibrato_cents: 20.0,
                seed: i as u64,
            };
            synth_voice(&spec, 16_000).unwrap()
        })
        .collect()
}

fn feature_extraction(c: &mut Criterion) {
    let batch = voices(32);
    let mel = MelConfig::default();
    let mut group = c.benchmark_group("log_mel_batch");
    group.bench_function(BenchmarkId::new("parallel", batch.len()), |b| {
        b.iter(|| par::map(black_box(&batch), |a| log_mel(a, &mel).unwrap()))
    });
    group.bench_function(BenchmarkId::new("sequential", batch.len()), |b| {
        b.iter(|| par::map_sequential(black_box(&batch), |a| log_mel(a, &mel).unwrap()))
    });
    group.finish();
}

fn batch_encoding(c: &mut Criterion) {
    let mel = MelConfig::default();
    let feats: Vec<MelFrames> = voices(32)
        .iter()
        .map(|a| log_mel(a, &mel).unwrap())
        .collect();
    let params = init_params(&EncoderConfig::default()).unwrap();
    let mut group = c.benchmark_group("encode_batch");
    group.bench_function(BenchmarkId::new("parallel", feats.len()), |b| {
        b.iter(|| par::map(black_box(&feats), |f| encode(&params, f).unwrap()))
    });
    group.bench_function(BenchmarkId::new("sequential", feats.len()), |b| {
        b.iter(|| par::map_sequential(black_box(&feats), |f| encode(&params, f).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, feature_extraction, batch_encoding);
criterion_main!(benches);
