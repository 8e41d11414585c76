//! Synthetic multi-speaker corpus.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::manifest::{Manifest, ManifestRecord};
use crate::audio::{synth_voice, write_wav, VoiceSpec};
use crate::sampling::Gender;
use crate::{par, seed, Error, Result};

pub const FEMALE_F0: (f64, f64) = (180.0, 260.0);
pub const MALE_F0: (f64, f64) = (90.0, 150.0);
pub const MANIFEST_NAME: &str = "manifest.tsv";

const WORDS: &[&str] = &[
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "alpha",
    "bravo",
    "charlie",
    "delta",
    "echo",
    "command",
    "enter",
    "delete",
    "backspace",
    "paragraph",
    "sentence",
];

/// Voice parameters of one synthetic speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerVoice {
    pub speaker_id: String,
    pub gender: Gender,
    pub f0: f64,
    pub rolloff: f64,
}

/// Draws the speaker set for `config`; deterministic in the seed.
pub fn speaker_voices(config: &RunConfig) -> Vec<SpeakerVoice> {
    let c = &config.corpus;
    (0..c.speakers)
        .map(|k| {
            let female = k < c.female_speakers;
            let (gender, (lo, hi), tag, n) = if female {
                (Gender::Female, FEMALE_F0, 'f', k)
            } else {
                (Gender::Male, MALE_F0, 'm', k - c.female_speakers)
            };
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed::derive(config.seed, 0xC0_0000 + k as u64));
            SpeakerVoice {
                speaker_id: format!("{tag}{n:02}"),
                gender,
                f0: rng.random_range(lo..=hi),
                rolloff: rng.random_range(c.rolloff_min..=c.rolloff_max),
            }
        })
        .collect()
}

fn utterance_spec(
    config: &RunConfig,
    voice: &SpeakerVoice,
    k: usize,
    u: usize,
) -> (VoiceSpec, String) {
    let c = &config.corpus;
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed::derive(config.seed, ((k as u64) << 20) | u as u64));
    let (lo, hi) = match voice.gender {
        Gender::Female => FEMALE_F0,
        Gender::Male => MALE_F0,
    };
    let jitter = if c.f0_jitter > 0.0 {
        rng.random_range(-c.f0_jitter..=c.f0_jitter)
    } else {
        0.0
    };
    let f0 = (voice.f0 * (1.0 + jitter)).clamp(lo, hi);
    let vibrato_cents = if c.vibrato_max_cents > 0.0 {
        rng.random_range(0.0..=c.vibrato_max_cents)
    } else {
        0.0
    };
    let ceiling = 0.45 * config.sample_rate as f64 / (f0 * 2f64.powf(vibrato_cents / 1200.0));
    let n_harmonics = c.max_harmonics.min(ceiling.floor() as usize).max(1);
    let n_words = rng.random_range(1..=3);
    let transcript: Vec<&str> = (0..n_words)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect();
    let spec = VoiceSpec {
        f0,
        n_harmonics,
        harmonic_rolloff: voice.rolloff,
        duration_s: c.duration_s,
        vibrato_cents,
        seed: rng.random(),
    };
    (spec, transcript.join(" "))
}

/// Writes `speakers x utterances` WAV files under `out_dir/wavs` and a
/// manifest at `out_dir/manifest.tsv`.
pub fn synth_corpus(config: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    let wav_dir = out_dir.join("wavs");
    fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let voices = speaker_voices(config);
    let jobs: Vec<(usize, usize)> = (0..voices.len())
        .flat_map(|k| (0..config.corpus.utterances).map(move |u| (k, u)))
        .collect();
    let records = par::try_map(&jobs, |&(k, u)| {
        let voice = &voices[k];
        let (spec, transcript) = utterance_spec(config, voice, k, u);
        let audio = synth_voice(&spec, config.sample_rate)?;
        let rel = format!("wavs/{}_{u:03}.wav", voice.speaker_id);
        write_wav(&audio, out_dir.join(&rel))?;
        Ok(ManifestRecord {
            wav_path: rel,
            speaker_id: voice.speaker_id.clone(),
            gender: voice.gender,
            severity: config.corpus.severity,
            transcript,
        })
    })?;
    let manifest = Manifest {
        records,
        root: out_dir.to_path_buf(),
    };
    manifest.save(out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}
