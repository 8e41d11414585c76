//! Run configuration, read from INI-style `key = value` sections.
//!
//! ```ini
//! [audio]
//! sample_rate = 16000
//! n_mels = 20
//!
//! [triplet]
//! iterations = 300
//! ```
//!
//! Unknown sections or keys are rejected. Missing keys keep their defaults.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::audio::MelConfig;
use crate::encoder::EncoderConfig;
use crate::sampling::{Schedule, Severity};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub speakers: usize,
    pub female_speakers: usize,
    pub utterances: usize,
    pub duration_s: f64,
    /// Severity written for every speaker; `None` writes `none`.
    pub severity: Option<Severity>,
    pub max_harmonics: usize,
    pub rolloff_min: f64,
    pub rolloff_max: f64,
    pub vibrato_max_cents: f64,
    /// Relative per-utterance f0 jitter around the speaker's f0.
    pub f0_jitter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ge2eConfig {
    pub speakers: usize,
    pub utterances: usize,
    pub iterations: usize,
    pub lr: f64,
    pub clip: f64,
    pub init_w: f64,
    pub init_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletConfig {
    pub alpha: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub lr: f64,
    pub clip: f64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Utterances per speaker reserved for evaluation (the last ones in
    /// manifest order).
    pub held_out: usize,
    pub probe_pitch_coeff: f64,
    /// Cap on verification trials; 0 keeps every pair.
    pub max_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sample_rate: u32,
    pub n_mels: usize,
    pub win_s: f64,
    pub hop_s: f64,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub corpus: CorpusConfig,
    pub ge2e: Ge2eConfig,
    pub triplet: TripletConfig,
    pub eval: EvalConfig,
    /// Directory for cached features; empty disables the disk cache.
    pub feature_cache: String,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sample_rate: 16_000,
            n_mels: 20,
            win_s: 0.025,
            hop_s: 0.010,
            n_layers: 2,
            hidden_dim: 32,
            embed_dim: 16,
            corpus: CorpusConfig {
                speakers: 8,
                female_speakers: 4,
                utterances: 12,
                duration_s: 0.5,
                severity: Some(Severity::ModerateSevere),
                max_harmonics: 80,
                rolloff_min: 4.0,
                rolloff_max: 10.0,
                vibrato_max_cents: 30.0,
                f0_jitter: 0.02,
            },
            ge2e: Ge2eConfig {
                speakers: 4,
                utterances: 4,
                iterations: 300,
                lr: 0.05,
                clip: 3.0,
                init_w: 10.0,
                init_b: -5.0,
            },
            triplet: TripletConfig {
                alpha: 0.3,
                batch_size: 64,
                iterations: 300,
                lr: 0.01,
                clip: 3.0,
                schedule: Schedule::Mixed,
            },
            eval: EvalConfig {
                held_out: 4,
                probe_pitch_coeff: 0.5,
                max_trials: 0,
            },
            feature_cache: String::new(),
            seed: 1,
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {value:?}")))
}

/// Drops a trailing `#` or `;` comment that follows whitespace.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if (b == b'#' || b == b';') && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

fn parse_severity(value: &str) -> Result<Option<Severity>> {
    match value {
        "none" => Ok(None),
        v => v.parse().map(Some),
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ini(&text)
    }

    /// Parses INI text over the defaults, then validates.
    pub fn from_ini(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(&section, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<()> {
        let s = section;
        match (section, key) {
            ("audio", "sample_rate") => self.sample_rate = parse(s, key, v)?,
            ("audio", "n_mels") => self.n_mels = parse(s, key, v)?,
            ("audio", "win_s") => self.win_s = parse(s, key, v)?,
            ("audio", "hop_s") => self.hop_s = parse(s, key, v)?,
            ("encoder", "n_layers") => self.n_layers = parse(s, key, v)?,
            ("encoder", "hidden_dim") => self.hidden_dim = parse(s, key, v)?,
            ("encoder", "embed_dim") => self.embed_dim = parse(s, key, v)?,
            ("corpus", "speakers") => self.corpus.speakers = parse(s, key, v)?,
            ("corpus", "female_speakers") => self.corpus.female_speakers = parse(s, key, v)?,
            ("corpus", "utterances") => self.corpus.utterances = parse(s, key, v)?,
            ("corpus", "duration_s") => self.corpus.duration_s = parse(s, key, v)?,
            ("corpus", "severity") => self.corpus.severity = parse_severity(v)?,
            ("corpus", "max_harmonics") => self.corpus.max_harmonics = parse(s, key, v)?,
            ("corpus", "rolloff_min") => self.corpus.rolloff_min = parse(s, key, v)?,
            ("corpus", "rolloff_max") => self.corpus.rolloff_max = parse(s, key, v)?,
            ("corpus", "vibrato_max_cents") => self.corpus.vibrato_max_cents = parse(s, key, v)?,
            ("corpus", "f0_jitter") => self.corpus.f0_jitter = parse(s, key, v)?,
            ("ge2e", "speakers") => self.ge2e.speakers = parse(s, key, v)?,
            ("ge2e", "utterances") => self.ge2e.utterances = parse(s, key, v)?,
            ("ge2e", "iterations") => self.ge2e.iterations = parse(s, key, v)?,
            ("ge2e", "lr") => self.ge2e.lr = parse(s, key, v)?,
            ("ge2e", "clip") => self.ge2e.clip = parse(s, key, v)?,
            ("ge2e", "init_w") => self.ge2e.init_w = parse(s, key, v)?,
            ("ge2e", "init_b") => self.ge2e.init_b = parse(s, key, v)?,
            ("triplet", "alpha") => self.triplet.alpha = parse(s, key, v)?,
            ("triplet", "batch_size") => self.triplet.batch_size = parse(s, key, v)?,
            ("triplet", "iterations") => self.triplet.iterations = parse(s, key, v)?,
            ("triplet", "lr") => self.triplet.lr = parse(s, key, v)?,
            ("triplet", "clip") => self.triplet.clip = parse(s, key, v)?,
            ("triplet", "schedule") => self.triplet.schedule = v.parse()?,
            ("eval", "held_out") => self.eval.held_out = parse(s, key, v)?,
            ("eval", "probe_pitch_coeff") => self.eval.probe_pitch_coeff = parse(s, key, v)?,
            ("eval", "max_trials") => self.eval.max_trials = parse(s, key, v)?,
            ("features", "cache_dir") => self.feature_cache = v.to_string(),
            ("run", "seed") => self.seed = parse(s, key, v)?,
            _ => return Err(Error::Config(format!("unknown key [{section}] {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive_counts = [
            ("audio.sample_rate", self.sample_rate as usize),
            ("audio.n_mels", self.n_mels),
            ("encoder.n_layers", self.n_layers),
            ("encoder.hidden_dim", self.hidden_dim),
            ("encoder.embed_dim", self.embed_dim),
            ("corpus.speakers", self.corpus.speakers),
            ("corpus.utterances", self.corpus.utterances),
            ("corpus.max_harmonics", self.corpus.max_harmonics),
            ("ge2e.speakers", self.ge2e.speakers),
            ("ge2e.utterances", self.ge2e.utterances),
            ("triplet.batch_size", self.triplet.batch_size),
        ];
        for (name, v) in positive_counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let positive_reals = [
            ("audio.win_s", self.win_s),
            ("audio.hop_s", self.hop_s),
            ("corpus.duration_s", self.corpus.duration_s),
            ("ge2e.lr", self.ge2e.lr),
            ("ge2e.clip", self.ge2e.clip),
            ("ge2e.init_w", self.ge2e.init_w),
            ("triplet.lr", self.triplet.lr),
            ("triplet.clip", self.triplet.clip),
        ];
        for (name, v) in positive_reals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.corpus.female_speakers > self.corpus.speakers {
            return Err(Error::Config(
                "corpus.female_speakers exceeds corpus.speakers".into(),
            ));
        }
        if !(self.triplet.alpha >= 0.0) {
            return Err(Error::Config("triplet.alpha must be nonnegative".into()));
        }
        if !(self.eval.probe_pitch_coeff > 0.0 && self.eval.probe_pitch_coeff <= 1.0) {
            return Err(Error::Config(
                "eval.probe_pitch_coeff must lie in (0, 1]".into(),
            ));
        }
        if !(self.corpus.rolloff_min <= self.corpus.rolloff_max)
            || !(self.corpus.f0_jitter >= 0.0)
            || !(self.corpus.vibrato_max_cents >= 0.0)
        {
            return Err(Error::Config("invalid corpus voice ranges".into()));
        }
        Ok(())
    }

    pub fn mel(&self) -> MelConfig {
        MelConfig {
            n_mels: self.n_mels,
            win_s: self.win_s,
            hop_s: self.hop_s,
        }
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            n_layers: self.n_layers,
            hidden_dim: self.hidden_dim,
            embed_dim: self.embed_dim,
            input_dim: self.n_mels,
            seed: seed::derive(self.seed, 0xE0C0),
        }
    }

    /// Canonical INI rendering; parsing it yields an equal config.
    pub fn to_ini(&self) -> String {
        let c = &self.corpus;
        let g = &self.ge2e;
        let t = &self.triplet;
        let e = &self.eval;
        let mut s = String::new();
        let sev = c.severity.map_or("none".to_string(), |v| v.to_string());
        writeln!(
            s,
            "[audio]\nsample_rate = {}\nn_mels = {}\nwin_s = {}\nhop_s = {}\n",
            self.sample_rate, self.n_mels, self.win_s, self.hop_s
        )
        .unwrap();
        writeln!(
            s,
            "[encoder]\nn_layers = {}\nhidden_dim = {}\nembed_dim = {}\n",
            self.n_layers, self.hidden_dim, self.embed_dim
        )
        .unwrap();
        writeln!(
            s,
            "[corpus]\nspeakers = {}\nfemale_speakers = {}\nutterances = {}\nduration_s = {}\nseverity = {sev}\nmax_harmonics = {}\nrolloff_min = {}\nrolloff_max = {}\nvibrato_max_cents = {}\nf0_jitter = {}\n",
            c.speakers, c.female_speakers, c.utterances, c.duration_s, c.max_harmonics, c.rolloff_min, c.rolloff_max, c.vibrato_max_cents, c.f0_jitter
        )
        .unwrap();
        writeln!(
            s,
            "[ge2e]\nspeakers = {}\nutterances = {}\niterations = {}\nlr = {}\nclip = {}\ninit_w = {}\ninit_b = {}\n",
            g.speakers, g.utterances, g.iterations, g.lr, g.clip, g.init_w, g.init_b
        )
        .unwrap();
        writeln!(
            s,
            "[triplet]\nalpha = {}\nbatch_size = {}\niterations = {}\nlr = {}\nclip = {}\nschedule = {}\n",
            t.alpha, t.batch_size, t.iterations, t.lr, t.clip, t.schedule
        )
        .unwrap();
        writeln!(
            s,
            "[eval]\nheld_out = {}\nprobe_pitch_coeff = {}\nmax_trials = {}\n",
            e.held_out, e.probe_pitch_coeff, e.max_trials
        )
        .unwrap();
        writeln!(s, "[features]\ncache_dir = {}\n", self.feature_cache).unwrap();
        write!(s, "[run]\nseed = {}\n", self.seed).unwrap();
        s
    }
}
