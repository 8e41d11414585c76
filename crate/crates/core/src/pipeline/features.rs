//! Log-mel features for manifest utterances, memoized per augmentation.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::manifest::Manifest;
use crate::audio::{log_mel, read_wav, AudioBuffer, MelConfig, MelFrames};
use crate::sampling::Transform;
use crate::{par, Error, Result};

type Key = (usize, (u8, u64));

/// Loads every utterance of a manifest once and hands out features for
/// `(utterance, transform)` pairs. Missing entries are computed in parallel.
///
/// With a cache directory, features are also stored on disk under the
/// SHA-256 of the audio samples, the transform and the mel settings.
pub struct FeatureStore {
    audio: Vec<AudioBuffer>,
    digests: Vec<[u8; 32]>,
    mel: MelConfig,
    cache_dir: Option<PathBuf>,
    memo: HashMap<Key, MelFrames>,
}

fn sample_digest(audio: &AudioBuffer) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(audio.sample_rate().to_le_bytes());
    for s in audio.samples() {
        h.update(s.to_le_bytes());
    }
    h.finalize().into()
}

fn encode_frames(frames: &MelFrames) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + frames.len() * frames.width() * 8);
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    out.extend_from_slice(&(frames.width() as u32).to_le_bytes());
    for row in &frames.frames {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode_frames(bytes: &[u8], mel: &MelConfig) -> Option<MelFrames> {
    let rows = u32::from_le_bytes(bytes.get(0..4)?.try_into().ok()?) as usize;
    let cols = u32::from_le_bytes(bytes.get(4..8)?.try_into().ok()?) as usize;
    if bytes.len() != 8 + rows * cols * 8 || cols != mel.n_mels {
        return None;
    }
    let mut values = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let frames: Vec<Vec<f64>> = (0..rows)
        .map(|_| values.by_ref().take(cols).collect())
        .collect();
    Some(MelFrames {
        frames,
        frame_hop_s: mel.hop_s,
        frame_win_s: mel.win_s,
    })
}

impl FeatureStore {
    /// Reads every WAV in the manifest.
    pub fn load(
        manifest: &Manifest,
        mel: MelConfig,
        sample_rate: u32,
        cache_dir: Option<&Path>,
    ) -> Result<Self> {
        let idx: Vec<usize> = (0..manifest.len()).collect();
        let audio = par::try_map(&idx, |&i| {
            let path = manifest.resolve(i);
            let buf = read_wav(&path)?;
            if buf.sample_rate() != sample_rate {
                return Err(Error::Validation(format!(
                    "{} has sample rate {}, config expects {sample_rate}",
                    path.display(),
                    buf.sample_rate()
                )));
            }
            Ok(buf)
        })?;
        Self::from_audio(audio, mel, cache_dir)
    }

    pub fn from_audio(
        audio: Vec<AudioBuffer>,
        mel: MelConfig,
        cache_dir: Option<&Path>,
    ) -> Result<Self> {
        if let Some(dir) = cache_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let digests = par::map(&audio, sample_digest);
        Ok(FeatureStore {
            audio,
            digests,
            mel,
            cache_dir: cache_dir.map(Path::to_path_buf),
            memo: HashMap::new(),
        })
    }

    pub fn audio(&self, id: usize) -> &AudioBuffer {
        &self.audio[id]
    }

    fn cache_path(&self, id: usize, transform: Transform) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let (tag, bits) = transform.key();
        let mut h = Sha256::new();
        h.update(self.digests[id]);
        h.update([tag]);
        h.update(bits.to_le_bytes());
        h.update((self.mel.n_mels as u64).to_le_bytes());
        h.update(self.mel.win_s.to_le_bytes());
        h.update(self.mel.hop_s.to_le_bytes());
        let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Some(dir.join(format!("{hex}.mel")))
    }

    fn compute(&self, id: usize, transform: Transform) -> Result<MelFrames> {
        let cached = self.cache_path(id, transform);
        if let Some(path) = &cached {
            if let Ok(bytes) = fs::read(path) {
                if let Some(frames) = decode_frames(&bytes, &self.mel) {
                    return Ok(frames);
                }
            }
        }
        let frames = log_mel(&transform.apply(&self.audio[id])?, &self.mel)?;
        if let Some(path) = &cached {
            fs::write(path, encode_frames(&frames)).map_err(|e| Error::io(path, e))?;
        }
        Ok(frames)
    }

    /// Makes sure features exist for every requested pair.
    pub fn prepare(&mut self, wanted: &[(usize, Transform)]) -> Result<()> {
        let mut missing: Vec<(usize, Transform)> = Vec::new();
        for &(id, t) in wanted {
            if !self.memo.contains_key(&(id, t.key()))
                && !missing.iter().any(|&(j, u)| j == id && u.key() == t.key())
            {
                missing.push((id, t));
            }
        }
        let computed = par::try_map(&missing, |&(id, t)| self.compute(id, t))?;
        for ((id, t), frames) in missing.into_iter().zip(computed) {
            self.memo.insert((id, t.key()), frames);
        }
        Ok(())
    }

    /// Features of a prepared pair.
    ///
    /// # Panics
    /// If [`FeatureStore::prepare`] was not called for this pair.
    pub fn get(&self, id: usize, transform: Transform) -> &MelFrames {
        self.memo
            .get(&(id, transform.key()))
            .expect("features not prepared")
    }

    /// Prepares and returns features for the given pairs, in order.
    pub fn features(&mut self, wanted: &[(usize, Transform)]) -> Result<Vec<&MelFrames>> {
        self.prepare(wanted)?;
        Ok(wanted.iter().map(|&(id, t)| self.get(id, t)).collect())
    }
}
