//! Triplet construction for contrastive fine-tuning.
//!
//! Every anchor gets a tempo-stretched copy of itself as the positive. For
//! female speakers the negative is a pitch-lowered copy of the anchor. For
//! male speakers only the positive is fabricated, and the negative is a
//! seeded draw from another speaker's utterances; the policy tag records
//! which source was used.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::AudioBuffer;
use crate::augment::{pitch_shift, tempo_change, AugmentCoeffs};
use crate::{seed, Error, Result};

pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Moderate,
    ModerateSevere,
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "female" => Ok(Gender::Female),
            "male" => Ok(Gender::Male),
            _ => Err(Error::Validation(format!("unknown gender {s:?}"))),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Female => "female",
            Gender::Male => "male",
        })
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moderate" => Ok(Severity::Moderate),
            "moderate_severe" => Ok(Severity::ModerateSevere),
            _ => Err(Error::Validation(format!("unknown severity {s:?}"))),
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Moderate => "moderate",
            Severity::ModerateSevere => "moderate_severe",
        })
    }
}

/// Augmentation strengths for a severity level.
pub fn coeffs_for(severity: Severity) -> AugmentCoeffs {
    match severity {
        Severity::ModerateSevere => AugmentCoeffs {
            pitch_coeff: 0.5,
            tempo_coeff: 0.5,
        },
        Severity::Moderate => AugmentCoeffs {
            pitch_coeff: 0.25,
            tempo_coeff: 0.7,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerProfile {
    pub speaker_id: String,
    pub gender: Gender,
    pub severity: Severity,
}

/// Reference to a corpus utterance by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Utterance {
    pub id: usize,
    pub speaker_id: String,
}

/// Augmentation applied to an utterance before encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    Tempo(f64),
    Pitch(f64),
}

impl Transform {
    pub fn apply(&self, audio: &AudioBuffer) -> Result<AudioBuffer> {
        match *self {
            Transform::Identity => Ok(audio.clone()),
            Transform::Tempo(t) => tempo_change(audio, t),
            Transform::Pitch(c) => pitch_shift(audio, c),
        }
    }

    /// Stable key for caching transformed audio or features.
    pub fn key(&self) -> (u8, u64) {
        match *self {
            Transform::Identity => (0, 0),
            Transform::Tempo(t) => (1, t.to_bits()),
            Transform::Pitch(c) => (2, c.to_bits()),
        }
    }
}

/// An utterance plus the augmentation that turns it into a triplet member.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub utterance: Utterance,
    pub transform: Transform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeSource {
    /// Pitch-lowered copy of the anchor.
    PitchShiftedSelf,
    /// Unmodified utterance of a different speaker.
    CrossSpeaker,
}

/// Record of how a triplet was made.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTag {
    pub gender: Gender,
    pub severity: Severity,
    pub coeffs: AugmentCoeffs,
    pub negative: NegativeSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub anchor: Sample,
    pub positive: Sample,
    pub negative: Sample,
    pub policy: PolicyTag,
}

impl Triplet {
    /// Checks the structural invariants: anchor and positive share a
    /// speaker and the negative is never the unmodified anchor.
    pub fn validate(&self) -> Result<()> {
        if self.anchor.utterance.speaker_id != self.positive.utterance.speaker_id {
            return Err(Error::Sampling(
                "positive comes from another speaker".into(),
            ));
        }
        if self.negative.utterance == self.anchor.utterance
            && self.negative.transform == Transform::Identity
        {
            return Err(Error::Sampling("negative is the unmodified anchor".into()));
        }
        Ok(())
    }
}

/// Builds the triplet for one anchor utterance.
///
/// `pool` supplies candidate cross-speaker negatives; utterances of the
/// anchor's own speaker are ignored. It must contain another speaker when
/// the profile is male.
pub fn build_triplet(
    anchor: &Utterance,
    profile: &SpeakerProfile,
    pool: &[Utterance],
    seed: u64,
) -> Result<Triplet> {
    if profile.speaker_id != anchor.speaker_id {
        return Err(Error::Sampling(format!(
            "profile {} does not match anchor speaker {}",
            profile.speaker_id, anchor.speaker_id
        )));
    }
    let coeffs = coeffs_for(profile.severity);
    let positive = Sample {
        utterance: anchor.clone(),
        transform: Transform::Tempo(coeffs.tempo_coeff),
    };
    let (negative, source) = match profile.gender {
        Gender::Female => (
            Sample {
                utterance: anchor.clone(),
                transform: Transform::Pitch(coeffs.pitch_coeff),
            },
            NegativeSource::PitchShiftedSelf,
        ),
        Gender::Male => {
            let others: Vec<&Utterance> = pool
                .iter()
                .filter(|u| u.speaker_id != anchor.speaker_id)
                .collect();
            if others.is_empty() {
                return Err(Error::Sampling(format!(
                    "no cross-speaker negative available for {}",
                    anchor.speaker_id
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pick = others[rng.random_range(0..others.len())];
            (
                Sample {
                    utterance: pick.clone(),
                    transform: Transform::Identity,
                },
                NegativeSource::CrossSpeaker,
            )
        }
    };
    Ok(Triplet {
        anchor: Sample {
            utterance: anchor.clone(),
            transform: Transform::Identity,
        },
        positive,
        negative,
        policy: PolicyTag {
            gender: profile.gender,
            severity: profile.severity,
            coeffs,
            negative: source,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub triplets: Vec<Triplet>,
    /// Set when fewer anchors than `batch_size` were available.
    pub short: bool,
}

/// How anchors are grouped into batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Anchors from all speakers mixed in each batch.
    #[default]
    Mixed,
    /// Each batch draws from a single speaker, rotating through speakers.
    PerSpeaker,
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(Schedule::Mixed),
            "per_speaker" => Ok(Schedule::PerSpeaker),
            _ => Err(Error::Validation(format!("unknown schedule {s:?}"))),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Mixed => "mixed",
            Schedule::PerSpeaker => "per_speaker",
        })
    }
}

/// Seeded stream of triplet batches. Anchors are drawn without replacement
/// within an epoch; every epoch has its own seeded permutation.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    anchors: Vec<Utterance>,
    pool: Vec<Utterance>,
    profiles: HashMap<String, SpeakerProfile>,
    batch_size: usize,
    schedule: Schedule,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    cursor: usize,
    batches: u64,
    by_speaker: BTreeMap<String, Vec<usize>>,
}

impl BatchSampler {
    /// `anchors` must all have a profile. `pool` is the set negatives are
    /// drawn from for male anchors.
    pub fn new(
        anchors: Vec<Utterance>,
        pool: Vec<Utterance>,
        profiles: HashMap<String, SpeakerProfile>,
        batch_size: usize,
        schedule: Schedule,
        seed: u64,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Parameter("batch size must be at least 1".into()));
        }
        if anchors.is_empty() {
            return Err(Error::Sampling("no anchor utterances".into()));
        }
        if let Some(u) = anchors
            .iter()
            .find(|u| !profiles.contains_key(&u.speaker_id))
        {
            return Err(Error::Sampling(format!(
                "speaker {} has no profile (missing gender or severity)",
                u.speaker_id
            )));
        }
        let mut by_speaker: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, u) in anchors.iter().enumerate() {
            by_speaker.entry(u.speaker_id.clone()).or_default().push(i);
        }
        let mut s = BatchSampler {
            anchors,
            pool,
            profiles,
            batch_size,
            schedule,
            seed,
            epoch: 0,
            order: Vec::new(),
            cursor: 0,
            batches: 0,
            by_speaker,
        };
        s.reshuffle();
        Ok(s)
    }

    fn reshuffle(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, self.epoch));
        self.order = (0..self.anchors.len()).collect();
        self.order.shuffle(&mut rng);
        self.cursor = 0;
    }

    fn next_mixed(&mut self) -> (Vec<usize>, bool) {
        if self.anchors.len() < self.batch_size {
            let picked = self.order.clone();
            self.epoch += 1;
            self.reshuffle();
            return (picked, true);
        }
        let mut picked = Vec::with_capacity(self.batch_size);
        while picked.len() < self.batch_size {
            if self.cursor == self.order.len() {
                self.epoch += 1;
                self.reshuffle();
            }
            picked.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        (picked, false)
    }

    fn next_per_speaker(&mut self) -> (Vec<usize>, bool) {
        let speakers: Vec<&Vec<usize>> = self.by_speaker.values().collect();
        let idx = &speakers[(self.batches % speakers.len() as u64) as usize];
        let round = self.batches / speakers.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed ^ 0x5EED, round));
        let mut own: Vec<usize> = idx.to_vec();
        own.shuffle(&mut rng);
        let short = own.len() < self.batch_size;
        own.truncate(self.batch_size);
        (own, short)
    }

    pub fn next_batch(&mut self) -> Result<Batch> {
        let (picked, short) = match self.schedule {
            Schedule::Mixed => self.next_mixed(),
            Schedule::PerSpeaker => self.next_per_speaker(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, 1 << 32 | self.batches));
        self.batches += 1;
        let triplets = picked
            .into_iter()
            .map(|i| {
                let anchor = &self.anchors[i];
                let profile = &self.profiles[&anchor.speaker_id];
                build_triplet(anchor, profile, &self.pool, rng.next_u64())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Batch { triplets, short })
    }
}

/// First batch of a fresh [`BatchSampler`] over `utterances`, which serve
/// both as anchors and as the cross-speaker negative pool.
pub fn make_batch(
    utterances: &[Utterance],
    profiles: &HashMap<String, SpeakerProfile>,
    batch_size: usize,
    seed: u64,
) -> Result<Batch> {
    BatchSampler::new(
        utterances.to_vec(),
        utterances.to_vec(),
        profiles.clone(),
        batch_size,
        Schedule::Mixed,
        seed,
    )?
    .next_batch()
}
