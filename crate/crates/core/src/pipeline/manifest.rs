//! Tab-separated corpus manifest.
//!
//! One record per line with five fields:
//! `wav_path  speaker_id  gender  severity  transcript`, where gender is
//! `female` or `male` and severity is `moderate`, `moderate_severe` or
//! `none`. Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use crate::sampling::{Gender, Severity, SpeakerProfile, Utterance};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    /// Path exactly as written in the manifest.
    pub wav_path: String,
    pub speaker_id: String,
    pub gender: Gender,
    pub severity: Option<Severity>,
    pub transcript: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
    /// Directory relative paths are resolved against.
    pub root: PathBuf,
}

fn parse_line(line: &str) -> std::result::Result<ManifestRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(format!(
            "expected 5 tab-separated fields, found {}",
            fields.len()
        ));
    }
    let wav_path = fields[0].trim();
    let speaker_id = fields[1].trim();
    if wav_path.is_empty() {
        return Err("empty wav_path".into());
    }
    if speaker_id.is_empty() {
        return Err("empty speaker_id".into());
    }
    let gender = fields[2]
        .trim()
        .parse::<Gender>()
        .map_err(|e| e.to_string())?;
    let severity = match fields[3].trim() {
        "none" => None,
        s => Some(s.parse::<Severity>().map_err(|e| e.to_string())?),
    };
    Ok(ManifestRecord {
        wav_path: wav_path.to_string(),
        speaker_id: speaker_id.to_string(),
        gender,
        severity,
        transcript: fields[4].trim().to_string(),
    })
}

impl Manifest {
    /// Parses manifest text. Paths are not checked; see [`Manifest::load`].
    pub fn parse(text: &str, root: impl Into<PathBuf>, source: &Path) -> Result<Self> {
        let mut records = Vec::new();
        let mut genders: HashMap<String, (Gender, Option<Severity>)> = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let err = |message: String| Error::Manifest {
                path: source.to_path_buf(),
                line: n + 1,
                message,
            };
            let rec = parse_line(line.strip_suffix('\r').unwrap_or(line)).map_err(err)?;
            match genders.get(&rec.speaker_id) {
                Some(&(g, s)) if g != rec.gender || s != rec.severity => {
                    return Err(err(format!(
                        "speaker {} has conflicting gender or severity",
                        rec.speaker_id
                    )))
                }
                Some(_) => {}
                None => {
                    genders.insert(rec.speaker_id.clone(), (rec.gender, rec.severity));
                }
            }
            records.push(rec);
        }
        if records.is_empty() {
            return Err(Error::EmptyInput(format!(
                "manifest {} has no records",
                source.display()
            )));
        }
        Ok(Manifest {
            records,
            root: root.into(),
        })
    }

    /// Reads a manifest and checks that every audio file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest = Self::parse(&text, root, path)?;
        for (i, rec) in manifest.records.iter().enumerate() {
            if !manifest.resolve(i).is_file() {
                return Err(Error::Manifest {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("audio file {} not found", rec.wav_path),
                });
            }
        }
        Ok(manifest)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let sev = r.severity.map_or("none".to_string(), |s| s.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.wav_path, r.speaker_id, r.gender, sev, r.transcript
            ));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Filesystem path of record `i`.
    pub fn resolve(&self, i: usize) -> PathBuf {
        let p = Path::new(&self.records[i].wav_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn utterance(&self, i: usize) -> Utterance {
        Utterance {
            id: i,
            speaker_id: self.records[i].speaker_id.clone(),
        }
    }

    /// Record indices per speaker, in manifest order.
    pub fn by_speaker(&self) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            map.entry(r.speaker_id.clone()).or_default().push(i);
        }
        map
    }

    pub fn gender_of(&self, speaker_id: &str) -> Option<Gender> {
        self.records
            .iter()
            .find(|r| r.speaker_id == speaker_id)
            .map(|r| r.gender)
    }

    /// Profiles of speakers that carry a severity label.
    pub fn profiles(&self) -> HashMap<String, SpeakerProfile> {
        let mut out = HashMap::new();
        for r in &self.records {
            if let Some(severity) = r.severity {
                out.entry(r.speaker_id.clone()).or_insert(SpeakerProfile {
                    speaker_id: r.speaker_id.clone(),
                    gender: r.gender,
                    severity,
                });
            }
        }
        out
    }

    /// Splits record indices into training and held-out sets; the last
    /// `held_out` utterances of each speaker are held out.
    pub fn split(&self, held_out: usize) -> Split {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for idx in self.by_speaker().into_values() {
            let cut = idx.len().saturating_sub(held_out);
            train.extend_from_slice(&idx[..cut]);
            test.extend_from_slice(&idx[cut..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Split { train, test }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}
