//! End-to-end orchestration: corpus synthesis, manifests and configs,
//! GE2E pretraining, triplet fine-tuning and evaluation.

mod config;
mod corpus;
mod evaluate;
mod features;
mod manifest;
mod train;

use std::path::{Path, PathBuf};

pub use config::{CorpusConfig, EvalConfig, Ge2eConfig, RunConfig, TripletConfig};
pub use corpus::{speaker_voices, synth_corpus, SpeakerVoice, FEMALE_F0, MALE_F0, MANIFEST_NAME};
pub use evaluate::{
    evaluate, female_rate, verification_trials, EvalInputs, EvalOutcome, REPORT_STEM,
};
pub use features::FeatureStore;
pub use manifest::{Manifest, ManifestRecord, Split};
pub use train::{
    finetune_triplet, load_matching, pretrain_ge2e, triplet_batch_loss, FinetuneOutcome,
    PretrainOutcome, FINETUNED_NAME, GE2E_METRICS_NAME, PRETRAINED_NAME, TRIPLET_METRICS_NAME,
};

use crate::Result;

pub const RUN_RECORD_NAME: &str = "run_record.txt";

/// Package version plus `git describe` of the build tree.
pub fn version() -> String {
    format!(
        "{} ({})",
        env!("CARGO_PKG_VERSION"),
        env!("DSR_GIT_DESCRIBE")
    )
}

/// Writes `run_record.txt` into `out_dir`: the command, its inputs, the
/// version and the full resolved config.
pub fn write_run_record(
    out_dir: &Path,
    command: &str,
    inputs: &[(&str, String)],
    config: &RunConfig,
) -> Result<PathBuf> {
    train::create_dir(out_dir)?;
    let mut text = format!(
        "command = {command}\nversion = {}\nseed = {}\n",
        version(),
        config.seed
    );
    for (k, v) in inputs {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text.push('\n');
    text.push_str(&config.to_ini());
    let path = out_dir.join(RUN_RECORD_NAME);
    train::write_file(&path, &text)?;
    Ok(path)
}
