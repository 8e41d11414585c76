use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsr_core::audio::{read_wav, write_wav};
use dsr_core::augment::{pitch_shift, tempo_change, AugmentCoeffs};
use dsr_core::pipeline::{self, EvalInputs, Manifest, RunConfig};
use dsr_core::Result;

#[derive(Parser)]
#[command(name = "dsr", version = pipeline_version(), about = "Speaker-encoder training toolkit for dysarthric speech reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn pipeline_version() -> &'static str {
    Box::leak(pipeline::version().into_boxed_str())
}

#[derive(Args)]
struct Common {
    /// INI run configuration; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides [run] seed
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a multi-speaker corpus and its manifest
    SynthCorpus {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pitch-shift and tempo-change a single WAV file
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pitch coefficient in [0, 1]; frequencies scale by 1 - coeff/2
        #[arg(long, default_value_t = 0.0)]
        pitch_coeff: f64,
        /// Tempo coefficient in (0, 1]; duration scales by 1/coeff
        #[arg(long, default_value_t = 1.0)]
        tempo_coeff: f64,
    },
    /// GE2E pretraining of the speaker encoder
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Triplet fine-tuning of a pretrained checkpoint
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// EER, gender probe and optional WER / MOS report for a checkpoint
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Tab-separated wav_path / hypothesis transcript file
        #[arg(long)]
        hypotheses: Option<PathBuf>,
        /// CSV of cohort,score listener ratings
        #[arg(long)]
        mos: Option<PathBuf>,
    },
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthCorpus { common, out } => {
            let cfg = common.resolve()?;
            pipeline::write_run_record(&out, "synth-corpus", &[], &cfg)?;
            let manifest = pipeline::synth_corpus(&cfg, &out)?;
            println!(
                "wrote {} utterances to {}",
                manifest.len(),
                out.join(pipeline::MANIFEST_NAME).display()
            );
        }
        Command::Augment {
            common,
            input,
            out,
            pitch_coeff,
            tempo_coeff,
        } => {
            let cfg = common.resolve()?;
            AugmentCoeffs::new(pitch_coeff, tempo_coeff)?;
            let dir = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            let inputs = [
                ("in", show(&input)),
                ("out", show(&out)),
                ("pitch_coeff", pitch_coeff.to_string()),
                ("tempo_coeff", tempo_coeff.to_string()),
            ];
            pipeline::write_run_record(dir, "augment", &inputs, &cfg)?;
            let audio = read_wav(&input)?;
            let shifted = pitch_shift(&audio, pitch_coeff)?;
            write_wav(&tempo_change(&shifted, tempo_coeff)?, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Pretrain {
            common,
            manifest,
            out,
        } => {
            let cfg = common.resolve()?;
            pipeline::write_run_record(&out, "pretrain", &[("manifest", show(&manifest))], &cfg)?;
            let m = Manifest::load(&manifest)?;
            let res = pipeline::pretrain_ge2e(&m, &cfg, &out)?;
            if let (Some(first), Some(last)) = (res.losses.first(), res.losses.last()) {
                println!(
                    "GE2E loss {first:.4} -> {last:.4} over {} iterations",
                    res.losses.len()
                );
            }
            println!("wrote {}", res.checkpoint.display());
        }
        Command::Finetune {
            common,
            manifest,
            checkpoint,
            out,
        } => {
            let cfg = common.resolve()?;
            let inputs = [
                ("manifest", show(&manifest)),
                ("checkpoint", show(&checkpoint)),
            ];
            pipeline::write_run_record(&out, "finetune", &inputs, &cfg)?;
            let m = Manifest::load(&manifest)?;
            let res = pipeline::finetune_triplet(&m, &checkpoint, &cfg, &out)?;
            println!(
                "fixed-batch triplet loss {:.4} -> {:.4}",
                res.eval_loss_start, res.eval_loss_end
            );
            println!("wrote {}", res.checkpoint.display());
        }
        Command::Evaluate {
            common,
            manifest,
            checkpoint,
            out,
            hypotheses,
            mos,
        } => {
            let cfg = common.resolve()?;
            let mut inputs = vec![
                ("manifest", show(&manifest)),
                ("checkpoint", show(&checkpoint)),
            ];
            if let Some(h) = &hypotheses {
                inputs.push(("hypotheses", show(h)));
            }
            if let Some(m) = &mos {
                inputs.push(("mos", show(m)));
            }
            pipeline::write_run_record(&out, "evaluate", &inputs, &cfg)?;
            let m = Manifest::load(&manifest)?;
            let res =
                pipeline::evaluate(&m, &checkpoint, &cfg, &EvalInputs { hypotheses, mos }, &out)?;
            print!("{}", res.report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
