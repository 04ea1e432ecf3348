//! Command-line surface for the multi-label emotion laboratory.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error,
//! 3 numeric error. All diagnostics go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seq2emo::config::{ModelKind, RunConfig};
use seq2emo::corpus::{
    self, build_corpus, dataset_stats, load_canonical_tsv, load_semeval_ec, write_canonical_tsv,
    EmojiAliasTable, HashtagMap,
};
use seq2emo::error::Error;
use seq2emo::labels::BinaryLabelVector;
use seq2emo::model::{load_checkpoint, save_checkpoint, PreparedInstance};
use seq2emo::train::{
    evaluate, grad_check_model, prepare_instances, synth_dataset, train_from_config, SynthKind,
};

#[derive(Parser)]
#[command(name = "seq2emo", about = "Multi-label emotion classification laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint output path.
        #[arg(long, default_value = "model.ckpt")]
        out: PathBuf,
        /// Override a config key, e.g. --set epochs=5 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate a checkpoint on a canonical TSV dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Predict label names for a single text.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Run the distant-supervision pipeline over raw one-text-per-line input.
    BuildCorpus {
        #[arg(long)]
        input: PathBuf,
        /// Hashtag map file: `emotion<TAB>#tag1,#tag2,...` per line.
        #[arg(long)]
        hashtags: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Optional emoji alias table: `emoji<TAB>:alias:` per line.
        #[arg(long)]
        emoji: Option<PathBuf>,
    },
    /// Print dataset statistics (emotions, instances, multi-label share).
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
    /// Finite-difference gradient check of a full model loss.
    GradCheck {
        /// seq2emo, binary_br2, binary_br_tau, or sgm.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Emit a synthetic dataset as canonical TSV.
    Synth {
        /// correlated or independent.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => 1,
        Error::Parse { .. } | Error::Data(_) | Error::Io(_) => 2,
        Error::Numeric(_) | Error::Dimension(_) | Error::Contract(_) => 3,
    }
}

fn run(command: Command) -> seq2emo::Result<()> {
    match command {
        Command::Train { config, out, overrides } => {
            let mut pairs = Vec::new();
            for o in &overrides {
                let Some((k, v)) = o.split_once('=') else {
                    return Err(Error::Config(format!(
                        "override {o:?} is not of the form KEY=VALUE"
                    )));
                };
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
            let cfg = RunConfig::load(&config, &pairs)?;
            let (outcome, test_inst) = train_from_config(&cfg)?;
            save_checkpoint(&out, &outcome.model, &outcome.meta, &outcome.opt_records)?;
            for (i, j) in outcome.meta.dev_history.iter().enumerate() {
                println!("epoch {}\tdev_jaccard\t{j:.6}", i + 1);
            }
            println!("best_epoch\t{}", outcome.meta.epoch);
            println!("best_dev_jaccard\t{:.6}", outcome.best_dev_jaccard);
            if !test_inst.is_empty() {
                print!("{}", evaluate(&outcome.model, &test_inst)?);
            }
            eprintln!("checkpoint written to {}", out.display());
            Ok(())
        }
        Command::Eval { checkpoint, data } => {
            let (model, _, _) = load_checkpoint(&checkpoint)?;
            let records = load_canonical_tsv(&data, None)?;
            let instances = prepare_model_data(&model, &records)?;
            print!("{}", evaluate(&model, &instances)?);
            Ok(())
        }
        Command::Predict { checkpoint, text } => {
            let (model, _, _) = load_checkpoint(&checkpoint)?;
            let tokens = corpus::tokenize(&text);
            if tokens.is_empty() {
                return Err(Error::Data("text has no tokens".into()));
            }
            let inst = PreparedInstance {
                id: "cli".into(),
                token_ids: model.vocab.encode(&tokens),
                aux_rows: Vec::new(),
                moji: vec![0.0; model.config.d_m],
                gold: BinaryLabelVector::zeros(model.labels.k()),
            };
            let bits = model.predict(&inst)?;
            println!("{}", model.labels.decode(&bits).join(","));
            Ok(())
        }
        Command::BuildCorpus { input, hashtags, output, seed, emoji } => {
            let raw = std::fs::read_to_string(&input)?;
            let lines: Vec<String> = raw.lines().map(|l| l.to_string()).collect();
            let map = HashtagMap::load(&hashtags)?;
            let table = match emoji {
                Some(p) => EmojiAliasTable::load(&p)?,
                None => EmojiAliasTable::empty(),
            };
            let records = build_corpus(&lines, &map, &table, seed)?;
            std::fs::write(&output, write_canonical_tsv(&records, None))?;
            eprintln!("{} records written to {}", records.len(), output.display());
            Ok(())
        }
        Command::Stats { data } => {
            let records = load_any_dataset(&data)?;
            let stats = dataset_stats(&records)?;
            println!("n_emotions\t{}", stats.n_emotions);
            println!("n_instances\t{}", stats.n_instances);
            println!("pct_multilabel\t{:.1}", stats.pct_multilabel);
            Ok(())
        }
        Command::GradCheck { model, seed } => {
            let kind = ModelKind::parse(&model)?;
            let report = grad_check_model(kind, seed)?;
            for (name, err) in &report.per_param {
                println!("{name}\t{err:.3e}");
            }
            println!("max_rel_err\t{:.3e}", report.max_rel_err());
            if report.passes(1e-4) {
                println!("PASS");
                Ok(())
            } else {
                Err(Error::Numeric(format!(
                    "gradient check failed: max relative error {:.3e} >= 1e-4",
                    report.max_rel_err()
                )))
            }
        }
        Command::Synth { kind, out, seed } => {
            let kind = SynthKind::parse(&kind)?;
            let (labels, records) = synth_dataset(kind, seed);
            std::fs::write(&out, write_canonical_tsv(&records, Some(&labels)))?;
            eprintln!("{} records written to {}", records.len(), out.display());
            Ok(())
        }
    }
}

/// Prepare eval/predict data against a loaded model, including any
/// auxiliary feature files its config references.
fn prepare_model_data(
    model: &seq2emo::model::Model,
    records: &[corpus::CorpusRecord],
) -> seq2emo::Result<Vec<PreparedInstance>> {
    let aux_seq = match &model.config.aux_seq_path {
        Some(p) => Some(seq2emo::vocab::AuxSequenceFeatures::load(Path::new(p))?),
        None => None,
    };
    let aux_inst = match &model.config.aux_inst_path {
        Some(p) => Some(seq2emo::vocab::AuxInstanceFeatures::load(Path::new(p))?),
        None => None,
    };
    prepare_instances(
        records,
        &model.vocab,
        &model.labels,
        aux_seq.as_ref(),
        aux_inst.as_ref(),
        model.config.d_m,
    )
}

/// Load either the canonical TSV or the SemEval-style TSV, detected by
/// the `ID<TAB>` header line the latter carries.
fn load_any_dataset(path: &Path) -> seq2emo::Result<Vec<corpus::CorpusRecord>> {
    let head = std::fs::read_to_string(path)?;
    let is_semeval = head.lines().next().is_some_and(|l| l.starts_with("ID\t"));
    if is_semeval {
        Ok(load_semeval_ec(path)?.1)
    } else {
        load_canonical_tsv(path, None)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version on stdout with success status
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
