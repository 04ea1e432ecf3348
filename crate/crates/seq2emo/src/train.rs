//! Training loop, evaluation, and the synthetic datasets used by the
//! test suite.
//!
//! Mini-batching is a loop over instances with gradient accumulation:
//! each instance's loss is scaled by 1/batch and backpropagated onto the
//! shared gradient buffers, then both optimizers (encoder group at
//! `lr_encoder`, decoder group at `lr_decoder`) take one step. Model
//! selection keeps the epoch with the best dev Jaccard; training stops
//! early after `patience` epochs without improvement.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::corpus::CorpusRecord;
use crate::error::{Error, Result};
use crate::labels::{BinaryLabelVector, LabelSpace};
use crate::metrics::{self, EvalBatch};
use crate::model::{CheckpointMeta, Model, PreparedInstance};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tape;
use crate::vocab::{AuxInstanceFeatures, AuxSequenceFeatures, EmbeddingTable, Vocabulary};

/// Resolve corpus records to model inputs. Gold labels must all be in
/// the model's label space; a record with no tokens cannot be encoded.
pub fn prepare_instances(
    records: &[CorpusRecord],
    vocab: &Vocabulary,
    labels: &LabelSpace,
    aux_seq: Option<&AuxSequenceFeatures>,
    aux_inst: Option<&AuxInstanceFeatures>,
    d_m: usize,
) -> Result<Vec<PreparedInstance>> {
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        if rec.tokens.is_empty() {
            return Err(Error::Data(format!("instance {}: no tokens", rec.id)));
        }
        let mut names: Vec<&str> = rec.labels.iter().map(|s| s.as_str()).collect();
        names.sort_unstable();
        for name in &names {
            if !labels.contains(name) {
                return Err(Error::Config(format!(
                    "instance {}: label {name:?} is not in the model's label space",
                    rec.id
                )));
            }
        }
        let gold = labels.encode(names.iter().copied())?;
        let aux_rows = match aux_seq {
            Some(a) => a.rows(&rec.id, rec.tokens.len())?,
            None => Vec::new(),
        };
        let moji = match aux_inst {
            Some(a) => a.vector(&rec.id),
            None => vec![0.0; d_m],
        };
        out.push(PreparedInstance {
            id: rec.id.clone(),
            token_ids: vocab.encode(&rec.tokens),
            aux_rows,
            moji,
            gold,
        });
    }
    Ok(out)
}

/// Predictions for a batch of instances, in order.
pub fn predict_all(model: &Model, instances: &[PreparedInstance]) -> Result<Vec<BinaryLabelVector>> {
    instances.iter().map(|i| model.predict(i)).collect()
}

/// Jaccard of the model's predictions against the instances' gold bits.
pub fn dev_jaccard(model: &Model, instances: &[PreparedInstance]) -> Result<f64> {
    let pred = predict_all(model, instances)?;
    let gold: Vec<BinaryLabelVector> = instances.iter().map(|i| i.gold.clone()).collect();
    Ok(metrics::jaccard(&EvalBatch::new(&gold, &pred)?))
}

/// Metric report (jaccard, hamming_loss, micro_f1) for a batch.
pub fn evaluate(model: &Model, instances: &[PreparedInstance]) -> Result<String> {
    let pred = predict_all(model, instances)?;
    let gold: Vec<BinaryLabelVector> = instances.iter().map(|i| i.gold.clone()).collect();
    let batch = EvalBatch::new(&gold, &pred)?;
    Ok(metrics::format_report(&[
        ("jaccard", metrics::jaccard(&batch)),
        ("hamming_loss", metrics::hamming_loss(&batch)),
        ("micro_f1", metrics::micro_f1(&batch)),
    ]))
}

/// The trained model plus everything a checkpoint carries.
pub struct TrainOutcome {
    pub model: Model,
    pub meta: CheckpointMeta,
    /// Optimizer state as checkpoint records (`adam.`-prefixed).
    pub opt_records: Vec<(String, Vec<usize>, Vec<f64>)>,
    pub best_dev_jaccard: f64,
}

fn adam_records(prefix: &str, adam: &Adam, names: &[String]) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    let mut out = vec![(
        format!("adam.{prefix}.steps"),
        vec![1],
        vec![adam.step_count() as f64],
    )];
    for (name, (m, v)) in names.iter().zip(adam.state()) {
        let len = m.len();
        out.push((format!("adam.{prefix}.m.{name}"), vec![len], m));
        out.push((format!("adam.{prefix}.v.{name}"), vec![len], v));
    }
    out
}

/// Train a model from prepared data. `dev` drives model selection; pass
/// the training set itself when no held-out split exists.
pub fn train_prepared(
    model: Model,
    train: &[PreparedInstance],
    dev: &[PreparedInstance],
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let cfg = model.config.clone();
    let enc_params = model.encoder_params();
    let dec_params = model.decoder_params();
    let enc_names: Vec<String> = enc_params.iter().map(|(n, _)| n.clone()).collect();
    let dec_names: Vec<String> = dec_params.iter().map(|(n, _)| n.clone()).collect();
    let enc_tensors: Vec<_> = enc_params.iter().map(|(_, t)| t.clone()).collect();
    let dec_tensors: Vec<_> = dec_params.iter().map(|(_, t)| t.clone()).collect();

    let mut enc_adam = Adam::new(AdamConfig::with_lr(cfg.lr_encoder), &enc_tensors)?;
    let mut dec_adam = Adam::new(AdamConfig::with_lr(cfg.lr_decoder), &dec_tensors)?;
    // frozen embedding rows (pad, pretrained vectors) never move
    enc_adam.set_frozen(&model.embeddings.matrix, model.embeddings.freeze_mask())?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7ea1); // training stream
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut dev_history = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params: Vec<Vec<f64>> = Vec::new();
    let mut stale = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let inst = &train[i];
                let tape = Tape::new();
                let loss = model.loss(&tape, inst, true, &mut rng)?;
                let value = loss.item();
                if !value.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss {value} at epoch {epoch}, batch {batch_idx}, instance {}",
                        inst.id
                    )));
                }
                tape.backward(&tape.scale(&loss, scale))?;
            }
            enc_adam.step();
            dec_adam.step();
            enc_adam.zero_grad();
            dec_adam.zero_grad();
        }

        let jac = dev_jaccard(&model, dev)?;
        dev_history.push(jac);
        if jac > best {
            best = jac;
            best_epoch = epoch + 1;
            best_params = model.named_params().iter().map(|(_, t)| t.data()).collect();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    if !best_params.is_empty() {
        for ((_, t), data) in model.named_params().iter().zip(&best_params) {
            t.set_data(data);
        }
    }

    let mut opt_records = adam_records("enc", &enc_adam, &enc_names);
    opt_records.extend(adam_records("dec", &dec_adam, &dec_names));
    Ok(TrainOutcome {
        model,
        meta: CheckpointMeta { epoch: best_epoch, dev_history },
        opt_records,
        best_dev_jaccard: if best.is_finite() { best } else { 0.0 },
    })
}

/// Load data files named by the config, build the vocabulary and
/// embeddings, and train. Returns the outcome plus the prepared test
/// instances (empty when no test path is configured).
pub fn train_from_config(config: &RunConfig) -> Result<(TrainOutcome, Vec<PreparedInstance>)> {
    if config.labels.is_empty() {
        return Err(Error::Config("config must list the label names".into()));
    }
    let labels = LabelSpace::new(config.labels.clone())?;
    let train_path = config
        .train_path
        .as_ref()
        .ok_or_else(|| Error::Config("config must set a train file".into()))?;
    let train_recs = crate::corpus::load_canonical_tsv(Path::new(train_path), Some(&labels))?;
    let dev_recs = match &config.dev_path {
        Some(p) => Some(crate::corpus::load_canonical_tsv(Path::new(p), Some(&labels))?),
        None => None,
    };
    let test_recs = match &config.test_path {
        Some(p) => Some(crate::corpus::load_canonical_tsv(Path::new(p), Some(&labels))?),
        None => None,
    };

    let docs: Vec<&[String]> = train_recs.iter().map(|r| r.tokens.as_slice()).collect();
    let vocab = Vocabulary::build(docs.iter().copied(), config.min_freq)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let embeddings = match &config.glove_path {
        Some(p) => {
            EmbeddingTable::load_glove_text(Path::new(p), config.d_g, &vocab, &mut rng)?.0
        }
        None => EmbeddingTable::random(&vocab, config.d_g, &mut rng),
    };
    let aux_seq = match &config.aux_seq_path {
        Some(p) => Some(AuxSequenceFeatures::load(Path::new(p))?),
        None => None,
    };
    let aux_inst = match &config.aux_inst_path {
        Some(p) => Some(AuxInstanceFeatures::load(Path::new(p))?),
        None => None,
    };

    let prep = |recs: &[CorpusRecord]| {
        prepare_instances(recs, &vocab, &labels, aux_seq.as_ref(), aux_inst.as_ref(), config.d_m)
    };
    let train_inst = prep(&train_recs)?;
    let dev_inst = match &dev_recs {
        Some(r) => prep(r)?,
        None => train_inst.clone(),
    };
    let test_inst = match &test_recs {
        Some(r) => prep(r)?,
        None => Vec::new(),
    };

    let model = Model::new(config.clone(), labels, vocab, embeddings, &mut rng)?;
    let outcome = train_prepared(model, &train_inst, &dev_inst)?;
    Ok((outcome, test_inst))
}

/// Finite-difference check of the full model loss on a tiny instance
/// (2 tokens, k = 2, H = 4, dropout off) over every parameter.
pub fn grad_check_model(kind: crate::config::ModelKind, seed: u64) -> Result<crate::optim::GradCheckReport> {
    let cfg = RunConfig {
        model: kind,
        labels: vec!["a".to_string(), "b".to_string()],
        hidden: 4,
        layers: 1,
        d_g: 3,
        d_e: 0,
        d_m: 2,
        d_s: 2,
        d_f: 2,
        d_l: 2,
        dropout: 0.0,
        seed,
        ..RunConfig::default()
    };
    let docs = [vec!["u".to_string(), "v".to_string()]];
    let vocab = Vocabulary::build(docs.iter().map(|d| d.as_slice()), 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::from_config(cfg, vocab, &mut rng)?;
    let inst = PreparedInstance {
        id: "g".into(),
        token_ids: model.vocab.encode(&docs[0]),
        aux_rows: Vec::new(),
        moji: vec![0.3, -0.7],
        gold: model.labels.encode(["a"])?,
    };
    let params = model.named_params();
    crate::optim::grad_check(
        |tape| model.loss(tape, &inst, false, &mut ChaCha8Rng::seed_from_u64(0)),
        &params,
        1e-5,
    )
}

/// Synthetic dataset kinds used by the acceptance suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthKind {
    /// Four labels where the fourth is deterministically equal to the
    /// first; every label is keyed to a keyword token.
    Correlated,
    /// Four independently keyed labels.
    Independent,
}

impl SynthKind {
    pub fn parse(s: &str) -> Result<SynthKind> {
        match s {
            "correlated" => Ok(SynthKind::Correlated),
            "independent" => Ok(SynthKind::Independent),
            other => Err(Error::Config(format!(
                "unknown synthetic kind {other:?} (expected correlated or independent)"
            ))),
        }
    }
}

pub const SYNTH_LABELS: [&str; 4] = ["alpha", "beta", "gamma", "delta"];

/// 200 keyword-driven instances over a 50-token vocabulary (`w00`..`w49`).
/// Keywords `w01`/`w02`/`w03` key labels alpha/beta/gamma; in the
/// correlated kind delta copies alpha, in the independent kind it is
/// keyed to `w04`. Every instance carries at least one label.
pub fn synth_dataset(kind: SynthKind, seed: u64) -> (LabelSpace, Vec<CorpusRecord>) {
    let labels = LabelSpace::from_names(&SYNTH_LABELS).expect("fixed names are valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_keys = match kind {
        SynthKind::Correlated => 3,
        SynthKind::Independent => 4,
    };
    let mut records = Vec::with_capacity(200);
    for i in 0..200 {
        let mut present = [false; 4];
        loop {
            for p in present.iter_mut().take(n_keys) {
                *p = rng.gen_bool(0.5);
            }
            if present.iter().any(|&p| p) {
                break;
            }
        }
        let mut tokens: Vec<String> = Vec::new();
        for (j, &p) in present.iter().take(n_keys).enumerate() {
            if p {
                tokens.push(format!("w{:02}", j + 1));
            }
        }
        let fillers = rng.gen_range(3..8);
        for _ in 0..fillers {
            tokens.push(format!("w{:02}", rng.gen_range(5..50)));
        }
        tokens.shuffle(&mut rng);

        let mut names: HashSet<String> = HashSet::new();
        for (j, &p) in present.iter().take(n_keys).enumerate() {
            if p {
                names.insert(SYNTH_LABELS[j].to_string());
            }
        }
        if kind == SynthKind::Correlated && present[0] {
            names.insert("delta".to_string());
        }
        records.push(CorpusRecord::new(
            format!("s{}", i + 1),
            tokens.join(" "),
            names,
        ));
    }
    (labels, records)
}

/// A config pre-wired for the synthetic datasets (paths left unset).
pub fn synth_config(model: crate::config::ModelKind, seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        model,
        labels: SYNTH_LABELS.iter().map(|s| s.to_string()).collect(),
        hidden: 16,
        layers: 1,
        d_g: 16,
        d_s: 8,
        d_f: 8,
        d_l: 8,
        dropout: 0.0,
        lr_encoder: 5e-3,
        lr_decoder: 5e-3,
        epochs: 50,
        seed,
        ..RunConfig::default()
    };
    cfg.patience = cfg.epochs; // overfitting run: never stop early
    cfg
}
