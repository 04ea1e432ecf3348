//! Model assembly and checkpointing.
//!
//! A [`Model`] ties the shared encoder to one of the four decoders and
//! owns the embedding table. Checkpoints are a versioned binary
//! container: the magic bytes `LVC1`, a length-prefixed UTF-8 config
//! echo (the run config plus vocabulary, epoch, and dev-metric history),
//! then one record per tensor with a length-prefixed name, the shape,
//! and a little-endian 64-bit float payload. Optimizer moments ride
//! along as `adam.`-prefixed records.

use std::io::{Read, Write};
use std::path::Path;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{BrThreshold, BrTwoCell, SgmDecoder};
use crate::config::{parse_pairs, ModelKind, RunConfig};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::labels::{BinaryLabelVector, LabelSpace};
use crate::lvc::{lvc_loss, predict_bits, LvcDecoder};
use crate::tensor::{Tape, Tensor};
use crate::vocab::{embed_sequence, EmbeddingTable, Vocabulary};

pub enum DecoderKind {
    Lvc(LvcDecoder),
    Br2(BrTwoCell),
    BrTau(BrThreshold),
    Sgm(SgmDecoder),
}

/// One instance, resolved to model inputs: token ids, per-token auxiliary
/// rows (empty when the auxiliary channel is off), the instance-level
/// auxiliary vector, and the gold bits.
#[derive(Clone, Debug)]
pub struct PreparedInstance {
    pub id: String,
    pub token_ids: Vec<usize>,
    pub aux_rows: Vec<Vec<f64>>,
    pub moji: Vec<f64>,
    pub gold: BinaryLabelVector,
}

pub struct Model {
    pub config: RunConfig,
    pub labels: LabelSpace,
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingTable,
    pub encoder: Encoder,
    pub decoder: DecoderKind,
}

impl Model {
    pub fn new(
        config: RunConfig,
        labels: LabelSpace,
        vocab: Vocabulary,
        embeddings: EmbeddingTable,
        rng: &mut dyn RngCore,
    ) -> Result<Model> {
        if labels.k() == 0 {
            return Err(Error::Config("model needs a non-empty label space".into()));
        }
        if embeddings.dim != config.d_g {
            return Err(Error::Config(format!(
                "embedding width {} does not match d_g = {}",
                embeddings.dim, config.d_g
            )));
        }
        let input_dim = config.d_g + config.d_e;
        let hidden2 = 2 * config.hidden;
        let encoder = Encoder::new(input_dim, config.hidden, config.layers, config.dropout, rng)?;
        let decoder = match config.model {
            ModelKind::Seq2Emo => DecoderKind::Lvc(LvcDecoder::new(
                labels.k(),
                hidden2,
                config.d_s,
                config.d_m,
                config.d_f,
                rng,
            )?),
            ModelKind::BinaryBr2 => DecoderKind::Br2(BrTwoCell::new(labels.k(), hidden2, rng)?),
            ModelKind::BinaryBrTau => {
                DecoderKind::BrTau(BrThreshold::new(labels.k(), hidden2, config.tau, rng)?)
            }
            ModelKind::Sgm => DecoderKind::Sgm(SgmDecoder::new(labels.k(), hidden2, config.d_l, rng)?),
        };
        Ok(Model { config, labels, vocab, embeddings, encoder, decoder })
    }

    /// Convenience: build a fresh model from a config alone, deriving the
    /// label space from `config.labels` and randomizing embeddings.
    pub fn from_config(config: RunConfig, vocab: Vocabulary, rng: &mut dyn RngCore) -> Result<Model> {
        let labels = LabelSpace::new(config.labels.clone())?;
        let embeddings = EmbeddingTable::random(&vocab, config.d_g, rng);
        Model::new(config, labels, vocab, embeddings, rng)
    }

    /// Parameters updated at the encoder-side learning rate.
    pub fn encoder_params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("embeddings".to_string(), self.embeddings.matrix.clone())];
        out.extend(self.encoder.params());
        out
    }

    /// Parameters updated at the decoder-side learning rate.
    pub fn decoder_params(&self) -> Vec<(String, Tensor)> {
        match &self.decoder {
            DecoderKind::Lvc(d) => d.params(),
            DecoderKind::Br2(d) => d.params(),
            DecoderKind::BrTau(d) => d.params(),
            DecoderKind::Sgm(d) => d.params(),
        }
    }

    /// All parameters in a stable order (encoder group then decoder group).
    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = self.encoder_params();
        out.extend(self.decoder_params());
        out
    }

    fn encode_instance(
        &self,
        tape: &Tape,
        inst: &PreparedInstance,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<(crate::encoder::EncoderOutput, Tensor)> {
        let feats = embed_sequence(tape, &inst.token_ids, &self.embeddings, &inst.aux_rows, &inst.id)?;
        let enc = self.encoder.encode(tape, &feats, training, rng)?;
        if inst.moji.len() != self.config.d_m {
            return Err(Error::Data(format!(
                "instance {}: auxiliary vector width {} != d_m = {}",
                inst.id,
                inst.moji.len(),
                self.config.d_m
            )));
        }
        let moji = Tensor::new(&[self.config.d_m], inst.moji.clone());
        Ok((enc, moji))
    }

    /// Training loss for one instance. Gold labels enter only here, never
    /// the forward computation that produces predictions.
    pub fn loss(
        &self,
        tape: &Tape,
        inst: &PreparedInstance,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Tensor> {
        if inst.gold.len() != self.labels.k() {
            return Err(Error::Dimension(format!(
                "instance {}: {} gold bits for k = {}",
                inst.id,
                inst.gold.len(),
                self.labels.k()
            )));
        }
        let (enc, moji) = self.encode_instance(tape, inst, training, rng)?;
        match &self.decoder {
            DecoderKind::Lvc(d) => lvc_loss(tape, &d.forward(tape, &enc, &moji)?, &inst.gold),
            DecoderKind::Br2(d) => lvc_loss(tape, &d.forward(tape, &enc.final_h)?, &inst.gold),
            DecoderKind::BrTau(d) => {
                let logits = d.forward(tape, &enc.final_h)?;
                d.loss(tape, &logits, &inst.gold)
            }
            DecoderKind::Sgm(d) => d.train_loss(tape, &enc, &inst.gold),
        }
    }

    /// Hard predictions for one instance (dropout off, no gold input).
    pub fn predict(&self, inst: &PreparedInstance) -> Result<BinaryLabelVector> {
        let tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0); // untouched: dropout is off
        let (enc, moji) = self.encode_instance(&tape, inst, false, &mut rng)?;
        match &self.decoder {
            DecoderKind::Lvc(d) => predict_bits(&d.forward(&tape, &enc, &moji)?),
            DecoderKind::Br2(d) => predict_bits(&d.forward(&tape, &enc.final_h)?),
            DecoderKind::BrTau(d) => {
                let logits = d.forward(&tape, &enc.final_h)?;
                d.predict(&logits)
            }
            DecoderKind::Sgm(d) => Ok(d.decode_greedy(&tape, &enc)?.0),
        }
    }
}

/// Non-parameter state carried by a checkpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub dev_history: Vec<f64>,
}

const MAGIC: &[u8; 4] = b"LVC1";

fn write_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Contract("checkpoint field exceeds u32".into()))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn write_record(w: &mut impl Write, name: &str, shape: &[usize], data: &[f64]) -> Result<()> {
    write_u32(w, name.len())?;
    w.write_all(name.as_bytes())?;
    write_u32(w, shape.len())?;
    for &d in shape {
        write_u32(w, d)?;
    }
    for &v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_record(r: &mut impl Read) -> Result<(String, Vec<usize>, Vec<f64>)> {
    let name_len = read_u32(r)?;
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name)
        .map_err(|_| Error::Data("checkpoint: tensor name is not UTF-8".into()))?;
    let rank = read_u32(r)?;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)?);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        data.push(f64::from_le_bytes(b));
    }
    Ok((name, shape, data))
}

/// Write a checkpoint. `extra` carries non-model tensors (optimizer
/// moments, step counters); their names must not collide with parameters.
pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    meta: &CheckpointMeta,
    extra: &[(String, Vec<usize>, Vec<f64>)],
) -> Result<()> {
    let mut echo = model.config.to_echo();
    echo.push_str(&format!("vocab = {}\n", model.vocab.tokens().join(" ")));
    echo.push_str(&format!("epoch = {}\n", meta.epoch));
    echo.push_str(&format!(
        "dev_history = {}\n",
        meta.dev_history
            .iter()
            .map(|v| format!("{v:e}"))
            .collect::<Vec<_>>()
            .join(",")
    ));

    let params = model.named_params();
    let frozen: Vec<f64> = model
        .embeddings
        .frozen
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();

    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, echo.len())?;
    w.write_all(echo.as_bytes())?;
    write_u32(&mut w, params.len() + 1 + extra.len())?;
    write_record(&mut w, "embeddings_frozen", &[frozen.len()], &frozen)?;
    for (name, t) in &params {
        write_record(&mut w, name, &t.shape(), &t.data())?;
    }
    for (name, shape, data) in extra {
        write_record(&mut w, name, shape, data)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint back. Returns the model (parameters restored
/// bit-exactly), the carried metadata, and any extra records.
pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointMeta, Vec<(String, Vec<usize>, Vec<f64>)>)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!(
            "not a checkpoint: bad magic {magic:?}"
        )));
    }
    let echo_len = read_u32(&mut r)?;
    let mut echo = vec![0u8; echo_len];
    r.read_exact(&mut echo)?;
    let echo = String::from_utf8(echo)
        .map_err(|_| Error::Data("checkpoint: config echo is not UTF-8".into()))?;

    let mut meta = CheckpointMeta::default();
    let mut vocab_tokens: Option<Vec<String>> = None;
    let mut config_pairs = Vec::new();
    for (key, value) in parse_pairs(&echo)? {
        match key.as_str() {
            "vocab" => {
                vocab_tokens = Some(value.split_whitespace().map(|s| s.to_string()).collect())
            }
            "epoch" => {
                meta.epoch = value
                    .parse()
                    .map_err(|_| Error::Data(format!("checkpoint: bad epoch {value:?}")))?
            }
            "dev_history" => {
                if !value.is_empty() {
                    meta.dev_history = value
                        .split(',')
                        .map(|s| {
                            s.parse().map_err(|_| {
                                Error::Data(format!("checkpoint: bad dev_history entry {s:?}"))
                            })
                        })
                        .collect::<Result<_>>()?;
                }
            }
            _ => config_pairs.push((key, value)),
        }
    }
    let config = RunConfig::from_pairs(&config_pairs)?;
    let vocab_tokens =
        vocab_tokens.ok_or_else(|| Error::Data("checkpoint: missing vocabulary".into()))?;
    let vocab = Vocabulary::from_tokens(vocab_tokens)?;

    let n_records = read_u32(&mut r)?;
    let mut records = Vec::with_capacity(n_records);
    for _ in 0..n_records {
        records.push(read_record(&mut r)?);
    }

    // Rebuild with the config's seed, then overwrite every parameter.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::from_config(config, vocab, &mut rng)?;
    let mut extra = Vec::new();
    let mut by_name: std::collections::HashMap<String, (Vec<usize>, Vec<f64>)> =
        std::collections::HashMap::new();
    for (name, shape, data) in records {
        if name == "embeddings_frozen" {
            model.embeddings.frozen = data.iter().map(|&v| v != 0.0).collect();
        } else if name.starts_with("adam.") {
            extra.push((name, shape, data));
        } else {
            by_name.insert(name, (shape, data));
        }
    }
    for (name, t) in model.named_params() {
        let (shape, data) = by_name
            .remove(&name)
            .ok_or_else(|| Error::Data(format!("checkpoint: missing tensor {name:?}")))?;
        if shape != t.shape() {
            return Err(Error::Data(format!(
                "checkpoint: tensor {name:?} has shape {shape:?}, expected {:?}",
                t.shape()
            )));
        }
        t.set_data(&data);
    }
    if let Some(name) = by_name.keys().next() {
        return Err(Error::Data(format!("checkpoint: unexpected tensor {name:?}")));
    }
    Ok((model, meta, extra))
}
