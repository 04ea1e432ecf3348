//! Baseline decoders that share the bidirectional LSTM encoder.
//!
//! Two binary-relevance variants score each label independently from the
//! encoder's final state: one with a two-cell softmax head per label, one
//! with a single sigmoid logit against a threshold. The sequence-
//! generation baseline instead emits the positive label set as a sequence
//! with teacher forcing at train time and free-running greedy decoding at
//! inference time, which is exactly the train/test mismatch (exposure
//! bias) the chain decoder in [`crate::lvc`] avoids.

use rand::RngCore;

use crate::attention::Attention;
use crate::encoder::{EncoderOutput, LstmCell};
use crate::error::{Error, Result};
use crate::labels::BinaryLabelVector;
use crate::tensor::{Tape, Tensor};

/// Binary relevance with a two-cell head per label; decision rule and
/// loss mirror the chain decoder's output heads (tie decodes to absent).
pub struct BrTwoCell {
    pub k: usize,
    pub w: Vec<Tensor>, // k of [2 x 2H]
    pub b: Vec<Tensor>, // k of [2]
}

impl BrTwoCell {
    pub fn new(k: usize, hidden2: usize, rng: &mut dyn RngCore) -> Result<BrTwoCell> {
        if k == 0 {
            return Err(Error::Config("need at least one label".into()));
        }
        let bound = 1.0 / (hidden2 as f64).sqrt();
        let w = (0..k).map(|_| Tensor::uniform(&[2, hidden2], bound, rng)).collect();
        let b = (0..k).map(|_| Tensor::param(&[2], vec![0.0; 2])).collect();
        Ok(BrTwoCell { k, w, b })
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for t in 0..self.k {
            out.push((format!("br2.head{t}.w"), self.w[t].clone()));
            out.push((format!("br2.head{t}.b"), self.b[t].clone()));
        }
        out
    }

    /// `k x 2` logits from the encoder summary vector.
    pub fn forward(&self, tape: &Tape, summary: &Tensor) -> Result<Tensor> {
        let mut rows = Vec::with_capacity(self.k);
        for t in 0..self.k {
            rows.push(tape.add(&tape.matvec(&self.w[t], summary)?, &self.b[t])?);
        }
        let refs: Vec<&Tensor> = rows.iter().collect();
        tape.stack_rows(&refs)
    }
}

/// Binary relevance with one sigmoid logit per label, thresholded at tau.
/// The decision is strict: a probability exactly equal to tau decodes to
/// absent.
pub struct BrThreshold {
    pub k: usize,
    pub tau: f64,
    pub w: Vec<Tensor>, // k of [1 x 2H]
    pub b: Vec<Tensor>, // k of [1]
}

impl BrThreshold {
    pub fn new(k: usize, hidden2: usize, tau: f64, rng: &mut dyn RngCore) -> Result<BrThreshold> {
        if k == 0 {
            return Err(Error::Config("need at least one label".into()));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Domain(format!("threshold tau={tau} outside [0, 1]")));
        }
        let bound = 1.0 / (hidden2 as f64).sqrt();
        let w = (0..k).map(|_| Tensor::uniform(&[1, hidden2], bound, rng)).collect();
        let b = (0..k).map(|_| Tensor::param(&[1], vec![0.0])).collect();
        Ok(BrThreshold { k, tau, w, b })
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for t in 0..self.k {
            out.push((format!("brt.head{t}.w"), self.w[t].clone()));
            out.push((format!("brt.head{t}.b"), self.b[t].clone()));
        }
        out
    }

    /// `[k]` raw logits (pre-sigmoid) from the encoder summary vector.
    pub fn forward(&self, tape: &Tape, summary: &Tensor) -> Result<Tensor> {
        let mut cells = Vec::with_capacity(self.k);
        for t in 0..self.k {
            cells.push(tape.add(&tape.matvec(&self.w[t], summary)?, &self.b[t])?);
        }
        let refs: Vec<&Tensor> = cells.iter().collect();
        tape.concat(&refs, 0)
    }

    pub fn predict(&self, logits: &Tensor) -> Result<BinaryLabelVector> {
        let shape = logits.shape();
        if shape != vec![self.k] {
            return Err(Error::Dimension(format!(
                "predict: logits shape {shape:?}, expected [{}]",
                self.k
            )));
        }
        let bits = logits
            .data()
            .iter()
            .map(|&z| crate::tensor::sigmoid(z) > self.tau)
            .collect();
        Ok(BinaryLabelVector::from_bits(bits))
    }

    /// Mean binary cross-entropy over the k logits.
    pub fn loss(&self, tape: &Tape, logits: &Tensor, gold: &BinaryLabelVector) -> Result<Tensor> {
        if gold.len() != self.k {
            return Err(Error::Dimension(format!(
                "loss: {} gold bits for k={}",
                gold.len(),
                self.k
            )));
        }
        let mut terms = Vec::with_capacity(self.k);
        for t in 0..self.k {
            let z = tape.slice(logits, t, 1)?;
            let y = usize::from(gold.get(t));
            terms.push(tape.bce_with_logit(&z, y)?);
        }
        let refs: Vec<&Tensor> = terms.iter().collect();
        Ok(tape.mean(&tape.concat(&refs, 0)?))
    }
}

/// Sequence-generation decoder over the positive label set.
///
/// The label vocabulary has k emotion rows plus a start row (index k)
/// and an end row (index k+1); the output head scores k label classes
/// plus an end-of-sequence class (index k).
pub struct SgmDecoder {
    pub k: usize,
    pub hidden2: usize,
    pub embed: Tensor, // [(k+2) x D_L]
    pub cell: LstmCell,
    pub attention: Attention,
    pub out_w: Tensor, // [(k+1) x 2H]
    pub out_b: Tensor, // [k+1]
}

/// Embedding row fed at the first step.
pub fn sgm_start_row(k: usize) -> usize {
    k
}

/// Output class meaning "stop".
pub fn sgm_eos_class(k: usize) -> usize {
    k
}

impl SgmDecoder {
    pub fn new(k: usize, hidden2: usize, d_l: usize, rng: &mut dyn RngCore) -> Result<SgmDecoder> {
        if k == 0 {
            return Err(Error::Config("need at least one label".into()));
        }
        let bound = 1.0 / (hidden2 as f64).sqrt();
        Ok(SgmDecoder {
            k,
            hidden2,
            embed: Tensor::uniform(&[k + 2, d_l], 0.1, rng),
            cell: LstmCell::new(d_l, hidden2, rng),
            attention: Attention::new(hidden2, rng),
            out_w: Tensor::uniform(&[k + 1, hidden2], bound, rng),
            out_b: Tensor::param(&[k + 1], vec![0.0; k + 1]),
        })
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![
            ("sgm.embed".to_string(), self.embed.clone()),
            ("sgm.out_w".to_string(), self.out_w.clone()),
            ("sgm.out_b".to_string(), self.out_b.clone()),
        ];
        out.extend(self.cell.params("sgm.cell"));
        out.extend(self.attention.params("sgm.att"));
        out
    }

    /// One decode step: embed `token_row`, advance the LSTM, attend, and
    /// score. Returns the logits plus the next carried state (attentional
    /// state + cell, i.e. input feeding).
    fn step(
        &self,
        tape: &Tape,
        encoded: &EncoderOutput,
        token_row: usize,
        h: &Tensor,
        c: &Tensor,
    ) -> Result<(Tensor, Tensor, Tensor)> {
        let x = tape.row(&self.embed, token_row)?;
        let (h_raw, c_next) = self.cell.step(tape, &x, h, c)?;
        let (_alpha, _ctx, h_tilde) = self.attention.attend(tape, &h_raw, &encoded.hbar)?;
        let logits = tape.add(&tape.matvec(&self.out_w, &h_tilde)?, &self.out_b)?;
        Ok((logits, h_tilde, c_next))
    }

    /// Teacher-forced pass over an explicit label sequence. The sequence
    /// must be strictly ascending positions in 0..k; targets are the
    /// sequence followed by end-of-sequence. Returns the summed per-step
    /// cross-entropy and the per-step logits (for inspection).
    pub fn teacher_forced(
        &self,
        tape: &Tape,
        encoded: &EncoderOutput,
        sequence: &[usize],
    ) -> Result<(Tensor, Vec<Tensor>)> {
        for (i, &p) in sequence.iter().enumerate() {
            if p >= self.k {
                return Err(Error::Contract(format!(
                    "label position {p} outside 0..{}",
                    self.k
                )));
            }
            if i > 0 && sequence[i - 1] >= p {
                return Err(Error::Contract(
                    "label sequence must be strictly ascending (no duplicates)".into(),
                ));
            }
        }
        let mut h = encoded.final_h.clone();
        let mut c = encoded.final_c.clone();
        let mut token = sgm_start_row(self.k);
        let mut losses = Vec::new();
        let mut traces = Vec::new();
        for step in 0..=sequence.len() {
            let (logits, h2, c2) = self.step(tape, encoded, token, &h, &c)?;
            let target = if step < sequence.len() { sequence[step] } else { sgm_eos_class(self.k) };
            losses.push(tape.cross_entropy(&logits, target)?);
            traces.push(logits);
            h = h2;
            c = c2;
            if step < sequence.len() {
                token = sequence[step];
            }
        }
        let refs: Vec<&Tensor> = losses.iter().collect();
        let total = tape.sum(&tape.concat(&refs, 0)?);
        Ok((total, traces))
    }

    /// Training loss from a gold bit vector: the positive set in ascending
    /// position order, teacher forced.
    pub fn train_loss(&self, tape: &Tape, encoded: &EncoderOutput, gold: &BinaryLabelVector) -> Result<Tensor> {
        if gold.len() != self.k {
            return Err(Error::Dimension(format!(
                "train: {} gold bits for k={}",
                gold.len(),
                self.k
            )));
        }
        let seq = gold.positive_positions();
        Ok(self.teacher_forced(tape, encoded, &seq)?.0)
    }

    /// Free-running greedy decode. Labels already emitted are masked out
    /// of the argmax (end-of-sequence never is), so the output is always
    /// duplicate-free; decoding stops at end-of-sequence or after all k
    /// labels have been emitted. Returns the decoded bits and the raw
    /// (pre-mask) logits at each step.
    pub fn decode_greedy(&self, tape: &Tape, encoded: &EncoderOutput) -> Result<(BinaryLabelVector, Vec<Vec<f64>>)> {
        let mut bits = BinaryLabelVector::zeros(self.k);
        let mut h = encoded.final_h.clone();
        let mut c = encoded.final_c.clone();
        let mut token = sgm_start_row(self.k);
        let mut traces = Vec::new();
        for _ in 0..=self.k {
            let (logits, h2, c2) = self.step(tape, encoded, token, &h, &c)?;
            let raw = logits.data();
            traces.push(raw.clone());
            let mut best = sgm_eos_class(self.k);
            let mut best_v = raw[best];
            for t in 0..self.k {
                if !bits.get(t) && raw[t] > best_v {
                    best = t;
                    best_v = raw[t];
                }
            }
            if best == sgm_eos_class(self.k) {
                break;
            }
            bits.set(best, true);
            token = best;
            h = h2;
            c = c2;
        }
        Ok((bits, traces))
    }
}
