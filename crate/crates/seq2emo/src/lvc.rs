//! Bidirectional latent-variable-chain decoder.
//!
//! The decoder runs one chain step per label. Step t consumes a learned
//! per-label signal embedding `s_t` concatenated with a per-label linear
//! projection of the instance-level auxiliary vector; it never consumes
//! gold labels or its own hard predictions, so the train-time and
//! inference-time computations are identical. The forward chain walks
//! labels 0..k, the backward chain walks k-1..0, and the two attentional
//! states for label t are concatenated and scored by a per-label two-cell
//! output head. Input feeding: the attentional state, not the raw LSTM
//! state, is carried as the next step's hidden state.

use rand::RngCore;

use crate::attention::Attention;
use crate::encoder::{EncoderOutput, LstmCell};
use crate::error::{Error, Result};
use crate::labels::BinaryLabelVector;
use crate::tensor::{Tape, Tensor};

/// Learned per-label signal embeddings, shared by both chain directions.
pub struct SignalTable {
    pub table: Tensor, // [k x D_S]
    pub dim: usize,
}

impl SignalTable {
    pub fn new(k: usize, dim: usize, rng: &mut dyn RngCore) -> SignalTable {
        SignalTable { table: Tensor::uniform(&[k, dim], 0.1, rng), dim }
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        vec![("decoder.signals".into(), self.table.clone())]
    }
}

/// Per-label affine maps: `fc_m[t]` projects the D_M auxiliary vector to
/// the decoder input, `fc_o[t]` maps the 4H bidirectional state to two
/// logit cells (index 0 = absent, 1 = present).
pub struct PerLabelHeads {
    pub fc_m_w: Vec<Tensor>, // k of [D_F x D_M]
    pub fc_m_b: Vec<Tensor>, // k of [D_F]
    pub fc_o_w: Vec<Tensor>, // k of [2 x 4H]
    pub fc_o_b: Vec<Tensor>, // k of [2]
}

impl PerLabelHeads {
    pub fn new(k: usize, d_m: usize, d_f: usize, hidden2: usize, rng: &mut dyn RngCore) -> PerLabelHeads {
        let bm = 1.0 / (d_m.max(1) as f64).sqrt();
        let bo = 1.0 / (2.0 * hidden2 as f64).sqrt();
        let mut fc_m_w = Vec::with_capacity(k);
        let mut fc_m_b = Vec::with_capacity(k);
        let mut fc_o_w = Vec::with_capacity(k);
        let mut fc_o_b = Vec::with_capacity(k);
        for _ in 0..k {
            fc_m_w.push(Tensor::uniform(&[d_f, d_m], bm, rng));
            fc_m_b.push(Tensor::param(&[d_f], vec![0.0; d_f]));
            fc_o_w.push(Tensor::uniform(&[2, 2 * hidden2], bo, rng));
            fc_o_b.push(Tensor::param(&[2], vec![0.0; 2]));
        }
        PerLabelHeads { fc_m_w, fc_m_b, fc_o_w, fc_o_b }
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for t in 0..self.fc_m_w.len() {
            out.push((format!("decoder.fc_m{t}.w"), self.fc_m_w[t].clone()));
            out.push((format!("decoder.fc_m{t}.b"), self.fc_m_b[t].clone()));
            out.push((format!("decoder.fc_o{t}.w"), self.fc_o_w[t].clone()));
            out.push((format!("decoder.fc_o{t}.b"), self.fc_o_b[t].clone()));
        }
        out
    }
}

pub struct LvcDecoder {
    pub k: usize,
    pub hidden2: usize, // decoder state width = 2H
    pub signals: SignalTable,
    pub heads: PerLabelHeads,
    pub fwd_cell: LstmCell,
    pub bwd_cell: LstmCell,
    pub fwd_attention: Attention,
    pub bwd_attention: Attention,
}

impl LvcDecoder {
    pub fn new(
        k: usize,
        hidden2: usize,
        d_s: usize,
        d_m: usize,
        d_f: usize,
        rng: &mut dyn RngCore,
    ) -> Result<LvcDecoder> {
        if k == 0 {
            return Err(Error::Config("decoder needs at least one label".into()));
        }
        Ok(LvcDecoder {
            k,
            hidden2,
            signals: SignalTable::new(k, d_s, rng),
            heads: PerLabelHeads::new(k, d_m, d_f, hidden2, rng),
            fwd_cell: LstmCell::new(d_s + d_f, hidden2, rng),
            bwd_cell: LstmCell::new(d_s + d_f, hidden2, rng),
            fwd_attention: Attention::new(hidden2, rng),
            bwd_attention: Attention::new(hidden2, rng),
        })
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = self.signals.params();
        out.extend(self.heads.params());
        out.extend(self.fwd_cell.params("decoder.fwd"));
        out.extend(self.bwd_cell.params("decoder.bwd"));
        out.extend(self.fwd_attention.params("decoder.fwd_att"));
        out.extend(self.bwd_attention.params("decoder.bwd_att"));
        out
    }

    /// Run one chain direction over `label_order` and return the
    /// attentional state per visited position, in visit order.
    fn run_chain(
        &self,
        tape: &Tape,
        cell: &LstmCell,
        attention: &Attention,
        encoded: &EncoderOutput,
        moji: &Tensor,
        label_order: impl Iterator<Item = usize>,
    ) -> Result<Vec<Tensor>> {
        let mut h = encoded.final_h.clone();
        let mut c = encoded.final_c.clone();
        let mut states = Vec::new();
        for t in label_order {
            let s_t = tape.row(&self.signals.table, t)?;
            let m_t = tape.add(
                &tape.matvec(&self.heads.fc_m_w[t], moji)?,
                &self.heads.fc_m_b[t],
            )?;
            let x = tape.concat(&[&s_t, &m_t], 0)?;
            let (h_raw, c_next) = cell.step(tape, &x, &h, &c)?;
            let (_alpha, _ctx, h_tilde) = attention.attend(tape, &h_raw, &encoded.hbar)?;
            h = h_tilde.clone();
            c = c_next;
            states.push(h_tilde);
        }
        Ok(states)
    }

    /// Full bidirectional pass: returns the `k x 2` logit matrix, with
    /// row t from the per-label head over `[fwd state at t; bwd state at t]`.
    pub fn forward(&self, tape: &Tape, encoded: &EncoderOutput, moji: &Tensor) -> Result<Tensor> {
        let fwd = self.run_chain(
            tape,
            &self.fwd_cell,
            &self.fwd_attention,
            encoded,
            moji,
            0..self.k,
        )?;
        // Backward chain visits labels in reverse; re-index its states by
        // label so bwd[t] is the state produced at label t.
        let bwd_rev = self.run_chain(
            tape,
            &self.bwd_cell,
            &self.bwd_attention,
            encoded,
            moji,
            (0..self.k).rev(),
        )?;
        let mut rows = Vec::with_capacity(self.k);
        for t in 0..self.k {
            let bwd_t = &bwd_rev[self.k - 1 - t];
            let both = tape.concat(&[&fwd[t], bwd_t], 0)?;
            let row = tape.add(&tape.matvec(&self.heads.fc_o_w[t], &both)?, &self.heads.fc_o_b[t])?;
            rows.push(row);
        }
        let refs: Vec<&Tensor> = rows.iter().collect();
        tape.stack_rows(&refs)
    }
}

/// Hard decisions from a `k x 2` logit matrix: label t is on iff its
/// "present" cell strictly exceeds its "absent" cell (ties are off).
pub fn predict_bits(logits: &Tensor) -> Result<BinaryLabelVector> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[1] != 2 {
        return Err(Error::Dimension(format!(
            "predict: logits must be k x 2, got {shape:?}"
        )));
    }
    let d = logits.data();
    let bits = (0..shape[0]).map(|t| d[2 * t + 1] > d[2 * t]).collect();
    Ok(BinaryLabelVector::from_bits(bits))
}

/// Mean over labels of the two-class cross-entropy between logit row t
/// and gold bit t.
pub fn lvc_loss(tape: &Tape, logits: &Tensor, gold: &BinaryLabelVector) -> Result<Tensor> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[1] != 2 || shape[0] != gold.len() {
        return Err(Error::Dimension(format!(
            "loss: logits {shape:?} vs {} gold bits",
            gold.len()
        )));
    }
    let mut terms = Vec::with_capacity(gold.len());
    for t in 0..gold.len() {
        let row = tape.row(logits, t)?;
        let target = if gold.get(t) { 1 } else { 0 };
        terms.push(tape.cross_entropy_2class(&row, target)?);
    }
    let refs: Vec<&Tensor> = terms.iter().collect();
    let stacked = tape.concat(&refs, 0)?;
    Ok(tape.mean(&stacked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::Encoder;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_setup(seed: u64, k: usize) -> (Encoder, LvcDecoder) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = Encoder::new(3, 2, 1, 0.0, &mut rng).unwrap();
        let dec = LvcDecoder::new(k, 4, 3, 2, 3, &mut rng).unwrap();
        (enc, dec)
    }

    fn toy_features(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
        Tensor::new(&[n, 3], (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn forward_shapes_and_determinism() {
        let (enc, dec) = toy_setup(7, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let feats = toy_features(&mut rng, 4);
        let moji = Tensor::new(&[2], vec![0.3, -0.8]);
        let run = || {
            let tape = Tape::new();
            let out = enc.encode(&tape, &feats, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            dec.forward(&tape, &out, &moji).unwrap().data()
        };
        let a = run();
        assert_eq!(a.len(), 6);
        let b = run();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn predictions_never_see_gold() {
        // The decoder API takes no gold labels: the logits for an instance
        // are the same values whichever gold vector the loss is later
        // computed against.
        let (enc, dec) = toy_setup(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let feats = toy_features(&mut rng, 3);
        let moji = Tensor::new(&[2], vec![0.0, 0.4]);
        let forward = || {
            let tape = Tape::new();
            let out = enc.encode(&tape, &feats, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let logits = dec.forward(&tape, &out, &moji).unwrap();
            (tape, logits)
        };
        let (tape_a, logits_a) = forward();
        let (tape_b, logits_b) = forward();
        lvc_loss(&tape_a, &logits_a, &BinaryLabelVector::from_bits(vec![true, true])).unwrap();
        lvc_loss(&tape_b, &logits_b, &BinaryLabelVector::from_bits(vec![false, false])).unwrap();
        assert_eq!(predict_bits(&logits_a).unwrap(), predict_bits(&logits_b).unwrap());
        assert_eq!(
            logits_a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            logits_b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn tie_breaks_to_absent() {
        let logits = Tensor::new(&[2, 2], vec![0.5, 0.5, -1.0, 2.0]);
        let bits = predict_bits(&logits).unwrap();
        assert_eq!(bits.bits(), &[false, true]);
    }

    #[test]
    fn chain_couples_labels() {
        // Perturbing the signal embedding of label 0 must change the
        // logits of later labels through the recurrent chain.
        let (enc, dec) = toy_setup(21, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let feats = toy_features(&mut rng, 3);
        let moji = Tensor::new(&[2], vec![0.1, 0.2]);
        let run = || {
            let tape = Tape::new();
            let out = enc.encode(&tape, &feats, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            dec.forward(&tape, &out, &moji).unwrap().data()
        };
        let before = run();
        let v = dec.signals.table.get(0);
        dec.signals.table.set(0, v + 0.5);
        let after = run();
        // label 1's row (forward chain passed through label 0) moved
        assert!((before[2] - after[2]).abs() > 1e-12 || (before[3] - after[3]).abs() > 1e-12);
        // label 2's row moved too (both chains route through label 0 in
        // one direction or the other)
        assert!((before[4] - after[4]).abs() > 1e-12 || (before[5] - after[5]).abs() > 1e-12);
    }

    #[test]
    fn output_heads_are_per_label() {
        // Zeroing head t only zeroes row t's dependence on its weights:
        // scaling fc_o of label 1 leaves rows 0 and 2 bit-identical.
        let (enc, dec) = toy_setup(31, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let feats = toy_features(&mut rng, 2);
        let moji = Tensor::new(&[2], vec![-0.3, 0.9]);
        let run = || {
            let tape = Tape::new();
            let out = enc.encode(&tape, &feats, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            dec.forward(&tape, &out, &moji).unwrap().data()
        };
        let before = run();
        let w = dec.heads.fc_o_w[1].clone();
        let scaled: Vec<f64> = w.data().iter().map(|v| v * 2.0).collect();
        w.set_data(&scaled);
        let after = run();
        assert_eq!(before[0].to_bits(), after[0].to_bits());
        assert_eq!(before[1].to_bits(), after[1].to_bits());
        assert_eq!(before[4].to_bits(), after[4].to_bits());
        assert_eq!(before[5].to_bits(), after[5].to_bits());
        assert!(before[2].to_bits() != after[2].to_bits() || before[3].to_bits() != after[3].to_bits());
    }

    #[test]
    fn loss_is_finite_and_backward_runs() {
        let (enc, dec) = toy_setup(17, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let feats = toy_features(&mut rng, 3);
        let moji = Tensor::new(&[2], vec![0.5, 0.5]);
        let tape = Tape::new();
        let out = enc.encode(&tape, &feats, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let logits = dec.forward(&tape, &out, &moji).unwrap();
        let gold = BinaryLabelVector::from_bits(vec![true, false]);
        let loss = lvc_loss(&tape, &logits, &gold).unwrap();
        assert!(loss.item().is_finite() && loss.item() > 0.0);
        tape.backward(&loss).unwrap();
        // every decoder parameter received some gradient signal
        for (name, p) in dec.params() {
            let g = p.grad();
            assert!(
                g.iter().any(|v| *v != 0.0),
                "no gradient reached {name}"
            );
        }
    }

    #[test]
    fn loss_shape_mismatch_is_dimension_error() {
        let tape = Tape::new();
        let logits = Tensor::new(&[2, 2], vec![0.0; 4]);
        let gold = BinaryLabelVector::from_bits(vec![true]);
        assert!(matches!(lvc_loss(&tape, &logits, &gold), Err(Error::Dimension(_))));
    }
}
