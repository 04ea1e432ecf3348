//! Multi-layer bidirectional LSTM encoder.
//!
//! Each layer runs one forward and one backward LSTM over its input rows
//! and emits the concatenated `[fwd; bwd]` state per position. Layer l
//! consumes layer l-1's outputs; inter-layer dropout only. The top layer's
//! per-position states form `hbar`, and the final states seed the decoder:
//! `final_h = [fwd state at t=n; bwd state at t=1]`, same for the cell.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

/// Fused-gate LSTM cell. Gate layout along the 4H axis is `[i, f, g, o]`;
/// the forget-gate bias segment is initialized to 1, everything else to 0,
/// and weights to uniform(-1/sqrt(H), 1/sqrt(H)).
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_x: Tensor, // [4H x input_dim]
    pub w_h: Tensor, // [4H x H]
    pub b: Tensor,   // [4H]
}

impl LstmCell {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut dyn RngCore) -> LstmCell {
        let h = hidden_dim;
        let bound = 1.0 / (h as f64).sqrt();
        let w_x = Tensor::uniform(&[4 * h, input_dim], bound, rng);
        let w_h = Tensor::uniform(&[4 * h, h], bound, rng);
        let mut bias = vec![0.0; 4 * h];
        for v in bias.iter_mut().skip(h).take(h) {
            *v = 1.0; // forget gate
        }
        LstmCell { input_dim, hidden_dim, w_x, w_h, b: Tensor::param(&[4 * h], bias) }
    }

    pub fn params(&self, prefix: &str) -> Vec<(String, Tensor)> {
        vec![
            (format!("{prefix}.w_x"), self.w_x.clone()),
            (format!("{prefix}.w_h"), self.w_h.clone()),
            (format!("{prefix}.b"), self.b.clone()),
        ]
    }

    /// One step of the standard (non-peephole) recurrence:
    /// `c = f*c_prev + i*g`, `h = o*tanh(c)`.
    pub fn step(
        &self,
        tape: &Tape,
        x: &Tensor,
        h_prev: &Tensor,
        c_prev: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        let h = self.hidden_dim;
        if x.shape() != vec![self.input_dim] {
            return Err(Error::Dimension(format!(
                "lstm step: input shape {:?}, expected [{}]",
                x.shape(),
                self.input_dim
            )));
        }
        if h_prev.shape() != vec![h] || c_prev.shape() != vec![h] {
            return Err(Error::Dimension(format!(
                "lstm step: state shapes {:?}/{:?}, expected [{h}]",
                h_prev.shape(),
                c_prev.shape()
            )));
        }
        let gates = tape.add(
            &tape.add(&tape.matvec(&self.w_x, x)?, &tape.matvec(&self.w_h, h_prev)?)?,
            &self.b,
        )?;
        let i = tape.sigmoid(&tape.slice(&gates, 0, h)?);
        let f = tape.sigmoid(&tape.slice(&gates, h, h)?);
        let g = tape.tanh(&tape.slice(&gates, 2 * h, h)?);
        let o = tape.sigmoid(&tape.slice(&gates, 3 * h, h)?);
        let c = tape.add(&tape.mul(&f, c_prev)?, &tape.mul(&i, &g)?)?;
        let h_out = tape.mul(&o, &tape.tanh(&c))?;
        Ok((h_out, c))
    }
}

/// Per-position top-layer states plus the final states that seed decoding.
pub struct EncoderOutput {
    /// n x 2H matrix of top-layer `[fwd; bwd]` states.
    pub hbar: Tensor,
    pub final_h: Tensor, // [2H]
    pub final_c: Tensor, // [2H]
}

pub struct Encoder {
    pub hidden_dim: usize,
    pub dropout_p: f64,
    /// (forward, backward) cell per layer.
    pub layers: Vec<(LstmCell, LstmCell)>,
}

impl Encoder {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        num_layers: usize,
        dropout_p: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Encoder> {
        if num_layers == 0 {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let in_dim = if l == 0 { input_dim } else { 2 * hidden_dim };
            layers.push((
                LstmCell::new(in_dim, hidden_dim, rng),
                LstmCell::new(in_dim, hidden_dim, rng),
            ));
        }
        Ok(Encoder { hidden_dim, dropout_p, layers })
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (l, (fwd, bwd)) in self.layers.iter().enumerate() {
            out.extend(fwd.params(&format!("encoder.layer{l}.fwd")));
            out.extend(bwd.params(&format!("encoder.layer{l}.bwd")));
        }
        out
    }

    /// Run over an `n x D_in` feature matrix. Both directions start from
    /// zero states. Dropout is applied between layers, not on the top
    /// output, and only when `training`.
    pub fn encode(
        &self,
        tape: &Tape,
        features: &Tensor,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<EncoderOutput> {
        let shape = features.shape();
        if shape.len() != 2 || shape[0] == 0 {
            return Err(Error::Contract(format!(
                "encode: expected non-empty n x D feature matrix, got {shape:?}"
            )));
        }
        let n = shape[0];
        let h = self.hidden_dim;

        let mut rows: Vec<Tensor> = (0..n).map(|t| tape.row(features, t)).collect::<Result<_>>()?;
        let num_layers = self.layers.len();
        for (l, (fwd, bwd)) in self.layers.iter().enumerate() {
            let mut fwd_states = Vec::with_capacity(n);
            let mut state = (Tensor::zeros(&[h]), Tensor::zeros(&[h]));
            for row in &rows {
                state = fwd.step(tape, row, &state.0, &state.1)?;
                fwd_states.push(state.clone());
            }
            let mut bwd_states = vec![None; n];
            let mut state = (Tensor::zeros(&[h]), Tensor::zeros(&[h]));
            for t in (0..n).rev() {
                state = bwd.step(tape, &rows[t], &state.0, &state.1)?;
                bwd_states[t] = Some(state.clone());
            }
            let bwd_states: Vec<(Tensor, Tensor)> =
                bwd_states.into_iter().map(|s| s.unwrap()).collect();

            if l + 1 == num_layers {
                let final_h = tape.concat(&[&fwd_states[n - 1].0, &bwd_states[0].0], 0)?;
                let final_c = tape.concat(&[&fwd_states[n - 1].1, &bwd_states[0].1], 0)?;
                let combined: Vec<Tensor> = fwd_states
                    .iter()
                    .zip(&bwd_states)
                    .map(|((f, _), (b, _))| tape.concat(&[f, b], 0))
                    .collect::<Result<_>>()?;
                let refs: Vec<&Tensor> = combined.iter().collect();
                let hbar = tape.stack_rows(&refs)?;
                return Ok(EncoderOutput { hbar, final_h, final_c });
            }

            rows = fwd_states
                .iter()
                .zip(&bwd_states)
                .map(|((fh, _), (bh, _))| {
                    let cat = tape.concat(&[fh, bh], 0)?;
                    tape.dropout(&cat, self.dropout_p, training, rng)
                })
                .collect::<Result<_>>()?;
        }
        unreachable!("loop returns at the top layer")
    }
}
