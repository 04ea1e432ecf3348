//! Global attention with the bilinear ("general") score and output
//! combination: `score_i = h_d' W_a hbar_i`, `alpha = softmax(scores)`,
//! `ctx = sum_i alpha_i hbar_i`, `h_tilde = tanh(W_c [ctx; h_d])`.
//!
//! The context normalizes by the sum of the attention weights, which is 1
//! after the softmax, so it is computed as a plain weighted sum.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

pub struct Attention {
    pub w_a: Tensor, // [2H x 2H]
    pub w_c: Tensor, // [2H x 4H]
}

impl Attention {
    pub fn new(width: usize, rng: &mut dyn RngCore) -> Attention {
        let bound = 1.0 / (width as f64).sqrt();
        Attention {
            w_a: Tensor::uniform(&[width, width], bound, rng),
            w_c: Tensor::uniform(&[width, 2 * width], bound, rng),
        }
    }

    pub fn params(&self, prefix: &str) -> Vec<(String, Tensor)> {
        vec![
            (format!("{prefix}.w_a"), self.w_a.clone()),
            (format!("{prefix}.w_c"), self.w_c.clone()),
        ]
    }

    /// Returns `(alpha, ctx, h_tilde)` for one decoder state against the
    /// n x 2H encoder states.
    pub fn attend(&self, tape: &Tape, h_d: &Tensor, hbar: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let hs = hbar.shape();
        if hs.len() != 2 || hs[0] == 0 {
            return Err(Error::Contract(format!(
                "attend: encoder states must be a non-empty n x 2H matrix, got {hs:?}"
            )));
        }
        // scores = hbar . (W_a' h_d)
        let keyed = tape.tmatvec(&self.w_a, h_d)?;
        let scores = tape.matvec(hbar, &keyed)?;
        let alpha = tape.softmax(&scores, 0)?;
        let ctx = tape.tmatvec(hbar, &alpha)?;
        let cat = tape.concat(&[&ctx, h_d], 0)?;
        let h_tilde = tape.tanh(&tape.matvec(&self.w_c, &cat)?);
        Ok((alpha, ctx, h_tilde))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_attention(rng_seed: u64, width: usize) -> Attention {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        Attention::new(width, &mut rng)
    }

    #[test]
    fn singleton_attends_fully() {
        let att = small_attention(1, 2);
        let tape = Tape::new();
        let h_d = Tensor::new(&[2], vec![0.3, -0.4]);
        let hbar = Tensor::new(&[1, 2], vec![0.7, 0.1]);
        let (alpha, ctx, _) = att.attend(&tape, &h_d, &hbar).unwrap();
        assert_eq!(alpha.data(), vec![1.0]);
        assert_eq!(ctx.data(), vec![0.7, 0.1]);
    }

    #[test]
    fn zero_score_matrix_gives_uniform_weights() {
        let mut att = small_attention(1, 2);
        att.w_a = Tensor::param(&[2, 2], vec![0.0; 4]);
        let tape = Tape::new();
        let h_d = Tensor::new(&[2], vec![0.3, -0.4]);
        let hbar = Tensor::new(&[3, 2], vec![0.7, 0.1, -0.2, 0.5, 0.9, 0.9]);
        let (alpha, _, _) = att.attend(&tape, &h_d, &hbar).unwrap();
        for a in alpha.data() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_case_matches_independent_evaluation() {
        // n=2, width=2, everything hand-set; oracle is a plain-array
        // re-evaluation of the same formulas.
        let att = Attention {
            w_a: Tensor::param(&[2, 2], vec![0.5, -0.3, 0.2, 0.8]),
            w_c: Tensor::param(&[2, 4], vec![0.1, 0.4, -0.2, 0.3, -0.5, 0.2, 0.6, -0.1]),
        };
        let tape = Tape::new();
        let h_d = Tensor::new(&[2], vec![0.9, -0.6]);
        let hbar = Tensor::new(&[2, 2], vec![0.2, 0.7, -0.4, 0.1]);
        let (alpha, ctx, h_tilde) = att.attend(&tape, &h_d, &hbar).unwrap();

        let wa = [[0.5, -0.3], [0.2, 0.8]];
        let wc = [[0.1, 0.4, -0.2, 0.3], [-0.5, 0.2, 0.6, -0.1]];
        let hd = [0.9, -0.6];
        let hb = [[0.2, 0.7], [-0.4, 0.1]];
        let mut scores = [0.0f64; 2];
        for (i, row) in hb.iter().enumerate() {
            for p in 0..2 {
                for q in 0..2 {
                    scores[i] += hd[p] * wa[p][q] * row[q];
                }
            }
        }
        let m = scores[0].max(scores[1]);
        let e = [(scores[0] - m).exp(), (scores[1] - m).exp()];
        let z = e[0] + e[1];
        let al = [e[0] / z, e[1] / z];
        let mut cx = [0.0f64; 2];
        for i in 0..2 {
            for j in 0..2 {
                cx[j] += al[i] * hb[i][j];
            }
        }
        let cat = [cx[0], cx[1], hd[0], hd[1]];
        let mut ht = [0.0f64; 2];
        for (r, row) in wc.iter().enumerate() {
            let s: f64 = row.iter().zip(&cat).map(|(w, v)| w * v).sum();
            ht[r] = s.tanh();
        }

        for (got, want) in alpha.data().iter().zip(&al) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in ctx.data().iter().zip(&cx) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in h_tilde.data().iter().zip(&ht) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn invariants_hold_on_random_inputs() {
        let att = small_attention(9, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use rand::Rng;
        for _ in 0..20 {
            let tape = Tape::new();
            let n = rng.gen_range(1..6);
            let h_d = Tensor::new(&[3], (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let hbar = Tensor::new(&[n, 3], (0..3 * n).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let (alpha, ctx, h_tilde) = att.attend(&tape, &h_d, &hbar).unwrap();
            let a = alpha.data();
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(a.iter().all(|&v| v > 0.0));
            // context stays inside the convex hull of encoder rows
            let hd = hbar.data();
            for j in 0..3 {
                let col: Vec<f64> = (0..n).map(|i| hd[i * 3 + j]).collect();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let c = ctx.data()[j];
                assert!(c >= lo - 1e-12 && c <= hi + 1e-12);
            }
            assert!(h_tilde.data().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn permuting_rows_permutes_alpha_and_keeps_ctx() {
        let att = small_attention(13, 2);
        let tape = Tape::new();
        let h_d = Tensor::new(&[2], vec![0.4, 1.1]);
        let hbar = Tensor::new(&[3, 2], vec![0.2, 0.7, -0.4, 0.1, 0.9, -0.9]);
        let perm = Tensor::new(&[3, 2], vec![0.9, -0.9, 0.2, 0.7, -0.4, 0.1]);
        let (a1, c1, _) = att.attend(&tape, &h_d, &hbar).unwrap();
        let (a2, c2, _) = att.attend(&tape, &h_d, &perm).unwrap();
        let a1 = a1.data();
        let a2 = a2.data();
        assert!((a1[0] - a2[1]).abs() < 1e-15);
        assert!((a1[1] - a2[2]).abs() < 1e-15);
        assert!((a1[2] - a2[0]).abs() < 1e-15);
        for (x, y) in c1.data().iter().zip(c2.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
