//! Adam optimizer and a central finite-difference gradient checker.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

/// Adam hyper-parameters. Defaults: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> AdamConfig {
        AdamConfig { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    fn validate(&self) -> Result<()> {
        // a zero rate is legal (it freezes the whole group); negative is not
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Domain(format!("learning_rate {} must be >= 0", self.learning_rate)));
        }
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::Domain(format!(
                "betas ({}, {}) must lie in (0, 1)", self.beta1, self.beta2
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Domain(format!("epsilon {} must be > 0", self.epsilon)));
        }
        Ok(())
    }
}

struct Slot {
    tensor: Tensor,
    m: Vec<f64>,
    v: Vec<f64>,
    /// true = element never updated (frozen pretrained rows, <pad>)
    frozen: Option<Vec<bool>>,
}

/// Adam with bias correction over a fixed parameter group.
pub struct Adam {
    config: AdamConfig,
    step_count: u64,
    slots: Vec<Slot>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Result<Adam> {
        config.validate()?;
        let slots = params
            .iter()
            .map(|t| Slot {
                tensor: t.clone(),
                m: vec![0.0; t.len()],
                v: vec![0.0; t.len()],
                frozen: None,
            })
            .collect();
        Ok(Adam { config, step_count: 0, slots })
    }

    /// Mark elements of an already-registered parameter as frozen.
    pub fn set_frozen(&mut self, param: &Tensor, mask: Vec<bool>) -> Result<()> {
        let slot = self
            .slots
            .iter_mut()
            .find(|s| s.tensor.id() == param.id())
            .ok_or_else(|| Error::Contract("set_frozen: parameter not registered".into()))?;
        if mask.len() != slot.tensor.len() {
            return Err(Error::Contract(format!(
                "set_frozen: mask length {} != parameter length {}",
                mask.len(),
                slot.tensor.len()
            )));
        }
        slot.frozen = Some(mask);
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate
    }

    /// One Adam update from the gradients currently in the parameters.
    pub fn step(&mut self) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for slot in &mut self.slots {
            let m = &mut slot.m;
            let v = &mut slot.v;
            let frozen = slot.frozen.as_deref();
            slot.tensor.update(|i, val, g| {
                if let Some(mask) = frozen {
                    if mask[i] {
                        return val;
                    }
                }
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                val - c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon)
            });
        }
    }

    pub fn zero_grad(&self) {
        for slot in &self.slots {
            slot.tensor.zero_grad();
        }
    }

    /// Moment buffers for checkpointing, in registration order.
    pub fn state(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.slots.iter().map(|s| (s.m.clone(), s.v.clone())).collect()
    }

    pub fn restore_state(&mut self, step_count: u64, state: Vec<(Vec<f64>, Vec<f64>)>) -> Result<()> {
        if state.len() != self.slots.len() {
            return Err(Error::Contract(format!(
                "restore_state: {} entries for {} parameters",
                state.len(),
                self.slots.len()
            )));
        }
        self.step_count = step_count;
        for (slot, (m, v)) in self.slots.iter_mut().zip(state) {
            if m.len() != slot.tensor.len() || v.len() != slot.tensor.len() {
                return Err(Error::Contract("restore_state: moment length mismatch".into()));
            }
            slot.m = m;
            slot.v = v;
        }
        Ok(())
    }
}

/// Result of [`grad_check`]: worst relative error per parameter.
pub struct GradCheckReport {
    pub per_param: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.per_param.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err() < tol
    }
}

const ABS_FLOOR: f64 = 1e-6;

/// Compare analytic gradients of `f` against central finite differences.
///
/// `f` must be a deterministic function of the parameter values (fixed rng,
/// dropout off); this is verified by evaluating it twice up front.
pub fn grad_check<F>(f: F, params: &[(String, Tensor)], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&Tape) -> Result<Tensor>,
{
    let eval = |f: &F| -> Result<f64> {
        let tape = Tape::new();
        let loss = f(&tape)?;
        if loss.len() != 1 {
            return Err(Error::Contract("grad_check: f must return a scalar".into()));
        }
        Ok(loss.item())
    };

    let l1 = eval(&f)?;
    let l2 = eval(&f)?;
    if l1.to_bits() != l2.to_bits() {
        return Err(Error::Contract(format!(
            "grad_check: f is not deterministic ({l1} vs {l2})"
        )));
    }

    // analytic pass
    for (_, p) in params {
        p.zero_grad();
    }
    {
        let tape = Tape::new();
        let loss = f(&tape)?;
        tape.backward(&loss)?;
    }
    let analytic: Vec<Vec<f64>> = params.iter().map(|(_, p)| p.grad()).collect();
    for (_, p) in params {
        p.zero_grad();
    }

    let mut per_param = Vec::with_capacity(params.len());
    for ((name, p), grads) in params.iter().zip(&analytic) {
        let mut worst = 0.0f64;
        for i in 0..p.len() {
            let orig = p.get(i);
            p.set(i, orig + h);
            let fp = eval(&f)?;
            p.set(i, orig - h);
            let fm = eval(&f)?;
            p.set(i, orig);
            let fd = (fp - fm) / (2.0 * h);
            let a = grads[i];
            let diff = (a - fd).abs();
            let err = if diff <= ABS_FLOOR {
                0.0
            } else {
                diff / a.abs().max(fd.abs())
            };
            worst = worst.max(err);
        }
        per_param.push((name.clone(), worst));
    }
    Ok(GradCheckReport { per_param })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let p = Tensor::param(&[2], vec![1.5, -2.5]);
        let mut adam = Adam::new(AdamConfig::with_lr(0.1), &[p.clone()]).unwrap();
        adam.step();
        assert_eq!(p.data(), vec![1.5, -2.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // with bias correction, a unit gradient at step 1 gives
        // m_hat = 1, v_hat = 1, so the update is lr / (1 + eps) ~ lr
        let p = Tensor::param(&[1], vec![0.0]);
        let mut adam = Adam::new(AdamConfig::with_lr(0.01), &[p.clone()]).unwrap();
        p.add_to_grad(&[1.0]);
        adam.step();
        assert!((p.data()[0] + 0.01).abs() < 1e-9, "{}", p.data()[0]);
    }

    #[test]
    fn converges_on_quadratic() {
        // f(x) = x^2 from x = 5 with lr = 0.1; an independent transcription
        // of the Adam recurrence must match the implementation exactly.
        let p = Tensor::param(&[1], vec![5.0]);
        let mut adam = Adam::new(AdamConfig::with_lr(0.1), &[p.clone()]).unwrap();
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let (mut xm, mut mm, mut vm) = (5.0f64, 0.0f64, 0.0f64);
        for t in 1..=100 {
            let tape = Tape::new();
            let loss = tape.mul(&p, &p).unwrap();
            tape.backward(&loss).unwrap();
            adam.step();
            adam.zero_grad();

            let g = 2.0 * xm;
            mm = b1 * mm + (1.0 - b1) * g;
            vm = b2 * vm + (1.0 - b2) * g * g;
            let mh = mm / (1.0 - b1.powi(t));
            let vh = vm / (1.0 - b2.powi(t));
            xm -= 0.1 * mh / (vh.sqrt() + eps);
            assert_eq!(p.data()[0].to_bits(), xm.to_bits(), "diverged at step {t}");
        }
        assert!(p.data()[0].abs() < 1.0, "x = {}", p.data()[0]);
    }

    #[test]
    fn frozen_elements_never_move() {
        let p = Tensor::param(&[2], vec![1.0, 1.0]);
        let mut adam = Adam::new(AdamConfig::with_lr(0.5), &[p.clone()]).unwrap();
        adam.set_frozen(&p, vec![true, false]).unwrap();
        p.add_to_grad(&[1.0, 1.0]);
        adam.step();
        let d = p.data();
        assert_eq!(d[0], 1.0);
        assert!(d[1] < 1.0);
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let p = Tensor::param(&[1], vec![0.0]);
        let mut cfg = AdamConfig::with_lr(-0.1);
        assert!(Adam::new(cfg, &[p.clone()]).is_err());
        cfg = AdamConfig::with_lr(0.0); // zero freezes the group, legal
        assert!(Adam::new(cfg, &[p.clone()]).is_ok());
        cfg = AdamConfig::with_lr(0.1);
        cfg.beta1 = 1.0;
        assert!(Adam::new(cfg, &[p]).is_err());
    }

    #[test]
    fn grad_check_passes_on_composite_function() {
        let w = Tensor::param(&[3, 4], (0..12).map(|i| 0.1 * i as f64 - 0.5).collect());
        let x = Tensor::param(&[4], vec![0.3, -0.8, 1.2, 0.05]);
        let params = vec![("w".to_string(), w.clone()), ("x".to_string(), x.clone())];
        let report = grad_check(
            |tape| {
                let h = tape.matvec(&w, &x)?;
                let a = tape.tanh(&h);
                let s = tape.sigmoid(&a);
                Ok(tape.sum(&s))
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(report.passes(1e-4), "max rel err {}", report.max_rel_err());
    }

    #[test]
    fn grad_check_matmul_sum() {
        let a = Tensor::param(&[3, 4], (0..12).map(|i| (i as f64 * 0.37).sin()).collect());
        let b = Tensor::param(&[4, 2], (0..8).map(|i| (i as f64 * 0.71).cos()).collect());
        let params = vec![("a".to_string(), a.clone()), ("b".to_string(), b.clone())];
        let report = grad_check(
            |tape| {
                let c = tape.matmul(&a, &b)?;
                Ok(tape.sum(&c))
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_err() < 1e-6, "max rel err {}", report.max_rel_err());
    }

    #[test]
    fn grad_check_detects_nondeterminism() {
        use std::cell::Cell;
        let x = Tensor::param(&[1], vec![1.0]);
        let calls = Cell::new(0.0);
        let params = vec![("x".to_string(), x.clone())];
        let r = grad_check(
            |tape| {
                calls.set(calls.get() + 1.0);
                let c = Tensor::scalar(calls.get());
                tape.mul(&x, &c)
            },
            &params,
            1e-5,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }
}
