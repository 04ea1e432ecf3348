//! Multi-label evaluation metrics, plus macro P/R/F1 for single-label runs.
//!
//! All functions operate on [`BinaryLabelVector`]s so they are independent
//! of tokenization and label naming. The Jaccard term for an instance where
//! both gold and prediction are empty is defined as 1.

use crate::error::{Error, Result};
use crate::labels::BinaryLabelVector;

/// Paired gold/predicted label vectors for N instances over k labels.
pub struct EvalBatch<'a> {
    pub gold: &'a [BinaryLabelVector],
    pub pred: &'a [BinaryLabelVector],
    pub k: usize,
}

impl<'a> EvalBatch<'a> {
    pub fn new(gold: &'a [BinaryLabelVector], pred: &'a [BinaryLabelVector]) -> Result<EvalBatch<'a>> {
        if gold.is_empty() || gold.len() != pred.len() {
            return Err(Error::Contract(format!(
                "eval batch needs N >= 1 with matching lengths, got {} gold / {} pred",
                gold.len(),
                pred.len()
            )));
        }
        let k = gold[0].len();
        if k == 0 {
            return Err(Error::Contract("eval batch needs k >= 1".into()));
        }
        for v in gold.iter().chain(pred.iter()) {
            if v.len() != k {
                return Err(Error::Contract(format!(
                    "label vector length {} != k = {k}",
                    v.len()
                )));
            }
        }
        Ok(EvalBatch { gold, pred, k })
    }

    pub fn n(&self) -> usize {
        self.gold.len()
    }
}

/// Mean over instances of |gold n pred| / |gold u pred|; 1 when both empty.
pub fn jaccard(batch: &EvalBatch) -> f64 {
    let mut total = 0.0;
    for (g, p) in batch.gold.iter().zip(batch.pred.iter()) {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (gb, pb) in g.bits().iter().zip(p.bits()) {
            if *gb && *pb {
                inter += 1;
            }
            if *gb || *pb {
                union += 1;
            }
        }
        total += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    }
    total / batch.n() as f64
}

/// Fraction of wrongly predicted bits out of all N*k bits.
pub fn hamming_loss(batch: &EvalBatch) -> f64 {
    let mut wrong = 0usize;
    for (g, p) in batch.gold.iter().zip(batch.pred.iter()) {
        wrong += g.bits().iter().zip(p.bits()).filter(|(a, b)| a != b).count();
    }
    wrong as f64 / (batch.n() * batch.k) as f64
}

/// F1 from TP/FP/FN pooled over all instances and labels; 0 when the
/// denominator is 0.
pub fn micro_f1(batch: &EvalBatch) -> f64 {
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    for (g, p) in batch.gold.iter().zip(batch.pred.iter()) {
        for (gb, pb) in g.bits().iter().zip(p.bits()) {
            match (gb, pb) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fne += 1,
                (false, false) => {}
            }
        }
    }
    let denom = 2 * tp + fp + fne;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Macro-averaged precision/recall/F1 plus micro-F1 for single-label class
/// predictions. Classes with a zero denominator contribute 0 to the average.
pub fn macro_prf(gold: &[usize], pred: &[usize], k: usize) -> Result<(f64, f64, f64, f64)> {
    if gold.is_empty() || gold.len() != pred.len() {
        return Err(Error::Contract(format!(
            "macro_prf needs matching non-empty class lists, got {} / {}",
            gold.len(),
            pred.len()
        )));
    }
    if let Some(&c) = gold.iter().chain(pred.iter()).find(|&&c| c >= k) {
        return Err(Error::Domain(format!("class id {c} out of range for k = {k}")));
    }
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fne = vec![0usize; k];
    let mut correct = 0usize;
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            tp[g] += 1;
            correct += 1;
        } else {
            fp[p] += 1;
            fne[g] += 1;
        }
    }
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let p = if tp[c] + fp[c] == 0 { 0.0 } else { tp[c] as f64 / (tp[c] + fp[c]) as f64 };
        let r = if tp[c] + fne[c] == 0 { 0.0 } else { tp[c] as f64 / (tp[c] + fne[c]) as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        sp += p;
        sr += r;
        sf += f;
    }
    let kf = k as f64;
    // single-label micro-F1 reduces to accuracy
    Ok((sp / kf, sr / kf, sf / kf, correct as f64 / gold.len() as f64))
}

/// Machine-diffable report: `metric<TAB>value` with 6 decimal places.
pub fn format_report(entries: &[(&str, f64)]) -> String {
    let mut out = String::new();
    for (name, value) in entries {
        out.push_str(&format!("{name}\t{value:.6}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(bits: &[u8]) -> BinaryLabelVector {
        BinaryLabelVector::from_bits(bits.iter().map(|&b| b != 0).collect())
    }

    #[test]
    fn jaccard_empty_sets_count_as_one() {
        let gold = vec![v(&[0, 0])];
        let pred = vec![v(&[0, 0])];
        let b = EvalBatch::new(&gold, &pred).unwrap();
        assert_eq!(jaccard(&b), 1.0);
    }

    #[test]
    fn jaccard_half_overlap() {
        // gold {joy, love}, pred {joy} -> 1/2
        let gold = vec![v(&[1, 1, 0])];
        let pred = vec![v(&[1, 0, 0])];
        let b = EvalBatch::new(&gold, &pred).unwrap();
        assert_eq!(jaccard(&b), 0.5);
    }

    #[test]
    fn hamming_basics() {
        let gold = vec![v(&[1, 0, 1, 0])];
        let b = EvalBatch::new(&gold, &gold).unwrap();
        assert_eq!(hamming_loss(&b), 0.0);
        let pred = vec![v(&[1, 0, 1, 1])];
        let b = EvalBatch::new(&gold, &pred).unwrap();
        assert_eq!(hamming_loss(&b), 0.25);
    }

    #[test]
    fn micro_f1_extremes() {
        let gold = vec![v(&[1, 1]), v(&[1, 0])];
        let b = EvalBatch::new(&gold, &gold).unwrap();
        assert_eq!(micro_f1(&b), 1.0);
        let none = vec![v(&[0, 0]), v(&[0, 0])];
        let b = EvalBatch::new(&gold, &none).unwrap();
        assert_eq!(micro_f1(&b), 0.0);
        // all-negative gold and pred: denominator 0 -> 0 by convention
        let b = EvalBatch::new(&none, &none).unwrap();
        assert_eq!(micro_f1(&b), 0.0);
    }

    #[test]
    fn macro_prf_hand_case() {
        // k=2, gold [0,0,1,1], pred [0,1,1,1]:
        // class 0: P = 1/1, R = 1/2; class 1: P = 2/3, R = 2/2
        let (p, r, _, micro) = macro_prf(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert!((p - 5.0 / 6.0).abs() < 1e-15);
        assert!((r - 3.0 / 4.0).abs() < 1e-15);
        assert!((micro - 0.75).abs() < 1e-15);
    }

    #[test]
    fn macro_prf_zero_support_classes_average_in() {
        let (p, r, f, micro) = macro_prf(&[0, 0], &[0, 0], 3).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(micro, 1.0);
    }

    #[test]
    fn macro_prf_perfect() {
        let (p, r, f, micro) = macro_prf(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!((p, r, f, micro), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn batch_validation() {
        let gold = vec![v(&[1, 0])];
        let pred: Vec<BinaryLabelVector> = vec![];
        assert!(EvalBatch::new(&gold, &pred).is_err());
        let pred = vec![v(&[1, 0, 0])];
        assert!(EvalBatch::new(&gold, &pred).is_err());
    }

    #[test]
    fn report_format() {
        let s = format_report(&[("jaccard", 0.5), ("hamming_loss", 0.125)]);
        assert_eq!(s, "jaccard\t0.500000\nhamming_loss\t0.125000\n");
    }
}
