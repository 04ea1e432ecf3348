//! Label-space types shared by the models, metrics, and corpus pipeline.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Ordered, fixed set of label names. The order is part of the model
/// contract: label position t everywhere refers to `labels[t]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new(labels: Vec<String>) -> Result<LabelSpace> {
        if labels.is_empty() {
            return Err(Error::Contract("label space must contain at least one label".into()));
        }
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Contract(format!("duplicate label {l:?}")));
            }
        }
        Ok(LabelSpace { labels, index })
    }

    pub fn from_names(names: &[&str]) -> Result<LabelSpace> {
        LabelSpace::new(names.iter().map(|s| s.to_string()).collect())
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn name(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Binary vector with bit i set iff `labels[i]` is in `names`.
    pub fn encode<'a, I: IntoIterator<Item = &'a str>>(&self, names: I) -> Result<BinaryLabelVector> {
        let mut bits = vec![false; self.k()];
        for name in names {
            let i = self
                .position(name)
                .ok_or_else(|| Error::Data(format!("unknown label {name:?}")))?;
            bits[i] = true;
        }
        Ok(BinaryLabelVector { bits })
    }

    pub fn decode<'s>(&'s self, v: &BinaryLabelVector) -> Vec<&'s str> {
        v.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| self.name(i))
            .collect()
    }
}

/// Fixed-length bit vector over a label space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryLabelVector {
    bits: Vec<bool>,
}

impl BinaryLabelVector {
    pub fn from_bits(bits: Vec<bool>) -> BinaryLabelVector {
        BinaryLabelVector { bits }
    }

    pub fn zeros(k: usize) -> BinaryLabelVector {
        BinaryLabelVector { bits: vec![false; k] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn count_positive(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Positions of set bits, ascending.
    pub fn positive_positions(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_roundtrip() {
        let ls = LabelSpace::from_names(&["joy", "love", "anger"]).unwrap();
        let v = ls.encode(["anger", "joy"]).unwrap();
        assert_eq!(v.bits(), &[true, false, true]);
        assert_eq!(ls.decode(&v), vec!["joy", "anger"]);
    }

    #[test]
    fn unknown_label_is_data_error() {
        let ls = LabelSpace::from_names(&["joy"]).unwrap();
        assert!(matches!(ls.encode(["zzz"]), Err(Error::Data(_))));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(LabelSpace::from_names(&["a", "a"]).is_err());
        assert!(LabelSpace::new(vec![]).is_err());
    }
}
