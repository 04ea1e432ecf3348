//! Run configuration: flat `key = value` files with `#` comments, plus
//! programmatic overrides (the CLI maps its flags onto override pairs,
//! which win over file values).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Seq2Emo,
    BinaryBr2,
    BinaryBrTau,
    Sgm,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "seq2emo" => Ok(ModelKind::Seq2Emo),
            "binary_br2" => Ok(ModelKind::BinaryBr2),
            "binary_br_tau" => Ok(ModelKind::BinaryBrTau),
            "sgm" => Ok(ModelKind::Sgm),
            other => Err(Error::Config(format!(
                "unknown model {other:?} (expected seq2emo, binary_br2, binary_br_tau, or sgm)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Seq2Emo => "seq2emo",
            ModelKind::BinaryBr2 => "binary_br2",
            ModelKind::BinaryBrTau => "binary_br_tau",
            ModelKind::Sgm => "sgm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a run needs. Desk-scale defaults; larger values are legal.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    /// Ordered label names; position t in every model refers to labels[t].
    pub labels: Vec<String>,
    pub hidden: usize, // H, per direction
    pub layers: usize,
    pub d_g: usize, // token embedding width
    pub d_e: usize, // per-token auxiliary feature width (0 = none)
    pub d_m: usize, // instance-level auxiliary vector width (0 = none)
    pub d_s: usize, // chain signal embedding width
    pub d_f: usize, // auxiliary projection width inside the chain decoder
    pub d_l: usize, // label embedding width in the sequence-generation baseline
    pub lr_encoder: f64,
    pub lr_decoder: f64,
    pub dropout: f64,
    pub tau: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub patience: usize,
    pub min_freq: usize,
    pub train_path: Option<String>,
    pub dev_path: Option<String>,
    pub test_path: Option<String>,
    pub glove_path: Option<String>,
    pub aux_seq_path: Option<String>,
    pub aux_inst_path: Option<String>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            model: ModelKind::Seq2Emo,
            labels: Vec::new(),
            hidden: 64,
            layers: 2,
            d_g: 32,
            d_e: 0,
            d_m: 0,
            d_s: 64,
            d_f: 64,
            d_l: 32,
            lr_encoder: 5e-4,
            lr_decoder: 1e-4,
            dropout: 0.2,
            tau: 0.5,
            epochs: 50,
            batch_size: 16,
            seed: 1,
            patience: 5,
            min_freq: 1,
            train_path: None,
            dev_path: None,
            test_path: None,
            glove_path: None,
            aux_seq_path: None,
            aux_inst_path: None,
        }
    }
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are
/// skipped. Later occurrences of a key win.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            });
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    /// Build from key/value pairs over the defaults. Unknown keys are
    /// configuration errors; model-specific keys are rejected when set
    /// for a model that does not use them.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<RunConfig> {
        let mut merged: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in pairs {
            merged.insert(k, v);
        }
        let mut cfg = RunConfig::default();
        let mut explicit_tau = false;
        let mut explicit_d_l = false;
        for (key, value) in &merged {
            match *key {
                "model" => cfg.model = ModelKind::parse(value)?,
                "labels" => {
                    cfg.labels = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                }
                "hidden" => cfg.hidden = parse_num(key, value)?,
                "layers" => cfg.layers = parse_num(key, value)?,
                "d_g" => cfg.d_g = parse_num(key, value)?,
                "d_e" => cfg.d_e = parse_num(key, value)?,
                "d_m" => cfg.d_m = parse_num(key, value)?,
                "d_s" => cfg.d_s = parse_num(key, value)?,
                "d_f" => cfg.d_f = parse_num(key, value)?,
                "d_l" => {
                    cfg.d_l = parse_num(key, value)?;
                    explicit_d_l = true;
                }
                "lr_encoder" => cfg.lr_encoder = parse_num(key, value)?,
                "lr_decoder" => cfg.lr_decoder = parse_num(key, value)?,
                "dropout" => cfg.dropout = parse_num(key, value)?,
                "tau" => {
                    cfg.tau = parse_num(key, value)?;
                    explicit_tau = true;
                }
                "epochs" => cfg.epochs = parse_num(key, value)?,
                "batch_size" => cfg.batch_size = parse_num(key, value)?,
                "seed" => cfg.seed = parse_num(key, value)?,
                "patience" => cfg.patience = parse_num(key, value)?,
                "min_freq" => cfg.min_freq = parse_num(key, value)?,
                "train" => cfg.train_path = Some(value.to_string()),
                "dev" => cfg.dev_path = Some(value.to_string()),
                "test" => cfg.test_path = Some(value.to_string()),
                "glove" => cfg.glove_path = Some(value.to_string()),
                "aux_seq" => cfg.aux_seq_path = Some(value.to_string()),
                "aux_inst" => cfg.aux_inst_path = Some(value.to_string()),
                other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
            }
        }
        if explicit_tau && cfg.model != ModelKind::BinaryBrTau {
            return Err(Error::Config(format!(
                "tau applies only to binary_br_tau, not {}",
                cfg.model
            )));
        }
        if explicit_d_l && cfg.model != ModelKind::Sgm {
            return Err(Error::Config(format!(
                "d_l applies only to sgm, not {}",
                cfg.model
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file, then apply overrides on top of it.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = parse_pairs(&text)?;
        pairs.extend_from_slice(overrides);
        RunConfig::from_pairs(&pairs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.layers == 0 {
            return Err(Error::Config("hidden and layers must be positive".into()));
        }
        if self.d_g == 0 {
            return Err(Error::Config("d_g must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.lr_encoder <= 0.0 || self.lr_decoder < 0.0 {
            return Err(Error::Config("learning rates must be positive (decoder may be 0)".into()));
        }
        match self.model {
            ModelKind::Seq2Emo => {
                if self.d_s == 0 || self.d_f == 0 {
                    return Err(Error::Config("d_s and d_f must be positive for seq2emo".into()));
                }
            }
            ModelKind::Sgm => {
                if self.d_l == 0 {
                    return Err(Error::Config("d_l must be positive for sgm".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    /// Serialize every field as `key = value` lines; feeding the result
    /// back through [`parse_pairs`] + [`RunConfig::from_pairs`] recovers
    /// an equal config.
    pub fn to_echo(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("model", self.model.to_string());
        push("labels", self.labels.join(","));
        push("hidden", self.hidden.to_string());
        push("layers", self.layers.to_string());
        push("d_g", self.d_g.to_string());
        push("d_e", self.d_e.to_string());
        push("d_m", self.d_m.to_string());
        push("d_s", self.d_s.to_string());
        push("d_f", self.d_f.to_string());
        if self.model == ModelKind::Sgm {
            push("d_l", self.d_l.to_string());
        }
        push("lr_encoder", format!("{:e}", self.lr_encoder));
        push("lr_decoder", format!("{:e}", self.lr_decoder));
        push("dropout", self.dropout.to_string());
        if self.model == ModelKind::BinaryBrTau {
            push("tau", self.tau.to_string());
        }
        push("epochs", self.epochs.to_string());
        push("batch_size", self.batch_size.to_string());
        push("seed", self.seed.to_string());
        push("patience", self.patience.to_string());
        push("min_freq", self.min_freq.to_string());
        for (k, v) in [
            ("train", &self.train_path),
            ("dev", &self.dev_path),
            ("test", &self.test_path),
            ("glove", &self.glove_path),
            ("aux_seq", &self.aux_seq_path),
            ("aux_inst", &self.aux_inst_path),
        ] {
            if let Some(v) = v {
                push(k, v.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(text: &str) -> Vec<(String, String)> {
        parse_pairs(text).unwrap()
    }

    #[test]
    fn defaults_are_desk_scale() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.hidden, 64);
        assert_eq!(cfg.layers, 2);
        assert_eq!(cfg.d_s, 64);
        assert_eq!(cfg.d_f, 64);
        assert_eq!(cfg.batch_size, 16);
        assert_eq!(cfg.lr_encoder, 5e-4);
        assert_eq!(cfg.lr_decoder, 1e-4);
        assert_eq!(cfg.dropout, 0.2);
        assert_eq!(cfg.patience, 5);
    }

    #[test]
    fn file_syntax_with_comments() {
        let cfg = RunConfig::from_pairs(&pairs(
            "# a comment\nmodel = seq2emo\nlabels = joy, anger\nhidden = 8  # inline\n\nseed = 42\n",
        ))
        .unwrap();
        assert_eq!(cfg.model, ModelKind::Seq2Emo);
        assert_eq!(cfg.labels, vec!["joy", "anger"]);
        assert_eq!(cfg.hidden, 8);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn later_pairs_override_earlier() {
        let mut p = pairs("hidden = 8\n");
        p.push(("hidden".into(), "16".into()));
        assert_eq!(RunConfig::from_pairs(&p).unwrap().hidden, 16);
    }

    #[test]
    fn unknown_key_and_bad_values_are_config_errors() {
        assert!(matches!(
            RunConfig::from_pairs(&pairs("mystery = 1\n")),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_pairs(&pairs("hidden = lots\n")),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_pairs(&pairs("dropout = 1.0\n")),
            Err(Error::Config(_))
        ));
        assert!(matches!(parse_pairs("no equals sign"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn model_specific_keys_are_checked() {
        assert!(matches!(
            RunConfig::from_pairs(&pairs("model = seq2emo\ntau = 0.3\n")),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_pairs(&pairs("model = binary_br_tau\ntau = 0.3\n")).is_ok());
        assert!(matches!(
            RunConfig::from_pairs(&pairs("model = binary_br2\nd_l = 16\n")),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_pairs(&pairs("model = sgm\nd_l = 16\n")).is_ok());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_pairs(&pairs(
            "model = binary_br_tau\nlabels = a,b,c\ntau = 0.25\nhidden = 4\ntrain = data/train.tsv\nlr_encoder = 0.001\n",
        ))
        .unwrap();
        let back = RunConfig::from_pairs(&pairs(&cfg.to_echo())).unwrap();
        assert_eq!(cfg, back);
    }
}
