//! Vocabulary construction, GloVe text-format loading, and the
//! precomputed auxiliary-feature file interface.
//!
//! Auxiliary features stand in for contextual (per-token) and
//! instance-level pretrained extractors. They are read from simple
//! tab-separated files; any instance without an entry gets zeros of the
//! right shape, so every pipeline runs without external models.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Token <-> id bijection with `<pad>` = 0 and `<unk>` = 1.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Tokens with frequency >= `min_freq`, ordered by descending frequency
    /// then lexicographically, after the two specials.
    pub fn build<'a, I>(corpus: I, min_freq: usize) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if min_freq < 1 {
            return Err(Error::Domain(format!("min_freq {min_freq} must be >= 1")));
        }
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for tokens in corpus {
            for tok in tokens {
                *freq.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> =
            freq.into_iter().filter(|&(_, c)| c >= min_freq).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut id_to_token = vec![PAD.to_string(), UNK.to_string()];
        id_to_token.extend(kept.iter().map(|(t, _)| t.to_string()));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary { token_to_id, id_to_token })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // specials are always present
    }

    /// Id of `token`, falling back to `<unk>`.
    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Rebuild from a stored token list (checkpoint loading).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocabulary> {
        if tokens.len() < 2 || tokens[PAD_ID] != PAD || tokens[UNK_ID] != UNK {
            return Err(Error::Data("vocabulary list must start with <pad>, <unk>".into()));
        }
        let token_to_id = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary { token_to_id, id_to_token: tokens })
    }
}

/// Word-embedding matrix with per-row freeze flags. The `<pad>` row is
/// all-zeros and frozen; rows loaded from a pretrained file are frozen;
/// everything else trains.
#[derive(Debug)]
pub struct EmbeddingTable {
    pub matrix: Tensor,
    pub frozen: Vec<bool>,
    pub dim: usize,
}

impl EmbeddingTable {
    /// All-trainable table with uniform(-0.1, 0.1) rows (except `<pad>`).
    pub fn random(vocab: &Vocabulary, dim: usize, rng: &mut dyn RngCore) -> EmbeddingTable {
        use rand::Rng;
        let rows = vocab.len();
        let mut data = vec![0.0; rows * dim];
        for r in 0..rows {
            if r == PAD_ID {
                continue;
            }
            for c in 0..dim {
                data[r * dim + c] = rng.gen_range(-0.1..0.1);
            }
        }
        let mut frozen = vec![false; rows];
        frozen[PAD_ID] = true;
        EmbeddingTable { matrix: Tensor::param(&[rows, dim], data), frozen, dim }
    }

    /// Load GloVe text format: one line per word, `token f1 f2 ... fD`.
    /// Returns the table plus the number of vocabulary tokens matched.
    pub fn load_glove_text(
        path: &Path,
        expected_dim: usize,
        vocab: &Vocabulary,
        rng: &mut dyn RngCore,
    ) -> Result<(EmbeddingTable, usize)> {
        let mut table = EmbeddingTable::random(vocab, expected_dim, rng);
        let rows = vocab.len();
        let mut data = table.matrix.data();
        let file = BufReader::new(File::open(path)?);
        let mut matched = 0usize;
        for (lineno, line) in file.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let token = parts.next().unwrap_or("");
            let values: Vec<&str> = parts.collect();
            if values.len() != expected_dim {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!(
                        "expected {} vector components, found {}",
                        expected_dim,
                        values.len()
                    ),
                });
            }
            if !vocab.contains(token) || token == PAD || token == UNK {
                continue;
            }
            let id = vocab.id(token);
            for (c, v) in values.iter().enumerate() {
                data[id * expected_dim + c] = v.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad float {v:?}"),
                })?;
            }
            table.frozen[id] = true;
            matched += 1;
        }
        // keep pad at zero even if the file carried a <pad> entry
        for c in 0..expected_dim {
            data[PAD_ID * expected_dim + c] = 0.0;
        }
        table.matrix.set_data(&data);
        debug_assert_eq!(table.frozen.len(), rows);
        Ok((table, matched))
    }

    /// Element-level freeze mask for the optimizer.
    pub fn freeze_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.frozen.len() * self.dim);
        for &f in &self.frozen {
            mask.extend(std::iter::repeat(f).take(self.dim));
        }
        mask
    }
}

/// Per-token feature rows keyed by instance id (n x D_E per instance).
pub struct AuxSequenceFeatures {
    pub dim: usize,
    map: HashMap<String, Vec<Vec<f64>>>,
}

impl AuxSequenceFeatures {
    pub fn empty(dim: usize) -> AuxSequenceFeatures {
        AuxSequenceFeatures { dim, map: HashMap::new() }
    }

    /// File format: `instance_id<TAB>row_index<TAB>f1 f2 ... fD` per line.
    /// The dimension is inferred from the first record.
    pub fn load(path: &Path) -> Result<AuxSequenceFeatures> {
        let file = BufReader::new(File::open(path)?);
        let mut map: HashMap<String, Vec<(usize, Vec<f64>)>> = HashMap::new();
        let mut dim = 0usize;
        for (lineno, line) in file.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected 3 tab-separated fields, found {}", parts.len()),
                });
            }
            let row_index: usize = parts[1].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("bad row index {:?}", parts[1]),
            })?;
            let values = parse_floats(parts[2], lineno + 1)?;
            if dim == 0 {
                dim = values.len();
            } else if values.len() != dim {
                return Err(Error::Data(format!(
                    "instance {}: feature dimension {} differs from {}",
                    parts[0],
                    values.len(),
                    dim
                )));
            }
            map.entry(parts[0].to_string()).or_default().push((row_index, values));
        }
        let mut out = HashMap::new();
        for (id, mut rows) in map {
            rows.sort_by_key(|(i, _)| *i);
            for (want, (got, _)) in rows.iter().enumerate() {
                if *got != want {
                    return Err(Error::Data(format!(
                        "instance {id}: row indices are not contiguous from 0"
                    )));
                }
            }
            out.insert(id, rows.into_iter().map(|(_, v)| v).collect());
        }
        Ok(AuxSequenceFeatures { dim, map: out })
    }

    /// Rows for `id`; zeros of shape n x D_E when absent. Errors when a
    /// stored entry disagrees with the token count.
    pub fn rows(&self, id: &str, n: usize) -> Result<Vec<Vec<f64>>> {
        match self.map.get(id) {
            Some(rows) => {
                if rows.len() != n {
                    return Err(Error::Data(format!(
                        "instance {id}: {} feature rows for {n} tokens",
                        rows.len()
                    )));
                }
                Ok(rows.clone())
            }
            None => Ok(vec![vec![0.0; self.dim]; n]),
        }
    }
}

/// One feature vector of dimension D_M per instance id.
pub struct AuxInstanceFeatures {
    pub dim: usize,
    map: HashMap<String, Vec<f64>>,
}

impl AuxInstanceFeatures {
    pub fn empty(dim: usize) -> AuxInstanceFeatures {
        AuxInstanceFeatures { dim, map: HashMap::new() }
    }

    /// File format: `instance_id<TAB>f1 f2 ... fD`, exactly one line per id.
    pub fn load(path: &Path) -> Result<AuxInstanceFeatures> {
        let file = BufReader::new(File::open(path)?);
        let mut map = HashMap::new();
        let mut dim = 0usize;
        for (lineno, line) in file.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected 2 tab-separated fields, found {}", parts.len()),
                });
            }
            let values = parse_floats(parts[1], lineno + 1)?;
            if dim == 0 {
                dim = values.len();
            } else if values.len() != dim {
                return Err(Error::Data(format!(
                    "instance {}: feature dimension {} differs from {}",
                    parts[0],
                    values.len(),
                    dim
                )));
            }
            if map.insert(parts[0].to_string(), values).is_some() {
                return Err(Error::Data(format!(
                    "instance {}: duplicate feature line",
                    parts[0]
                )));
            }
        }
        Ok(AuxInstanceFeatures { dim, map })
    }

    /// Vector for `id`; zeros when absent.
    pub fn vector(&self, id: &str) -> Vec<f64> {
        self.map.get(id).cloned().unwrap_or_else(|| vec![0.0; self.dim])
    }
}

fn parse_floats(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split(' ')
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("bad float {p:?}"),
            })
        })
        .collect()
}

/// Row `t` of the result is `[glove_row(token_t); aux_row_t]`, shape
/// n x (D_G + D_E). `aux_rows` may be empty-width when aux is disabled.
pub fn embed_sequence(
    tape: &Tape,
    token_ids: &[usize],
    table: &EmbeddingTable,
    aux_rows: &[Vec<f64>],
    instance_id: &str,
) -> Result<Tensor> {
    let n = token_ids.len();
    if n == 0 {
        return Err(Error::Contract("embed_sequence: empty token sequence".into()));
    }
    let aux_dim = aux_rows.first().map_or(0, |r| r.len());
    if aux_dim > 0 && aux_rows.len() != n {
        return Err(Error::Data(format!(
            "instance {instance_id}: {} aux rows for {n} tokens",
            aux_rows.len()
        )));
    }
    let mut rows = Vec::with_capacity(n);
    for (t, &id) in token_ids.iter().enumerate() {
        let glove = tape.row(&table.matrix, id)?;
        if aux_dim == 0 {
            rows.push(glove);
        } else {
            let aux = Tensor::new(&[aux_dim], aux_rows[t].clone());
            rows.push(tape.concat(&[&glove, &aux], 0)?);
        }
    }
    let refs: Vec<&Tensor> = rows.iter().collect();
    tape.stack_rows(&refs)
}
