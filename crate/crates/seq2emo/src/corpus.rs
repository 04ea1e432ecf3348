//! Dataset ingestion and the hashtag-based distant-supervision corpus
//! builder: label extraction from hashtags, label-hashtag stripping, emoji
//! alias normalization, length filtering, and multi/single balancing.
//!
//! Every stage is a pure function of (input, seed), so the whole pipeline
//! is reproducible and golden-file testable.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::labels::LabelSpace;

/// Canonical record flowing through the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub labels: HashSet<String>,
}

impl CorpusRecord {
    pub fn new(id: String, text: String, labels: HashSet<String>) -> CorpusRecord {
        let tokens = tokenize(&text);
        CorpusRecord { id, text, tokens, labels }
    }
}

/// Lowercase, normalize URLs/user mentions, split on whitespace, and peel
/// trailing punctuation into separate tokens. '#' and '@' prefixes are kept
/// with their word; a chunk that is nothing but punctuation stays whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
        {
            tokens.push("<url>".to_string());
            continue;
        }
        if lower.starts_with('@') && lower.len() > 1 {
            tokens.push("<user>".to_string());
            continue;
        }
        let trailing: Vec<char> = lower
            .chars()
            .rev()
            .take_while(|c| c.is_ascii_punctuation())
            .collect();
        let core_len = lower.chars().count() - trailing.len();
        if core_len == 0 {
            tokens.push(lower);
            continue;
        }
        let core: String = lower.chars().take(core_len).collect();
        tokens.push(core);
        for c in trailing.into_iter().rev() {
            tokens.push(c.to_string());
        }
    }
    tokens
}

/// Emotion name -> hashtags used to crawl it. Hashtags are lowercase,
/// start with '#', and no hashtag maps to two emotions.
#[derive(Clone, Debug)]
pub struct HashtagMap {
    emotions: Vec<String>,
    by_tag: HashMap<String, String>,
}

impl HashtagMap {
    pub fn new(entries: Vec<(String, Vec<String>)>) -> Result<HashtagMap> {
        let mut emotions = Vec::new();
        let mut by_tag = HashMap::new();
        for (emotion, tags) in entries {
            for tag in tags {
                if !tag.starts_with('#') || tag.len() < 2 {
                    return Err(Error::Data(format!("hashtag {tag:?} must start with '#'")));
                }
                if tag != tag.to_lowercase() {
                    return Err(Error::Data(format!("hashtag {tag:?} must be lowercase")));
                }
                if let Some(prev) = by_tag.insert(tag.clone(), emotion.clone()) {
                    return Err(Error::Data(format!(
                        "hashtag {tag:?} maps to both {prev:?} and {emotion:?}"
                    )));
                }
            }
            emotions.push(emotion);
        }
        Ok(HashtagMap { emotions, by_tag })
    }

    /// Config file: one line per emotion, `emotion<TAB>#tag1,#tag2,...`.
    pub fn load(path: &Path) -> Result<HashtagMap> {
        let file = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        for (lineno, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') && !line.contains('\t') {
                continue;
            }
            let (emotion, tags) = line.split_once('\t').ok_or(Error::Parse {
                line: lineno + 1,
                msg: "expected `emotion<TAB>#tag1,#tag2,...`".into(),
            })?;
            let tags = tags
                .split(',')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect();
            entries.push((emotion.trim().to_string(), tags));
        }
        HashtagMap::new(entries)
    }

    pub fn emotions(&self) -> &[String] {
        &self.emotions
    }

    pub fn emotion_of(&self, tag: &str) -> Option<&str> {
        self.by_tag.get(tag).map(|s| s.as_str())
    }

    fn is_label_tag(&self, token: &str) -> bool {
        self.by_tag.contains_key(&token.to_lowercase())
    }
}

/// Emotions whose hashtags appear as whole whitespace tokens,
/// case-insensitively.
pub fn extract_distant_labels(text: &str, map: &HashtagMap) -> HashSet<String> {
    let mut out = HashSet::new();
    for tok in text.split_whitespace() {
        if let Some(emotion) = map.emotion_of(&tok.to_lowercase()) {
            out.insert(emotion.to_string());
        }
    }
    out
}

/// Remove label hashtags as whole tokens; other hashtags stay. Whitespace
/// is normalized to single spaces.
pub fn strip_label_hashtags(text: &str, map: &HashtagMap) -> String {
    text.split_whitespace()
        .filter(|tok| !map.is_label_tag(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Emoji codepoint sequence -> `:alias_name:` textual alias.
#[derive(Clone, Debug)]
pub struct EmojiAliasTable {
    // longest-match-first
    entries: Vec<(String, String)>,
}

impl EmojiAliasTable {
    pub fn new(mut entries: Vec<(String, String)>) -> EmojiAliasTable {
        entries.sort_by(|a, b| b.0.chars().count().cmp(&a.0.chars().count()).then(a.0.cmp(&b.0)));
        EmojiAliasTable { entries }
    }

    pub fn empty() -> EmojiAliasTable {
        EmojiAliasTable { entries: Vec::new() }
    }

    /// Data file: one line per emoji, `emoji<TAB>:alias_name:`.
    pub fn load(path: &Path) -> Result<EmojiAliasTable> {
        let file = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        for (lineno, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (emoji, alias) = line.split_once('\t').ok_or(Error::Parse {
                line: lineno + 1,
                msg: "expected `emoji<TAB>:alias:`".into(),
            })?;
            entries.push((emoji.to_string(), alias.to_string()));
        }
        Ok(EmojiAliasTable::new(entries))
    }

    fn match_at(&self, rest: &str) -> Option<(&str, usize)> {
        for (emoji, alias) in &self.entries {
            if rest.starts_with(emoji.as_str()) {
                return Some((alias, emoji.len()));
            }
        }
        None
    }
}

fn is_emoji_char(c: char) -> bool {
    matches!(u32::from(c),
        0x1F000..=0x1FAFF   // pictographs, emoticons, symbols
        | 0x2600..=0x27BF   // misc symbols, dingbats
        | 0x2B00..=0x2BFF
        | 0x2190..=0x21FF   // arrows occasionally used as emoji
        | 0xFE0F            // variation selector
        | 0x200D            // zero-width joiner
    )
}

/// Replace known emoji with their aliases (':' and '_' turned into spaces),
/// drop unknown emoji, and normalize whitespace.
pub fn normalize_emoji_aliases(text: &str, table: &EmojiAliasTable) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        if let Some((alias, len)) = table.match_at(rest) {
            out.push(' ');
            for c in alias.chars() {
                out.push(if c == ':' || c == '_' { ' ' } else { c });
            }
            out.push(' ');
            rest = &rest[len..];
        } else {
            let c = rest.chars().next().unwrap();
            if !is_emoji_char(c) {
                out.push(c);
            }
            rest = &rest[c.len_utf8()..];
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Keep records whose token count lies in `[min, max]` inclusive.
pub fn length_filter(records: Vec<CorpusRecord>, min: usize, max: usize) -> Vec<CorpusRecord> {
    records
        .into_iter()
        .filter(|r| (min..=max).contains(&r.tokens.len()))
        .collect()
}

/// Balance single- vs multi-labeled portions: every multi-labeled record is
/// kept; per emotion, single-labeled records are sampled (without
/// replacement, seeded) until the emotion's total reaches the largest
/// per-emotion count of the multi-labeled portion, or its pool runs out.
pub fn balance_corpus(records: Vec<CorpusRecord>, seed: u64) -> Result<Vec<CorpusRecord>> {
    for r in &records {
        if r.labels.is_empty() {
            return Err(Error::Contract(format!(
                "balance_corpus: record {} has no labels",
                r.id
            )));
        }
    }
    let (multi, single): (Vec<_>, Vec<_>) =
        records.into_iter().partition(|r| r.labels.len() >= 2);
    if multi.is_empty() {
        eprintln!("warning: no multi-labeled records; balanced corpus is empty");
        return Ok(Vec::new());
    }

    let mut multi_counts: HashMap<&str, usize> = HashMap::new();
    for r in &multi {
        for l in &r.labels {
            *multi_counts.entry(l.as_str()).or_insert(0) += 1;
        }
    }
    let target = multi_counts.values().copied().max().unwrap_or(0);

    let mut emotions: Vec<String> = single
        .iter()
        .flat_map(|r| r.labels.iter().cloned())
        .chain(multi_counts.keys().map(|s| s.to_string()))
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    emotions.sort();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = multi.clone();
    for emotion in &emotions {
        let have = multi_counts.get(emotion.as_str()).copied().unwrap_or(0);
        if have >= target {
            continue;
        }
        let mut pool: Vec<&CorpusRecord> = single
            .iter()
            .filter(|r| r.labels.contains(emotion))
            .collect();
        pool.shuffle(&mut rng);
        let need = target - have;
        if pool.len() < need {
            eprintln!(
                "warning: emotion {emotion}: single-label pool exhausted \
                 ({} of {need} needed)",
                pool.len()
            );
        }
        out.extend(pool.into_iter().take(need).cloned());
    }
    Ok(out)
}

/// Counts in the dataset-statistics schema: number of distinct emotions,
/// number of instances, and the percentage with two or more labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetStats {
    pub n_emotions: usize,
    pub n_instances: usize,
    pub pct_multilabel: f64,
}

pub fn dataset_stats(records: &[CorpusRecord]) -> Result<DatasetStats> {
    if records.is_empty() {
        return Err(Error::Contract("dataset_stats: need at least one record".into()));
    }
    let emotions: HashSet<&str> = records
        .iter()
        .flat_map(|r| r.labels.iter().map(|s| s.as_str()))
        .collect();
    let multi = records.iter().filter(|r| r.labels.len() >= 2).count();
    Ok(DatasetStats {
        n_emotions: emotions.len(),
        n_instances: records.len(),
        pct_multilabel: 100.0 * multi as f64 / records.len() as f64,
    })
}

/// Deterministic shuffle then slice into train/dev/test.
pub fn split(
    mut records: Vec<CorpusRecord>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<CorpusRecord>, Vec<CorpusRecord>, Vec<CorpusRecord>)> {
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios sum to {sum}, expected 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);
    let n = records.len();
    let n_train = (ratios.0 * n as f64).round() as usize;
    let n_dev = (ratios.1 * n as f64).round() as usize;
    let n_train = n_train.min(n);
    let n_dev = n_dev.min(n - n_train);
    let test = records.split_off(n_train + n_dev);
    let dev = records.split_off(n_train);
    Ok((records, dev, test))
}

/// Canonical TSV: `id<TAB>text<TAB>label1,label2,...` (label field may be
/// empty). With a label space, unknown labels are rejected with their line
/// number; without one, labels are taken as-is.
pub fn load_canonical_tsv(path: &Path, label_space: Option<&LabelSpace>) -> Result<Vec<CorpusRecord>> {
    let file = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected 3 tab-separated columns, found {}", parts.len()),
            });
        }
        let mut labels = HashSet::new();
        for name in parts[2].split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some(ls) = label_space {
                if !ls.contains(name) {
                    return Err(Error::Data(format!(
                        "line {}: unknown label {name:?}",
                        lineno + 1
                    )));
                }
            }
            labels.insert(name.to_string());
        }
        records.push(CorpusRecord::new(
            parts[0].to_string(),
            parts[1].to_string(),
            labels,
        ));
    }
    Ok(records)
}

/// Serialize records back to the canonical TSV, labels ordered by
/// `label_space` when given, otherwise lexicographically.
pub fn write_canonical_tsv(records: &[CorpusRecord], label_space: Option<&LabelSpace>) -> String {
    let mut out = String::new();
    for r in records {
        let mut labels: Vec<&str> = r.labels.iter().map(|s| s.as_str()).collect();
        match label_space {
            Some(ls) => labels.sort_by_key(|l| ls.position(l).unwrap_or(usize::MAX)),
            None => labels.sort(),
        }
        out.push_str(&format!("{}\t{}\t{}\n", r.id, r.text, labels.join(",")));
    }
    out
}

/// SemEval18 E-c TSV: a header line, then `ID<TAB>Tweet<TAB>` followed by k
/// binary 0/1 columns in label-space order. The label names are read from
/// the header.
pub fn load_semeval_ec(path: &Path) -> Result<(LabelSpace, Vec<CorpusRecord>)> {
    let file = BufReader::new(File::open(path)?);
    let mut lines = file.lines();
    let header = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })??;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 3 {
        return Err(Error::Parse { line: 1, msg: "header needs ID, Tweet, and label columns".into() });
    }
    let label_space = LabelSpace::new(cols[2..].iter().map(|s| s.to_string()).collect())?;
    let k = label_space.k();
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 2 + k {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} columns, found {}", 2 + k, parts.len()),
            });
        }
        let mut labels = HashSet::new();
        for (j, cell) in parts[2..].iter().enumerate() {
            match *cell {
                "0" => {}
                "1" => {
                    labels.insert(label_space.name(j).to_string());
                }
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("label cell must be 0 or 1, found {other:?}"),
                    })
                }
            }
        }
        records.push(CorpusRecord::new(parts[0].to_string(), parts[1].to_string(), labels));
    }
    Ok((label_space, records))
}

/// The full builder pipeline on raw one-tweet-per-line text: extract
/// distant labels, drop unlabeled lines, strip label hashtags, normalize
/// emoji, length-filter to `[3, 50]` tokens, then balance.
pub fn build_corpus(
    raw_lines: &[String],
    map: &HashtagMap,
    emoji: &EmojiAliasTable,
    seed: u64,
) -> Result<Vec<CorpusRecord>> {
    let mut records = Vec::new();
    for (i, line) in raw_lines.iter().enumerate() {
        let labels = extract_distant_labels(line, map);
        if labels.is_empty() {
            continue;
        }
        let stripped = strip_label_hashtags(line, map);
        let text = normalize_emoji_aliases(&stripped, emoji);
        let tokens = tokenize(&text);
        let text = tokens.join(" ");
        records.push(CorpusRecord {
            id: format!("{}", i + 1),
            text: text.clone(),
            tokens,
            labels,
        });
    }
    let records = length_filter(records, 3, 50);
    balance_corpus(records, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_s1() -> HashtagMap {
        HashtagMap::new(vec![
            ("joy".into(), vec!["#happy".into(), "#smile".into()]),
            ("thankfulness".into(), vec!["#thankful".into()]),
        ])
        .unwrap()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Happy Day!"), vec!["happy", "day", "!"]);
        assert_eq!(tokenize("so #Happy today"), vec!["so", "#happy", "today"]);
        assert_eq!(
            tokenize("see https://x.y and @bob :)"),
            vec!["see", "<url>", "and", "<user>", ":)"]
        );
        assert_eq!(tokenize("wait..."), vec!["wait", ".", ".", "."]);
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn extract_labels_basics() {
        let map = table_s1();
        let got = extract_distant_labels("so #happy today #thankful", &map);
        let want: HashSet<String> = ["joy", "thankfulness"].iter().map(|s| s.to_string()).collect();
        assert_eq!(got, want);
        assert!(extract_distant_labels("happiness without hash", &map).is_empty());
        let got = extract_distant_labels("#HAPPY", &map);
        assert_eq!(got.len(), 1);
        assert!(got.contains("joy"));
    }

    #[test]
    fn strip_rules() {
        let map = table_s1();
        assert_eq!(strip_label_hashtags("great #happy #smile day", &map), "great day");
        assert_eq!(strip_label_hashtags("#unrelated tag", &map), "#unrelated tag");
        assert_eq!(strip_label_hashtags("", &map), "");
    }

    #[test]
    fn strip_then_extract_is_empty() {
        let map = table_s1();
        let stripped = strip_label_hashtags("x #happy y #thankful", &map);
        assert!(extract_distant_labels(&stripped, &map).is_empty());
    }

    #[test]
    fn emoji_normalization() {
        let table = EmojiAliasTable::new(vec![("😀".into(), ":grinning_face:".into())]);
        assert_eq!(normalize_emoji_aliases("nice 😀", &table), "nice grinning face");
        assert_eq!(normalize_emoji_aliases("no emoji here", &table), "no emoji here");
        // unknown emoji dropped
        assert_eq!(normalize_emoji_aliases("odd 🀄 one", &table), "odd one");
    }

    #[test]
    fn normalization_pipeline_is_idempotent() {
        let map = table_s1();
        let table = EmojiAliasTable::new(vec![("😀".into(), ":grinning_face:".into())]);
        let once = normalize_emoji_aliases(&strip_label_hashtags("hey #happy 😀 there", &map), &table);
        let twice = normalize_emoji_aliases(&strip_label_hashtags(&once, &map), &table);
        assert_eq!(once, twice);
    }

    fn rec(id: &str, n_tokens: usize, labels: &[&str]) -> CorpusRecord {
        let text = (0..n_tokens).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        CorpusRecord::new(
            id.to_string(),
            text,
            labels.iter().map(|s| s.to_string()).collect(),
        )
    }

    #[test]
    fn length_filter_boundaries() {
        let records = vec![rec("a", 2, &["x"]), rec("b", 3, &["x"]), rec("c", 50, &["x"]), rec("d", 51, &["x"])];
        let kept = length_filter(records, 3, 50);
        let ids: Vec<&str> = kept.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["b", "c"]);
    }

    #[test]
    fn balance_fills_from_single_pool() {
        // multi counts {A:2, B:1}, single pools {A:0, B:5} -> one B sampled
        let mut records = vec![
            rec("m1", 5, &["A", "B"]),
            rec("m2", 5, &["A", "C"]),
        ];
        for i in 0..5 {
            records.push(rec(&format!("s{i}"), 5, &["B"]));
        }
        let out = balance_corpus(records, 9).unwrap();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for r in &out {
            for l in &r.labels {
                *counts.entry(l.as_str()).or_insert(0) += 1;
            }
        }
        assert_eq!(counts["A"], 2);
        assert_eq!(counts["B"], 2);
    }

    #[test]
    fn balance_keeps_every_multi_record_once() {
        let mut records = vec![rec("m1", 5, &["A", "B"]), rec("m2", 5, &["B", "C"])];
        for i in 0..4 {
            records.push(rec(&format!("s{i}"), 5, &["A"]));
        }
        let out = balance_corpus(records.clone(), 1).unwrap();
        let ids: Vec<&str> = out.iter().map(|r| r.id.as_str()).collect();
        assert!(ids.contains(&"m1") && ids.contains(&"m2"));
        let unique: HashSet<&str> = ids.iter().copied().collect();
        assert_eq!(unique.len(), ids.len(), "no record appears twice");
    }

    #[test]
    fn balance_is_deterministic() {
        let mut records = vec![rec("m1", 5, &["A", "B"])];
        for i in 0..6 {
            records.push(rec(&format!("s{i}"), 5, &["A"]));
        }
        let a = balance_corpus(records.clone(), 42).unwrap();
        let b = balance_corpus(records, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn balance_without_multi_is_empty() {
        let records = vec![rec("s0", 5, &["A"])];
        assert!(balance_corpus(records, 1).unwrap().is_empty());
    }

    #[test]
    fn stats_hand_counts() {
        let records = vec![rec("1", 4, &["a"]), rec("2", 4, &["a", "b"]), rec("3", 4, &["b"])];
        let s = dataset_stats(&records).unwrap();
        assert_eq!(s.n_emotions, 2);
        assert_eq!(s.n_instances, 3);
        assert!((s.pct_multilabel - 100.0 / 3.0).abs() < 1e-9);
        assert!(dataset_stats(&[]).is_err());
    }

    #[test]
    fn split_ratios() {
        let records: Vec<CorpusRecord> = (0..10).map(|i| rec(&format!("{i}"), 4, &["a"])).collect();
        let (tr, dev, te) = split(records.clone(), (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!((tr.len(), dev.len(), te.len()), (8, 1, 1));
        assert!(split(records, (0.8, 0.3, 0.1), 7).is_err());
    }

    #[test]
    fn canonical_tsv_roundtrip() {
        use std::io::Write;
        let ls = LabelSpace::from_names(&["joy", "love"]).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1\thappy day\tjoy,love").unwrap();
        writeln!(f, "2\tmeh\t").unwrap();
        let records = load_canonical_tsv(f.path(), Some(&ls)).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].labels.len(), 2);
        assert!(records[1].labels.is_empty());
        let out = write_canonical_tsv(&records, Some(&ls));
        assert_eq!(out, "1\thappy day\tjoy,love\n2\tmeh\t\n");
    }

    #[test]
    fn canonical_tsv_unknown_label_cites_line() {
        use std::io::Write;
        let ls = LabelSpace::from_names(&["joy"]).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1\tok\tjoy").unwrap();
        writeln!(f, "2\tok\t").unwrap();
        writeln!(f, "3\tx\tzzz").unwrap();
        let err = load_canonical_tsv(f.path(), Some(&ls)).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn semeval_parser() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "ID\tTweet\tanger\tjoy").unwrap();
        writeln!(f, "t1\tgrr\t1\t0").unwrap();
        writeln!(f, "t2\tyay\t0\t1").unwrap();
        let (ls, records) = load_semeval_ec(f.path()).unwrap();
        assert_eq!(ls.labels(), &["anger".to_string(), "joy".to_string()]);
        assert!(records[0].labels.contains("anger"));
        assert!(records[1].labels.contains("joy"));

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "ID\tTweet\tanger").unwrap();
        writeln!(f, "t1\tgrr\t2").unwrap();
        assert!(load_semeval_ec(f.path()).is_err());
    }
}
