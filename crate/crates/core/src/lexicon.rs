//! Annotated lexicons: parsing, label rescaling, neutral filtering and
//! train/dev/test splitting.
//!
//! Lexicons are TSV files with one `token<TAB>label` entry per line. Lines
//! starting with `#` are comments. Categorical lexicons may carry a third
//! column with a confidence in `[0, 1]`, which is what expanded lexicons
//! write; it is validated and otherwise ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconKind {
    Categorical,
    Continuous,
}

impl FromStr for LexiconKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "categorical" => Ok(LexiconKind::Categorical),
            "continuous" => Ok(LexiconKind::Continuous),
            other => Err(Error::invalid(format!("unknown lexicon kind `{other}`"))),
        }
    }
}

/// Word to class mapping. Classes keep the order in which they were first
/// seen, which is also the tie-breaking order for argmax decisions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoricalLexicon {
    entries: Vec<(String, usize)>,
    classes: Vec<String>,
}

/// Word to real score mapping, with the bounds of the annotation scheme
/// when they are known.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContinuousLexicon {
    entries: Vec<(String, f64)>,
    scale: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lexicon {
    Categorical(CategoricalLexicon),
    Continuous(ContinuousLexicon),
}

impl CategoricalLexicon {
    /// Builds a lexicon from `(token, class name)` pairs.
    pub fn from_pairs<I, S, L>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, L)>,
        S: Into<String>,
        L: AsRef<str>,
    {
        let mut lex = CategoricalLexicon::default();
        let mut seen = HashSet::new();
        for (token, label) in pairs {
            let token = token.into();
            if !seen.insert(token.clone()) {
                return Err(Error::invalid(format!("duplicate token `{token}`")));
            }
            let class = lex.intern(label.as_ref());
            lex.entries.push((token, class));
        }
        Ok(lex)
    }

    fn intern(&mut self, label: &str) -> usize {
        match self.classes.iter().position(|c| c == label) {
            Some(i) => i,
            None => {
                self.classes.push(label.to_owned());
                self.classes.len() - 1
            }
        }
    }

    pub fn entries(&self) -> &[(String, usize)] {
        &self.entries
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(t, _)| t == token)
            .map(|&(_, c)| self.classes[c].as_str())
    }

    /// Keeps entries for which `keep` returns true. The class list is left
    /// untouched so indices stay stable.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.entries.retain(|(t, _)| keep(t));
    }

    /// One-vs-rest view: `positive` keeps its name, every other class becomes
    /// `not_<positive>`.
    pub fn one_vs_rest(&self, positive: &str) -> Result<CategoricalLexicon> {
        let target = self
            .class_index(positive)
            .ok_or_else(|| Error::UnknownClass(positive.to_owned()))?;
        let negative = format!("not_{positive}");
        CategoricalLexicon::from_pairs(self.entries.iter().map(|(t, c)| {
            let label = if *c == target { positive } else { negative.as_str() };
            (t.clone(), label.to_owned())
        }))
    }

    pub fn split(&self, cfg: &SplitConfig, seed: u64) -> Result<DatasetSplit<usize>> {
        let mut counts = vec![0usize; self.classes.len()];
        for &(_, c) in &self.entries {
            counts[c] += 1;
        }
        let present: Vec<usize> = counts.iter().copied().filter(|&n| n > 0).collect();
        let stratify = present.iter().all(|&n| n >= MIN_STRATUM);
        if !stratify {
            log::warn!(
                "some class has fewer than {MIN_STRATUM} members, falling back to an unstratified split"
            );
        }
        let strata: Vec<usize> = self.entries.iter().map(|&(_, c)| c).collect();
        split_entries(&self.entries, stratify.then_some(strata.as_slice()), cfg, seed)
    }
}

impl ContinuousLexicon {
    pub fn from_pairs<I, S>(pairs: I, scale: Option<(f64, f64)>) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        if let Some((lo, hi)) = scale {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::invalid(format!("invalid scale ({lo}, {hi})")));
            }
        }
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (token, score) in pairs {
            let token = token.into();
            if !score.is_finite() {
                return Err(Error::invalid(format!("non-finite score for `{token}`")));
            }
            if let Some((lo, hi)) = scale {
                if score < lo || score > hi {
                    return Err(Error::invalid(format!(
                        "score {score} for `{token}` outside scale ({lo}, {hi})"
                    )));
                }
            }
            if !seen.insert(token.clone()) {
                return Err(Error::invalid(format!("duplicate token `{token}`")));
            }
            entries.push((token, score));
        }
        Ok(ContinuousLexicon { entries, scale })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn scale(&self) -> Option<(f64, f64)> {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.entries.iter().find(|(t, _)| t == token).map(|&(_, s)| s)
    }

    pub fn to_map(&self) -> HashMap<String, f64> {
        self.entries.iter().cloned().collect()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.entries.retain(|(t, _)| keep(t));
    }

    /// Affine map of the declared annotation scale onto `[-1, 1]`.
    pub fn normalize_to_unit_range(&self) -> Result<ContinuousLexicon> {
        let (lo, hi) = self
            .scale
            .ok_or_else(|| Error::invalid("normalization needs a declared scale"))?;
        if hi <= lo {
            return Err(Error::invalid(format!("degenerate scale ({lo}, {hi})")));
        }
        let width = hi - lo;
        let entries = self
            .entries
            .iter()
            .map(|(t, x)| {
                let y = 2.0 * (x - lo) / width - 1.0;
                (t.clone(), y.clamp(-1.0, 1.0))
            })
            .collect();
        Ok(ContinuousLexicon {
            entries,
            scale: Some((-1.0, 1.0)),
        })
    }

    /// Drops weakly polarized words, keeping entries with `|score| > band`.
    pub fn filter_neutral(&self, band: f64) -> Result<ContinuousLexicon> {
        if !(0.0..1.0).contains(&band) {
            return Err(Error::invalid(format!("neutral band {band} must lie in [0, 1)")));
        }
        if let Some((t, s)) = self.entries.iter().find(|(_, s)| !(-1.0..=1.0).contains(s)) {
            return Err(Error::invalid(format!(
                "score {s} for `{t}` is outside [-1, 1]; normalize first"
            )));
        }
        Ok(ContinuousLexicon {
            entries: self
                .entries
                .iter()
                .filter(|(_, s)| s.abs() > band)
                .cloned()
                .collect(),
            scale: self.scale,
        })
    }

    pub fn split(&self, cfg: &SplitConfig, seed: u64) -> Result<DatasetSplit<f64>> {
        split_entries(&self.entries, None, cfg, seed)
    }
}

impl Lexicon {
    pub fn kind(&self) -> LexiconKind {
        match self {
            Lexicon::Categorical(_) => LexiconKind::Categorical,
            Lexicon::Continuous(_) => LexiconKind::Continuous,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Lexicon::Categorical(l) => l.len(),
            Lexicon::Continuous(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tokens(&self) -> Box<dyn Iterator<Item = &str> + '_> {
        match self {
            Lexicon::Categorical(l) => Box::new(l.entries.iter().map(|(t, _)| t.as_str())),
            Lexicon::Continuous(l) => Box::new(l.entries.iter().map(|(t, _)| t.as_str())),
        }
    }

    /// Removes words that have no embedding and returns how many were dropped.
    pub fn drop_unembedded(&mut self, embeddings: &EmbeddingMatrix) -> usize {
        let before = self.len();
        let keep = |t: &str| embeddings.index_of(t).is_some();
        match self {
            Lexicon::Categorical(l) => l.retain(keep),
            Lexicon::Continuous(l) => l.retain(keep),
        }
        let dropped = before - self.len();
        if dropped > 0 {
            log::info!("dropped {dropped} of {before} lexicon words without an embedding");
        }
        dropped
    }
}

/// Reads a lexicon TSV file.
pub fn parse_lexicon(path: impl AsRef<Path>, kind: LexiconKind, scale: Option<(f64, f64)>) -> Result<Lexicon> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon_str(&text, &path.display().to_string(), kind, scale)
}

pub fn parse_lexicon_str(
    text: &str,
    source_name: &str,
    kind: LexiconKind,
    scale: Option<(f64, f64)>,
) -> Result<Lexicon> {
    let rows = tsv_rows(text);
    let err = |line: usize, msg: String| Error::parse(source_name, line, msg);
    let mut seen = HashSet::new();
    match kind {
        LexiconKind::Categorical => {
            let mut lex = CategoricalLexicon::default();
            for (line, fields) in rows {
                if fields.len() < 2 || fields.len() > 3 {
                    return Err(err(line, "expected `token<TAB>label[<TAB>confidence]`".into()));
                }
                let (token, label) = (fields[0], fields[1]);
                if token.is_empty() || label.is_empty() {
                    return Err(err(line, "empty token or label".into()));
                }
                if let Some(conf) = fields.get(2) {
                    match conf.parse::<f64>() {
                        Ok(c) if (0.0..=1.0).contains(&c) => {}
                        _ => return Err(err(line, format!("invalid confidence `{conf}`"))),
                    }
                }
                if !seen.insert(token) {
                    return Err(err(line, format!("duplicate token `{token}`")));
                }
                let class = lex.intern(label);
                lex.entries.push((token.to_owned(), class));
            }
            Ok(Lexicon::Categorical(lex))
        }
        LexiconKind::Continuous => {
            if let Some((lo, hi)) = scale {
                if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                    return Err(Error::invalid(format!("invalid scale ({lo}, {hi})")));
                }
            }
            let mut entries = Vec::new();
            for (line, fields) in rows {
                if fields.len() != 2 {
                    return Err(err(line, "expected `token<TAB>score`".into()));
                }
                let (token, raw) = (fields[0], fields[1]);
                let score: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| err(line, format!("non-numeric score `{raw}`")))?;
                if !score.is_finite() {
                    return Err(err(line, format!("non-finite score `{raw}`")));
                }
                if let Some((lo, hi)) = scale {
                    if score < lo || score > hi {
                        return Err(err(line, format!("score {score} outside scale ({lo}, {hi})")));
                    }
                }
                if !seen.insert(token) {
                    return Err(err(line, format!("duplicate token `{token}`")));
                }
                entries.push((token.to_owned(), score));
            }
            Ok(Lexicon::Continuous(ContinuousLexicon { entries, scale }))
        }
    }
}

/// Reads a multi-label lexicon with `token<TAB>property<TAB>0|1` rows and
/// returns one binary lexicon per property, in order of first appearance.
/// Positive members are labelled with the property name, others with
/// `not_<property>`.
pub fn parse_multilabel(path: impl AsRef<Path>) -> Result<Vec<(String, CategoricalLexicon)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_multilabel_str(&text, &path.display().to_string())
}

pub fn parse_multilabel_str(text: &str, source_name: &str) -> Result<Vec<(String, CategoricalLexicon)>> {
    let mut order: Vec<String> = Vec::new();
    let mut per_property: BTreeMap<String, Vec<(String, bool)>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (line, fields) in tsv_rows(text) {
        if fields.len() != 3 {
            return Err(Error::parse(source_name, line, "expected `token<TAB>property<TAB>0|1`"));
        }
        let flag = match fields[2].trim() {
            "1" => true,
            "0" => false,
            other => return Err(Error::parse(source_name, line, format!("flag must be 0 or 1, got `{other}`"))),
        };
        let property = fields[1].to_owned();
        if !per_property.contains_key(&property) {
            order.push(property.clone());
        }
        if !seen.insert((property.clone(), fields[0].to_owned())) {
            return Err(Error::parse(source_name, line, format!("duplicate token `{}`", fields[0])));
        }
        per_property.entry(property).or_default().push((fields[0].to_owned(), flag));
    }
    order
        .into_iter()
        .map(|property| {
            let negative = format!("not_{property}");
            let rows = &per_property[&property];
            let lex = CategoricalLexicon::from_pairs(rows.iter().map(|(t, flag)| {
                (t.clone(), if *flag { property.clone() } else { negative.clone() })
            }))?;
            Ok((property, lex))
        })
        .collect()
}

fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        Some((i + 1, line.split('\t').collect()))
    })
}

const MIN_STRATUM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Share of all entries held out for testing.
    pub test_frac: f64,
    /// Share of the remaining entries used for model selection.
    pub dev_frac: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_frac: 0.2,
            dev_frac: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit<T> {
    pub train: Vec<(String, T)>,
    pub dev: Vec<(String, T)>,
    pub test: Vec<(String, T)>,
    pub seed: u64,
}

/// Serializable record of which tokens went where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl<T> DatasetSplit<T> {
    pub fn manifest(&self) -> SplitManifest {
        let tokens = |part: &[(String, T)]| part.iter().map(|(t, _)| t.clone()).collect();
        SplitManifest {
            seed: self.seed,
            train: tokens(&self.train),
            dev: tokens(&self.dev),
            test: tokens(&self.test),
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shuffles `entries` with a seeded generator and cuts test, dev and train
/// parts. With `strata`, each stratum is cut separately and the per-stratum
/// quotas are rounded so that the part totals stay as close as possible to
/// the requested fractions.
pub fn split_entries<T: Clone>(
    entries: &[(String, T)],
    strata: Option<&[usize]>,
    cfg: &SplitConfig,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    for (name, f) in [("test", cfg.test_frac), ("dev", cfg.dev_frac)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::invalid(format!("{name} fraction {f} must lie in (0, 1)")));
        }
    }
    if entries.len() < MIN_STRATUM {
        return Err(Error::invalid(format!(
            "need at least {MIN_STRATUM} entries to split, got {}",
            entries.len()
        )));
    }
    let n = entries.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let strata_of = |i: usize| strata.map_or(0, |s| s[i]);
    let n_strata = strata.map_or(1, |s| s.iter().max().map_or(1, |m| m + 1));
    let mut sizes = vec![0usize; n_strata];
    for i in 0..n {
        sizes[strata_of(i)] += 1;
    }

    let test_quota = apportion(&sizes, cfg.test_frac, (cfg.test_frac * n as f64).round() as usize);
    let rest: Vec<usize> = sizes.iter().zip(&test_quota).map(|(s, t)| s - t).collect();
    let rest_total: usize = rest.iter().sum();
    let dev_quota = apportion(&rest, cfg.dev_frac, (cfg.dev_frac * rest_total as f64).round() as usize);

    let mut taken = vec![0usize; n_strata];
    let mut split = DatasetSplit {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for i in order {
        let s = strata_of(i);
        let k = taken[s];
        taken[s] += 1;
        let part = if k < test_quota[s] {
            &mut split.test
        } else if k < test_quota[s] + dev_quota[s] {
            &mut split.dev
        } else {
            &mut split.train
        };
        part.push(entries[i].clone());
    }
    Ok(split)
}

/// Largest-remainder rounding of `frac * sizes[i]` so that the quotas sum to
/// `total`. Ties go to the lower index.
fn apportion(sizes: &[usize], frac: f64, total: usize) -> Vec<usize> {
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 * frac).collect();
    let mut quota: Vec<usize> = exact
        .iter()
        .zip(sizes)
        .map(|(e, &s)| (e.floor() as usize).min(s))
        .collect();
    let mut remaining = total.saturating_sub(quota.iter().sum());
    let mut by_remainder: Vec<usize> = (0..sizes.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    while remaining > 0 {
        let before = remaining;
        for &i in &by_remainder {
            if remaining == 0 {
                break;
            }
            if quota[i] < sizes[i] {
                quota[i] += 1;
                remaining -= 1;
            }
        }
        if remaining == before {
            break;
        }
    }
    quota
}
