//! Lexicon-based binary sentiment classification of short messages, and a
//! supervised bag-of-words classifier for comparison.
//!
//! A message is scored by the mean lexicon score of the tokens found in the
//! lexicon and labelled positive when that score reaches a threshold. The
//! default threshold is the mean score over the messages being classified.
//! Messages without any lexicon token have no score; they fall on the
//! negative side and are counted as abstentions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::baselines::{LinearConfig, LinearModel, SparseFeatures};
use crate::error::{Error, Result};
use crate::evaluation::{Cell, EvalReport, Metric};
use crate::lexicon::ContinuousLexicon;
use crate::metrics::{accuracy, macro_avg_f1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Positive,
    Negative,
}

impl Sentiment {
    pub const CLASSES: [Sentiment; 2] = [Sentiment::Positive, Sentiment::Negative];

    pub fn index(self) -> usize {
        match self {
            Sentiment::Positive => 0,
            Sentiment::Negative => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sentiment::Positive => "positive",
            Sentiment::Negative => "negative",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sentiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "positive" | "pos" | "+" | "1" => Ok(Sentiment::Positive),
            "negative" | "neg" | "-" | "-1" => Ok(Sentiment::Negative),
            other => Err(Error::invalid(format!("unknown sentiment label `{other}`"))),
        }
    }
}

fn token_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(
            r#"(?x)
            (?P<url>(?:https?://|www\.)\S+)
            | (?P<user>@\w+)
            | (?P<emo>
                  <3
                | [<>]?[:;=8][\-o*']?[)\](\[dp/\\:}{@|]
                | [)\](\[][\-o*']?[:;=8]
              )
            | (?P<tag>\#\w+)
            | (?P<word>\w+(?:['’]\w+)*)
            | (?P<punct>[^\w\s])
            "#,
        )
        .expect("token pattern compiles")
    })
}

/// Lowercases, replaces URLs with `<url>` and user mentions with `<user>`,
/// and splits on whitespace and punctuation. Emoticons, hashtags and
/// in-word apostrophes stay in one piece; every other punctuation character
/// is its own token.
pub fn tokenize(raw: &str) -> Vec<String> {
    let lower = raw.to_lowercase();
    token_pattern()
        .captures_iter(&lower)
        .map(|caps| {
            if caps.name("url").is_some() {
                "<url>".to_owned()
            } else if caps.name("user").is_some() {
                "<user>".to_owned()
            } else {
                caps[0].to_owned()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Message {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Message { raw, tokens }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageDataset {
    pub name: String,
    pub messages: Vec<(Message, Sentiment)>,
}

impl MessageDataset {
    /// Parses `label<TAB>text` rows. Neutral rows are skipped; blank lines
    /// and `#` comments are ignored.
    pub fn parse_str(text: &str, name: &str) -> Result<Self> {
        let mut messages = Vec::new();
        let mut neutral = 0usize;
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, raw) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(name, i + 1, "expected `label<TAB>text`"))?;
            if label.trim().eq_ignore_ascii_case("neutral") {
                neutral += 1;
                continue;
            }
            let label: Sentiment = label.parse().map_err(|e: Error| Error::parse(name, i + 1, e.to_string()))?;
            messages.push((Message::new(raw), label));
        }
        if neutral > 0 {
            log::info!("{name}: skipped {neutral} neutral messages");
        }
        if messages.is_empty() {
            return Err(Error::invalid(format!("{name}: dataset has no labelled messages")));
        }
        Ok(MessageDataset {
            name: name.to_owned(),
            messages,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

fn matched_scores<'a>(lexicon: &'a HashMap<String, f64>, msg: &'a Message) -> impl Iterator<Item = f64> + 'a {
    msg.tokens.iter().filter_map(|t| lexicon.get(t).copied())
}

/// Mean score of the message tokens found in the lexicon; `None` when no
/// token matches. Repeated tokens count every time they occur.
pub fn score_message(lexicon: &HashMap<String, f64>, msg: &Message) -> Option<f64> {
    let scores: Vec<f64> = matched_scores(lexicon, msg).collect();
    if scores.is_empty() {
        None
    } else {
        Some(compensated_sum(scores.iter().copied()) / scores.len() as f64)
    }
}

/// Mean of the defined message scores of `corpus`.
pub fn estimate_threshold<'a, I>(lexicon: &HashMap<String, f64>, corpus: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Message>,
{
    let scores: Vec<f64> = corpus.into_iter().filter_map(|m| score_message(lexicon, m)).collect();
    if scores.is_empty() {
        return Err(Error::invalid("no message in the corpus matches the lexicon"));
    }
    Ok(compensated_sum(scores.iter().copied()) / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub label: Sentiment,
    pub score: Option<f64>,
}

impl Decision {
    pub fn abstained(&self) -> bool {
        self.score.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconClassifier {
    lexicon: HashMap<String, f64>,
    threshold: f64,
}

impl LexiconClassifier {
    pub fn new(lexicon: HashMap<String, f64>, threshold: f64) -> Result<Self> {
        if lexicon.is_empty() {
            return Err(Error::invalid("lexicon classifier needs a non-empty lexicon"));
        }
        if !threshold.is_finite() {
            return Err(Error::invalid("threshold must be finite"));
        }
        Ok(LexiconClassifier { lexicon, threshold })
    }

    pub fn from_lexicon(lexicon: &ContinuousLexicon, threshold: f64) -> Result<Self> {
        Self::new(lexicon.to_map(), threshold)
    }

    /// Threshold set to the mean score over `calibration`.
    pub fn calibrated<'a, I>(lexicon: HashMap<String, f64>, calibration: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Message>,
    {
        let t = estimate_threshold(&lexicon, calibration)?;
        Self::new(lexicon, t)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn lexicon(&self) -> &HashMap<String, f64> {
        &self.lexicon
    }

    pub fn classify(&self, msg: &Message) -> Decision {
        let score = score_message(&self.lexicon, msg);
        let label = match score {
            Some(s) if s >= self.threshold => Sentiment::Positive,
            _ => Sentiment::Negative,
        };
        Decision { label, score }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessageMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub abstentions: usize,
    pub abstention_rate: f64,
    pub messages: usize,
}

pub fn classification_metrics(gold: &[Sentiment], decisions: &[Decision]) -> Result<MessageMetrics> {
    let g: Vec<usize> = gold.iter().map(|s| s.index()).collect();
    let p: Vec<usize> = decisions.iter().map(|d| d.label.index()).collect();
    let abstentions = decisions.iter().filter(|d| d.abstained()).count();
    Ok(MessageMetrics {
        accuracy: accuracy(&g, &p)?,
        macro_f1: macro_avg_f1(&g, &p, 2)?,
        abstentions,
        abstention_rate: abstentions as f64 / decisions.len() as f64,
        messages: decisions.len(),
    })
}

pub fn evaluate_lexicon_classifier(clf: &LexiconClassifier, dataset: &MessageDataset) -> Result<MessageMetrics> {
    let decisions: Vec<Decision> = dataset.messages.iter().map(|(m, _)| clf.classify(m)).collect();
    let gold: Vec<Sentiment> = dataset.messages.iter().map(|(_, s)| *s).collect();
    classification_metrics(&gold, &decisions)
}

impl MessageMetrics {
    /// Two report rows (accuracy and macro-F1) in the shared report schema.
    pub fn to_reports(&self, task: &str, threshold: f64, seed: u64) -> Vec<EvalReport> {
        [(Metric::Accuracy, self.accuracy), (Metric::MacroF1, self.macro_f1)]
            .into_iter()
            .map(|(metric, value)| EvalReport {
                task: task.to_owned(),
                model: "lexicon".to_owned(),
                metric,
                params: Cell(vec![("threshold".to_owned(), threshold)]),
                dev_score: None,
                test_score: Some(value),
                seed,
                refit_on_dev: false,
                train_size: 0,
                test_size: self.messages,
                abstention_rate: Some(self.abstention_rate),
                elapsed_ms: 0,
                cells: Vec::new(),
            })
            .collect()
    }
}

/// `(mean, sum, max, min, population std)` of the matched token scores;
/// all zeros when nothing matches.
pub fn extract_lexicon_features(lexicon: &HashMap<String, f64>, msg: &Message) -> [f64; 5] {
    let scores: Vec<f64> = matched_scores(lexicon, msg).collect();
    if scores.is_empty() {
        return [0.0; 5];
    }
    let n = scores.len() as f64;
    let sum = compensated_sum(scores.iter().copied());
    let mean = sum / n;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let var = compensated_sum(scores.iter().map(|s| (s - mean).powi(2))) / n;
    [mean, sum, max, min, var.sqrt()]
}

/// Linear classifier over token counts, optionally extended with the five
/// lexicon features standardized by training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowClassifier {
    vocabulary: BTreeMap<String, usize>,
    lexicon: Option<HashMap<String, f64>>,
    feature_mean: [f64; 5],
    feature_std: [f64; 5],
    model: LinearModel,
}

impl BowClassifier {
    pub fn feature_count(&self) -> usize {
        self.vocabulary.len() + if self.lexicon.is_some() { 5 } else { 0 }
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    fn featurize(&self, msg: &Message, out: &mut SparseFeatures) -> Result<()> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in &msg.tokens {
            if let Some(&j) = self.vocabulary.get(t) {
                *counts.entry(j).or_default() += 1.0;
            }
        }
        let base = self.vocabulary.len();
        let mut row: Vec<(usize, f64)> = counts.into_iter().collect();
        if let Some(lex) = &self.lexicon {
            let f = extract_lexicon_features(lex, msg);
            for k in 0..5 {
                row.push((base + k, (f[k] - self.feature_mean[k]) / self.feature_std[k]));
            }
        }
        out.push_row(row)
    }

    pub fn predict(&self, msg: &Message) -> Result<Sentiment> {
        let mut x = SparseFeatures::new(self.feature_count());
        self.featurize(msg, &mut x)?;
        let class = self.model.predict_classes(&x)?[0];
        Ok(Sentiment::CLASSES[class])
    }

    pub fn evaluate(&self, dataset: &MessageDataset) -> Result<MessageMetrics> {
        let mut decisions = Vec::with_capacity(dataset.len());
        for (m, _) in &dataset.messages {
            decisions.push(Decision {
                label: self.predict(m)?,
                score: Some(0.0),
            });
        }
        let gold: Vec<Sentiment> = dataset.messages.iter().map(|(_, s)| *s).collect();
        classification_metrics(&gold, &decisions)
    }
}

pub fn train_bow_classifier(
    train: &MessageDataset,
    lexicon: Option<&HashMap<String, f64>>,
    cfg: &LinearConfig,
) -> Result<BowClassifier> {
    let labels: Vec<usize> = train.messages.iter().map(|(_, s)| s.index()).collect();
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::Training("bag-of-words training data holds a single class".into()));
    }
    let mut vocabulary = BTreeMap::new();
    for (m, _) in &train.messages {
        for t in &m.tokens {
            vocabulary.entry(t.clone()).or_insert(0usize);
        }
    }
    for (j, slot) in vocabulary.values_mut().enumerate() {
        *slot = j;
    }
    let (mut feature_mean, mut feature_std) = ([0.0; 5], [1.0; 5]);
    if let Some(lex) = lexicon {
        let feats: Vec<[f64; 5]> = train.messages.iter().map(|(m, _)| extract_lexicon_features(lex, m)).collect();
        let n = feats.len() as f64;
        for k in 0..5 {
            let mean = feats.iter().map(|f| f[k]).sum::<f64>() / n;
            let var = feats.iter().map(|f| (f[k] - mean).powi(2)).sum::<f64>() / n;
            feature_mean[k] = mean;
            feature_std[k] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
    }
    let mut clf = BowClassifier {
        vocabulary,
        lexicon: lexicon.cloned(),
        feature_mean,
        feature_std,
        model: LinearModel {
            head: crate::baselines::LinearHead::Regressor,
            dim: 0,
            weights: Vec::new(),
            biases: Vec::new(),
            regularizer: cfg.regularizer,
            lambda: cfg.lambda,
            iterations: 0,
        },
    };
    let mut x = SparseFeatures::new(clf.feature_count());
    for (m, _) in &train.messages {
        clf.featurize(m, &mut x)?;
    }
    let classes: Vec<String> = Sentiment::CLASSES.iter().map(|s| s.name().to_owned()).collect();
    clf.model = LinearModel::fit_classifier(&x, &labels, &classes, cfg)?;
    Ok(clf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|&(t, s)| (t.to_owned(), s)).collect()
    }

    fn msg(tokens: &[&str]) -> Message {
        Message {
            raw: tokens.join(" "),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("GOOD movie!"), ["good", "movie", "!"]);
        assert_eq!(tokenize("@bob http://x.co :)"), ["<user>", "<url>", ":)"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("I don't like #Mondays :-("), ["i", "don't", "like", "#mondays", ":-("]);
        assert_eq!(tokenize("wow...<3"), ["wow", ".", ".", ".", "<3"]);
    }

    #[test]
    fn scoring_examples() {
        let l = lex(&[("good", 0.5), ("bad", -0.9)]);
        assert_eq!(score_message(&l, &msg(&["good", "meh"])), Some(0.5));
        let mixed = score_message(&l, &msg(&["good", "bad"])).unwrap();
        assert!((mixed + 0.2).abs() < 1e-15);
        assert_eq!(score_message(&l, &msg(&["meh"])), None);
    }

    #[test]
    fn threshold_examples() {
        let l = lex(&[("a", 0.2), ("b", 0.4)]);
        let corpus = [msg(&["a"]), msg(&["zzz"]), msg(&["b"])];
        assert!((estimate_threshold(&l, &corpus).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(estimate_threshold(&l, &corpus[..1]).unwrap(), 0.2);
        assert!(estimate_threshold(&l, &corpus[1..2]).is_err());
    }

    #[test]
    fn decision_boundaries() {
        let clf = LexiconClassifier::new(lex(&[("up", 0.5), ("t", 0.3)]), 0.3).unwrap();
        assert_eq!(clf.classify(&msg(&["up"])).label, Sentiment::Positive);
        assert_eq!(clf.classify(&msg(&["t"])).label, Sentiment::Positive);
        let none = clf.classify(&msg(&["zzz"]));
        assert_eq!(none.label, Sentiment::Negative);
        assert!(none.abstained());
        assert!(LexiconClassifier::new(HashMap::new(), 0.0).is_err());
        assert!(LexiconClassifier::new(lex(&[("a", 1.0)]), f64::NAN).is_err());
    }

    #[test]
    fn lexicon_feature_examples() {
        let l = lex(&[("p", 1.0), ("n", -1.0), ("q", 0.4)]);
        assert_eq!(extract_lexicon_features(&l, &msg(&["p", "n"])), [0.0, 0.0, 1.0, -1.0, 1.0]);
        assert_eq!(extract_lexicon_features(&l, &msg(&["q"])), [0.4, 0.4, 0.4, 0.4, 0.0]);
        assert_eq!(extract_lexicon_features(&l, &msg(&["x"])), [0.0; 5]);
    }

    #[test]
    fn dataset_parsing() {
        let ds = MessageDataset::parse_str("positive\tI love it\nneutral\tok\nnegative\tawful\n", "d").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.messages[1].1, Sentiment::Negative);
        assert!(MessageDataset::parse_str("maybe\tx", "d").is_err());
        assert!(MessageDataset::parse_str("no tab here", "d").is_err());
        assert!(MessageDataset::parse_str("", "d").is_err());
    }

    fn separable() -> MessageDataset {
        let mut text = String::new();
        for i in 0..5 {
            text += &format!("positive\tgreat lovely w{i}\n");
            text += &format!("negative\tawful horrible v{i}\n");
        }
        MessageDataset::parse_str(&text, "sep").unwrap()
    }

    #[test]
    fn bow_separates_disjoint_vocabularies() {
        let ds = separable();
        let clf = train_bow_classifier(&ds, None, &LinearConfig::default()).unwrap();
        assert_eq!(clf.evaluate(&ds).unwrap().accuracy, 1.0);
        let l = lex(&[("great", 0.8), ("awful", -0.8)]);
        let with_lex = train_bow_classifier(&ds, Some(&l), &LinearConfig::default()).unwrap();
        assert_eq!(with_lex.feature_count(), clf.feature_count() + 5);
        let again = train_bow_classifier(&ds, Some(&l), &LinearConfig::default()).unwrap();
        assert_eq!(again.model().weights, with_lex.model().weights);
    }

    #[test]
    fn bow_rejects_single_class() {
        let ds = MessageDataset::parse_str("positive\ta\npositive\tb\n", "one").unwrap();
        assert!(train_bow_classifier(&ds, None, &LinearConfig::default()).is_err());
    }
}
