use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use lexsub_core::evaluation::write_reports_csv;
use lexsub_core::lexicon::{parse_lexicon, Lexicon, LexiconKind};
use lexsub_core::sentiment::{classification_metrics, estimate_threshold, Decision, LexiconClassifier, Message, Sentiment};
use serde_json::json;

use crate::args::ClassifyArgs;
use crate::common::{existing, output_dir, parse_pair, prepare_continuous, seed, task_name, write_json, Manifest};
use crate::error::{CliError, CliResult};

/// One input line: `label<TAB>text` when the first field is a sentiment
/// label, otherwise the whole line is the message.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Row {
    Message { message: Message, gold: Option<Sentiment> },
    Skipped,
}

pub(crate) fn parse_row(line: &str) -> Row {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.trim().is_empty() || line.starts_with('#') {
        return Row::Skipped;
    }
    if let Some((label, text)) = line.split_once('\t') {
        let label = label.trim();
        if label.eq_ignore_ascii_case("neutral") {
            return Row::Skipped;
        }
        if let Ok(gold) = label.parse::<Sentiment>() {
            return Row::Message {
                message: Message::new(text),
                gold: Some(gold),
            };
        }
    }
    Row::Message {
        message: Message::new(line),
        gold: None,
    }
}

fn open_lines(path: &Path) -> CliResult<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(file)))
}

type Rows = Box<dyn Iterator<Item = CliResult<(Message, Option<Sentiment>)>>>;

fn read_rows(path: &Path) -> Rows {
    let lines = match open_lines(path) {
        Ok(r) => r.lines(),
        Err(e) => return Box::new(std::iter::once(Err(e))),
    };
    let name = path.display().to_string();
    Box::new(lines.filter_map(move |line| match line {
        Err(e) => Some(Err(CliError::runtime(format!("{name}: {e}")))),
        Ok(line) => match parse_row(&line) {
            Row::Skipped => None,
            Row::Message { message, gold } => Some(Ok((message, gold))),
        },
    }))
}

fn format_row(d: &Decision, msg: &Message) -> String {
    let score = d.score.map(|s| s.to_string()).unwrap_or_default();
    let text = msg.raw.replace(['\t', '\n'], " ");
    format!("{}\t{score}\t{text}\n", d.label)
}

pub(crate) fn run(args: &ClassifyArgs) -> CliResult<()> {
    let seed = seed(&args.run);
    if let Some(t) = args.threshold {
        if !t.is_finite() {
            return Err(CliError::usage("--threshold must be finite"));
        }
    }
    let lex_path = existing(&args.lexicon, "lexicon")?;
    let messages_path = existing(&args.messages, "messages")?.to_path_buf();
    let scale = args.scale.as_deref().map(|s| parse_pair(s, "scale")).transpose()?;
    let Lexicon::Continuous(lexicon) = parse_lexicon(lex_path, LexiconKind::Continuous, scale).map_err(CliError::input)? else {
        unreachable!("continuous parse yields a continuous lexicon")
    };
    let lexicon = prepare_continuous(lexicon, args.normalize, args.neutral_band)?.to_map();
    if lexicon.is_empty() {
        return Err(CliError::usage(format!("{}: no usable lexicon entries", lex_path.display())));
    }
    let out = output_dir(&args.run)?;
    let mut manifest = Manifest::new("classify", args, seed)?;
    manifest.input("lexicon", json!({ "path": lex_path, "entries": lexicon.len() }));
    manifest.input("messages", json!({ "path": messages_path }));

    // Without a fixed threshold or a separate calibration corpus the input
    // itself calibrates, so it has to be read in full first.
    let calibration: Option<Vec<Message>> = match (&args.threshold, &args.calibration) {
        (Some(_), _) => None,
        (None, Some(_)) => {
            let path = existing(&args.calibration, "calibration")?;
            Some(read_rows(path).map(|r| r.map(|(m, _)| m)).collect::<CliResult<_>>()?)
        }
        (None, None) => None,
    };
    let buffered: Option<Vec<(Message, Option<Sentiment>)>> = if args.threshold.is_none() && calibration.is_none() {
        Some(read_rows(&messages_path).collect::<CliResult<_>>()?)
    } else {
        None
    };

    let threshold = match (args.threshold, &calibration, &buffered) {
        (Some(t), _, _) => Some(t),
        (None, Some(corpus), _) => Some(estimate_threshold(&lexicon, corpus).map_err(CliError::compute)?),
        (None, None, Some(rows)) if rows.is_empty() => None,
        (None, None, Some(rows)) => Some(estimate_threshold(&lexicon, rows.iter().map(|(m, _)| m)).map_err(CliError::compute)?),
        (None, None, None) => unreachable!("input is buffered when no threshold source is given"),
    };

    let pred_path = out.join("predictions.tsv");
    let file = File::create(&pred_path).map_err(|e| CliError::write(&pred_path, e))?;
    let mut writer = BufWriter::new(file);
    let mut gold = Vec::new();
    let mut decisions = Vec::new();
    let mut unlabelled = 0usize;
    if let Some(t) = threshold {
        let clf = LexiconClassifier::new(lexicon, t).map_err(CliError::compute)?;
        let rows: Rows = match buffered {
            Some(rows) => Box::new(rows.into_iter().map(Ok)),
            None => Box::new(read_rows(&messages_path)),
        };
        for row in rows {
            let (msg, label) = row?;
            let d = clf.classify(&msg);
            writer.write_all(format_row(&d, &msg).as_bytes()).map_err(|e| CliError::write(&pred_path, e))?;
            match label {
                Some(g) => {
                    gold.push(g);
                    decisions.push(d);
                }
                None => unlabelled += 1,
            }
        }
    }
    writer.flush().map_err(|e| CliError::write(&pred_path, e))?;
    manifest.output(&pred_path);
    manifest.detail("threshold", json!(threshold));
    manifest.detail("messages", json!(gold.len() + unlabelled));

    if !gold.is_empty() {
        if unlabelled > 0 {
            log::warn!("{unlabelled} unlabelled messages are not scored");
        }
        let metrics = classification_metrics(&gold, &decisions).map_err(CliError::compute)?;
        let reports = metrics.to_reports(&task_name(&messages_path), threshold.unwrap_or(0.0), seed);
        let csv_path = out.join("report.csv");
        let file = File::create(&csv_path).map_err(|e| CliError::write(&csv_path, e))?;
        write_reports_csv(&reports, BufWriter::new(file)).map_err(|e| CliError::write(&csv_path, e))?;
        manifest.output(&csv_path);
        let json_path = out.join("report.json");
        write_json(&json_path, &reports)?;
        manifest.output(&json_path);
        manifest.detail("abstentions", json!(metrics.abstentions));
    }
    manifest.write(&out)
}
