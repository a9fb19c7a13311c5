//! End-to-end acceptance suite. Runs every criterion, prints one
//! `PASS`/`FAIL`/`SKIP` line each and exits non-zero on any failure.
//!
//! The optional public-data check reads `LEXSUB_EMBEDDINGS` (plus
//! `LEXSUB_EMBEDDINGS_FORMAT`, default inferred) and `LEXSUB_SEMEVAL_LEXICON`.

mod common;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use lexsub_cli::args::{ClassifyArgs, EvalArgs};
use lexsub_cli::{cmd_classify, cmd_eval};
use lexsub_core::embedding::{EmbeddingFormat, EmbeddingMatrix};
use lexsub_core::evaluation::{grid_search, learning_curve, EvalOptions, ModelKind, Task};
use lexsub_core::lexicon::{ContinuousLexicon, Lexicon, SplitConfig};
use lexsub_core::metrics::{kendall_tau, macro_avg_f1};
use lexsub_core::subspace::{Projection, SubspaceClassifier, SubspaceRegressor};
use lexsub_core::synthetic::{planted_subspace, PlantedConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// ---------------------------------------------------------------- gradients

const FD_STEP: f64 = 1e-5;
const FD_TOLERANCE: f64 = 1e-4;

fn central_difference(params: &[f64], loss: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + FD_STEP;
            let up = loss(&p);
            p[k] = orig - FD_STEP;
            let down = loss(&p);
            p[k] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn worst_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize, words: usize) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(d, (0..words).map(|i| (format!("t{i}"), (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect::<Vec<f64>>())))
        .unwrap()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn classifier_error(rng: &mut ChaCha8Rng, d: usize, s: usize, k: usize) -> f64 {
    let e = random_matrix(rng, d, 8);
    let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
    let proj = uniform(rng, s * d);
    let head = uniform(rng, k * s);
    let batch: Vec<(usize, usize)> = (0..8).map(|i| (i, rng.gen_range(0..k))).collect();
    let build = |p: &[f64], h: &[f64]| {
        SubspaceClassifier::new(Projection::from_rows(s, d, p.to_vec()).unwrap(), h.to_vec(), classes.clone()).unwrap()
    };
    let g = build(&proj, &head).gradients(&e, &batch).unwrap();
    let num_s = central_difference(&proj, |p| build(p, &head).nll_loss(&e, &batch).unwrap());
    let num_w = central_difference(&head, |h| build(&proj, h).nll_loss(&e, &batch).unwrap());
    worst_relative_error(&g.projection, &num_s).max(worst_relative_error(&g.head, &num_w))
}

fn regressor_error(rng: &mut ChaCha8Rng, d: usize, s: usize) -> f64 {
    let e = random_matrix(rng, d, 8);
    let proj = uniform(rng, s * d);
    let w = uniform(rng, s);
    let b: f64 = rng.gen_range(-1.0..1.0);
    let batch: Vec<(usize, f64)> = (0..8).map(|i| (i, rng.gen_range(-2.0..2.0))).collect();
    let build = |p: &[f64], w: &[f64], b: f64| SubspaceRegressor::new(Projection::from_rows(s, d, p.to_vec()).unwrap(), w.to_vec(), b).unwrap();
    let g = build(&proj, &w, b).gradients(&e, &batch).unwrap();
    let num_s = central_difference(&proj, |p| build(p, &w, b).mse_loss(&e, &batch).unwrap());
    let num_w = central_difference(&w, |v| build(&proj, v, b).mse_loss(&e, &batch).unwrap());
    let num_b = central_difference(&[b], |v| build(&proj, &w, v[0]).mse_loss(&e, &batch).unwrap());
    worst_relative_error(&g.projection, &num_s)
        .max(worst_relative_error(&g.weights, &num_w))
        .max(worst_relative_error(&[g.bias], &num_b))
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let configs = 24;
    for i in 0..configs {
        let d = rng.gen_range(2..=16);
        let (s, k) = (rng.gen_range(1..=d.min(8)), rng.gen_range(2..=6));
        let err = classifier_error(&mut rng, d, s, k);
        if err > FD_TOLERANCE {
            failures.push(format!("classifier #{i} (d={d}, s={s}, |Y|={k}): {err:.2e}"));
        }
        worst = worst.max(err);
    }
    for i in 0..configs / 2 {
        let d = rng.gen_range(2..=16);
        let s = rng.gen_range(1..=d.min(8));
        let err = regressor_error(&mut rng, d, s);
        if err > FD_TOLERANCE {
            failures.push(format!("regressor #{i} (d={d}, s={s}): {err:.2e}"));
        }
        worst = worst.max(err);
    }
    check(
        failures.is_empty(),
        format!(
            "{configs} classifier + {} regressor configs, worst relative error {worst:.2e}{}",
            configs / 2,
            if failures.is_empty() { String::new() } else { format!("; over tolerance: {}", failures.join(", ")) }
        ),
    )
}

// ------------------------------------------------------------------ metrics

fn tau_by_pairs(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut only_x, mut only_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                only_x += 1;
            } else if dy == 0.0 {
                only_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    let untied_x = c + d + only_y;
    let untied_y = c + d + only_x;
    if untied_x == 0 || untied_y == 0 {
        return None;
    }
    Some((c - d) as f64 / ((untied_x * untied_y) as f64).sqrt())
}

fn f1_by_confusion(gold: &[usize], pred: &[usize], k: usize) -> f64 {
    let mut m = vec![vec![0u64; k]; k];
    for (&g, &p) in gold.iter().zip(pred) {
        m[g][p] += 1;
    }
    let per_class: Vec<f64> = (0..k)
        .map(|c| {
            let tp = m[c][c];
            let fp: u64 = (0..k).filter(|&g| g != c).map(|g| m[g][c]).sum();
            let fneg: u64 = (0..k).filter(|&p| p != c).map(|p| m[c][p]).sum();
            if tp == 0 {
                0.0
            } else {
                (2 * tp) as f64 / (2 * tp + fp + fneg) as f64
            }
        })
        .collect();
    per_class.iter().sum::<f64>() / k as f64
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = Vec::new();
    let (mut tied, mut undefined) = (0, 0);
    for case in 0..200 {
        let n = rng.gen_range(2..=50);
        let with_ties = case % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if with_ties {
                f64::from(rng.gen_range(-3i32..=3))
            } else {
                rng.gen_range(-10.0..10.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let mut y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        if case % 25 == 1 {
            // a constant argument leaves tau undefined
            y = vec![1.0; n];
        }
        tied += usize::from(with_ties);
        match (kendall_tau(&x, &y).ok(), tau_by_pairs(&x, &y)) {
            (Some(a), Some(b)) if a == b => {}
            (None, None) => undefined += 1,
            (a, b) => mismatches.push(format!("tau case {case}: {a:?} vs {b:?}")),
        }
    }
    for case in 0..200 {
        let k = rng.gen_range(2..=6);
        let n = rng.gen_range(1..=60);
        let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let fast = macro_avg_f1(&gold, &pred, k).unwrap();
        let slow = f1_by_confusion(&gold, &pred, k);
        if (fast - slow).abs() > 1e-12 {
            mismatches.push(format!("F1 case {case}: {fast} vs {slow}"));
        }
    }
    check(
        mismatches.is_empty(),
        format!(
            "200 tau lists ({tied} with ties, {undefined} undefined) and 200 label vectors; {} mismatches{}",
            mismatches.len(),
            mismatches.first().map(|m| format!(", first: {m}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------- planted fixture

const FIXTURE_SEEDS: std::ops::Range<u64> = 0..5;

fn planted_task(seed: u64) -> (EmbeddingMatrix, Task) {
    let fx = planted_subspace(&PlantedConfig::default(), seed).unwrap();
    let task = Task::from_lexicon("planted", &fx.embeddings, &Lexicon::Continuous(fx.lexicon), &SplitConfig::default(), seed).unwrap();
    (fx.embeddings, task)
}

fn frozen_embeddings() -> Outcome {
    let (e, task) = planted_task(11);
    let copy = e.clone();
    let before = e.checksum();
    for kind in ModelKind::ALL {
        if let Err(err) = grid_search(&task, kind, &kind.default_grid(), &e, 11, &EvalOptions::default()) {
            return Outcome::Fail(format!("{kind} grid search failed: {err}"));
        }
    }
    let after = e.checksum();
    check(
        before == after && e == copy,
        format!("checksum {}… before and after all four default grids; element-wise equal: {}", &before[..12], e == copy),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn planted_trend() -> Outcome {
    let mut scores: HashMap<ModelKind, Vec<f64>> = HashMap::new();
    for seed in FIXTURE_SEEDS {
        let (e, task) = planted_task(seed);
        for kind in [ModelKind::Nlse, ModelKind::L1, ModelKind::Pca] {
            let out = match grid_search(&task, kind, &kind.default_grid(), &e, seed, &EvalOptions::default()) {
                Ok(o) => o,
                Err(err) => return Outcome::Fail(format!("{kind} on seed {seed}: {err}")),
            };
            scores.entry(kind).or_default().push(out.report.test_score.unwrap_or(f64::NAN));
        }
    }
    let (nlse, l1, pca) = (mean(&scores[&ModelKind::Nlse]), mean(&scores[&ModelKind::L1]), mean(&scores[&ModelKind::Pca]));
    check(
        nlse - pca >= 0.15 && nlse - l1 >= 0.10,
        format!(
            "mean test tau over 5 seeds: nlse {nlse:.4}, l1 {l1:.4}, pca {pca:.4}; margins {:.4} (>= 0.15) and {:.4} (>= 0.10)",
            nlse - pca,
            nlse - l1
        ),
    )
}

fn learning_curve_claim() -> Outcome {
    let models: Vec<_> = ModelKind::ALL.iter().map(|&k| (k, k.default_grid())).collect();
    let mut nlse_small = Vec::new();
    let mut best_baseline_large = Vec::new();
    for seed in FIXTURE_SEEDS {
        let (e, task) = planted_task(seed);
        let rows = match learning_curve(&task, &models, &[0.3, 0.7], 3, &e, seed, &EvalOptions::default()) {
            Ok(r) => r,
            Err(err) => return Outcome::Fail(format!("seed {seed}: {err}")),
        };
        let at = |kind: ModelKind, f: f64| {
            rows.iter()
                .find(|r| r.model == kind && r.fraction == f)
                .and_then(|r| r.mean)
                .unwrap_or(f64::NAN)
        };
        nlse_small.push(at(ModelKind::Nlse, 0.3));
        best_baseline_large.push(
            [ModelKind::Linear, ModelKind::L1, ModelKind::Pca]
                .into_iter()
                .map(|k| at(k, 0.7))
                .fold(f64::NEG_INFINITY, f64::max),
        );
    }
    let (a, b) = (mean(&nlse_small), mean(&best_baseline_large));
    check(
        a >= b,
        format!(
            "nlse at 30% {a:.4} vs best baseline at 70% {b:.4} (5 seeds x 3 trials); per seed {}",
            nlse_small
                .iter()
                .zip(&best_baseline_large)
                .map(|(x, y)| format!("{x:.3}/{y:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

// --------------------------------------------------------------- end to end

fn data(name: &str) -> std::path::PathBuf {
    common::data(name)
}

fn hand_fixture() -> Outcome {
    // Worked by hand from the lexicon: good .75, great .5, fine .25,
    // meh -.25, bad -.5, awful -.75.
    //   "What a GOOD movie!"      -> .75
    //   "bad, awful, meh"         -> (-.5 - .75 - .25) / 3 = -.5
    //   "@bob see http://x.co"    -> no match, abstains
    //   "Great, just great :)"    -> .5
    //   "it was fine"             -> .25
    // t = mean of defined scores = (.75 - .5 + .5 + .25) / 4 = .25, so the
    // last message sits exactly on the threshold.
    let expected = [
        ("positive", Some(0.75)),
        ("negative", Some(-0.5)),
        ("negative", None),
        ("positive", Some(0.5)),
        ("positive", Some(0.25)),
    ];
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("classify");
    let args = ClassifyArgs {
        lexicon: Some(data("lexicon.tsv")),
        messages: Some(data("messages.tsv")),
        run: common::run_args(&out, 0),
        ..Default::default()
    };
    let code = cmd_classify(args);
    if code != 0 {
        return Outcome::Fail(format!("classify exited with {code}"));
    }
    let text = fs::read_to_string(out.join("predictions.tsv")).unwrap();
    let got: Vec<(String, Option<f64>)> = text
        .lines()
        .map(|l| {
            let mut f = l.split('\t');
            let label = f.next().unwrap().to_owned();
            let score = f.next().filter(|s| !s.is_empty()).map(|s| s.parse().unwrap());
            (label, score)
        })
        .collect();
    let want: Vec<(String, Option<f64>)> = expected.iter().map(|(l, s)| (l.to_string(), *s)).collect();
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let threshold = manifest["details"]["threshold"].as_f64();
    let report = fs::read_to_string(out.join("report.csv")).unwrap_or_default();
    let accuracy_row = report.lines().find(|l| l.contains(",accuracy,")).unwrap_or("");
    check(
        got == want && threshold == Some(0.25) && accuracy_row.contains(",0.6,0.2,"),
        format!(
            "labels {:?}, threshold {threshold:?}, accuracy row `{accuracy_row}`",
            got.iter().map(|g| g.0.as_str()).collect::<Vec<_>>()
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PlantedConfig {
        vocab: 600,
        labelled: 600,
        ..Default::default()
    };
    let (emb, lex) = common::write_planted(dir.path(), &cfg, 5);
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let args = EvalArgs {
            input: common::input(&emb, &lex, "continuous"),
            run: common::run_args(&dir.path().join(name), 5),
            ..Default::default()
        };
        match cmd_eval(args) {
            0 => fs::read(dir.path().join(name).join("report.csv")).map_err(|e| e.to_string()),
            code => Err(format!("eval exited with {code}")),
        }
    };
    match (run("first"), run("second")) {
        (Ok(a), Ok(b)) => check(a == b, format!("two runs, all four models, default grids: {} bytes each, identical: {}", a.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => Outcome::Fail(e),
    }
}

// ------------------------------------------------------------- public data

/// SemEval-2015 Task 10 (subtask E) rows are `score<TAB>term`; plain
/// `term<TAB>score` is accepted as well.
fn read_semeval(path: &Path) -> Result<ContinuousLexicon, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut pairs = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (a, b) = line.split_once('\t').ok_or_else(|| format!("bad row `{line}`"))?;
        let (term, score) = match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(s), _) => (b.trim(), s),
            (_, Ok(s)) => (a.trim(), s),
            _ => return Err(format!("bad row `{line}`")),
        };
        pairs.push((term.to_owned(), score));
    }
    ContinuousLexicon::from_pairs(pairs, Some((-1.0, 1.0))).map_err(|e| e.to_string())
}

fn public_data() -> Outcome {
    let (Ok(emb), Ok(lex)) = (std::env::var("LEXSUB_EMBEDDINGS"), std::env::var("LEXSUB_SEMEVAL_LEXICON")) else {
        return Outcome::Skip("set LEXSUB_EMBEDDINGS and LEXSUB_SEMEVAL_LEXICON to run".into());
    };
    let format = match std::env::var("LEXSUB_EMBEDDINGS_FORMAT") {
        Ok(f) => f.parse().unwrap_or(EmbeddingFormat::Text),
        Err(_) if emb.ends_with(".bin") => EmbeddingFormat::Binary,
        Err(_) => EmbeddingFormat::Text,
    };
    let e = match EmbeddingMatrix::load(&emb, format) {
        Ok(e) => e,
        Err(err) => return Outcome::Fail(format!("cannot load embeddings: {err}")),
    };
    if e.dim() < 100 {
        return Outcome::Fail(format!("embeddings have dimension {}, need >= 100", e.dim()));
    }
    let lexicon = match read_semeval(Path::new(&lex)) {
        Ok(l) => l,
        Err(err) => return Outcome::Fail(format!("cannot read lexicon: {err}")),
    };
    let task = match Task::from_lexicon("semeval2015", &e, &Lexicon::Continuous(lexicon), &SplitConfig::default(), 0) {
        Ok(t) => t,
        Err(err) => return Outcome::Fail(err.to_string()),
    };
    let mut tau = HashMap::new();
    for kind in [ModelKind::Nlse, ModelKind::Linear] {
        match grid_search(&task, kind, &kind.default_grid(), &e, 0, &EvalOptions::default()) {
            Ok(o) => tau.insert(kind, o.report.test_score.unwrap_or(f64::NAN)),
            Err(err) => return Outcome::Fail(format!("{kind}: {err}")),
        };
    }
    let (nlse, linear) = (tau[&ModelKind::Nlse], tau[&ModelKind::Linear]);
    check(
        nlse >= linear && nlse > 0.3 && linear > 0.3,
        format!("{} labelled words embedded; test tau nlse {nlse:.4}, linear {linear:.4}", task.train_len()),
    )
}

fn main() {
    let criteria = [
        Criterion {
            id: "1",
            title: "gradient correctness",
            budget: Some(Duration::from_secs(10)),
            run: gradient_correctness,
        },
        Criterion {
            id: "2",
            title: "metric oracles",
            budget: Some(Duration::from_secs(5)),
            run: metric_oracles,
        },
        Criterion {
            id: "3",
            title: "frozen embeddings",
            budget: None,
            run: frozen_embeddings,
        },
        Criterion {
            id: "4",
            title: "planted-subspace trend",
            budget: Some(Duration::from_secs(300)),
            run: planted_trend,
        },
        Criterion {
            id: "5",
            title: "learning-curve claim",
            budget: Some(Duration::from_secs(600)),
            run: learning_curve_claim,
        },
        Criterion {
            id: "6",
            title: "lexicon classifier hand fixture",
            budget: None,
            run: hand_fixture,
        },
        Criterion {
            id: "7",
            title: "eval determinism",
            budget: None,
            run: determinism,
        },
        Criterion {
            id: "8",
            title: "public-data integration",
            budget: Some(Duration::from_secs(1800)),
            run: public_data,
        },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == c.id) {
            continue;
        }
        let started = Instant::now();
        let outcome = (c.run)();
        let elapsed = started.elapsed();
        let over_budget = c.budget.is_some_and(|b| elapsed > b);
        let (status, detail) = match outcome {
            Outcome::Pass(d) if over_budget => ("FAIL", format!("{d}; over the {:?} budget", c.budget.unwrap())),
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} criterion {} ({}) [{:.1}s]: {detail}", c.id, c.title, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
