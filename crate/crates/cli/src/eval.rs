use std::fs::File;
use std::io::BufWriter;

use lexsub_core::evaluation::{
    grid_search, learning_curve, write_curve_csv, write_reports_csv, EvalOptions, HyperGrid, ModelKind,
};
use serde_json::json;

use crate::args::EvalArgs;
use crate::common::{embeddings_fingerprint, load_task, output_dir, parse_list, seed, write_json, Manifest};
use crate::error::{CliError, CliResult};

pub const DEFAULT_TRIALS: usize = 3;

pub(crate) fn parse_models(text: Option<&str>) -> CliResult<Vec<ModelKind>> {
    let Some(text) = text else {
        return Ok(ModelKind::ALL.to_vec());
    };
    let mut kinds: Vec<ModelKind> = Vec::new();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind: ModelKind = name.parse().map_err(CliError::input)?;
        if kinds.contains(&kind) {
            return Err(CliError::usage(format!("--models lists `{name}` twice")));
        }
        kinds.push(kind);
    }
    if kinds.is_empty() {
        return Err(CliError::usage("--models is empty"));
    }
    Ok(kinds)
}

/// Default grid of every model with the overrides it recognises applied.
pub(crate) fn model_grids(kinds: &[ModelKind], overrides: Option<&str>) -> CliResult<Vec<(ModelKind, HyperGrid)>> {
    let overrides = overrides
        .map(|g| HyperGrid::parse(g).map_err(CliError::input))
        .transpose()?;
    let mut used = vec![false; overrides.as_ref().map_or(0, |o| o.params().len())];
    let mut grids = Vec::new();
    for &kind in kinds {
        let base = kind.default_grid();
        let grid = match &overrides {
            Some(o) => {
                let known: Vec<(String, Vec<f64>)> = o
                    .params()
                    .iter()
                    .enumerate()
                    .filter(|(_, (name, _))| base.params().iter().any(|(n, _)| n == name))
                    .map(|(i, p)| {
                        used[i] = true;
                        p.clone()
                    })
                    .collect();
                if known.is_empty() {
                    base
                } else {
                    base.with_overrides(&HyperGrid::new(known).map_err(CliError::input)?)
                }
            }
            None => base,
        };
        grids.push((kind, grid));
    }
    if let Some(o) = &overrides {
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(CliError::usage(format!(
                "--grid parameter `{}` belongs to none of the selected models",
                o.params()[i].0
            )));
        }
    }
    Ok(grids)
}

pub(crate) fn run(args: &EvalArgs) -> CliResult<()> {
    let seed = seed(&args.run);
    let kinds = parse_models(args.models.as_deref())?;
    let grids = model_grids(&kinds, args.grid.as_deref())?;
    let fractions = args.fractions.as_deref().map(|f| parse_list::<f64>(f, "fractions")).transpose()?;
    let trials = args.trials.unwrap_or(DEFAULT_TRIALS);
    if fractions.is_none() && args.trials.is_some() {
        return Err(CliError::usage("--trials only applies to a learning curve (--fractions)"));
    }
    let mut opts = EvalOptions {
        refit_on_dev: !args.no_refit,
        ..Default::default()
    };
    if let Some(e) = args.max_epochs {
        opts.nlse.max_epochs = e;
    }
    if let Some(p) = args.patience {
        opts.nlse.patience = p;
    }

    let (embeddings, task) = load_task(&args.input, seed)?;
    let out = output_dir(&args.run)?;
    let mut manifest = Manifest::new("eval", args, seed)?;
    manifest.input("embeddings", embeddings_fingerprint(&args.input.embeddings, &embeddings));
    manifest.input("lexicon", json!({ "path": args.input.lexicon, "task": task.id }));
    manifest.detail(
        "grids",
        json!(grids.iter().map(|(k, g)| (k.name(), g.params().to_vec())).collect::<Vec<_>>()),
    );
    manifest.detail("options", json!(opts));
    manifest.detail("metric", json!(task.metric().name()));

    match fractions {
        None => {
            let mut reports = Vec::new();
            for (kind, grid) in &grids {
                let outcome = grid_search(&task, *kind, grid, &embeddings, seed, &opts).map_err(CliError::compute)?;
                log::info!("{kind}: test {:?} with {}", outcome.report.test_score, outcome.report.params);
                if args.save_models {
                    let path = out.join(format!("model-{}.json", kind.name()));
                    outcome.model.save(&path).map_err(|e| CliError::write(&path, e))?;
                    manifest.output(&path);
                }
                reports.push(outcome.report);
            }
            let csv_path = out.join("report.csv");
            let file = File::create(&csv_path).map_err(|e| CliError::write(&csv_path, e))?;
            write_reports_csv(&reports, BufWriter::new(file)).map_err(|e| CliError::write(&csv_path, e))?;
            manifest.output(&csv_path);
            let json_path = out.join("report.json");
            write_json(&json_path, &reports)?;
            manifest.output(&json_path);
        }
        Some(fractions) => {
            manifest.detail("fractions", json!(fractions));
            manifest.detail("trials", json!(trials));
            let rows = learning_curve(&task, &grids, &fractions, trials, &embeddings, seed, &opts).map_err(CliError::compute)?;
            let csv_path = out.join("curve.csv");
            let file = File::create(&csv_path).map_err(|e| CliError::write(&csv_path, e))?;
            write_curve_csv(&rows, BufWriter::new(file)).map_err(|e| CliError::write(&csv_path, e))?;
            manifest.output(&csv_path);
            let json_path = out.join("curve.json");
            write_json(&json_path, &rows)?;
            manifest.output(&json_path);
        }
    }
    manifest.write(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_lists() {
        assert_eq!(parse_models(None).unwrap(), ModelKind::ALL.to_vec());
        assert_eq!(parse_models(Some("pca, nlse")).unwrap(), vec![ModelKind::Pca, ModelKind::Nlse]);
        assert!(parse_models(Some("nlse,svm")).is_err());
        assert!(parse_models(Some("l1,l1")).is_err());
        assert!(parse_models(Some(",")).is_err());
    }

    #[test]
    fn overrides_reach_only_their_models() {
        let grids = model_grids(&[ModelKind::Nlse, ModelKind::Linear, ModelKind::Pca], Some("s=3;C=1")).unwrap();
        assert_eq!(grids[0].1.len(), 5);
        assert_eq!(grids[1].1.len(), 1);
        assert_eq!(grids[2].1.len(), 5);
        assert!(model_grids(&[ModelKind::Linear], Some("s=3")).is_err());
        assert_eq!(model_grids(&[ModelKind::Nlse], None).unwrap()[0].1.len(), 25);
    }
}
