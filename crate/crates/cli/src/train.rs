use lexsub_core::evaluation::{score, TaskData};
use lexsub_core::snapshot::{ModelSnapshot, Predictions};
use lexsub_core::subspace::{train_classifier, train_regressor, InitPolicy, TrainConfig};
use serde_json::json;

use crate::args::TrainArgs;
use crate::common::{embeddings_fingerprint, load_task, output_dir, seed, write_json, Manifest};
use crate::error::{CliError, CliResult};

pub(crate) fn run(args: &TrainArgs) -> CliResult<()> {
    let seed = seed(&args.run);
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        subspace_size: args.subspace.unwrap_or(defaults.subspace_size),
        learning_rate: args.alpha.unwrap_or(defaults.learning_rate),
        max_epochs: args.max_epochs.unwrap_or(defaults.max_epochs),
        patience: args.patience.unwrap_or(defaults.patience),
        seed,
        init: InitPolicy::Glorot,
    };
    let (embeddings, task) = load_task(&args.input, seed)?;
    let out = output_dir(&args.run)?;

    let (model, trace, test_score) = match &task.data {
        TaskData::Classification { classes, split } => {
            let (m, trace) =
                train_classifier(&embeddings, &split.train, &split.dev, classes, &cfg).map_err(CliError::compute)?;
            let model = ModelSnapshot::NlseClassifier(m);
            let idx: Vec<usize> = split.test.iter().map(|p| p.0).collect();
            let gold = Predictions::Classes(split.test.iter().map(|p| p.1).collect());
            let pred = model.predict(&embeddings, &idx).map_err(CliError::compute)?;
            let s = score(task.metric(), &gold, &pred, classes.len()).map_err(CliError::compute)?;
            (model, trace, s)
        }
        TaskData::Regression { split } => {
            let (m, trace) = train_regressor(&embeddings, &split.train, &split.dev, &cfg).map_err(CliError::compute)?;
            let model = ModelSnapshot::NlseRegressor(m);
            let idx: Vec<usize> = split.test.iter().map(|p| p.0).collect();
            let gold = Predictions::Values(split.test.iter().map(|p| p.1).collect());
            let pred = model.predict(&embeddings, &idx).map_err(CliError::compute)?;
            let s = score(task.metric(), &gold, &pred, 0).map_err(CliError::compute)?;
            (model, trace, s)
        }
    };

    let mut manifest = Manifest::new("train", args, seed)?;
    manifest.input("embeddings", embeddings_fingerprint(&args.input.embeddings, &embeddings));
    manifest.input("lexicon", json!({ "path": args.input.lexicon, "task": task.id }));
    manifest.detail("train_config", json!(cfg));
    manifest.detail("model_id", json!(model.id()));
    manifest.detail("best_epoch", json!(trace.best_epoch));
    manifest.detail("metric", json!(task.metric().name()));
    manifest.detail("test_score", json!(test_score));

    let model_path = out.join("model.json");
    model.save(&model_path).map_err(|e| CliError::write(&model_path, e))?;
    manifest.output(&model_path);
    let trace_path = out.join("trace.json");
    write_json(&trace_path, &trace)?;
    manifest.output(&trace_path);
    manifest.write(&out)?;
    log::info!(
        "trained {} (best epoch {}), test {} = {}",
        model.kind_name(),
        trace.best_epoch,
        task.metric().name(),
        test_score.map_or("undefined".to_owned(), |s| format!("{s:.4}"))
    );
    Ok(())
}
