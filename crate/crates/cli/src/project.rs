use std::fs::{self, File};
use std::io::{BufWriter, Write};

use lexsub_core::snapshot::ModelSnapshot;
use lexsub_core::{Error as CoreError, SubspaceModel};
use serde_json::json;

use crate::args::ProjectArgs;
use crate::common::{embeddings_fingerprint, existing, load_embeddings, output_dir, seed, Manifest};
use crate::error::{CliError, CliResult};

pub(crate) fn run(args: &ProjectArgs) -> CliResult<()> {
    let model_path = existing(&args.model, "model")?;
    let model = ModelSnapshot::load(model_path).map_err(CliError::input)?;
    let subspace: &dyn SubspaceModel = match &model {
        ModelSnapshot::NlseClassifier(m) => m,
        ModelSnapshot::NlseRegressor(m) => m,
        other => {
            return Err(CliError::usage(format!(
                "{}: a {} model has no subspace to project into",
                model_path.display(),
                other.kind_name()
            )))
        }
    };
    let tokens_path = existing(&args.tokens, "tokens")?;
    let tokens = fs::read_to_string(tokens_path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", tokens_path.display())))?;
    let embeddings = load_embeddings(&args.embeddings, &args.embedding_format)?;
    if model.input_dim() != embeddings.dim() {
        return Err(CliError::usage(format!(
            "model expects {}-dimensional embeddings, got {}",
            model.input_dim(),
            embeddings.dim()
        )));
    }
    let out = output_dir(&args.run)?;

    let path = out.join("projection.tsv");
    let file = File::create(&path).map_err(|e| CliError::write(&path, e))?;
    let mut w = BufWriter::new(file);
    let mut written = 0usize;
    let mut missing = Vec::new();
    for token in tokens.lines().map(str::trim).filter(|t| !t.is_empty()) {
        match subspace.project_word(&embeddings, token) {
            Ok(h) => {
                let values: Vec<String> = h.iter().map(f64::to_string).collect();
                writeln!(w, "{token}\t{}", values.join("\t")).map_err(|e| CliError::write(&path, e))?;
                written += 1;
            }
            Err(CoreError::UnknownToken(t)) => {
                log::warn!("skipping `{t}`: no embedding");
                missing.push(t);
            }
            Err(e) => return Err(CliError::compute(e)),
        }
    }
    w.flush().map_err(|e| CliError::write(&path, e))?;

    let mut manifest = Manifest::new("project", args, seed(&args.run))?;
    manifest.input("embeddings", embeddings_fingerprint(&args.embeddings, &embeddings));
    manifest.input("model", json!({ "path": model_path, "id": model.id() }));
    manifest.detail("rows", json!(written));
    manifest.detail("missing", json!(missing));
    manifest.output(&path);
    manifest.write(&out)
}
