use std::collections::HashSet;
use std::fs;

use lexsub_core::expansion::{expand, ExpandOptions};
use lexsub_core::snapshot::ModelSnapshot;
use serde_json::json;

use crate::args::ExpandArgs;
use crate::common::{embeddings_fingerprint, existing, load_embeddings, output_dir, parse_pair, seed, Manifest};
use crate::error::{CliError, CliResult};

pub(crate) fn run(args: &ExpandArgs) -> CliResult<()> {
    if let Some(c) = args.min_confidence {
        if !(0.0..=1.0).contains(&c) {
            return Err(CliError::usage(format!("--min-confidence {c} must lie in [0, 1]")));
        }
    }
    let clamp = args.clamp.as_deref().map(|c| parse_pair(c, "clamp")).transpose()?;
    let model_path = existing(&args.model, "model")?;
    let model = ModelSnapshot::load(model_path).map_err(CliError::input)?;
    let vocab: Option<HashSet<String>> = match &args.vocab {
        Some(_) => {
            let path = existing(&args.vocab, "vocab")?;
            let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            Some(text.lines().map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned).collect())
        }
        None => None,
    };
    let embeddings = load_embeddings(&args.embeddings, &args.embedding_format)?;
    let out = output_dir(&args.run)?;

    let filter = |t: &str| vocab.as_ref().is_none_or(|v| v.contains(t));
    let opts = ExpandOptions {
        min_confidence: args.min_confidence,
        vocab_filter: vocab.as_ref().map(|_| &filter as &(dyn Fn(&str) -> bool + Sync)),
        clamp,
        source_lexicon: args.source_lexicon.as_deref(),
    };
    let lexicon = expand(&model, &embeddings, &opts).map_err(CliError::compute)?;

    let mut manifest = Manifest::new("expand", args, seed(&args.run))?;
    manifest.input("embeddings", embeddings_fingerprint(&args.embeddings, &embeddings));
    manifest.input("model", json!({ "path": model_path, "id": model.id(), "kind": model.kind_name() }));
    manifest.detail("entries", json!(lexicon.len()));
    let tsv = out.join("lexicon.tsv");
    lexicon.write_lexicon(&tsv).map_err(|e| CliError::write(&tsv, e))?;
    manifest.output(&tsv);
    let prov = out.join("provenance.json");
    lexicon.write_provenance(&prov).map_err(|e| CliError::write(&prov, e))?;
    manifest.output(&prov);
    manifest.write(&out)?;
    log::info!("expanded {} words", lexicon.len());
    Ok(())
}
