#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use lexsub_cli::args::{LexiconInput, RunArgs};
use lexsub_core::synthetic::{planted_subspace, separable, PlantedConfig};

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Writes a small separable categorical task; returns (embeddings, lexicon).
pub fn write_separable(dir: &Path, dim: usize, words: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (e, lex) = separable(dim, words, seed).unwrap();
    let emb = dir.join("toy.txt");
    e.write_text(fs::File::create(&emb).unwrap()).unwrap();
    let mut text = String::new();
    for (token, class) in lex.entries() {
        text += &format!("{token}\t{}\n", lex.classes()[*class]);
    }
    let lexicon = dir.join("toy.tsv");
    fs::write(&lexicon, text).unwrap();
    (emb, lexicon)
}

/// Writes a planted-subspace continuous task; returns (embeddings, lexicon).
pub fn write_planted(dir: &Path, cfg: &PlantedConfig, seed: u64) -> (PathBuf, PathBuf) {
    let fx = planted_subspace(cfg, seed).unwrap();
    let emb = dir.join("planted.txt");
    fx.embeddings.write_text(fs::File::create(&emb).unwrap()).unwrap();
    let mut text = String::new();
    for (token, score) in fx.lexicon.entries() {
        text += &format!("{token}\t{score}\n");
    }
    let lexicon = dir.join("planted.tsv");
    fs::write(&lexicon, text).unwrap();
    (emb, lexicon)
}

pub fn input(emb: &Path, lexicon: &Path, kind: &str) -> LexiconInput {
    LexiconInput {
        embeddings: Some(emb.to_path_buf()),
        lexicon: Some(lexicon.to_path_buf()),
        kind: Some(kind.to_owned()),
        ..Default::default()
    }
}

pub fn run_args(out: &Path, seed: u64) -> RunArgs {
    RunArgs {
        seed: Some(seed),
        out: Some(out.to_path_buf()),
        ..Default::default()
    }
}
