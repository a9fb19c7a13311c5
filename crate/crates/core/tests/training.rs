use lexsub_core::lexicon::SplitConfig;
use lexsub_core::metrics::accuracy;
use lexsub_core::subspace::{resolve, train_classifier, train_regressor, TrainConfig};
use lexsub_core::synthetic::{planted_subspace, separable, PlantedConfig};

fn separable_config() -> TrainConfig {
    TrainConfig {
        subspace_size: 3,
        learning_rate: 0.05,
        max_epochs: 50,
        seed: 1,
        ..Default::default()
    }
}

#[test]
fn separable_fixture_is_fit_exactly() {
    let (e, lex) = separable(10, 200, 1).unwrap();
    let pairs: Vec<(String, usize)> = lex.entries().to_vec();
    let train = resolve(&e, &pairs).unwrap();
    let (model, trace) = train_classifier(&e, &train, &[], lex.classes(), &separable_config()).unwrap();
    let gold: Vec<usize> = train.iter().map(|&(_, y)| y).collect();
    let pred: Vec<usize> = train.iter().map(|&(i, _)| model.predict_class(&e, i).unwrap()).collect();
    assert_eq!(accuracy(&gold, &pred).unwrap(), 1.0);
    assert!(trace.train_loss.len() <= 50);
    assert!(trace.best_train_loss() <= trace.initial_train_loss);
}

#[test]
fn training_is_deterministic_per_seed() {
    let (e, lex) = separable(10, 200, 3).unwrap();
    let split = lex.split(&SplitConfig::default(), 3).unwrap();
    let train = resolve(&e, &split.train).unwrap();
    let dev = resolve(&e, &split.dev).unwrap();
    let cfg = separable_config();
    let (m1, t1) = train_classifier(&e, &train, &dev, lex.classes(), &cfg).unwrap();
    let (m2, t2) = train_classifier(&e, &train, &dev, lex.classes(), &cfg).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(t1, t2);
    let other = TrainConfig { seed: 2, ..cfg };
    let (m3, _) = train_classifier(&e, &train, &dev, lex.classes(), &other).unwrap();
    assert_ne!(m1, m3);
}

#[test]
fn training_leaves_embeddings_untouched() {
    let fx = planted_subspace(
        &PlantedConfig {
            vocab: 300,
            labelled: 300,
            ..Default::default()
        },
        4,
    )
    .unwrap();
    let before = fx.embeddings.checksum();
    let parts = fx.lexicon.split(&SplitConfig::default(), 4).unwrap();
    let train = resolve(&fx.embeddings, &parts.train).unwrap();
    let dev = resolve(&fx.embeddings, &parts.dev).unwrap();
    let cfg = TrainConfig {
        subspace_size: 5,
        learning_rate: 0.01,
        max_epochs: 20,
        ..Default::default()
    };
    let (_, trace) = train_regressor(&fx.embeddings, &train, &dev, &cfg).unwrap();
    assert_eq!(fx.embeddings.checksum(), before);
    assert!(trace.best_train_loss() <= trace.initial_train_loss);
    assert!(trace.best_epoch >= 1 && trace.best_epoch <= trace.train_loss.len());
}

#[test]
fn early_stopping_respects_patience() {
    let (e, lex) = separable(10, 200, 5).unwrap();
    let split = lex.split(&SplitConfig::default(), 5).unwrap();
    let train = resolve(&e, &split.train).unwrap();
    let dev = resolve(&e, &split.dev).unwrap();
    let cfg = TrainConfig {
        patience: 3,
        max_epochs: 200,
        ..separable_config()
    };
    let (_, trace) = train_classifier(&e, &train, &dev, lex.classes(), &cfg).unwrap();
    assert!(trace.train_loss.len() <= trace.best_epoch + 3);
    assert_eq!(trace.dev_metric.len(), trace.train_loss.len());
}
