mod common;

use perspectra::align::cross_evaluate;
use perspectra::corpus::{assign_splits, DatasetBundle, Instance, Split, SplitRatios};
use perspectra::embed::{embed_hashing, Embedder, HashingEmbedder};
use perspectra::modeling::{
    embed_bundle, evaluate_with_embeddings, train, train_with_embeddings, training_set, Network, Technique,
    TechniqueConfig, TrainedModel,
};
use perspectra::synthetic::{planted_categories, planted_rule_benchmark, randomize_labels, Planted, PLANTED_SEED, PLANTED_SIZE};
use perspectra::Error;

use common::{bundle_from_rows, Rows};

fn tiny(technique: Technique) -> TechniqueConfig {
    TechniqueConfig { hidden_dim: 8, user_embedding_dim: 4, epochs: 8, ..TechniqueConfig::new(technique) }
}

fn small_planted() -> DatasetBundle {
    planted_rule_benchmark(80, 5).unwrap()
}

#[test]
fn adding_an_empty_annotator_changes_nothing_shared() {
    let bundle = small_planted();
    let mut m = bundle.matrix().clone();
    m.add_annotator("ghost").unwrap();
    let padded = bundle.with_matrix(m).unwrap();
    let embedder = HashingEmbedder::new(64, 0).unwrap();
    let emb = embed_bundle(&bundle, &embedder).unwrap();
    for t in Technique::ALL {
        let cfg = tiny(t);
        let a = train_with_embeddings(&bundle, &cfg, embedder.descriptor(), &emb).unwrap();
        let b = train_with_embeddings(&padded, &cfg, embedder.descriptor(), &emb).unwrap();
        assert_eq!(a.training_log(), b.training_log(), "{t:?} loss log");
        let net = a.network();
        let trunk = net.hidden_dim() * (t.input_dim(net.text_dim(), cfg.user_embedding_dim) + 1);
        assert_eq!(a.network().params()[..trunk], b.network().params()[..trunk], "{t:?} trunk");

        let init_a = Network::init(t, 64, 4, 8, bundle.matrix().annotator_ids(), 1);
        let init_b = Network::init(t, 64, 4, 8, padded.matrix().annotator_ids(), 1);
        let (la, ga) = init_a.loss_and_gradient(&training_set(&bundle, &cfg, &emb).unwrap(), cfg.l2).unwrap();
        let (lb, gb) = init_b.loss_and_gradient(&training_set(&padded, &cfg, &emb).unwrap(), cfg.l2).unwrap();
        assert_eq!(la, lb);
        assert_eq!(ga[..trunk], gb[..trunk]);
    }
}

#[test]
fn training_is_deterministic() {
    let bundle = small_planted();
    let embedder = HashingEmbedder::default();
    for t in Technique::ALL {
        let a = train(&bundle, &tiny(t).with_seed(9), &embedder).unwrap();
        let b = train(&bundle, &tiny(t).with_seed(9), &embedder).unwrap();
        assert_eq!(a.network().params(), b.network().params());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}

fn separable() -> DatasetBundle {
    // label = 1 iff the text mentions "bad"; two annotators agree
    let rows: Rows = (0..2).map(|_| (0..40).map(|i| Some(u8::from(i % 2 == 0))).collect()).collect();
    let b = bundle_from_rows(&rows);
    let instances: Vec<Instance> = (0..40)
        .map(|i| Instance::new(format!("i{i}"), if i % 2 == 0 { format!("bad thing {i}") } else { format!("fine thing {i}") }))
        .collect();
    DatasetBundle::human(instances, b.matrix().clone()).unwrap()
}

#[test]
fn separable_data_is_fit() {
    let bundle = separable();
    let embedder = HashingEmbedder::default();
    let emb = embed_bundle(&bundle, &embedder).unwrap();
    for t in Technique::ALL {
        let model = train_with_embeddings(&bundle, &TechniqueConfig::new(t), embedder.descriptor(), &emb).unwrap();
        let log = model.training_log();
        assert_eq!(log.len(), 30);
        assert!(*log.last().unwrap() < 0.1, "{t:?} final loss {}", log.last().unwrap());
        let upticks = log.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(upticks <= 2, "{t:?} {upticks} upticks in {log:?}");
        let f1 = evaluate_with_embeddings(&model, &bundle, Split::Train, &emb).unwrap();
        assert!(f1.micro_f1_positive >= 0.95);
    }
}

#[test]
fn zero_model_predicts_one_at_half() {
    for t in Technique::ALL {
        let net = Network::zeros(t, 16, 4, 8, 2);
        let side = if t.uses_composites() { vec![0.3; 32] } else { vec![] };
        let p = net.probability(embed_hashing("anything", 16, 0).values(), &side, 0).unwrap();
        assert_eq!(p, 0.5);
    }
    let bundle = small_planted();
    let embedder = HashingEmbedder::default();
    let model = train(&bundle, &TechniqueConfig { epochs: 1, ..tiny(Technique::UserToken) }, &embedder).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
    for p in json["network"]["params"].as_array_mut().unwrap() {
        *p = 0.0.into();
    }
    let zero = TrainedModel::from_json(&json.to_string()).unwrap();
    assert_eq!(zero.predict(&embedder, "whatever text", "rule_a_0").unwrap(), (0.5, 1));
}

#[test]
fn checkpoint_roundtrips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = small_planted();
    let embedder = HashingEmbedder::default();
    for t in Technique::ALL {
        let model = train(&bundle, &tiny(t), &embedder).unwrap();
        let path = dir.path().join(format!("{}.json", t.as_str()));
        model.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(back.network(), model.network());
        assert_eq!(back.composites(), model.composites());
        assert_eq!(back.to_json().unwrap(), model.to_json().unwrap());
        for inst in bundle.instances().iter().take(5) {
            assert_eq!(back.predict(&embedder, &inst.text, "rule_b_1").unwrap(), model.predict(&embedder, &inst.text, "rule_b_1").unwrap());
        }
    }
    let wrong = HashingEmbedder::new(128, 0).unwrap();
    let model = train(&bundle, &tiny(Technique::TextOnly), &embedder).unwrap();
    assert!(matches!(model.check_embedder(&wrong), Err(Error::InvalidArgument(_)) | Err(Error::DimensionMismatch { .. })));
}

#[test]
fn feature_layouts() {
    let bundle = small_planted();
    let embedder = HashingEmbedder::default();
    let e = embedder.embed("a text about nothing").unwrap();
    let dims = [
        (Technique::TextOnly, 256),
        (Technique::UserToken, 256 + 32),
        (Technique::Composite, 768),
        (Technique::CompositeUserToken, 768 + 32),
        (Technique::MultiTask, 256),
    ];
    for (t, dim) in dims {
        let model = train(&bundle, &TechniqueConfig { epochs: 1, ..TechniqueConfig::new(t) }, &embedder).unwrap();
        let f = model.features(&e, "rule_a_0").unwrap();
        assert_eq!(f.len(), dim, "{t:?}");
        if t.is_annotator_aware() {
            assert!(matches!(model.features(&e, "nobody"), Err(Error::UnknownAnnotator(_))));
        }
    }
    let model = train(&bundle, &TechniqueConfig { epochs: 1, ..TechniqueConfig::new(Technique::UserToken) }, &embedder).unwrap();
    let f0 = model.features(&e, "rule_a_0").unwrap();
    let f1 = model.features(&e, "rule_b_2").unwrap();
    assert_eq!(f0[..256], f1[..256]);
    assert_ne!(f0[256..], f1[256..]);
}

#[test]
fn text_only_ignores_the_annotator() {
    let bundle = small_planted();
    let embedder = HashingEmbedder::default();
    let model = train(&bundle, &tiny(Technique::TextOnly), &embedder).unwrap();
    for inst in bundle.instances() {
        let p: Vec<f64> = ["rule_a_0", "rule_b_0", "someone_else"]
            .iter()
            .map(|a| model.predict(&embedder, &inst.text, a).unwrap().0)
            .collect();
        assert!(p.iter().all(|x| *x == p[0]));
    }
}

#[test]
fn multi_task_recovers_planted_rules() {
    let bundle = planted_rule_benchmark(PLANTED_SIZE, PLANTED_SEED).unwrap();
    let embedder = HashingEmbedder::default();
    let emb = embed_bundle(&bundle, &embedder).unwrap();
    let model = train_with_embeddings(&bundle, &TechniqueConfig::new(Technique::MultiTask), embedder.descriptor(), &emb).unwrap();
    let f1 = evaluate_with_embeddings(&model, &bundle, Split::Test, &emb).unwrap();
    assert!(f1.micro_f1_positive >= 0.9, "micro {}", f1.micro_f1_positive);

    // against the generator itself, not the stored labels
    let cats = planted_categories(PLANTED_SIZE, PLANTED_SEED);
    let mut correct = 0;
    let mut total = 0;
    for id in bundle.split_ids(Split::Test) {
        let text = &bundle.instance(&id).unwrap().text;
        for (annotator, rule) in [("rule_a_0", Planted::A), ("rule_b_2", Planted::B)] {
            let (_, label) = model.predict(&embedder, text, annotator).unwrap();
            correct += usize::from(label == u8::from(cats[&id] == rule));
            total += 1;
        }
    }
    assert!(correct as f64 / total as f64 >= 0.9, "{correct}/{total}");
}

#[test]
fn random_labels_give_chance_macro_f1() {
    let human = planted_rule_benchmark(PLANTED_SIZE, PLANTED_SEED).unwrap();
    let embedder = HashingEmbedder::default();
    let emb = embed_bundle(&human, &embedder).unwrap();
    let mut total = 0.0;
    for s in 0..10u64 {
        let random = randomize_labels(&human, s).unwrap();
        let model = train_with_embeddings(&random, &TechniqueConfig::new(Technique::MultiTask).with_seed(s), embedder.descriptor(), &emb).unwrap();
        total += cross_evaluate(&model, &human, Split::Test, &emb, None).unwrap().macro_f1;
    }
    assert!((total / 10.0 - 0.5).abs() <= 0.1, "mean macro {}", total / 10.0);
}

#[test]
fn cross_evaluate_on_itself_is_evaluate() {
    let bundle = small_planted();
    let embedder = HashingEmbedder::default();
    let emb = embed_bundle(&bundle, &embedder).unwrap();
    let model = train_with_embeddings(&bundle, &tiny(Technique::UserToken), embedder.descriptor(), &emb).unwrap();
    assert_eq!(
        cross_evaluate(&model, &bundle, Split::Test, &emb, None).unwrap(),
        evaluate_with_embeddings(&model, &bundle, Split::Test, &emb).unwrap()
    );
}

#[test]
fn no_train_data_and_bad_config() {
    let rows: Rows = vec![vec![Some(1), Some(0)], vec![Some(0), Some(1)]];
    let b = bundle_from_rows(&rows);
    let b = assign_splits(&b, SplitRatios::new(0.0, 0.0, 1.0).unwrap(), 0).unwrap();
    let embedder = HashingEmbedder::default();
    assert!(matches!(train(&b, &TechniqueConfig::new(Technique::TextOnly), &embedder), Err(Error::NoTrainData(_))));
    let bad = TechniqueConfig { batch_size: 0, ..TechniqueConfig::new(Technique::TextOnly) };
    assert!(matches!(train(&small_planted(), &bad, &embedder), Err(Error::Config { .. })));
    let huge = TechniqueConfig { learning_rate: 1e300, ..tiny(Technique::TextOnly) };
    assert!(matches!(train(&small_planted(), &huge, &embedder), Err(Error::Divergence { .. })));
}
