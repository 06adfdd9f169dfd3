mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use perspectra::align::{alignment_matrix, cosine, identify_prototypes, swap_labels, AlignmentParams};
use perspectra::corpus::{
    assign_splits, binarize_convabuse, compute_stats, read_dataset, write_dataset, AnnotationMatrix, DatasetBundle,
    Format, Instance, Provenance, Split, SplitRatios,
};
use perspectra::embed::{embed_hashing, EmbeddingVector};
use perspectra::metrics::{estimate_pdf, f1_scores, krippendorff_alpha, Bandwidth, Predictions, SoftLabelSeries};
use perspectra::modeling::compute_composites;
use perspectra::persona::{bundled_personas, bundled_template, render_prompt};
use perspectra::synthetic::{noisy_clones, random_humans};

use common::{bundle_from_rows, matrix_from_rows, Rows};

fn rows(max_annotators: usize, max_instances: usize) -> impl Strategy<Value = Rows> {
    (2..=max_annotators, 1..=max_instances).prop_flat_map(|(a, n)| {
        prop::collection::vec(prop::collection::vec(prop::option::weighted(0.7, 0u8..2), n), a)
    })
}

fn entry_set(m: &AnnotationMatrix) -> BTreeSet<(String, String, u8)> {
    m.entries().map(|(a, i, l)| (a.to_string(), i.to_string(), l)).collect()
}

fn covered(rows: &Rows) -> bool {
    rows.iter().all(|r| r.iter().any(Option::is_some))
}

fn permuted(m: &AnnotationMatrix, ann_shift: usize, inst_shift: usize) -> AnnotationMatrix {
    let mut a = m.annotator_ids().to_vec();
    let mut i = m.instance_ids().to_vec();
    let (na, ni) = (a.len(), i.len());
    a.rotate_left(ann_shift % na);
    a.reverse();
    i.rotate_left(inst_shift % ni);
    m.reordered(&a, &i).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn flipped(rows: &Rows) -> Rows {
    rows.iter().map(|r| r.iter().map(|c| c.map(|l| 1 - l)).collect()).collect()
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn dataset_roundtrip(rows in rows(4, 8), texts in prop::collection::vec("[a-z][a-z ,\"'!]{0,15}[a-z]", 8)) {
        prop_assume!(covered(&rows));
        let m = matrix_from_rows(&rows);
        let instances = m.instance_ids().iter().zip(&texts).map(|(id, t)| Instance::new(id.clone(), t.clone())).collect();
        let bundle = DatasetBundle::human(instances, m).unwrap();
        let bundle = assign_splits(&bundle, SplitRatios::new(0.5, 0.25, 0.25).unwrap(), 3).unwrap();
        for format in [Format::Jsonl, Format::Csv] {
            let mut buf = Vec::new();
            write_dataset(&bundle, &mut buf, format).unwrap();
            let back = read_dataset(&buf[..], format).unwrap();
            prop_assert_eq!(entry_set(back.matrix()), entry_set(bundle.matrix()));
            prop_assert_eq!(back.instances(), bundle.instances());
            if format == Format::Jsonl {
                prop_assert_eq!(back.splits(), bundle.splits());
            }
        }
    }

    #[test]
    fn stats_are_permutation_invariant(rows in rows(5, 12), a in 0usize..5, i in 0usize..12) {
        let b = bundle_from_rows(&rows);
        let m = permuted(b.matrix(), a, i);
        let instances = m.instance_ids().iter().map(|id| b.instance(id).unwrap().clone()).collect();
        let p = DatasetBundle::human(instances, m).unwrap();
        match (compute_stats(&b), compute_stats(&p)) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!((x.num_annotators, x.num_instances), (y.num_annotators, y.num_instances));
                for (u, v) in [(x.n_mean, y.n_mean), (x.n_std, y.n_std), (x.ai_mean, y.ai_mean), (x.ai_std, y.ai_std), (x.alpha, y.alpha)] {
                    prop_assert!((u - v).abs() <= 1e-12);
                }
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "stats defined for only one ordering"),
        }
    }

    #[test]
    fn complete_matrix_counts(a in 2usize..6, n in 1usize..15, bits in prop::collection::vec(0u8..2, 90)) {
        let rows: Rows = (0..a).map(|x| (0..n).map(|i| Some(bits[x * n + i])).collect()).collect();
        let m = matrix_from_rows(&rows);
        if let Ok(s) = compute_stats(&bundle_from_rows(&rows)) {
            prop_assert_eq!((s.ai_mean, s.ai_std, s.n_mean, s.n_std), (a as f64, 0.0, n as f64, 0.0));
        } else {
            prop_assert!(krippendorff_alpha(&m).is_err());
        }
    }

    #[test]
    fn binarize_is_monotone(x in -3i32..=1, y in -3i32..=1, t in -3i32..=2) {
        let (lo, hi) = (x.min(y), x.max(y));
        prop_assert!(binarize_convabuse(lo, t).unwrap() >= binarize_convabuse(hi, t).unwrap());
    }

    #[test]
    fn alpha_symmetries(rows in rows(5, 12), a in 0usize..5, i in 0usize..12) {
        let m = matrix_from_rows(&rows);
        let base = krippendorff_alpha(&m).ok();
        let swapped = krippendorff_alpha(&matrix_from_rows(&flipped(&rows))).ok();
        let perm = krippendorff_alpha(&permuted(&m, a, i)).ok();
        for other in [swapped, perm] {
            match (base, other) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "definedness differs"),
            }
        }
        let mut doubled = rows.clone();
        doubled.extend(rows.iter().cloned());
        if let (Some(x), Ok(y)) = (base, krippendorff_alpha(&matrix_from_rows(&doubled))) {
            prop_assert!(y >= x - 1e-12, "duplication lowered alpha {} -> {}", x, y);
        }
    }

    #[test]
    fn pdf_is_a_density(values in prop::collection::vec(0.0f64..=1.0, 2..80), bw in prop::option::of(0.001f64..2.0)) {
        let series = SoftLabelSeries { instance_ids: (0..values.len()).map(|i| format!("i{i}")).collect(), values };
        let curve = estimate_pdf(&series, bw.map_or(Bandwidth::Auto, Bandwidth::Fixed)).unwrap();
        prop_assert_eq!(curve.grid.len(), 201);
        prop_assert!((curve.integral() - 1.0).abs() <= 1e-3);
        prop_assert!(curve.density.iter().all(|d| *d >= 0.0 && d.is_finite()));
    }

    #[test]
    fn hashing_embedding_properties(words in prop::collection::vec("[a-z]{1,8}", 1..12), seed in 0u64..1000, shift in 0usize..12) {
        let text = words.join(" ");
        let mut shuffled = words.clone();
        shuffled.rotate_left(shift % words.len());
        shuffled.reverse();
        let a = embed_hashing(&text, 64, seed);
        prop_assert_eq!(&a, &embed_hashing(&text, 64, seed));
        prop_assert_eq!(&a, &embed_hashing(&shuffled.join(", "), 64, seed));
        let norm = a.norm();
        // signed collisions can cancel every token, leaving the zero vector
        prop_assert!((norm - 1.0).abs() <= 1e-6 || norm == 0.0);
        prop_assert!(a.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cosine_bounds(v in prop::collection::vec(0u8..2, 1..40), w in prop::collection::vec(0u8..2, 40)) {
        let w = &w[..v.len()];
        let c = cosine(&v, w);
        prop_assert!((0.0..=1.0).contains(&c));
        if v.iter().any(|x| *x == 1) {
            prop_assert_eq!(cosine(&v, &v), 1.0);
        }
        let complement: Vec<u8> = v.iter().map(|x| 1 - x).collect();
        prop_assert_eq!(cosine(&v, &complement), 0.0);
    }

    #[test]
    fn rendering_is_pure_and_localized(text in "[A-Za-z][A-Za-z ,.!?']{0,60}") {
        let template = bundled_template("hs_brexit_strong").unwrap();
        let personas = bundled_personas("hs_brexit_strong").unwrap();
        let inst = Instance::new("x", text.clone());
        let prompts: Vec<String> = personas.iter().map(|p| render_prompt(&template, p, &inst).unwrap()).collect();
        for (p, prompt) in personas.iter().zip(&prompts) {
            prop_assert_eq!(prompt, &render_prompt(&template, p, &inst).unwrap());
            prop_assert!(prompt.contains(&text));
            prop_assert!(prompt.contains(&p.description));
        }
        // strip each persona clause: what remains is identical
        let rest: BTreeSet<String> = personas.iter().zip(&prompts).map(|(p, s)| s.replacen(&p.description, "<P>", 1)).collect();
        prop_assert_eq!(rest.len(), 1);
    }
}

fn f1_oracle(gold: &[u8], pred: &[u8]) -> f64 {
    let mut tp = 0;
    let mut fp = 0;
    let mut fneg = 0;
    for (g, p) in gold.iter().zip(pred) {
        match (g, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fneg += 1,
            _ => {}
        }
    }
    if tp + fp + fneg == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
    }
}

#[test]
fn micro_f1_matches_oracle_exhaustively() {
    for n in 1..=8usize {
        let annotators = ["a", "b"];
        let instances: Vec<String> = (0..n.div_ceil(2)).map(|i| format!("i{i}")).collect();
        let cells: Vec<(&str, &String)> = (0..n).map(|k| (annotators[k % 2], &instances[k / 2])).collect();
        for g in 0..(1u32 << n) {
            let gold_bits: Vec<u8> = (0..n).map(|k| ((g >> k) & 1) as u8).collect();
            let mut gold = AnnotationMatrix::new(annotators.iter().map(|s| s.to_string()).collect(), instances.clone()).unwrap();
            for (k, (a, i)) in cells.iter().enumerate() {
                gold.set(a, i, gold_bits[k]).unwrap();
            }
            for p in 0..(1u32 << n) {
                let pred_bits: Vec<u8> = (0..n).map(|k| ((p >> k) & 1) as u8).collect();
                let preds: Predictions =
                    cells.iter().zip(&pred_bits).map(|((a, i), l)| ((a.to_string(), (*i).clone()), *l)).collect();
                let report = f1_scores(&preds, &gold).unwrap();
                assert_eq!(report.micro_f1_positive, f1_oracle(&gold_bits, &pred_bits), "gold {gold_bits:?} pred {pred_bits:?}");
            }
        }
    }
}

#[test]
fn disjoint_texts_are_near_orthogonal() {
    let vocab: Vec<String> = (0..400).map(|k| format!("tok{k}")).collect();
    let mut total = 0.0;
    for pair in 0..100usize {
        let a: Vec<&str> = (0..6).map(|j| vocab[(pair * 7 + j * 13) % 200].as_str()).collect();
        let b: Vec<&str> = (0..6).map(|j| vocab[200 + (pair * 11 + j * 17) % 200].as_str()).collect();
        total += embed_hashing(&a.join(" "), 256, 0).cosine(&embed_hashing(&b.join(" "), 256, 0));
    }
    assert!((total / 100.0).abs() <= 0.2, "mean cosine {}", total / 100.0);
    let x = embed_hashing("brexit is bad", 256, 0);
    assert!((x.cosine(&x) - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn alignment_transposes_exactly(seed in 0u64..1000) {
        let human = random_humans(3, 40, seed).unwrap();
        let llm = noisy_clones(&human, 0.3, Provenance::LlmStrong, seed).unwrap();
        let params = AlignmentParams { sample_sizes: vec![5, 20], resamples: 5, seed };
        let forward = alignment_matrix(&human, &llm, &params).unwrap();
        let backward = alignment_matrix(&llm, &human, &params).unwrap();
        prop_assert_eq!(forward.transposed(), backward);
        for cell in &forward.cells {
            prop_assert!((-1.0..=1.0).contains(&cell.mean_cos));
            prop_assert!(cell.shared_instances >= cell.sample_size);
        }
    }

    #[test]
    fn prototypes_ignore_persona_order(seed in 0u64..1000, shift in 1usize..4) {
        let human = random_humans(4, 120, seed).unwrap();
        let llm = noisy_clones(&human, 0.15, Provenance::LlmStrong, seed).unwrap();
        let mut order = llm.matrix().annotator_ids().to_vec();
        order.rotate_left(shift);
        let reordered = llm.with_matrix(llm.matrix().reordered(&order, llm.matrix().instance_ids()).unwrap()).unwrap();
        let params = AlignmentParams { sample_sizes: vec![100], resamples: 10, seed };
        let a = identify_prototypes(&alignment_matrix(&human, &llm, &params).unwrap(), 0.5);
        let b = identify_prototypes(&alignment_matrix(&human, &reordered, &params).unwrap(), 0.5);
        prop_assert_eq!(a.mapping, b.mapping);
    }

    #[test]
    fn swap_touches_train_only(seed in 0u64..1000, noise in 0.0f64..1.0) {
        let human = random_humans(4, 60, seed).unwrap();
        let human = assign_splits(&human, SplitRatios::new(0.6, 0.2, 0.2).unwrap(), seed).unwrap();
        let llm = noisy_clones(&human, noise, Provenance::LlmStrong, seed + 1).unwrap();
        let params = AlignmentParams { sample_sizes: vec![10], resamples: 5, seed };
        let mapping = identify_prototypes(&alignment_matrix(&human, &llm, &params).unwrap(), 0.0);
        let (swapped, _) = swap_labels(&human, &llm, &mapping).unwrap();
        let held_out = |b: &DatasetBundle| -> BTreeSet<(String, String, u8)> {
            b.matrix().entries().filter(|(_, i, _)| b.split_of(i) != Split::Train).map(|(a, i, l)| (a.into(), i.into(), l)).collect()
        };
        prop_assert_eq!(held_out(&swapped), held_out(&human));
        prop_assert_eq!(swapped.splits(), human.splits());
    }

    #[test]
    fn composites_depend_on_history_only(bits in prop::collection::vec(prop::option::of(0u8..2), 10), seed in 0u64..100) {
        let rows: Rows = vec![bits.clone(), bits.clone(), bits.iter().map(|_| Some(1)).collect()];
        let bundle = bundle_from_rows(&rows);
        let emb: Vec<EmbeddingVector> = (0..10).map(|i| embed_hashing(&format!("text {i} {seed}"), 32, seed)).collect();
        let store = compute_composites(&bundle, &emb).unwrap();
        prop_assert_eq!(store.positive("a0").unwrap(), store.positive("a1").unwrap());
        prop_assert_eq!(store.negative("a0").unwrap(), store.negative("a1").unwrap());
    }
}
