use perspectra::align::{alignment_matrix, identify_prototypes, swap_labels, AlignmentParams, PrototypeMapping};
use perspectra::corpus::{assign_splits, Provenance, SplitRatios};
use perspectra::synthetic::{majority_persona, noisy_clones, random_humans};

#[test]
fn exact_clones_align_perfectly_and_swap_is_idempotent() {
    let human = assign_splits(&random_humans(4, 150, 3).unwrap(), SplitRatios::new(0.7, 0.1, 0.2).unwrap(), 3).unwrap();
    let clones = noisy_clones(&human, 0.0, Provenance::LlmStrong, 0).unwrap();
    let m = alignment_matrix(&human, &clones, &AlignmentParams::default()).unwrap();
    for k in 0..4 {
        for n in [5, 10, 50, 100] {
            let cell = m.get(&format!("human_{k}"), &format!("persona_{k}"), n).unwrap();
            assert_eq!((cell.mean_cos, cell.std_cos, cell.shared_instances), (1.0, 0.0, 150));
        }
    }
    let mapping = identify_prototypes(&m, 0.5);
    assert!(mapping.prototypical.is_empty());
    assert!(mapping.unmatched.is_empty());
    let (swapped, report) = swap_labels(&human, &clones, &mapping).unwrap();
    assert_eq!(swapped.matrix(), human.matrix());
    assert_eq!(swapped.splits(), human.splits());
    assert_eq!(swapped.provenance(), Provenance::Hybrid);
    assert!(report.iter().all(|r| r.skipped == 0 && r.swapped > 0));

    let (same, rows) = swap_labels(&human, &clones, &PrototypeMapping::default()).unwrap();
    assert_eq!(same, human);
    assert!(rows.is_empty());
}

#[test]
fn majority_persona_becomes_prototypical() {
    let mut hits = 0;
    for s in 0..20u64 {
        let human = random_humans(5, 200, s).unwrap();
        let personas = majority_persona(&human, 4, s).unwrap();
        let m = alignment_matrix(&human, &personas, &AlignmentParams { seed: s, ..Default::default() }).unwrap();
        let mapping = identify_prototypes(&m, 0.5);
        hits += usize::from(mapping.prototypical.contains(&"persona_majority".to_string()));
    }
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn random_personas_do_not_clear_a_high_threshold() {
    for s in 0..5u64 {
        let human = random_humans(5, 200, s).unwrap();
        let personas = noisy_clones(&random_humans(5, 200, s + 500).unwrap(), 0.0, Provenance::LlmStrong, s).unwrap();
        let m = alignment_matrix(&human, &personas, &AlignmentParams { seed: s, ..Default::default() }).unwrap();
        let mapping = identify_prototypes(&m, 0.99);
        assert!(mapping.is_empty());
        assert_eq!(mapping.unmatched.len(), 5);
    }
}

#[test]
fn larger_samples_are_less_noisy() {
    let (mut small, mut large) = (0.0, 0.0);
    for s in 0..20u64 {
        let human = random_humans(1, 300, s).unwrap();
        let persona = noisy_clones(&human, 0.3, Provenance::LlmStrong, s).unwrap();
        let m = alignment_matrix(&human, &persona, &AlignmentParams { seed: s, ..Default::default() }).unwrap();
        small += m.get("human_0", "persona_0", 5).unwrap().std_cos;
        large += m.get("human_0", "persona_0", 100).unwrap().std_cos;
    }
    assert!(large <= small, "std n=100 {} vs n=5 {}", large / 20.0, small / 20.0);
}

#[test]
fn alignment_is_seeded() {
    let human = random_humans(3, 120, 1).unwrap();
    let persona = noisy_clones(&human, 0.4, Provenance::LlmWeak, 1).unwrap();
    let p = AlignmentParams { seed: 9, ..Default::default() };
    assert_eq!(alignment_matrix(&human, &persona, &p).unwrap(), alignment_matrix(&human, &persona, &p).unwrap());
    let q = AlignmentParams { seed: 10, ..Default::default() };
    assert_ne!(alignment_matrix(&human, &persona, &p).unwrap(), alignment_matrix(&human, &persona, &q).unwrap());
}
