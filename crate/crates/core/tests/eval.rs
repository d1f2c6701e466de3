use proptest::prelude::*;
use seqlab::corpus::{Sentence, TagSet};
use seqlab::eval::{
    build_report, entity_prf, f1_score, format_percent, macro_average, render_table, token_accuracy, truncate_1dp,
    ScoringMode,
};

fn printed(values: &[f64]) -> String {
    format!("{:.1}", truncate_1dp(macro_average(values).unwrap()))
}

#[test]
fn printed_table_averages() {
    // F1 test and dev columns, recall and precision test columns.
    assert_eq!(printed(&[93.0, 89.0, 98.0, 60.0, 95.0, 46.0, 99.0]), "82.8");
    assert_eq!(printed(&[94.0, 90.0, 98.0, 80.0, 95.0, 60.0, 99.0]), "88.0");
    assert_eq!(printed(&[92.0, 90.0, 98.0, 50.0, 93.0, 39.0, 99.0]), "80.1");
    assert_eq!(printed(&[93.0, 89.0, 98.0, 79.0, 95.0, 54.0, 100.0]), "86.8");
    assert_eq!(printed(&[95.0, 90.0, 98.0, 80.0, 98.0, 69.0, 99.0]), "89.8");
    assert_eq!(printed(&[90.0, 86.0, 95.0, 75.0, 91.0, 52.0, 84.0]), "81.8");
}

fn sentence(pairs: &[(&str, &str)]) -> Sentence {
    Sentence::from_pairs(pairs).unwrap()
}

#[test]
fn rendered_table_is_stable() {
    let gold = vec![
        sentence(&[("Apple", "B-vendor"), ("QuickTime", "B-application"), ("7.7", "B-version")]),
        sentence(&[("on", "O"), ("Windows", "B-os"), ("XP", "I-os")]),
    ];
    let pred = vec![
        sentence(&[("Apple", "B-vendor"), ("QuickTime", "B-vendor"), ("7.7", "B-version")]),
        sentence(&[("on", "O"), ("Windows", "B-os"), ("XP", "O")]),
    ];
    let tagset = TagSet::from_corpus(&gold).unwrap();
    let types = ["vendor", "os"];
    let report = build_report(&gold, &pred, &tagset, Some(&types), ScoringMode::Entity).unwrap();
    let expected = "\
Item accuracy (%): 66.6  [entity-level scores]

Entity type  Precision (%)  Recall (%)  F1-score (%)    Gold    Pred      TP
application            0.0         0.0           0.0       1       0       0
os                     0.0         0.0           0.0       1       1       0
vendor                50.0       100.0          66.6       1       2       1
version              100.0       100.0         100.0       1       1       1
Average               37.5        50.0          41.6

Selected type  Precision (%)  Recall (%)  F1-score (%)    Gold    Pred      TP
vendor                  50.0       100.0          66.6       1       2       1
os                       0.0         0.0           0.0       1       1       0
Average                 25.0        50.0          33.3
";
    let table = render_table(&report);
    assert_eq!(table, expected, "\n{table}");
    assert_eq!(render_table(&report), table);
}

#[test]
fn identical_corpora_score_one_hundred() {
    let gold = vec![sentence(&[("Apple", "B-vendor"), ("Flash", "B-application"), ("Player", "I-application")])];
    let tagset = TagSet::from_corpus(&gold).unwrap();
    for mode in [ScoringMode::Entity, ScoringMode::Token] {
        let r = build_report(&gold, &gold, &tagset, None, mode).unwrap();
        assert_eq!(format_percent(r.token_accuracy), "100.0");
        assert!(r.per_type.iter().all(|t| (t.precision, t.recall, t.f1) == (1.0, 1.0, 1.0)));
    }
}

fn tag_seqs() -> impl Strategy<Value = (Vec<Vec<String>>, Vec<Vec<String>>)> {
    let tag = prop_oneof![
        Just("O".to_string()),
        Just("B-a".to_string()),
        Just("I-a".to_string()),
        Just("B-b".to_string()),
        Just("I-b".to_string()),
    ];
    prop::collection::vec(
        (1usize..8).prop_flat_map(move |n| {
            (
                prop::collection::vec(tag.clone(), n),
                prop::collection::vec(tag.clone(), n),
            )
        }),
        1..6,
    )
    .prop_map(|pairs| pairs.into_iter().unzip())
}

proptest! {
    #[test]
    fn f1_lies_between_precision_and_recall(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
        let f = f1_score(p, r);
        prop_assert!(f >= p.min(r) - 1e-12 && f <= p.max(r) + 1e-12);
        prop_assert_eq!(f == 0.0, p == 0.0 || r == 0.0);
        if p + r > 0.0 {
            prop_assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_ignores_sentence_order((gold, pred) in tag_seqs(), rot in 0usize..6) {
        let a = token_accuracy(&gold, &pred).unwrap();
        let k = rot % gold.len();
        let mut g2 = gold.clone();
        let mut p2 = pred.clone();
        g2.rotate_left(k);
        p2.rotate_left(k);
        prop_assert!((token_accuracy(&g2, &p2).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn true_positives_are_symmetric((gold, pred) in tag_seqs()) {
        for ty in ["a", "b"] {
            let fwd = entity_prf(&gold, &pred, ty).unwrap();
            let back = entity_prf(&pred, &gold, ty).unwrap();
            prop_assert!((fwd.precision - back.recall).abs() < 1e-12);
            prop_assert!((fwd.recall - back.precision).abs() < 1e-12);
            prop_assert!((fwd.f1 - back.f1).abs() < 1e-12);
        }
    }
}
