use seqlab::embeddings::{cosine, pair_loss_and_grad, train_skipgram, SkipGramConfig, SkipGramTrainer};
use seqlab::numerics::relative_error;
use seqlab::synthetic::two_class_corpus;

/// Mean cosine over unordered pairs within each class, and across classes.
fn class_separation(table: &seqlab::embeddings::EmbeddingTable, a: &[String], b: &[String]) -> (f64, f64) {
    let vec = |w: &String| table.lookup(w);
    let mut within = Vec::new();
    for class in [a, b] {
        for i in 0..class.len() {
            for j in i + 1..class.len() {
                within.push(cosine(&vec(&class[i]), &vec(&class[j])).unwrap());
            }
        }
    }
    let mut between = Vec::new();
    for x in a {
        for y in b {
            between.push(cosine(&vec(x), &vec(y)).unwrap());
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&within), mean(&between))
}

#[test]
fn two_classes_separate_after_five_epochs() {
    let (corpus, a, b) = two_class_corpus(2000, 42);
    let table = train_skipgram(&corpus, SkipGramConfig::default()).unwrap();
    let (within, between) = class_separation(&table, &a, &b);
    assert!(within - between >= 0.2, "within {within} between {between}");
}

#[test]
fn objective_falls_between_first_and_fifth_epoch() {
    let (corpus, _, _) = two_class_corpus(100, 1);
    let mut trainer = SkipGramTrainer::new(&corpus, SkipGramConfig::default()).unwrap();
    let sample = trainer.frozen_examples(99);
    let mut losses = Vec::new();
    for _ in 0..5 {
        trainer.train_epoch();
        losses.push(trainer.model().objective(&sample));
    }
    assert!(losses[4] < losses[0], "{losses:?}");
}

#[test]
fn training_is_deterministic() {
    let (corpus, _, _) = two_class_corpus(100, 3);
    let config = SkipGramConfig {
        dim: 6,
        epochs: 2,
        ..SkipGramConfig::default()
    };
    let a = train_skipgram(&corpus, config.clone()).unwrap().save_text();
    let b = train_skipgram(&corpus, config).unwrap().save_text();
    assert_eq!(a, b);
}

#[test]
fn pair_gradient_matches_central_differences() {
    let u = vec![0.3, -0.2, 0.5];
    let v = vec![-0.1, 0.4, 0.2];
    let n1 = vec![0.7, 0.1, -0.3];
    let n2 = vec![-0.5, -0.6, 0.05];
    let g = pair_loss_and_grad(&u, &v, &[&n1, &n2]);
    let loss = |u: &[f64], v: &[f64], n1: &[f64]| pair_loss_and_grad(u, v, &[n1, &n2]).loss;
    let eps = 1e-6;
    for k in 0..3 {
        let bump = |x: &[f64], s: f64| {
            let mut y = x.to_vec();
            y[k] += s;
            y
        };
        let du = (loss(&bump(&u, eps), &v, &n1) - loss(&bump(&u, -eps), &v, &n1)) / (2.0 * eps);
        let dv = (loss(&u, &bump(&v, eps), &n1) - loss(&u, &bump(&v, -eps), &n1)) / (2.0 * eps);
        let dn = (loss(&u, &v, &bump(&n1, eps)) - loss(&u, &v, &bump(&n1, -eps))) / (2.0 * eps);
        assert!(relative_error(g.center[k], du) < 1e-5);
        assert!(relative_error(g.context[k], dv) < 1e-5);
        assert!(relative_error(g.negatives[0][k], dn) < 1e-5);
    }
}
