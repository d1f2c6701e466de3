use proptest::prelude::*;
use seqlab::corpus::{
    convert_json_corpus, heuristic_pos_tag, parse_any, parse_conll2000, parse_crf_conll, split_corpus, write_conll2000,
    write_crf_conll, Sentence, Token,
};
use seqlab::embeddings::{EmbeddingTable, Vocabulary, UNK};
use seqlab::numerics::Matrix;

const LISTING: &str = "Apple B-vendor\nQuickTime B-application\nbefore B-version\n7.7 I-version\n\
on O\nWindows B-os\nXP I-os\nallows O\nremote O\nattackers O\n\n";

#[test]
fn listing_round_trips() {
    let corpus = parse_conll2000(LISTING).unwrap();
    assert_eq!(corpus.len(), 1);
    assert_eq!(corpus[0].words()[..2], ["Apple", "QuickTime"]);
    assert_eq!(write_conll2000(&corpus), LISTING);
    assert_eq!(parse_any(LISTING).unwrap(), corpus);
}

#[test]
fn json_conversion_round_trips_through_both_layouts() {
    let json = r#"{
        "nvd": [
            {"tokens": ["Apple", "QuickTime", "7.7", "crashes"], "labels": ["B-vendor", "B-application", "B-version", "O"]},
            {"tokens": [], "labels": []}
        ],
        "extra": [{"tokens": ["in", "index.php"], "labels": ["O", "B-file"]}]
    }"#;
    let corpus = convert_json_corpus(json).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(corpus[1].tags(), ["O", "B-file"]);
    let text = write_conll2000(&corpus);
    assert!(text.starts_with("Apple B-vendor\nQuickTime B-application\n"));
    assert_eq!(parse_conll2000(&text).unwrap(), corpus);

    let tagged: Vec<Sentence> = corpus.iter().map(heuristic_pos_tag).collect();
    let four = write_crf_conll(&tagged);
    assert!(four.lines().next().unwrap().starts_with("B-vendor Apple "));
    let back = parse_crf_conll(&four).unwrap();
    assert_eq!(back, tagged);
    assert_eq!(write_crf_conll(&back), four);
}

#[test]
fn bare_words_parse_as_outside() {
    let corpus = parse_any("Apple\nQuickTime\n\nWindows\n").unwrap();
    assert_eq!(corpus.len(), 2);
    assert!(corpus.iter().all(|s| s.tags().iter().all(|t| *t == "O")));
    assert!(parse_any("").unwrap().is_empty());
    assert!(parse_any("a b c\n").is_err());
}

#[test]
fn split_sizes_and_disjointness() {
    let corpus: Vec<Sentence> = (0..10)
        .map(|k| Sentence::from_pairs(&[(format!("w{k}"), "O")]).unwrap())
        .collect();
    let split = split_corpus(&corpus, 42).unwrap();
    assert_eq!((split.train.len(), split.dev.len(), split.test.len()), (7, 1, 2));
    let mut all: Vec<String> = split
        .train
        .iter()
        .chain(&split.dev)
        .chain(&split.test)
        .map(|s| s.words()[0].to_string())
        .collect();
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 10);
    assert_eq!(split_corpus(&corpus, 42).unwrap(), split);
}

fn word() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9.\\-_/]{0,8}"
}

fn tag() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("O".to_string()),
        "(B|I)-(vendor|application|version|os|file)",
    ]
}

fn annotated_token() -> impl Strategy<Value = Token> {
    (word(), tag(), "[A-Z]{2,3}", "(B|I)-(NP|VP|PP)|O")
        .prop_map(|(w, t, p, c)| Token::with_annotations(w, t, p, c).unwrap())
}

fn corpus_of(token: impl Strategy<Value = Token>) -> impl Strategy<Value = Vec<Sentence>> {
    prop::collection::vec(
        prop::collection::vec(token, 1..10).prop_map(|t| Sentence::new(t).unwrap()),
        0..6,
    )
}

fn plain_token() -> impl Strategy<Value = Token> {
    (word(), tag()).prop_map(|(w, t)| Token::new(w, t).unwrap())
}

proptest! {
    #[test]
    fn conll2000_round_trip(corpus in corpus_of(plain_token())) {
        let text = write_conll2000(&corpus);
        let back = parse_conll2000(&text).unwrap();
        prop_assert_eq!(&back, &corpus);
        prop_assert_eq!(write_conll2000(&back), text);
    }

    #[test]
    fn four_column_round_trip(corpus in corpus_of(annotated_token())) {
        let text = write_crf_conll(&corpus);
        let back = parse_crf_conll(&text).unwrap();
        prop_assert_eq!(&back, &corpus);
        prop_assert_eq!(write_crf_conll(&back), text);
    }

    #[test]
    fn json_round_trip(corpus in corpus_of(plain_token())) {
        let entries: Vec<serde_json::Value> = corpus
            .iter()
            .map(|s| serde_json::json!({"tokens": s.words(), "labels": s.tags()}))
            .collect();
        let json = serde_json::json!({ "c": entries }).to_string();
        let converted = convert_json_corpus(&json).unwrap();
        prop_assert_eq!(&converted, &corpus);
        prop_assert_eq!(parse_conll2000(&write_conll2000(&converted)).unwrap(), corpus);
    }

    #[test]
    fn embedding_text_round_trip(
        words in prop::collection::btree_set("[a-z][a-z]{0,6}", 1..8),
        dim in 1usize..5,
        seed in any::<u64>(),
    ) {
        let vocab = Vocabulary::from_words(words.iter(), 1);
        let mut rng = seqlab::numerics::seeded_rng(seed);
        let table = EmbeddingTable::random(vocab, dim, &mut rng).unwrap();
        let text = table.save_text();
        let back = EmbeddingTable::load_text(&text).unwrap();
        prop_assert_eq!(&back, &table);
        prop_assert_eq!(back.save_text(), text);
    }
}

#[test]
fn embedding_text_gains_unk_row() {
    let text = "2 2\napple 1 2\n7.5 0.5 -1\n";
    let table = EmbeddingTable::load_text(text).unwrap();
    assert_eq!(table.vocab().words(), [UNK, "apple", "0.0"]);
    assert_eq!(table.vectors(), &Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap());
    assert_eq!(table.lookup("3.1"), vec![0.5, -1.0]);
    assert!(EmbeddingTable::load_text("3 2\napple 1 2\n").is_err());
}
