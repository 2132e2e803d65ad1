use super::*;
use crate::proba::ProbabilityMatrix;
use crate::tokenizer::{extract_features, tokenize, TokenKind};

fn db() -> &'static EmojiDatabase {
    EmojiDatabase::bundled()
}

fn feats(has_emoji: bool, has_hashtag: bool) -> TweetFeatures {
    TweetFeatures {
        has_emoji,
        has_hashtag,
        ..TweetFeatures::default()
    }
}

#[test]
fn group_counts_match_enumeration() {
    let flags = [
        (true, false),
        (true, true),
        (false, false),
        (false, true),
        (true, false),
        (false, false),
        (false, false),
        (true, true),
        (false, true),
        (false, false),
    ];
    let features: Vec<TweetFeatures> = flags.iter().map(|&(e, h)| feats(e, h)).collect();
    let gold: Vec<Emotion> = (0..10).map(|i| Emotion::ALL[i % 6]).collect();
    let predicted: Vec<Emotion> = (0..10).map(|i| if i % 3 == 0 { Emotion::Joy } else { Emotion::ALL[i % 6] }).collect();
    for sel in [Selector::Emoji, Selector::Hashtag] {
        let g = group_effect(&features, &gold, &predicted, sel).unwrap();
        let member = |i: usize| if sel == Selector::Emoji { flags[i].0 } else { flags[i].1 };
        let inside: Vec<usize> = (0..10).filter(|&i| member(i)).collect();
        let outside: Vec<usize> = (0..10).filter(|&i| !member(i)).collect();
        let acc = |set: &[usize]| set.iter().filter(|&&i| gold[i] == predicted[i]).count() as f64 / set.len() as f64;
        assert_eq!(g.present, inside.len());
        assert_eq!(g.absent, outside.len());
        assert_eq!(g.present + g.absent, 10);
        assert_eq!(g.present_accuracy, acc(&inside));
        assert_eq!(g.absent_accuracy, acc(&outside));
    }
    let all = group_effect(&features, &gold, &gold, Selector::Emoji).unwrap();
    assert_eq!((all.present_accuracy, all.absent_accuracy), (1.0, 1.0));
    assert!(group_effect(&features[..3], &gold, &predicted, Selector::Emoji).is_err());
}

/// Predicts fear whenever a 😷 token is present, anger otherwise.
struct MaskKeyed;

impl Classifier for MaskKeyed {
    fn predict_proba(&self, docs: &[Vec<Token>]) -> Result<ProbabilityMatrix> {
        let mut data = Vec::new();
        for d in docs {
            let mut row = [0.0; NUM_CLASSES];
            let masked = d.iter().any(|t| t.kind == TokenKind::Emoji && t.text == "😷");
            row[if masked { Emotion::Fear } else { Emotion::Anger }.index()] = 1.0;
            data.extend(row);
        }
        ProbabilityMatrix::new("mask-keyed", data)
    }
}

#[test]
fn removal_effect_drops_to_majority_accuracy() {
    let mut docs = Vec::new();
    let mut gold = Vec::new();
    for i in 0..10 {
        docs.push(tokenize(&format!("tweet {i} 😷"), db()));
        gold.push(if i < 7 { Emotion::Fear } else { Emotion::Anger });
    }
    docs.push(tokenize("no emoji here 😭", db()));
    gold.push(Emotion::Sad);
    let e = emoji_removal_effect(&MaskKeyed, &docs, &gold, "mask", db()).unwrap();
    assert_eq!(e.count, 10);
    assert!((e.accuracy - 70.0).abs() < 1e-12);
    assert!((e.stripped_accuracy - 30.0).abs() < 1e-12);
    assert!((e.delta + 40.0).abs() < 1e-12);
    assert!(emoji_removal_effect(&MaskKeyed, &docs, &gold, "thumbsup", db()).is_err());

    let features: Vec<TweetFeatures> = docs.iter().map(|d| extract_features(d, db())).collect();
    let all = emoji_removal_all(&MaskKeyed, &docs, &gold, &features, 1, db()).unwrap();
    let aliases: Vec<&str> = all.iter().map(|e| e.alias.as_str()).collect();
    assert_eq!(aliases, ["mask", "sob"]);
    assert_eq!(all[1].delta, 0.0);
}

#[test]
fn stripping_an_absent_alias_is_identity() {
    let docs = vec![tokenize("happy 😂 day", db()), tokenize("plain", db())];
    for d in &docs {
        assert_eq!(&strip_alias(d, "mask", db()), d);
    }
    let m = crate::model::Model::<f32>::new(
        crate::model::ModelConfig::toy(),
        None,
        &mut stream(1, Purpose::Init),
    )
    .unwrap();
    let stripped: Vec<Vec<Token>> = docs.iter().map(|d| strip_alias(d, "mask", db())).collect();
    assert_eq!(m.predict_proba(&docs).unwrap(), m.predict_proba(&stripped).unwrap());
}

#[test]
fn subsets_are_nested() {
    let fr = [0.1, 0.25, 0.5, 1.0];
    let subs = nested_subsets(97, &fr, 4).unwrap();
    assert_eq!(subs.iter().map(Vec::len).collect::<Vec<_>>(), [10, 25, 49, 97]);
    for w in subs.windows(2) {
        assert!(w[0].iter().all(|i| w[1].contains(i)));
    }
    assert_eq!(subs[3], (0..97).collect::<Vec<_>>());
    assert!(nested_subsets(10, &[0.0], 1).is_err());
    assert!(nested_subsets(10, &[1.5], 1).is_err());
}

fn separable(n: usize, seed: u64) -> Split {
    use rand::Rng as _;
    let mut rng = stream(seed, Purpose::Data);
    let mut s = Split::default();
    for i in 0..n {
        let label = Emotion::ALL[i % 6];
        let noise = ["so", "the", "it", "day"][rng.random_range(0..4)];
        s.docs.push(vec![Token::word(noise), Token::word(format!("w{}", label.name()))]);
        s.labels.push(label);
    }
    s
}

#[test]
fn data_amount_curve_rows_and_full_fraction() {
    let train = separable(60, 1);
    let eval = separable(30, 2);
    let cfg = TrainConfig {
        epochs: 12,
        batch_size: 8,
        lr_max: 0.03,
        ..TrainConfig::default()
    };
    let model = ModelConfig::toy();
    let curve = data_amount_curve(&train, &eval, &[0.1, 0.5, 1.0], &model, &cfg, 3).unwrap();
    assert_eq!(curve.len(), 3);
    assert_eq!(curve[0].examples, 6);
    let plain = fit(&train, &eval, &model, &cfg, 3).unwrap();
    let direct = compute_metrics(&eval.labels, &plain.model.predict(&eval.docs).unwrap()).unwrap();
    assert_eq!(curve[2].accuracy, direct.accuracy);
    assert_eq!(curve[2].macro_f1, direct.macro_f1);
    assert!(curve[2].accuracy >= curve[0].accuracy);
}

#[test]
fn pattern_histogram_and_empty_report() {
    let mut features = Vec::new();
    let mut gold = Vec::new();
    for i in 0..14 {
        let mut f = TweetFeatures::default();
        f.has_un_trigger = i < 10;
        features.push(f);
        gold.push(if i < 9 { Emotion::Joy } else { Emotion::Anger });
    }
    let predicted = vec![Emotion::Joy; 14];
    let clusters: Vec<usize> = (0..14).map(|i| usize::from(i >= 10 || i == 0)).collect();
    let r = trigger_pattern_report(&features, &gold, &predicted, Some(&clusters)).unwrap();
    assert_eq!(r.pattern_tweets, 10);
    assert_eq!((r.joy(), r.other()), (9, 1));
    assert_eq!(r.predicted_joy, 10);
    assert!((r.accuracy - 0.9).abs() < 1e-15);
    let c = r.cluster.unwrap();
    assert_eq!((c.cluster, c.pattern_in_cluster, c.cluster_size), (0, 9, 9));
    assert_eq!(c.purity, 1.0);
    assert!((c.coverage - 0.9).abs() < 1e-15);

    let none = vec![TweetFeatures::default(); 3];
    let r = trigger_pattern_report(&none, &gold[..3], &predicted[..3], Some(&clusters[..3])).unwrap();
    assert_eq!(r.pattern_tweets, 0);
    assert_eq!(r.cluster, None);
    assert_eq!(r.gold_histogram, [0; 6]);
}
