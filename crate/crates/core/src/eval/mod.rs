//! Metrics and the analysis battery: presence-group accuracy, per-emoji
//! removal deltas, data-amount curves, PCA and the `un __TRIGGERWORD__`
//! cluster report.

mod cluster;
mod metrics;
mod pca;
pub mod report;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

pub use cluster::{kmeans, kmeans2, Clustering, RESTARTS};
pub use metrics::{accuracy, compute_metrics, f1_score, mean, metrics_from_indices, MetricsReport};
pub use pca::{pca_project, Projection, TOLERANCE};

use crate::dataset::Split;
use crate::error::{invalid, Error, Result};
use crate::label::{Emotion, NUM_CLASSES};
use crate::model::ModelConfig;
use crate::proba::Classifier;
use crate::rng::{stream, Purpose};
use crate::tensor::Tensor;
use crate::tokenizer::{strip_alias, EmojiDatabase, Token, TweetFeatures};
use crate::training::{fit, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Emoji,
    Hashtag,
    UnTrigger,
}

impl Selector {
    pub fn name(self) -> &'static str {
        match self {
            Selector::Emoji => "emoji",
            Selector::Hashtag => "hashtag",
            Selector::UnTrigger => "un_trigger",
        }
    }

    fn matches(self, f: &TweetFeatures) -> bool {
        match self {
            Selector::Emoji => f.has_emoji,
            Selector::Hashtag => f.has_hashtag,
            Selector::UnTrigger => f.has_un_trigger,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupEffect {
    pub group: String,
    pub present: usize,
    pub present_accuracy: f64,
    pub absent: usize,
    pub absent_accuracy: f64,
}

fn check_lengths(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(invalid(format!("{what}: {a} vs {b} entries")));
    }
    Ok(())
}

/// Accuracy inside and outside the group picked by `selector`. An empty
/// side reports accuracy 0.
pub fn group_effect(
    features: &[TweetFeatures],
    gold: &[Emotion],
    predicted: &[Emotion],
    selector: Selector,
) -> Result<GroupEffect> {
    check_lengths("features/gold", features.len(), gold.len())?;
    check_lengths("gold/predicted", gold.len(), predicted.len())?;
    let mut count = [0usize; 2];
    let mut hits = [0usize; 2];
    for ((f, g), p) in features.iter().zip(gold).zip(predicted) {
        let side = usize::from(!selector.matches(f));
        count[side] += 1;
        hits[side] += usize::from(g == p);
    }
    let acc = |s: usize| if count[s] == 0 { 0.0 } else { hits[s] as f64 / count[s] as f64 };
    Ok(GroupEffect {
        group: selector.name().to_string(),
        present: count[0],
        present_accuracy: acc(0),
        absent: count[1],
        absent_accuracy: acc(1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmojiEffect {
    pub alias: String,
    pub count: usize,
    /// Percent.
    pub accuracy: f64,
    /// Percent, after removing the alias and predicting again.
    pub stripped_accuracy: f64,
    /// `stripped_accuracy − accuracy`, percentage points.
    pub delta: f64,
}

/// Re-predicts the tweets containing `alias` with that emoji removed.
pub fn emoji_removal_effect<C: Classifier + ?Sized>(
    classifier: &C,
    docs: &[Vec<Token>],
    gold: &[Emotion],
    alias: &str,
    db: &EmojiDatabase,
) -> Result<EmojiEffect> {
    check_lengths("docs/gold", docs.len(), gold.len())?;
    let mut original = Vec::new();
    let mut stripped = Vec::new();
    let mut labels = Vec::new();
    for (doc, &g) in docs.iter().zip(gold) {
        let without = strip_alias(doc, alias, db);
        if without.len() != doc.len() {
            original.push(doc.clone());
            stripped.push(without);
            labels.push(g);
        }
    }
    if original.is_empty() {
        return Err(invalid(format!("no tweet contains the emoji alias `{alias}`")));
    }
    let before = 100.0 * accuracy(&labels, &classifier.predict(&original)?);
    let after = 100.0 * accuracy(&labels, &classifier.predict(&stripped)?);
    Ok(EmojiEffect {
        alias: alias.to_string(),
        count: original.len(),
        accuracy: before,
        stripped_accuracy: after,
        delta: after - before,
    })
}

/// [`emoji_removal_effect`] for every alias seen in at least `min_count`
/// tweets, in alias order.
pub fn emoji_removal_all<C: Classifier + Sync + ?Sized>(
    classifier: &C,
    docs: &[Vec<Token>],
    gold: &[Emotion],
    features: &[TweetFeatures],
    min_count: usize,
    db: &EmojiDatabase,
) -> Result<Vec<EmojiEffect>> {
    check_lengths("docs/features", docs.len(), features.len())?;
    let mut tweets_per_alias: std::collections::BTreeMap<&str, usize> = Default::default();
    for f in features {
        for alias in f.emoji_aliases.keys() {
            *tweets_per_alias.entry(alias).or_default() += 1;
        }
    }
    let aliases: Vec<&str> = tweets_per_alias
        .into_iter()
        .filter(|&(_, n)| n >= min_count.max(1))
        .map(|(a, _)| a)
        .collect();
    aliases
        .par_iter()
        .map(|a| emoji_removal_effect(classifier, docs, gold, a, db))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub examples: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Nested subsets: one seeded permutation, fraction `f` keeps its first
/// `ceil(f·N)` entries, restored to their original order.
pub fn nested_subsets(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, Purpose::Subsample));
    fractions
        .iter()
        .map(|&f| {
            if !(f > 0.0 && f <= 1.0) {
                return Err(invalid(format!("fraction {f} outside (0, 1]")));
            }
            let take = ((f * n as f64).ceil() as usize).clamp(1, n);
            let mut idx = perm[..take].to_vec();
            idx.sort_unstable();
            Ok(idx)
        })
        .collect()
}

/// One fit per fraction of the training data, scored on `eval`.
pub fn data_amount_curve(
    train: &Split,
    eval: &Split,
    fractions: &[f64],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let subsets = nested_subsets(train.len(), fractions, seed)?;
    subsets
        .par_iter()
        .zip(fractions)
        .map(|(idx, &fraction)| {
            let out = fit(&train.subset(idx), eval, model_cfg, train_cfg, seed)?;
            let report = compute_metrics(&eval.labels, &out.model.predict(&eval.docs)?)?;
            Ok(CurvePoint {
                fraction,
                examples: idx.len(),
                accuracy: report.accuracy,
                macro_f1: report.macro_f1,
            })
        })
        .collect()
}

/// Three-component projection of `vectors` and its 2-means clustering.
pub fn project_and_cluster(vectors: &Tensor<f64>, seed: u64) -> Result<(Projection, Clustering)> {
    let projection = pca_project(vectors, 3)?;
    let clusters = kmeans2(&projection.coords, seed)?;
    Ok((projection, clusters))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    /// The cluster holding the most pattern tweets.
    pub cluster: usize,
    pub cluster_size: usize,
    pub pattern_in_cluster: usize,
    /// Pattern tweets over cluster size.
    pub purity: f64,
    /// Pattern tweets in the cluster over all pattern tweets.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternReport {
    pub pattern_tweets: usize,
    /// Gold labels of the pattern tweets, indexed like [`Emotion::ALL`].
    pub gold_histogram: [usize; NUM_CLASSES],
    pub predicted_joy: usize,
    pub accuracy: f64,
    pub cluster: Option<ClusterSummary>,
}

impl PatternReport {
    pub fn joy(&self) -> usize {
        self.gold_histogram[Emotion::Joy.index()]
    }

    pub fn other(&self) -> usize {
        self.pattern_tweets - self.joy()
    }
}

/// Statistics over tweets flagged `has_un_trigger`; `clusters`, when
/// given, assigns every tweet (not just pattern tweets) to a cluster.
pub fn trigger_pattern_report(
    features: &[TweetFeatures],
    gold: &[Emotion],
    predicted: &[Emotion],
    clusters: Option<&[usize]>,
) -> Result<PatternReport> {
    check_lengths("features/gold", features.len(), gold.len())?;
    check_lengths("gold/predicted", gold.len(), predicted.len())?;
    if let Some(c) = clusters {
        check_lengths("features/clusters", features.len(), c.len())?;
    }
    let pattern: Vec<usize> = (0..features.len()).filter(|&i| features[i].has_un_trigger).collect();
    let mut gold_histogram = [0; NUM_CLASSES];
    for &i in &pattern {
        gold_histogram[gold[i].index()] += 1;
    }
    let predicted_joy = pattern.iter().filter(|&&i| predicted[i] == Emotion::Joy).count();
    let hits = pattern.iter().filter(|&&i| predicted[i] == gold[i]).count();
    let cluster = match clusters {
        Some(c) if !pattern.is_empty() => {
            let ids: BTreeSet<usize> = c.iter().copied().collect();
            let (best, inside) = ids
                .iter()
                .map(|&k| (k, pattern.iter().filter(|&&i| c[i] == k).count()))
                .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
            let size = c.iter().filter(|&&k| k == best).count();
            Some(ClusterSummary {
                cluster: best,
                cluster_size: size,
                pattern_in_cluster: inside,
                purity: inside as f64 / size as f64,
                coverage: inside as f64 / pattern.len() as f64,
            })
        }
        _ => None,
    };
    Ok(PatternReport {
        pattern_tweets: pattern.len(),
        gold_histogram,
        predicted_joy,
        accuracy: if pattern.is_empty() { 0.0 } else { hits as f64 / pattern.len() as f64 },
        cluster,
    })
}

#[cfg(test)]
mod tests;
