//! Tab-separated and JSON renderings. Floats carry four decimals.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

use super::{ClusterSummary, CurvePoint, EmojiEffect, GroupEffect, MetricsReport, PatternReport, Projection};
use crate::label::Emotion;

pub fn fixed(x: f64) -> String {
    format!("{x:.4}")
}

fn round4(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            serde_json::Number::from_f64((x * 1e4).round() / 1e4).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round4).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round4(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with every float rounded to four decimals.
pub fn json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    let mut s = serde_json::to_string_pretty(&round4(v)).expect("valid JSON value");
    s.push('\n');
    s
}

pub fn metrics_tsv(r: &MetricsReport) -> String {
    let mut s = String::from("class\tprecision\trecall\tf1\tsupport\n");
    for (i, name) in r.classes.iter().enumerate() {
        let _ = writeln!(
            s,
            "{name}\t{}\t{}\t{}\t{}",
            fixed(r.precision[i]),
            fixed(r.recall[i]),
            fixed(r.f1[i]),
            r.support[i]
        );
    }
    let _ = writeln!(
        s,
        "macro\t{}\t{}\t{}\t{}",
        fixed(r.macro_precision),
        fixed(r.macro_recall),
        fixed(r.macro_f1),
        r.total
    );
    let _ = writeln!(s, "accuracy\t{}", fixed(r.accuracy));
    s.push_str("\ngold\\predicted");
    for name in &r.classes {
        s.push('\t');
        s.push_str(name);
    }
    s.push('\n');
    for (name, row) in r.classes.iter().zip(&r.confusion) {
        s.push_str(name);
        for c in row {
            let _ = write!(s, "\t{c}");
        }
        s.push('\n');
    }
    s
}

pub fn groups_tsv(groups: &[GroupEffect]) -> String {
    let mut s = String::from("group\tpresent\tpresent_accuracy\tabsent\tabsent_accuracy\n");
    for g in groups {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            g.group,
            g.present,
            fixed(g.present_accuracy),
            g.absent,
            fixed(g.absent_accuracy)
        );
    }
    s
}

pub fn emoji_tsv(effects: &[EmojiEffect]) -> String {
    let mut s = String::from("alias\tcount\taccuracy\tstripped_accuracy\tdelta\n");
    for e in effects {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            e.alias,
            e.count,
            fixed(e.accuracy),
            fixed(e.stripped_accuracy),
            fixed(e.delta)
        );
    }
    s
}

pub fn curve_tsv(points: &[CurvePoint]) -> String {
    let mut s = String::from("fraction\texamples\taccuracy\tmacro_f1\n");
    for p in points {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            fixed(p.fraction),
            p.examples,
            fixed(p.accuracy),
            fixed(p.macro_f1)
        );
    }
    s
}

pub fn pattern_tsv(r: &PatternReport) -> String {
    let mut s = String::from("key\tvalue\n");
    let _ = writeln!(s, "pattern_tweets\t{}", r.pattern_tweets);
    for e in Emotion::ALL {
        let _ = writeln!(s, "gold_{}\t{}", e.name(), r.gold_histogram[e.index()]);
    }
    let _ = writeln!(s, "predicted_joy\t{}", r.predicted_joy);
    let _ = writeln!(s, "accuracy\t{}", fixed(r.accuracy));
    if let Some(ClusterSummary {
        cluster,
        cluster_size,
        pattern_in_cluster,
        purity,
        coverage,
    }) = &r.cluster
    {
        let _ = writeln!(s, "cluster\t{cluster}");
        let _ = writeln!(s, "cluster_size\t{cluster_size}");
        let _ = writeln!(s, "pattern_in_cluster\t{pattern_in_cluster}");
        let _ = writeln!(s, "purity\t{}", fixed(*purity));
        let _ = writeln!(s, "coverage\t{}", fixed(*coverage));
    }
    s
}

/// One row per example: its coordinates, then optional label and cluster.
pub fn projection_tsv(p: &Projection, labels: Option<&[Emotion]>, clusters: Option<&[usize]>) -> String {
    let mut s = String::new();
    for j in 0..p.components() {
        let _ = write!(s, "pc{}{}", j + 1, if j + 1 < p.components() { "\t" } else { "" });
    }
    if labels.is_some() {
        s.push_str("\tlabel");
    }
    if clusters.is_some() {
        s.push_str("\tcluster");
    }
    s.push('\n');
    for (i, row) in p.coords.iter().enumerate() {
        s.push_str(&row.iter().map(|&x| fixed(x)).collect::<Vec<_>>().join("\t"));
        if let Some(l) = labels {
            let _ = write!(s, "\t{}", l[i].name());
        }
        if let Some(c) = clusters {
            let _ = write!(s, "\t{}", c[i]);
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_rendering_fixture() {
        let g = GroupEffect {
            group: "emoji".into(),
            present: 4805,
            present_accuracy: 0.766,
            absent: 23952,
            absent_accuracy: 0.680,
        };
        assert_eq!(groups_tsv(&[g]).lines().nth(1).unwrap(), "emoji\t4805\t0.7660\t23952\t0.6800");
    }

    #[test]
    fn emoji_rendering_fixture() {
        let e = EmojiEffect {
            alias: "mask".into(),
            count: 163,
            accuracy: 94.48,
            stripped_accuracy: 82.21,
            delta: 82.21 - 94.48,
        };
        assert_eq!(emoji_tsv(&[e]).lines().nth(1).unwrap(), "mask\t163\t94.4800\t82.2100\t-12.2700");
    }

    #[test]
    fn json_rounds_floats() {
        let j = json(&serde_json::json!({"a": 0.123456, "b": [1, 2.00004], "c": "x"}));
        let v: Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["a"], 0.1235);
        assert_eq!(v["b"][0], 1);
        assert_eq!(v["b"][1], 2.0);
        assert_eq!(v["c"], "x");
    }
}
