//! Ablation sweeps: one fit per override of a shared base configuration,
//! all with the same seed, tabulated as deltas against the base run.
//!
//! A sweep file holds ordinary configuration lines for the base run plus
//! two extra keys:
//!
//! ```text
//! epochs = 5
//! override = lstm_hidden=32
//! override = optimizer=sgd, sgd_lr=0.1
//! dropout_grid = 0.0, 0.25, 0.5
//! ```
//!
//! `dropout_grid` expands to one override per (row, column) pair: the row
//! value sets `dropout_word` and `dropout_fc`, the column value sets
//! `dropout_sentence`.

use std::collections::BTreeSet;
use std::fmt::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{at_line, parse_lines, RunConfig};
use crate::dataset::Split;
use crate::error::{Error, Result};
use crate::eval::compute_metrics;
use crate::eval::report::fixed;
use crate::proba::Classifier;
use crate::training::fit;

#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub settings: Vec<(String, String)>,
}

impl Override {
    /// `key=value` pairs separated by commas.
    pub fn parse(text: &str) -> Result<Self> {
        let mut settings = Vec::new();
        for part in text.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{part}`: expected `key=value`")))?;
            let k = k.trim();
            if !RunConfig::is_known_key(k) {
                return Err(Error::Config(format!("override: unknown key `{k}`")));
            }
            settings.push((k.to_string(), v.trim().to_string()));
        }
        Ok(Override { settings })
    }

    pub fn name(&self) -> String {
        self.settings
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn apply(&self, base: &RunConfig) -> Result<RunConfig> {
        let mut cfg = base.clone();
        for (k, v) in &self.settings {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub overrides: Vec<Override>,
}

/// Row-major 3×3 style grid over the given dropout values.
pub fn dropout_grid(values: &[f64]) -> Vec<Override> {
    let mut out = Vec::new();
    for &row in values {
        for &col in values {
            out.push(Override {
                settings: vec![
                    ("dropout_word".into(), row.to_string()),
                    ("dropout_fc".into(), row.to_string()),
                    ("dropout_sentence".into(), col.to_string()),
                ],
            });
        }
    }
    out
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_onto(RunConfig::default(), text)
    }

    /// Applies the base lines of `text` on top of `base`.
    pub fn parse_onto(mut base: RunConfig, text: &str) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut overrides = Vec::new();
        for (line, k, v) in parse_lines(text)? {
            let at = |e: Error| at_line(line, e);
            match k.as_str() {
                "override" => overrides.push(Override::parse(&v).map_err(at)?),
                "dropout_grid" => {
                    let values = v
                        .split(',')
                        .map(|x| crate::config::parse_value::<f64>("dropout_grid", x))
                        .collect::<Result<Vec<_>>>()
                        .map_err(at)?;
                    overrides.extend(dropout_grid(&values));
                }
                _ => {
                    if !seen.insert(k.clone()) {
                        return Err(Error::Config(format!("line {line}: duplicate key `{k}`")));
                    }
                    base.set(&k, &v).map_err(at)?;
                }
            }
        }
        base.validate()?;
        for o in &overrides {
            o.apply(&base)?;
        }
        Ok(SweepSpec { base, overrides })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub name: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub delta_accuracy: f64,
    pub delta_macro_f1: f64,
}

/// The base run first, then one row per override in spec order.
pub fn run_sweep(spec: &SweepSpec, train: &Split, val: &Split, seed: u64) -> Result<Vec<SweepRow>> {
    let mut runs = vec![("base".to_string(), spec.base.clone())];
    for o in &spec.overrides {
        runs.push((o.name(), o.apply(&spec.base)?));
    }
    let scores = runs
        .par_iter()
        .map(|(_, cfg)| {
            let out = fit(train, val, &cfg.model, &cfg.train, seed)?;
            let r = compute_metrics(&val.labels, &out.model.predict(&val.docs)?)?;
            Ok((r.accuracy, r.macro_f1))
        })
        .collect::<Result<Vec<_>>>()?;
    let (acc0, f10) = scores[0];
    Ok(runs
        .into_iter()
        .zip(scores)
        .map(|((name, _), (accuracy, macro_f1))| SweepRow {
            name,
            accuracy,
            macro_f1,
            delta_accuracy: accuracy - acc0,
            delta_macro_f1: macro_f1 - f10,
        })
        .collect())
}

pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let mut s = String::from("run\taccuracy\tdelta_accuracy\tmacro_f1\tdelta_macro_f1\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            r.name,
            fixed(r.accuracy),
            fixed(r.delta_accuracy),
            fixed(r.macro_f1),
            fixed(r.delta_macro_f1)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};
    use crate::tokenizer::EmojiDatabase;

    fn splits() -> (Split, Split) {
        let spec = SynthSpec {
            examples: 90,
            cue_rate: 1.0,
            ..SynthSpec::default()
        };
        let all = Split::from_records(&generate(&spec, 4).unwrap(), EmojiDatabase::bundled()).unwrap();
        (all.subset(&(0..60).collect::<Vec<_>>()), all.subset(&(60..90).collect::<Vec<_>>()))
    }

    const BASE: &str = "word_dim = 8\nlstm_hidden = 8\nfc_hidden = 8\nchar_emb_dim = 4\ncnn_filters = 1:4,2:4\nepochs = 2\nbatch_size = 16\n";

    #[test]
    fn grid_expands_to_nine_rows() {
        let spec = SweepSpec::parse(&format!("{BASE}dropout_grid = 0.0, 0.25, 0.5\n")).unwrap();
        assert_eq!(spec.overrides.len(), 9);
        let cfg = spec.overrides[5].apply(&spec.base).unwrap();
        assert_eq!(cfg.model.dropout_word, 0.25);
        assert_eq!(cfg.model.dropout_fc, 0.25);
        assert_eq!(cfg.model.dropout_sentence, 0.5);
    }

    #[test]
    fn parse_errors() {
        assert!(SweepSpec::parse("override = hidden=3").is_err());
        assert!(SweepSpec::parse("override = lstm_hidden").is_err());
        assert!(SweepSpec::parse("override = dropout_word=1.5").is_err());
        assert!(SweepSpec::parse("epochs = 2\nepochs = 3").is_err());
        assert!(SweepSpec::parse("dropout_grid = 0.1, x").is_err());
        let s = SweepSpec::parse("override = optimizer=sgd, sgd_lr=0.1").unwrap();
        assert_eq!(s.overrides[0].name(), "optimizer=sgd,sgd_lr=0.1");
    }

    #[test]
    fn base_only_and_duplicate_base_have_zero_delta() {
        let (train, val) = splits();
        let spec = SweepSpec::parse(BASE).unwrap();
        let rows = run_sweep(&spec, &train, &val, 3).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].delta_accuracy, rows[0].delta_macro_f1), (0.0, 0.0));

        let spec = SweepSpec::parse(&format!("{BASE}override = epochs=2\noverride = lstm_hidden=4\n")).unwrap();
        let rows = run_sweep(&spec, &train, &val, 3).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].accuracy, rows[0].accuracy);
        assert_eq!((rows[1].delta_accuracy, rows[1].delta_macro_f1), (0.0, 0.0));
        assert_eq!(sweep_tsv(&rows).lines().count(), 4);
    }
}
