//! `label<TAB>text` dataset files.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::Emotion;
use crate::tokenizer::{preprocess, EmojiDatabase, Token, TokenizerOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub label: Option<Emotion>,
    pub text: String,
}

impl Record {
    pub fn labeled(label: Emotion, text: impl Into<String>) -> Self {
        Record {
            label: Some(label),
            text: text.into(),
        }
    }
}

/// Whether every line must carry a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labels {
    Required,
    /// A leading `label<TAB>` is used when it parses; otherwise the whole
    /// line is text.
    Optional,
}

pub fn parse(src: &str, path: &Path, labels: Labels) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Data {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let split = line.split_once('\t');
        let record = match (labels, split) {
            (Labels::Required, None) => return Err(err("expected `label<TAB>text`".into())),
            (Labels::Required, Some((l, text))) => Record {
                label: Some(l.trim().parse().map_err(|e| err(format!("{e}")))?),
                text: text.to_string(),
            },
            (Labels::Optional, Some((l, text))) if l.trim().parse::<Emotion>().is_ok() => Record {
                label: l.trim().parse().ok(),
                text: text.to_string(),
            },
            (Labels::Optional, _) => Record {
                label: None,
                text: line.to_string(),
            },
        };
        out.push(record);
    }
    Ok(out)
}

pub fn read(path: &Path, labels: Labels) -> Result<Vec<Record>> {
    let bytes = std::fs::read(path)?;
    let src = String::from_utf8(bytes).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("not UTF-8: {e}"),
    })?;
    parse(&src, path, labels)
}

pub fn render(records: &[Record]) -> String {
    let mut s = String::new();
    for r in records {
        if let Some(l) = r.label {
            s.push_str(l.name());
            s.push('\t');
        }
        s.push_str(&r.text.replace(['\n', '\r'], " "));
        s.push('\n');
    }
    s
}

pub fn write(path: &Path, records: &[Record]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(render(records).as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Tokenized examples with labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub docs: Vec<Vec<Token>>,
    pub labels: Vec<Emotion>,
}

impl Split {
    /// Tokenizes every record; all must be labeled.
    pub fn from_records(records: &[Record], db: &EmojiDatabase) -> Result<Self> {
        let mut split = Split::default();
        for (i, r) in records.iter().enumerate() {
            let label = r
                .label
                .ok_or_else(|| Error::Format {
                    what: "dataset",
                    msg: format!("record {} has no label", i + 1),
                })?;
            split.docs.push(preprocess(&r.text, db, TokenizerOptions::default()));
            split.labels.push(label);
        }
        Ok(split)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn label_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.index()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Split {
        Split {
            docs: indices.iter().map(|&i| self.docs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn required_labels() {
        let p = Path::new("train.tsv");
        let recs = parse("joy\tso [#TRIGGERWORD#] today\n\nsadness\tugh\r\n", p, Labels::Required).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].label, Some(Emotion::Joy));
        assert_eq!(recs[1], Record::labeled(Emotion::Sad, "ugh"));
        match parse("joy\tok\nhappy\tno", p, Labels::Required) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse("no tab here", p, Labels::Required).is_err());
    }

    #[test]
    fn optional_labels() {
        let recs = parse("plain text\nfear\tboo\nnot a label\tx", Path::new("-"), Labels::Optional).unwrap();
        assert_eq!(recs[0].label, None);
        assert_eq!(recs[1].label, Some(Emotion::Fear));
        assert_eq!(recs[2].text, "not a label\tx");
    }

    #[test]
    fn render_round_trip() {
        let recs = vec![Record::labeled(Emotion::Anger, "a b"), Record::labeled(Emotion::Surprise, "😮")];
        assert_eq!(parse(&render(&recs), Path::new("-"), Labels::Required).unwrap(), recs);
    }

    #[test]
    fn split_tokenizes_placeholders() {
        let recs = vec![Record::labeled(Emotion::Joy, "@USERNAME un [#TRIGGERWORD#]")];
        let s = Split::from_records(&recs, EmojiDatabase::bundled()).unwrap();
        let texts: Vec<&str> = s.docs[0].iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["__USERNAME__", "un", "__TRIGGERWORD__"]);
        assert!(Split::from_records(&[Record { label: None, text: "x".into() }], EmojiDatabase::bundled()).is_err());
    }
}
