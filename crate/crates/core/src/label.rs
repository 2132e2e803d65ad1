use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error};

pub const NUM_CLASSES: usize = 6;

/// The six emotion classes, in the canonical (alphabetical) order used for
/// class indices, confusion matrices and probability columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Joy,
    Sad,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; NUM_CLASSES] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Joy,
        Emotion::Sad,
        Emotion::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sad => "sad",
            Emotion::Surprise => "surprise",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    /// Accepts the canonical names plus `sadness`, which the task data uses.
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "anger" => Ok(Emotion::Anger),
            "disgust" => Ok(Emotion::Disgust),
            "fear" => Ok(Emotion::Fear),
            "joy" => Ok(Emotion::Joy),
            "sad" | "sadness" => Ok(Emotion::Sad),
            "surprise" => Ok(Emotion::Surprise),
            other => Err(invalid(format!("unknown emotion label `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Emotion::ALL {
            assert_eq!(e.name().parse::<Emotion>().unwrap(), e);
            assert_eq!(Emotion::from_index(e.index()), Some(e));
        }
        assert_eq!("sadness".parse::<Emotion>().unwrap(), Emotion::Sad);
        assert!("happy".parse::<Emotion>().is_err());
        assert_eq!(Emotion::from_index(6), None);
    }
}
