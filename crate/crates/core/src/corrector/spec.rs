use serde::{Deserialize, Serialize};

use crate::measure::Alphabet;

use super::{CorrectorError, LabeledPartition, LevelFlags, Tower, Transfer};

/// JSON tower file:
/// `{height, atom_count, alphabet_size, transfer, labels, flags}` where `transfer` is
/// `"identity"` or `"seeded_permutation:<seed>"` and `labels` is either per-level
/// symbol arrays (indexed by atom) or a generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerFile {
    pub height: usize,
    pub atom_count: usize,
    #[serde(default = "binary")]
    pub alphabet_size: usize,
    pub transfer: String,
    pub labels: LabelSpec,
    #[serde(default)]
    pub flags: Option<LevelFlags>,
}

fn binary() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelSpec {
    Levels(Vec<Vec<u8>>),
    Generator(Generator),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum Generator {
    Iid { probs: Vec<f64>, seed: u64 },
    BaseBits {
        bits: u32,
        #[serde(default)]
        flip_rate: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl TowerFile {
    pub fn build(&self) -> Result<(Tower, LabeledPartition), CorrectorError> {
        let transfer: Transfer = self.transfer.parse()?;
        let tower = Tower::new(self.height, self.atom_count, &transfer)?;
        let p = match &self.labels {
            LabelSpec::Levels(levels) => {
                let p = LabeledPartition::new(Alphabet::new(self.alphabet_size)?, levels.clone())?;
                p.check_fits(&tower)?;
                p
            }
            LabelSpec::Generator(Generator::Iid { probs, seed }) => {
                if probs.len() != self.alphabet_size {
                    return Err(CorrectorError::Domain(format!(
                        "labels.probs has {} entries for an alphabet of {}",
                        probs.len(),
                        self.alphabet_size
                    )));
                }
                LabeledPartition::iid(&tower, probs, *seed)?
            }
            LabelSpec::Generator(Generator::BaseBits { bits, flip_rate, seed }) => {
                if self.alphabet_size != 2 {
                    return Err(CorrectorError::Domain("base_bits labels are binary".into()));
                }
                LabeledPartition::base_bits(&tower, *bits, *flip_rate, *seed)?
            }
        };
        if let Some(f) = &self.flags {
            if f.in_e.len() > self.height || f.in_e1.len() > self.height {
                return Err(CorrectorError::Domain("flags are longer than the tower".into()));
            }
        }
        Ok((tower, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_generators_and_arrays() {
        let json = r#"{"height":3,"atom_count":4,"transfer":"seeded_permutation:7",
            "labels":{"generator":"base_bits","bits":2}}"#;
        let f: TowerFile = serde_json::from_str(json).unwrap();
        let (t, p) = f.build().unwrap();
        assert_eq!((t.height(), p.height()), (3, 3));

        let json = r#"{"height":2,"atom_count":2,"transfer":"identity","labels":[[0,1],[1,1]]}"#;
        let f: TowerFile = serde_json::from_str(json).unwrap();
        let (_, p) = f.build().unwrap();
        assert_eq!(p.level(1), &[1, 1]);

        let bad = r#"{"height":2,"atom_count":2,"transfer":"rotate","labels":[[0,1],[1,1]]}"#;
        let f: TowerFile = serde_json::from_str(bad).unwrap();
        assert!(f.build().is_err());
    }
}
