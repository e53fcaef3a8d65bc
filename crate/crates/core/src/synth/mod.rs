//! Deterministic desk-scale synthesis oracle: a 7-token transformation
//! alphabet over AIGs, the QoR proxy, a seeded AIG generator and the
//! dataset factory built on top of them.

mod datagen;
mod random;
mod transforms;

pub use datagen::{generate_dataset, DatagenConfig};
pub use random::random_aig;
pub use transforms::{apply_recipe, apply_transform};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aig::{and_count, depth, Aig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformToken {
    /// balance
    B,
    /// rewrite
    Rw,
    /// rewrite -z
    Rwz,
    /// refactor
    Rf,
    /// refactor -z
    Rfz,
    /// resubstitute
    Rs,
    /// resubstitute -z
    Rsz,
}

impl TransformToken {
    pub const ALL: [TransformToken; 7] = [
        TransformToken::B,
        TransformToken::Rw,
        TransformToken::Rwz,
        TransformToken::Rf,
        TransformToken::Rfz,
        TransformToken::Rs,
        TransformToken::Rsz,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn symbol(self) -> &'static str {
        match self {
            TransformToken::B => "b",
            TransformToken::Rw => "rw",
            TransformToken::Rwz => "rwz",
            TransformToken::Rf => "rf",
            TransformToken::Rfz => "rfz",
            TransformToken::Rs => "rs",
            TransformToken::Rsz => "rsz",
        }
    }

    /// Embedding row of the token.
    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }
}

impl fmt::Display for TransformToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for TransformToken {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformToken::ALL
            .iter()
            .copied()
            .find(|t| t.symbol() == s)
            .ok_or_else(|| Error::UnknownToken {
                token: s.to_string(),
                line: None,
            })
    }
}

/// A non-empty sequence of transformations applied left to right.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Recipe(Vec<TransformToken>);

impl Recipe {
    pub fn new(tokens: Vec<TransformToken>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("recipe must contain at least one token".into()));
        }
        Ok(Recipe(tokens))
    }

    pub fn tokens(&self) -> &[TransformToken] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            f.write_str(t.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    /// Parses `;`-separated symbols, e.g. `b;rw;rfz`.
    fn from_str(s: &str) -> Result<Self> {
        let tokens = s
            .split(';')
            .map(|t| t.trim().parse())
            .collect::<Result<Vec<_>>>()?;
        Recipe::new(tokens)
    }
}

/// Toy quality of results: area is the AND count, delay the AND depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoR {
    pub area: f64,
    pub delay: f64,
}

pub fn qor_of(aig: &Aig) -> QoR {
    QoR {
        area: and_count(aig) as f64,
        delay: depth(aig) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::AigBuilder;

    #[test]
    fn alphabet_has_seven_symbols() {
        assert_eq!(TransformToken::COUNT, 7);
        for (i, t) in TransformToken::ALL.iter().enumerate() {
            assert_eq!(t.id(), i);
            assert_eq!(t.symbol().parse::<TransformToken>().unwrap(), *t);
        }
    }

    #[test]
    fn recipe_text_round_trip() {
        let r: Recipe = "b;rw;rfz".parse().unwrap();
        assert_eq!(r.tokens(), &[TransformToken::B, TransformToken::Rw, TransformToken::Rfz]);
        assert_eq!(r.to_string(), "b;rw;rfz");
        assert!("b;mfs".parse::<Recipe>().is_err());
        assert!(Recipe::new(vec![]).is_err());
    }

    #[test]
    fn qor_examples() {
        let empty = AigBuilder::new(2).build();
        assert_eq!(qor_of(&empty), QoR { area: 0.0, delay: 0.0 });

        let mut b = AigBuilder::new(4);
        let x = b.and(b.input(0), b.input(1));
        let single = {
            let mut s = b.clone();
            s.output(x);
            s.build()
        };
        assert_eq!(qor_of(&single), QoR { area: 1.0, delay: 1.0 });
        let y = b.and(x, b.input(2));
        let z = b.and(y, b.input(3));
        b.output(z);
        assert_eq!(qor_of(&b.build()), QoR { area: 3.0, delay: 3.0 });
    }
}
