use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Sequence of 1-based mode indices, each applied for one period.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pattern(pub Vec<usize>);

impl Pattern {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn modes(&self) -> &[usize] {
        &self.0
    }

    pub fn extended(&self, mode: usize) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(mode);
        Self(v)
    }
}

impl Deref for Pattern {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Pattern {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Modes joined by `-`, e.g. `1-2-2`. The empty pattern prints as `()`.
impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("()");
        }
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "()" || s.is_empty() {
            return Ok(Self::empty());
        }
        s.split('-')
            .map(|t| match t.trim().parse::<usize>() {
                Ok(m) if m >= 1 => Ok(m),
                _ => Err(format!("invalid mode '{t}' in pattern '{s}'")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}
