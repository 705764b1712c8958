use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An opaque alphabet symbol. JSON numbers stay numbers, strings stay strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Symbol {
    Number(serde_json::Number),
    Text(String),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Number(n) => write!(f, "{n}"),
            Symbol::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::Text(s.to_owned())
    }
}

impl From<u64> for Symbol {
    fn from(v: u64) -> Self {
        Symbol::Number(v.into())
    }
}

impl From<f64> for Symbol {
    fn from(v: f64) -> Self {
        serde_json::Number::from_f64(v)
            .map(Symbol::Number)
            .unwrap_or_else(|| Symbol::Text(v.to_string()))
    }
}

/// A finite, ordered set of distinct symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Symbol>", into = "Vec<Symbol>")]
pub struct Alphabet {
    symbols: Vec<Symbol>,
}

impl Alphabet {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidInput("alphabet must be non-empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &symbols {
            if !seen.insert(s.to_string()) {
                return Err(Error::InvalidInput(format!("duplicate alphabet symbol {s}")));
            }
        }
        Ok(Self { symbols })
    }

    /// The alphabet `{0, 1, ..., k-1}`.
    pub fn indexed(k: usize) -> Self {
        assert!(k >= 1, "alphabet size must be positive");
        Self {
            symbols: (0..k as u64).map(Symbol::from).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Option<&Symbol> {
        self.symbols.get(index)
    }

    pub fn index_of(&self, symbol: &Symbol) -> Option<usize> {
        let key = symbol.to_string();
        self.symbols.iter().position(|s| s.to_string() == key)
    }
}

impl TryFrom<Vec<Symbol>> for Alphabet {
    type Error = Error;

    fn try_from(symbols: Vec<Symbol>) -> Result<Self> {
        Alphabet::new(symbols)
    }
}

impl From<Alphabet> for Vec<Symbol> {
    fn from(a: Alphabet) -> Self {
        a.symbols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(Alphabet::new(vec![]).is_err());
        assert!(Alphabet::new(vec!["a".into(), "a".into()]).is_err());
        // numeric 1 and text "1" print identically
        assert!(Alphabet::new(vec![1u64.into(), "1".into()]).is_err());
    }

    #[test]
    fn json_keeps_symbol_kinds() {
        let a: Alphabet = serde_json::from_str(r#"[0, 0.5, "x"]"#).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.symbol(1).unwrap().to_string(), "0.5");
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"[0,0.5,"x"]"#);
        assert_eq!(a.index_of(&"x".into()), Some(2));
    }
}
