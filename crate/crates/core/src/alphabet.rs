use crate::error::{Error, Result};

/// Ordered finite set of color symbols. The order fixes canonical encodings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColorAlphabet {
    symbols: Vec<String>,
}

impl ColorAlphabet {
    pub fn new<S: AsRef<str>>(symbols: &[S]) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Alphabet("empty alphabet".into()));
        }
        if symbols.len() > 255 {
            return Err(Error::Alphabet("more than 255 symbols".into()));
        }
        let mut out: Vec<String> = Vec::with_capacity(symbols.len());
        for s in symbols {
            let s = s.as_ref().trim();
            if s.is_empty() || s.contains(|c: char| c == ',' || c == '#' || c.is_whitespace()) {
                return Err(Error::Alphabet(format!("bad symbol {s:?}")));
            }
            if out.iter().any(|o| o == s) {
                return Err(Error::Alphabet(format!("duplicate symbol {s:?}")));
            }
            out.push(s.to_string());
        }
        Ok(Self { symbols: out })
    }

    /// Alphabet `0, 1, ..., m-1`.
    pub fn numeric(m: usize) -> Self {
        let syms: Vec<String> = (0..m).map(|i| i.to_string()).collect();
        Self::new(&syms).expect("numeric alphabet")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, i: u8) -> &str {
        &self.symbols[i as usize]
    }

    pub fn index_of(&self, s: &str) -> Option<u8> {
        self.symbols.iter().position(|x| x == s).map(|i| i as u8)
    }

    /// Product alphabet `M1 x M2`; the pair `(a, b)` has index `a * |M2| + b`.
    pub fn product(&self, other: &ColorAlphabet) -> Result<ColorAlphabet> {
        let mut syms = Vec::with_capacity(self.len() * other.len());
        for a in &self.symbols {
            for b in &other.symbols {
                syms.push(format!("{a}:{b}"));
            }
        }
        ColorAlphabet::new(&syms)
    }
}
