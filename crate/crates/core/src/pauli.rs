//! Pauli strings with per-site letters. Qubit k corresponds to bit k of basis
//! indices and subset masks.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    pub fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(PauliLetter::I),
            'X' => Ok(PauliLetter::X),
            'Y' => Ok(PauliLetter::Y),
            'Z' => Ok(PauliLetter::Z),
            _ => Err(Error::Parse(format!("bad Pauli letter {c:?}"))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }

    /// (x, z) bits; Y has both.
    pub fn bits(self) -> (bool, bool) {
        match self {
            PauliLetter::I => (false, false),
            PauliLetter::X => (true, false),
            PauliLetter::Y => (true, true),
            PauliLetter::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliLetter::I,
            (true, false) => PauliLetter::X,
            (true, true) => PauliLetter::Y,
            (false, true) => PauliLetter::Z,
        }
    }
}

/// Tensor product of single-qubit Paulis, letter k acting on qubit k.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    letters: Vec<PauliLetter>,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        PauliString { letters: vec![PauliLetter::I; n_qubits] }
    }

    pub fn new(letters: Vec<PauliLetter>) -> Self {
        PauliString { letters }
    }

    pub fn single(n_qubits: usize, site: usize, letter: PauliLetter) -> Result<Self> {
        if site >= n_qubits {
            return Err(Error::SiteOutOfRange { site, n_qubits });
        }
        let mut p = Self::identity(n_qubits);
        p.letters[site] = letter;
        Ok(p)
    }

    /// Builds from x and z bit masks.
    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Self {
        let letters = (0..n_qubits)
            .map(|k| PauliLetter::from_bits(x >> k & 1 == 1, z >> k & 1 == 1))
            .collect();
        PauliString { letters }
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[PauliLetter] {
        &self.letters
    }

    pub fn letter(&self, site: usize) -> PauliLetter {
        self.letters[site]
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&l| l != PauliLetter::I).count()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    pub fn x_mask(&self) -> u64 {
        self.mask(|l| l.bits().0)
    }

    pub fn z_mask(&self) -> u64 {
        self.mask(|l| l.bits().1)
    }

    pub fn support_mask(&self) -> u64 {
        self.mask(|l| l != PauliLetter::I)
    }

    pub fn y_count(&self) -> u32 {
        self.letters.iter().filter(|&&l| l == PauliLetter::Y).count() as u32
    }

    fn mask(&self, f: impl Fn(PauliLetter) -> bool) -> u64 {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &l)| f(l))
            .fold(0u64, |m, (k, _)| m | 1 << k)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s.trim().chars().map(PauliLetter::from_char).collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::Parse("empty Pauli string".into()));
        }
        Ok(PauliString { letters })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_masks() {
        let p: PauliString = "XIYZ".parse().unwrap();
        assert_eq!(p.weight(), 3);
        assert_eq!(p.x_mask(), 0b0101);
        assert_eq!(p.z_mask(), 0b1100);
        assert_eq!(p.support_mask(), 0b1101);
        assert_eq!(PauliString::from_masks(4, p.x_mask(), p.z_mask()), p);
        assert_eq!(p.to_string(), "XIYZ");
        assert!("XQ".parse::<PauliString>().is_err());
    }
}
