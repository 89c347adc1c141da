use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::Error;

/// Fixed-length bitstring, most significant bit first. Lengths up to 64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    len: u32,
    value: u64,
}

impl Bits {
    pub fn new(value: u64, len: u32) -> Bits {
        assert!(len <= 64, "bitstrings are limited to 64 bits");
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        Bits {
            len,
            value: value & mask,
        }
    }

    pub fn zeros(len: u32) -> Bits {
        Bits::new(0, len)
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.value as usize
    }

    /// Bit `i`, counted from the most significant end.
    pub fn bit(&self, i: u32) -> bool {
        assert!(i < self.len);
        (self.value >> (self.len - 1 - i)) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Bits) -> Bits {
        Bits::new((self.value << other.len) | other.value, self.len + other.len)
    }

    /// Bits `start..start+len`, counted from the most significant end.
    pub fn slice(&self, start: u32, len: u32) -> Bits {
        assert!(start + len <= self.len);
        Bits::new(self.value >> (self.len - start - len), len)
    }

    pub fn all(len: u32) -> impl Iterator<Item = Bits> {
        assert!(len < 32, "enumeration limited to short strings");
        (0..(1u64 << len)).map(move |v| Bits::new(v, len))
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Bits, Error> {
        if s.len() > 64 {
            return Err(Error::InvalidParameter(format!("bitstring `{s}` too long")));
        }
        let mut value = 0u64;
        for c in s.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidParameter(format!("bad bitstring `{s}`"))),
                };
        }
        Ok(Bits::new(value, s.len() as u32))
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_roundtrip() {
        let b: Bits = "0110".parse().unwrap();
        assert_eq!(b.value(), 6);
        assert_eq!(b.to_string(), "0110");
        assert!(b.bit(1) && !b.bit(0));
    }

    #[test]
    fn concat_and_slice() {
        let a: Bits = "10".parse().unwrap();
        let b: Bits = "011".parse().unwrap();
        let c = a.concat(&b);
        assert_eq!(c.to_string(), "10011");
        assert_eq!(c.slice(2, 3), b);
        assert_eq!(c.slice(0, 2), a);
    }
}
