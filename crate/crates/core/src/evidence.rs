use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Index;

use crate::varset::VarSet;

/// One position of an evidence vector. `Star` marks a marginalized (or, while
/// sampling, not yet sampled) variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Zero,
    One,
    Star,
}

impl Value {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Value::One
        } else {
            Value::Zero
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Value::Zero => '0',
            Value::One => '1',
            Value::Star => '*',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(Value::Zero),
            '1' => Some(Value::One),
            '*' => Some(Value::Star),
            _ => None,
        }
    }

    /// Whether an indicator for `value` is on under this evidence.
    #[inline]
    pub fn admits(self, value: bool) -> bool {
        match self {
            Value::Star => true,
            Value::One => value,
            Value::Zero => !value,
        }
    }
}

/// An assignment in `{0, 1, *}^N`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Evidence {
    values: Vec<Value>,
}

impl Evidence {
    pub fn new(values: Vec<Value>) -> Self {
        Evidence { values }
    }

    pub fn all_star(n: usize) -> Self {
        Evidence {
            values: vec![Value::Star; n],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Evidence {
            values: bits.iter().map(|&b| Value::from_bool(b)).collect(),
        }
    }

    /// Full assignment whose bit `i` is bit `i` of `code`.
    pub fn from_index(n: usize, code: u64) -> Self {
        Evidence {
            values: (0..n).map(|i| Value::from_bool(code >> i & 1 == 1)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn set(&mut self, var: usize, value: Value) {
        self.values[var] = value;
    }

    pub fn has_star(&self) -> bool {
        self.values.contains(&Value::Star)
    }

    pub fn star_set(&self) -> VarSet {
        VarSet::from_iter_with_width(
            self.len(),
            self.values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v == Value::Star)
                .map(|(i, _)| i),
        )
    }

    /// Bit code of a fully observed assignment (inverse of [`Evidence::from_index`]).
    pub fn to_index(&self) -> Option<u64> {
        let mut code = 0u64;
        for (i, v) in self.values.iter().enumerate() {
            match v {
                Value::One => code |= 1 << i,
                Value::Zero => {}
                Value::Star => return None,
            }
        }
        Some(code)
    }
}

impl Index<usize> for Evidence {
    type Output = Value;

    fn index(&self, i: usize) -> &Value {
        &self.values[i]
    }
}

impl fmt::Debug for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.values {
            write!(f, "{}", v.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl From<Vec<Value>> for Evidence {
    fn from(values: Vec<Value>) -> Self {
        Evidence { values }
    }
}
