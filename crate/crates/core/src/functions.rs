//! Boolean and symbolic-regression function sets.
//!
//! Boolean values are carried as `u64` words so a whole truth table (up to 64
//! rows) can be evaluated in one pass; a single row is just bit 0 of the word.
//! Regression functions are protected: for finite arguments they always return
//! a finite value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Below this magnitude a divisor or logarithm argument is treated as zero.
pub const PROTECTION_EPSILON: f64 = 1e-9;

/// Largest argument passed to `exp`.
pub const EXP_CLAMP: f64 = 700.0;

/// Human-readable summary of the protected-function conventions, embedded in
/// result files.
pub const PROTECTION_CONVENTIONS: &str = "pdiv(a,b)=1 if |b|<1e-9 else a/b; \
     ln(x)=0 if |x|<1e-9 else ln|x|; exp(x)=exp(min(x,700)); \
     add/sub/mul/pdiv results clamped to the finite range";

/// Identity of one of the two function sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionSet {
    /// AND, OR, NAND, NOR.
    Boolean,
    /// ADD, SUB, MUL, PDIV, SIN, COS, LN, EXP.
    Regression,
}

const BOOLEAN_NAMES: [&str; 4] = ["AND", "OR", "NAND", "NOR"];
const REGRESSION_NAMES: [&str; 8] = ["ADD", "SUB", "MUL", "PDIV", "SIN", "COS", "LN", "EXP"];
const REGRESSION_ARITY: [usize; 8] = [2, 2, 2, 2, 1, 1, 1, 1];

impl FunctionSet {
    /// Number of functions in the set.
    pub fn len(self) -> usize {
        match self {
            FunctionSet::Boolean => BOOLEAN_NAMES.len(),
            FunctionSet::Regression => REGRESSION_NAMES.len(),
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    /// Number of arguments `function` consumes.
    ///
    /// Panics if `function` is not in the set.
    pub fn arity(self, function: usize) -> usize {
        match self {
            FunctionSet::Boolean => {
                assert!(function < BOOLEAN_NAMES.len(), "unknown boolean function {function}");
                2
            }
            FunctionSet::Regression => REGRESSION_ARITY[function],
        }
    }

    /// Largest arity of any function in the set.
    pub fn max_arity(self) -> usize {
        2
    }

    pub fn name(self, function: usize) -> &'static str {
        match self {
            FunctionSet::Boolean => BOOLEAN_NAMES[function],
            FunctionSet::Regression => REGRESSION_NAMES[function],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionSet::Boolean => "boolean",
            FunctionSet::Regression => "regression",
        }
    }
}

impl fmt::Display for FunctionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionSet {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "boolean" => Ok(FunctionSet::Boolean),
            "regression" => Ok(FunctionSet::Regression),
            other => Err(ConfigError::UnknownFunctionSet(other.to_string())),
        }
    }
}

/// Bitwise application of a Boolean function to packed truth-table words.
///
/// Panics on an unknown function id or too few arguments.
pub fn apply_boolean(function: usize, args: &[u64]) -> u64 {
    let (a, b) = (args[0], args[1]);
    match function {
        0 => a & b,
        1 => a | b,
        2 => !(a & b),
        3 => !(a | b),
        _ => panic!("unknown boolean function {function}"),
    }
}

/// Application of a protected regression function.
///
/// Panics on an unknown function id or too few arguments.
pub fn apply_regression(function: usize, args: &[f64]) -> f64 {
    let a = args[0];
    match function {
        0 => finite(a + args[1]),
        1 => finite(a - args[1]),
        2 => finite(a * args[1]),
        3 => protected_div(a, args[1]),
        4 => a.sin(),
        5 => a.cos(),
        6 => protected_ln(a),
        7 => a.min(EXP_CLAMP).exp(),
        _ => panic!("unknown regression function {function}"),
    }
}

pub fn protected_div(a: f64, b: f64) -> f64 {
    if b.abs() < PROTECTION_EPSILON {
        1.0
    } else {
        finite(a / b)
    }
}

pub fn protected_ln(x: f64) -> f64 {
    if x.abs() < PROTECTION_EPSILON {
        0.0
    } else {
        x.abs().ln()
    }
}

// Overflow of a finite binary operation saturates instead of producing infinity.
#[inline]
fn finite(x: f64) -> f64 {
    x.clamp(-f64::MAX, f64::MAX)
}

/// A value domain a genome can be evaluated over.
pub trait Value: Copy + PartialEq + fmt::Debug {
    /// The function set this domain belongs to.
    const SET: FunctionSet;

    fn apply(function: usize, args: &[Self]) -> Self;
}

impl Value for u64 {
    const SET: FunctionSet = FunctionSet::Boolean;

    #[inline]
    fn apply(function: usize, args: &[Self]) -> Self {
        apply_boolean(function, args)
    }
}

impl Value for f64 {
    const SET: FunctionSet = FunctionSet::Regression;

    #[inline]
    fn apply(function: usize, args: &[Self]) -> Self {
        apply_regression(function, args)
    }
}
