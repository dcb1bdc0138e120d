use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A source term `u*(x)` given on the command line or in a config:
/// `const:c`, `sin:k[:amp]` for `amp prod_i sin(k pi x_i)`, or
/// `lin:c0,c1` for `c0 + c1 x_1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SourceTerm {
    Const(f64),
    Sine { k: f64, amp: f64 },
    Linear { c0: f64, c1: f64 },
}

impl SourceTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            SourceTerm::Const(c) => c,
            SourceTerm::Sine { k, amp } => amp * x.iter().map(|t| (k * PI * t).sin()).product::<f64>(),
            SourceTerm::Linear { c0, c1 } => c0 + c1 * x[0],
        }
    }
}

fn number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::invalid(format!("source {what} `{s}` is not a finite number")))
}

impl FromStr for SourceTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| Error::invalid(format!("source `{s}` has no `kind:` prefix")))?;
        match kind.trim() {
            "const" => Ok(SourceTerm::Const(number(rest, "value")?)),
            "sin" => {
                let mut parts = rest.split(':');
                let k = number(parts.next().unwrap_or(""), "frequency")?;
                let amp = parts.next().map_or(Ok(1.0), |a| number(a, "amplitude"))?;
                if parts.next().is_some() {
                    return Err(Error::invalid(format!("source `{s}` has too many fields")));
                }
                Ok(SourceTerm::Sine { k, amp })
            }
            "lin" => {
                let (a, b) = rest.split_once(',').ok_or_else(|| Error::invalid(format!("source `{s}` needs `lin:c0,c1`")))?;
                Ok(SourceTerm::Linear {
                    c0: number(a, "offset")?,
                    c1: number(b, "slope")?,
                })
            }
            other => Err(Error::invalid(format!("unknown source kind `{other}`"))),
        }
    }
}

impl fmt::Display for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTerm::Const(c) => write!(f, "const:{c}"),
            SourceTerm::Sine { k, amp } => write!(f, "sin:{k}:{amp}"),
            SourceTerm::Linear { c0, c1 } => write!(f, "lin:{c0},{c1}"),
        }
    }
}

impl TryFrom<String> for SourceTerm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SourceTerm> for String {
    fn from(s: SourceTerm) -> String {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let s: SourceTerm = "const:1".parse().unwrap();
        assert_eq!(s, SourceTerm::Const(1.0));
        assert_eq!(s.eval(&[0.3]), 1.0);
        let t: SourceTerm = "sin:2:0.5".parse().unwrap();
        assert!((t.eval(&[0.25]) - 0.5).abs() < 1e-15);
        let l: SourceTerm = "lin:1,-2".parse().unwrap();
        assert_eq!(l.eval(&[0.5, 9.0]), 0.0);
        for x in [s, t, l] {
            assert_eq!(x.to_string().parse::<SourceTerm>().unwrap(), x);
        }
        assert!("const".parse::<SourceTerm>().is_err());
        assert!("cos:1".parse::<SourceTerm>().is_err());
        assert!("const:nan".parse::<SourceTerm>().is_err());
    }
}
