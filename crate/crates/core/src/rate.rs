//! Giver-rate functions `f`.
//!
//! An agent holding `n` dollars is picked as a giver at a rate proportional
//! to `f(n)`. Every shipped kind is strictly positive on the integers; table
//! kinds are validated when they are built.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateKind {
    /// `f(n) = c` for every `n`.
    Constant { value: f64 },
    /// `1` for `n <= 1`, `(n - 1) / n` above.
    FStar,
    /// `1` for `|n| <= 1`, `(|n| - 1) / |n|` otherwise.
    FAbs,
    /// `exp(-alpha n)`; unbounded as `n -> -inf`.
    Exponential { alpha: f64 },
    /// Explicit values with a fallback.
    Table {
        values: BTreeMap<i64, f64>,
        default: f64,
    },
}

/// A validated, strictly positive rate function on the integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateKind", into = "RateKind")]
pub struct RateFunction {
    kind: RateKind,
}

impl RateFunction {
    pub fn constant(value: f64) -> Result<Self> {
        check_positive("constant", value)?;
        Ok(Self {
            kind: RateKind::Constant { value },
        })
    }

    /// The unit constant rate (the unbiased model).
    pub fn unit() -> Self {
        Self {
            kind: RateKind::Constant { value: 1.0 },
        }
    }

    pub fn f_star() -> Self {
        Self { kind: RateKind::FStar }
    }

    pub fn f_abs() -> Self {
        Self { kind: RateKind::FAbs }
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        check_positive("exponential alpha", alpha)?;
        Ok(Self {
            kind: RateKind::Exponential { alpha },
        })
    }

    pub fn table(values: BTreeMap<i64, f64>, default: f64) -> Result<Self> {
        check_positive("table default", default)?;
        for (&n, &v) in &values {
            check_positive(&format!("table entry f({n})"), v)?;
        }
        Ok(Self {
            kind: RateKind::Table { values, default },
        })
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    /// Short identifier used in manifests and error messages.
    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn eval(&self, n: i64) -> f64 {
        match &self.kind {
            RateKind::Constant { value } => *value,
            RateKind::FStar => {
                if n <= 1 {
                    1.0
                } else {
                    (n - 1) as f64 / n as f64
                }
            }
            RateKind::FAbs => {
                let m = n.unsigned_abs();
                if m <= 1 {
                    1.0
                } else {
                    (m - 1) as f64 / m as f64
                }
            }
            RateKind::Exponential { alpha } => (-alpha * n as f64).exp(),
            RateKind::Table { values, default } => values.get(&n).copied().unwrap_or(*default),
        }
    }

    /// Exact rational value of `f(n)`.
    ///
    /// Floating-point parameters are converted exactly (every finite `f64` is a
    /// dyadic rational). The exponential kind has no rational values.
    pub fn eval_exact(&self, n: i64) -> Result<BigRational> {
        let exact = match &self.kind {
            RateKind::Constant { value } => float_to_rational(*value),
            RateKind::FStar => {
                if n <= 1 {
                    BigRational::one()
                } else {
                    BigRational::new(BigInt::from(n - 1), BigInt::from(n))
                }
            }
            RateKind::FAbs => {
                let m = BigInt::from(n).abs();
                if m <= BigInt::one() {
                    BigRational::one()
                } else {
                    BigRational::new(&m - 1, m)
                }
            }
            RateKind::Exponential { .. } => {
                return Err(Error::UnsupportedRate {
                    rate: self.name(),
                    reason: "exponential rates have irrational values, exact weights are unavailable"
                        .into(),
                })
            }
            RateKind::Table { values, default } => {
                float_to_rational(values.get(&n).copied().unwrap_or(*default))
            }
        };
        Ok(exact)
    }

    /// Supremum of `f` over all integers, if finite.
    pub fn sup(&self) -> Option<f64> {
        match &self.kind {
            RateKind::Constant { value } => Some(*value),
            RateKind::FStar | RateKind::FAbs => Some(1.0),
            RateKind::Exponential { .. } => None,
            RateKind::Table { values, default } => {
                Some(values.values().copied().fold(*default, f64::max))
            }
        }
    }
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate(format!(
            "{what} must be finite and strictly positive, got {v}"
        )))
    }
}

fn float_to_rational(v: f64) -> BigRational {
    // Only validated finite values reach here.
    BigRational::from_float(v).expect("finite rate value")
}

impl TryFrom<RateKind> for RateFunction {
    type Error = Error;

    fn try_from(kind: RateKind) -> Result<Self> {
        match kind {
            RateKind::Constant { value } => Self::constant(value),
            RateKind::FStar => Ok(Self::f_star()),
            RateKind::FAbs => Ok(Self::f_abs()),
            RateKind::Exponential { alpha } => Self::exponential(alpha),
            RateKind::Table { values, default } => Self::table(values, default),
        }
    }
}

impl From<RateFunction> for RateKind {
    fn from(f: RateFunction) -> Self {
        f.kind
    }
}

impl fmt::Display for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RateKind::Constant { value } if *value == 1.0 => write!(f, "const"),
            RateKind::Constant { value } => write!(f, "const:{value}"),
            RateKind::FStar => write!(f, "fstar"),
            RateKind::FAbs => write!(f, "fabs"),
            RateKind::Exponential { alpha } => write!(f, "exp:{alpha}"),
            RateKind::Table { values, default } => {
                write!(f, "table:")?;
                for (n, v) in values {
                    write!(f, "{n}={v},")?;
                }
                write!(f, "default={default}")
            }
        }
    }
}

/// Parses `fstar`, `fabs`, `const`, `const:<c>`, `exp:<alpha>` and
/// `table:<n>=<v>,...,default=<v>`.
impl FromStr for RateFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::InvalidRate(format!("`{s}` needs a parameter")))?;
            a.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidRate(format!("`{s}`: {e}")))
        };
        match head {
            "fstar" | "f_star" => Ok(Self::f_star()),
            "fabs" | "f_abs" => Ok(Self::f_abs()),
            "const" | "constant" => match arg {
                None => Ok(Self::unit()),
                Some(_) => Self::constant(number(arg)?),
            },
            "exp" | "exponential" => Self::exponential(number(arg)?),
            "table" => {
                let body = arg.ok_or_else(|| Error::InvalidRate("table needs entries".into()))?;
                let mut values = BTreeMap::new();
                let mut default = 1.0;
                for item in body.split(',').filter(|t| !t.trim().is_empty()) {
                    let (k, v) = item
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidRate(format!("bad table entry `{item}`")))?;
                    let v: f64 = v
                        .trim()
                        .parse()
                        .map_err(|e| Error::InvalidRate(format!("bad table value `{item}`: {e}")))?;
                    if k.trim() == "default" {
                        default = v;
                    } else {
                        let k: i64 = k.trim().parse().map_err(|e| {
                            Error::InvalidRate(format!("bad table key `{item}`: {e}"))
                        })?;
                        values.insert(k, v);
                    }
                }
                Self::table(values, default)
            }
            _ => Err(Error::InvalidRate(format!("unknown rate kind `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f_star_values() {
        let f = RateFunction::f_star();
        assert_eq!(f.eval(0), 1.0);
        assert_eq!(f.eval(-7), 1.0);
        assert_eq!(f.eval(1), 1.0);
        assert_eq!(f.eval(2), 0.5);
        assert_eq!(f.eval_exact(4).unwrap(), BigRational::new(3.into(), 4.into()));
    }

    #[test]
    fn f_abs_and_exponential() {
        assert_eq!(RateFunction::f_abs().eval(-3), 2.0 / 3.0);
        assert_eq!(RateFunction::f_abs().eval(-1), 1.0);
        assert_eq!(RateFunction::f_abs().eval(3), 2.0 / 3.0);
        let e = RateFunction::exponential(0.5).unwrap();
        assert!((e.eval(2) - 0.367879).abs() < 1e-6);
        assert!(e.sup().is_none());
        assert!(e.eval_exact(1).is_err());
    }

    #[test]
    fn table_rejects_non_positive_values_at_construction() {
        let mut t = BTreeMap::new();
        t.insert(1, 0.0);
        assert!(matches!(RateFunction::table(t, 1.0), Err(Error::InvalidRate(_))));
        assert!(RateFunction::table(BTreeMap::new(), -1.0).is_err());
        assert!(RateFunction::constant(0.0).is_err());
        assert!(RateFunction::exponential(-0.1).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["fstar", "fabs", "const", "const:2.5", "exp:0.5", "table:-1=1,1=2,default=1"] {
            let f: RateFunction = s.parse().unwrap();
            let again: RateFunction = f.to_string().parse().unwrap();
            assert_eq!(f, again, "{s}");
        }
        assert!("bogus".parse::<RateFunction>().is_err());
        let t: RateFunction = "table:1=2".parse().unwrap();
        assert_eq!(t.eval(1), 2.0);
        assert_eq!(t.eval(5), 1.0);
        assert_eq!(t.sup(), Some(2.0));
    }

    proptest! {
        #[test]
        fn shipped_rates_are_positive_and_bounded(n in -10_000i64..10_000) {
            for f in [RateFunction::f_star(), RateFunction::f_abs(), RateFunction::unit()] {
                let v = f.eval(n);
                prop_assert!(v > 0.0 && v <= 1.0);
            }
            if n <= 1 {
                prop_assert_eq!(RateFunction::f_star().eval(n), 1.0);
            } else {
                prop_assert_eq!(RateFunction::f_star().eval(n), (n - 1) as f64 / n as f64);
            }
        }
    }
}
