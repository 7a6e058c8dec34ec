//! Spectral functions `f` with `f(0) = 0` that are operator monotone on
//! `[0, inf)`, plus a flagged escape hatch for functions outside that class.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Relative tolerance below zero that is still clamped to zero before `f`
/// is applied.
pub const CLAMP_RELATIVE: f64 = 1e-12;

#[derive(Clone, Copy)]
pub struct CustomFunction {
    pub name: &'static str,
    pub func: fn(f64) -> f64,
}

impl fmt::Debug for CustomFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomFunction({})", self.name)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum SpectralFunction {
    Identity,
    Log1p,
    Sqrt,
    /// `x^p` with `p` in `(0, 1]`.
    Power(f64),
    /// `x / (x + zeta)` with `zeta > 0`.
    Ratio(f64),
    /// Arbitrary map with `f(0) = 0`. Not covered by any of the guarantees.
    UnsafeCustom(CustomFunction),
}

impl SpectralFunction {
    pub fn power(p: f64) -> Result<Self> {
        let f = SpectralFunction::Power(p);
        f.validate()?;
        Ok(f)
    }

    pub fn ratio(zeta: f64) -> Result<Self> {
        let f = SpectralFunction::Ratio(zeta);
        f.validate()?;
        Ok(f)
    }

    pub fn unsafe_custom(name: &'static str, func: fn(f64) -> f64) -> Self {
        SpectralFunction::UnsafeCustom(CustomFunction { name, func })
    }

    /// The square map used by the quadratic-exactness experiments.
    pub fn square() -> Self {
        Self::unsafe_custom("square", |x| x * x)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralFunction::Power(p) if !(p > 0.0 && p <= 1.0) => {
                Err(Error::invalid(format!("power exponent must lie in (0, 1], got {p}")))
            }
            SpectralFunction::Ratio(z) if !(z > 0.0 && z.is_finite()) => {
                Err(Error::invalid(format!("ratio parameter must be positive, got {z}")))
            }
            SpectralFunction::UnsafeCustom(c) if (c.func)(0.0) != 0.0 => {
                Err(Error::invalid(format!("custom function {} has f(0) != 0", c.name)))
            }
            _ => Ok(()),
        }
    }

    /// True for members of the operator monotone class the bounds cover.
    pub fn is_operator_monotone(&self) -> bool {
        !matches!(self, SpectralFunction::UnsafeCustom(_))
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, SpectralFunction::Identity)
            || matches!(self, SpectralFunction::Power(p) if *p == 1.0)
    }

    /// Raw map on `x >= 0`. Callers are responsible for clamping.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            SpectralFunction::Identity => x,
            SpectralFunction::Log1p => x.ln_1p(),
            SpectralFunction::Sqrt => x.sqrt(),
            SpectralFunction::Power(p) => {
                if x == 0.0 {
                    0.0
                } else {
                    x.powf(p)
                }
            }
            SpectralFunction::Ratio(z) => x / (x + z),
            SpectralFunction::UnsafeCustom(c) => (c.func)(x),
        }
    }

    /// Evaluates `f(x)` with the clamp tolerance scaled to 1.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.eval_scaled(x, 1.0)
    }

    /// Evaluates `f(x)`, clamping `x` in `[-1e-12 * scale, 0)` to zero.
    pub fn eval_scaled(&self, x: f64, scale: f64) -> Result<f64> {
        Ok(self.value(clamp(self, x, scale)?))
    }

    /// `sum_i f(lambda_i)`, accumulated from the largest term down.
    pub fn trace_diag(&self, eigvals: &[f64]) -> Result<f64> {
        if eigvals.is_empty() {
            return Err(Error::invalid("eigenvalue list is empty"));
        }
        let scale = eigvals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let mut terms = eigvals
            .iter()
            .map(|&x| self.eval_scaled(x, scale))
            .collect::<Result<Vec<_>>>()?;
        terms.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        Ok(terms.iter().sum())
    }
}

/// Free-function form of [`SpectralFunction::trace_diag`].
pub fn trace_f_diag(f: &SpectralFunction, eigvals: &[f64]) -> Result<f64> {
    f.trace_diag(eigvals)
}

pub(crate) fn clamp(f: &SpectralFunction, x: f64, scale: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -CLAMP_RELATIVE * scale {
        Ok(0.0)
    } else {
        Err(Error::Domain { function: f.to_string(), x })
    }
}

impl fmt::Display for SpectralFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralFunction::Identity => write!(f, "identity"),
            SpectralFunction::Log1p => write!(f, "log1p"),
            SpectralFunction::Sqrt => write!(f, "sqrt"),
            SpectralFunction::Power(p) => write!(f, "power:p={p}"),
            SpectralFunction::Ratio(z) => write!(f, "ratio:zeta={z}"),
            SpectralFunction::UnsafeCustom(c) => write!(f, "unsafe-custom:{}", c.name),
        }
    }
}

impl FromStr for SpectralFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let param = |prefix: &str| -> Result<f64> {
            s[prefix.len()..]
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad parameter in function spec '{s}'")))
        };
        let f = match s {
            "identity" => SpectralFunction::Identity,
            "log1p" => SpectralFunction::Log1p,
            "sqrt" => SpectralFunction::Sqrt,
            "unsafe-custom:square" => SpectralFunction::square(),
            _ if s.starts_with("power:p=") => SpectralFunction::Power(param("power:p=")?),
            _ if s.starts_with("ratio:zeta=") => SpectralFunction::Ratio(param("ratio:zeta=")?),
            _ => return Err(Error::invalid(format!("unknown function spec '{s}'"))),
        };
        f.validate()?;
        Ok(f)
    }
}
