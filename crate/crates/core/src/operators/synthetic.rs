use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::lakernels::thin_qr;
use crate::random::gaussian_matrix;
use crate::specfun::SpectralFunction;

/// Test spectra of the synthetic benchmark.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumProfile {
    /// `3 - 2(i-1)/(n-1)`.
    Flat { n: usize },
    /// `i^(-exponent)`.
    Poly { n: usize, exponent: f64 },
    /// `rate^(i-1)`.
    Exp { n: usize, rate: f64 },
    /// `high` for the first `head` indices, `low` afterwards.
    Step { n: usize, head: usize, high: f64, low: f64 },
    Explicit(Vec<f64>),
}

impl SpectrumProfile {
    pub fn flat(n: usize) -> Self {
        SpectrumProfile::Flat { n }
    }

    pub fn poly(n: usize) -> Self {
        SpectrumProfile::Poly { n, exponent: 2.0 }
    }

    pub fn exp(n: usize) -> Self {
        SpectrumProfile::Exp { n, rate: 0.9 }
    }

    pub fn step(n: usize) -> Self {
        SpectrumProfile::Step { n, head: 50, high: 1.0, low: 1e-3 }
    }

    /// Profile by name: `flat`, `poly`, `exp` or `step`.
    pub fn named(name: &str, n: usize) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "flat" => Ok(Self::flat(n)),
            "poly" => Ok(Self::poly(n)),
            "exp" => Ok(Self::exp(n)),
            "step" => Ok(Self::step(n)),
            other => Err(Error::invalid(format!("unknown spectrum profile '{other}'"))),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SpectrumProfile::Flat { n }
            | SpectrumProfile::Poly { n, .. }
            | SpectrumProfile::Exp { n, .. }
            | SpectrumProfile::Step { n, .. } => *n,
            SpectrumProfile::Explicit(v) => v.len(),
        }
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.n();
        if n == 0 {
            return Err(Error::invalid("spectrum dimension must be positive"));
        }
        let vals: Vec<f64> = match *self {
            SpectrumProfile::Flat { n } => {
                if n == 1 {
                    vec![3.0]
                } else {
                    (0..n).map(|i| 3.0 - 2.0 * i as f64 / (n - 1) as f64).collect()
                }
            }
            SpectrumProfile::Poly { n, exponent } => {
                if !(exponent > 0.0) {
                    return Err(Error::invalid("polynomial exponent must be positive"));
                }
                (1..=n).map(|i| (i as f64).powf(-exponent)).collect()
            }
            SpectrumProfile::Exp { n, rate } => {
                if !(rate > 0.0 && rate < 1.0) {
                    return Err(Error::invalid("exponential rate must lie in (0, 1)"));
                }
                (0..n).map(|i| rate.powi(i as i32)).collect()
            }
            SpectrumProfile::Step { n, head, high, low } => {
                if !(high >= low && low >= 0.0) {
                    return Err(Error::invalid("step levels must satisfy high >= low >= 0"));
                }
                (0..n).map(|i| if i < head { high } else { low }).collect()
            }
            SpectrumProfile::Explicit(ref v) => {
                if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::invalid("explicit eigenvalues must be finite and non-negative"));
                }
                if v.windows(2).any(|w| w[0] < w[1]) {
                    return Err(Error::invalid("explicit eigenvalues must be non-increasing"));
                }
                v.clone()
            }
        };
        Ok(vals)
    }
}

impl fmt::Display for SpectrumProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumProfile::Flat { n } => write!(f, "flat(n={n})"),
            SpectrumProfile::Poly { n, exponent } => write!(f, "poly(n={n},p={exponent})"),
            SpectrumProfile::Exp { n, rate } => write!(f, "exp(n={n},rate={rate})"),
            SpectrumProfile::Step { n, head, .. } => write!(f, "step(n={n},head={head})"),
            SpectrumProfile::Explicit(v) => write!(f, "explicit(n={})", v.len()),
        }
    }
}

/// Operator with a prescribed spectrum, either `diag(lambda)` or
/// `U diag(lambda) U^T` with a seeded Haar-distributed `U`.
#[derive(Clone, Debug)]
pub struct SyntheticOperator {
    eigenvalues: DVector<f64>,
    rotation: Option<DMatrix<f64>>,
}

impl SyntheticOperator {
    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        self.rotation.as_ref()
    }

    pub fn exact_trace(&self, f: &SpectralFunction) -> Result<f64> {
        f.trace_diag(self.eigenvalues.as_slice())
    }
}

impl LinearOperator for SyntheticOperator {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.rotation {
            None => {
                let mut out = block.clone();
                for mut col in out.column_iter_mut() {
                    col.component_mul_assign(&self.eigenvalues);
                }
                out
            }
            Some(u) => {
                let mut c = u.tr_mul(block);
                for mut col in c.column_iter_mut() {
                    col.component_mul_assign(&self.eigenvalues);
                }
                u * c
            }
        }
    }
}

/// Q factor of a seeded Gaussian square matrix, with `R` sign-fixed.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    thin_qr(&gaussian_matrix(n, n, seed)).0
}

pub fn make_synthetic(profile: &SpectrumProfile, seed: u64, rotated: bool) -> Result<SyntheticOperator> {
    let vals = profile.eigenvalues()?;
    let n = vals.len();
    let rotation = rotated.then(|| random_orthogonal(n, seed));
    Ok(SyntheticOperator { eigenvalues: DVector::from_vec(vals), rotation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::probe_spsd;

    #[test]
    fn profile_values() {
        let flat = SpectrumProfile::flat(4).eigenvalues().unwrap();
        let want = [3.0, 3.0 - 2.0 / 3.0, 3.0 - 4.0 / 3.0, 1.0];
        for (a, b) in flat.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let step = SpectrumProfile::step(100).eigenvalues().unwrap();
        assert!(step[..50].iter().all(|&v| v == 1.0));
        assert!(step[50..].iter().all(|&v| v == 1e-3));
        let exp = SpectrumProfile::exp(3).eigenvalues().unwrap();
        assert_eq!(exp, vec![1.0, 0.9, 0.81]);
        let poly = SpectrumProfile::poly(3).eigenvalues().unwrap();
        assert_eq!(poly, vec![1.0, 0.25, 1.0 / 9.0]);
    }

    #[test]
    fn explicit_diagonal_action() {
        let op = make_synthetic(&SpectrumProfile::Explicit(vec![2.0, 1.0, 0.0]), 0, false).unwrap();
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert_eq!(op.apply(&e1).as_slice(), &[2.0, 0.0, 0.0]);
        assert!(SpectrumProfile::Explicit(vec![1.0, 2.0]).eigenvalues().is_err());
        assert!(SpectrumProfile::Explicit(vec![1.0, -1.0]).eigenvalues().is_err());
    }

    #[test]
    fn rotated_and_plain_share_traces() {
        let p = SpectrumProfile::exp(40);
        let a = make_synthetic(&p, 4, true).unwrap();
        let b = make_synthetic(&p, 4, false).unwrap();
        let f = SpectralFunction::Log1p;
        assert_eq!(a.exact_trace(&f).unwrap(), b.exact_trace(&f).unwrap());
        let dense = super::super::materialize(&a).unwrap();
        assert!((dense.trace() - b.exact_trace(&SpectralFunction::Identity).unwrap()).abs() < 1e-12);
        for op in [&a, &b] {
            let rep = probe_spsd(op, 100, 2);
            assert!(rep.asymmetry <= 1e-10 && rep.min_quadratic >= -1e-10);
        }
    }

    #[test]
    fn rotation_is_orthogonal_and_seeded() {
        let q = random_orthogonal(30, 5);
        assert!((q.transpose() * &q - DMatrix::<f64>::identity(30, 30)).amax() < 1e-13);
        assert_eq!(q, random_orthogonal(30, 5));
    }
}
