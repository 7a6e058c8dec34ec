//! Closed-form bias and mean squared error bounds, evaluated from an
//! explicit non-increasing eigenvalue list.

use crate::error::{Error, Result};
use crate::specfun::SpectralFunction;

/// Trailing eigenvalues `lambda_j, ..., lambda_n` (1-based cut `j`).
#[derive(Clone, Debug, PartialEq)]
pub struct TailSpectrum {
    eigvals: Vec<f64>,
    n: usize,
}

impl TailSpectrum {
    /// Tail of `spectrum` starting at 1-based index `j >= 1`. Cuts past the
    /// end give an empty tail.
    pub fn cut(spectrum: &[f64], j: usize) -> Result<Self> {
        if j == 0 {
            return Err(Error::invalid("tail cut index is 1-based"));
        }
        if spectrum.windows(2).any(|w| w[0] < w[1]) || spectrum.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("spectrum must be non-increasing and non-negative"));
        }
        let start = (j - 1).min(spectrum.len());
        Ok(Self { eigvals: spectrum[start..].to_vec(), n: spectrum.len() })
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn source_dim(&self) -> usize {
        self.n
    }

    fn spectral(&self) -> f64 {
        self.eigvals.first().copied().unwrap_or(0.0)
    }

    fn nuclear(&self) -> f64 {
        self.eigvals.iter().sum()
    }

    fn sqrt_nuclear(&self) -> f64 {
        self.eigvals.iter().map(|v| v.sqrt()).sum()
    }

    /// `f` applied to the tail, or to its square root.
    fn mapped(&self, f: &SpectralFunction, root: bool) -> Vec<f64> {
        self.eigvals
            .iter()
            .map(|&v| f.value(if root { v.sqrt() } else { v }))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    Frobenius,
    Nuclear,
}

fn squared_norm(v: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::Frobenius => v.iter().map(|x| x * x).sum(),
        Norm::Nuclear => v.iter().map(|x| x.abs()).sum::<f64>().powi(2),
    }
}

fn require_k(k: usize, floor: usize) -> Result<()> {
    if k < floor {
        return Err(Error::invalid(format!("bound needs k >= {floor}, got {k}")));
    }
    Ok(())
}

/// `16(k-4)(k-2)/3 |D|_2 + 16 e^4 k^2 / 125 (|D^(1/2)|_*^2 + 2|D|_*) + 2`.
pub fn gamma(tail: &TailSpectrum, k: usize) -> Result<f64> {
    require_k(k, 4)?;
    let kf = k as f64;
    let e4 = 4f64.exp();
    Ok(16.0 * (kf - 4.0) * (kf - 2.0) / 3.0 * tail.spectral()
        + 16.0 * e4 * kf * kf / 125.0 * (tail.sqrt_nuclear().powi(2) + 2.0 * tail.nuclear())
        + 2.0)
}

/// Second-moment bound on `|||f(A) - f(A_nys)|||^2` for the given norm,
/// with `tail` the cut at `k - 3`.
pub fn funnys_error_bound(tail: &TailSpectrum, f: &SpectralFunction, k: usize, norm: Norm) -> Result<f64> {
    require_k(k, 4)?;
    Ok(2.0 * squared_norm(&tail.mapped(f, false), norm)
        + gamma(tail, k)? * squared_norm(&tail.mapped(f, true), norm))
}

/// `(k-3) sum f(lambda_j)` over the tail cut at `k - 2`.
pub fn bias_bound_ft(tail: &TailSpectrum, f: &SpectralFunction, k: usize) -> Result<f64> {
    require_k(k, 4)?;
    Ok((k as f64 - 3.0) * tail.mapped(f, false).iter().sum::<f64>())
}

/// MSE bounds; `None` below each estimator's floor on `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseBounds {
    pub ift: Option<f64>,
    pub ft: Option<f64>,
    pub fn_: Option<f64>,
}

pub fn mse_bounds(spectrum: &[f64], f: &SpectralFunction, k: usize) -> Result<MseBounds> {
    let ift = if k >= 6 {
        let t = TailSpectrum::cut(spectrum, k - 5)?;
        let kf = k as f64;
        Some(
            (kf + 1.0) / kf
                * (4.0 * squared_norm(&t.mapped(f, false), Norm::Frobenius)
                    + 2.0 * gamma(&t, k - 2)? * squared_norm(&t.mapped(f, true), Norm::Frobenius)),
        )
    } else {
        None
    };
    let ft = if k >= 5 {
        let t = TailSpectrum::cut(spectrum, k - 4)?;
        let plain = t.mapped(f, false);
        let root = t.mapped(f, true);
        Some(
            4.0 * (squared_norm(&plain, Norm::Frobenius) + squared_norm(&plain, Norm::Nuclear))
                + 2.0
                    * gamma(&t, k - 1)?
                    * (squared_norm(&root, Norm::Frobenius) + squared_norm(&root, Norm::Nuclear)),
        )
    } else {
        None
    };
    let fn_ = if k >= 4 {
        Some(funnys_error_bound(&TailSpectrum::cut(spectrum, k - 3)?, f, k, Norm::Nuclear)?)
    } else {
        None
    };
    Ok(MseBounds { ift, ft, fn_ })
}

/// Fourth moments of the pseudoinverse of an `r x k` standard Gaussian
/// matrix with `rho = k - r >= 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianMoments {
    pub schatten4: f64,
    pub frobenius4: f64,
    pub spectral4_upper: f64,
}

pub fn gaussian_moment_formulas(r: usize, k: usize) -> Result<GaussianMoments> {
    if k < r + 4 {
        return Err(Error::invalid(format!("need k - r >= 4, got r = {r}, k = {k}")));
    }
    let (r, k) = (r as f64, k as f64);
    let rho = k - r;
    let den = rho * (rho - 1.0) * (rho - 3.0);
    Ok(GaussianMoments {
        schatten4: r * (k - 1.0) / den,
        frobenius4: (r * r * rho - 2.0 * r * (r - 1.0)) / den,
        spectral4_upper: 4f64.exp() * k * k / ((rho + 1.0).powi(3) * (rho - 3.0)),
    })
}
