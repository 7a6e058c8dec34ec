use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;

use super::{LinearOperator, DENSE_LIMIT};
use crate::error::{Error, ParseError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    SquaredExponential,
    RationalQuadratic { alpha: f64 },
    Matern32,
    Matern52,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub lengthscale: f64,
    pub output_scale: f64,
    pub noise_variance: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, lengthscale: f64, output_scale: f64, noise_variance: f64) -> Result<Self> {
        let spec = Self { kind, lengthscale, output_scale, noise_variance };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.lengthscale) {
            return Err(Error::invalid("kernel lengthscale must be positive"));
        }
        if !pos(self.output_scale) {
            return Err(Error::invalid("kernel output scale must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid("noise variance must be non-negative"));
        }
        if let KernelKind::RationalQuadratic { alpha } = self.kind {
            if !pos(alpha) {
                return Err(Error::invalid("rational quadratic alpha must be positive"));
            }
        }
        Ok(())
    }

    /// Parses `se:l=0.025`, `rq:l=0.05,alpha=0.25`, `matern32:l=0.1` or
    /// `matern52:l=0.1`, with an optional `,scale=<v>` (default 0.1).
    pub fn parse(text: &str, noise_variance: f64) -> Result<Self> {
        let bad = || Error::invalid(format!("bad kernel spec '{text}'"));
        let (name, params) = text.split_once(':').unwrap_or((text, ""));
        let (mut l, mut alpha, mut scale) = (None, None, 0.1);
        for kv in params.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "l" | "lengthscale" => l = Some(v),
                "alpha" => alpha = Some(v),
                "scale" => scale = v,
                _ => return Err(bad()),
            }
        }
        let kind = match name.trim().to_ascii_lowercase().as_str() {
            "se" | "squared-exponential" => KernelKind::SquaredExponential,
            "rq" | "rational-quadratic" => KernelKind::RationalQuadratic { alpha: alpha.ok_or_else(bad)? },
            "matern32" => KernelKind::Matern32,
            "matern52" => KernelKind::Matern52,
            _ => return Err(bad()),
        };
        Self::new(kind, l.ok_or_else(bad)?, scale, noise_variance)
    }

    /// `outputScale * kappa(r)` at distance `r`.
    pub fn value(&self, r: f64) -> f64 {
        let l = self.lengthscale;
        let k = match self.kind {
            KernelKind::SquaredExponential => (-(r * r) / (2.0 * l * l)).exp(),
            KernelKind::RationalQuadratic { alpha } => (1.0 + r * r / (2.0 * alpha * l * l)).powf(-alpha),
            KernelKind::Matern32 => {
                let t = 3f64.sqrt() * r / l;
                (1.0 + t) * (-t).exp()
            }
            KernelKind::Matern52 => {
                let t = 5f64.sqrt() * r / l;
                (1.0 + t + t * t / 3.0) * (-t).exp()
            }
        };
        self.output_scale * k
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = self.lengthscale;
        let s = self.output_scale;
        match self.kind {
            KernelKind::SquaredExponential => write!(f, "se:l={l},scale={s}"),
            KernelKind::RationalQuadratic { alpha } => write!(f, "rq:l={l},alpha={alpha},scale={s}"),
            KernelKind::Matern32 => write!(f, "matern32:l={l},scale={s}"),
            KernelKind::Matern52 => write!(f, "matern52:l={l},scale={s}"),
        }
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let first = points.first().ok_or_else(|| Error::invalid("kernel needs at least one point"))?;
    let d = first.len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("points must share a positive dimension"));
    }
    if points.len() > DENSE_LIMIT {
        return Err(Error::TooLarge { n: points.len(), limit: DENSE_LIMIT });
    }
    Ok(d)
}

/// Dense `K_ij = outputScale * kappa(|x_i - x_j|)`, filled once per pair.
pub fn kernel_matrix(points: &[Vec<f64>], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_points(points)?;
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = spec.value(0.0);
        for i in j + 1..n {
            let r = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let v = spec.value(r);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `A = K / noiseVariance`, so that
/// `logdet(K + s I) = n log s + tr log(I + A)`.
#[derive(Clone, Debug)]
pub struct KernelOperator {
    scaled: DMatrix<f64>,
    spec: KernelSpec,
}

pub fn build_kernel(points: &[Vec<f64>], spec: &KernelSpec) -> Result<KernelOperator> {
    if spec.noise_variance == 0.0 {
        return Err(Error::invalid("log-determinant path needs a positive noise variance"));
    }
    let k = kernel_matrix(points, spec)?;
    Ok(KernelOperator { scaled: k / spec.noise_variance, spec: *spec })
}

impl KernelOperator {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.scaled
    }

    /// The constant `n log noiseVariance`.
    pub fn logdet_offset(&self) -> f64 {
        self.scaled.nrows() as f64 * self.spec.noise_variance.ln()
    }

    /// `logdet(K + s I)` from a dense Cholesky factorization.
    pub fn exact_logdet(&self) -> Result<f64> {
        let n = self.scaled.nrows();
        let shifted = &self.scaled + DMatrix::<f64>::identity(n, n);
        let chol = shifted
            .cholesky()
            .ok_or_else(|| Error::invalid("kernel matrix plus noise is not positive definite"))?;
        let l = chol.l_dirty();
        let half: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
        Ok(self.logdet_offset() + 2.0 * half)
    }
}

impl LinearOperator for KernelOperator {
    fn dim(&self) -> usize {
        self.scaled.nrows()
    }
    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        &self.scaled * block
    }
}

/// Reads one point per line as comma-separated coordinates. A first line
/// that does not parse as numbers is treated as a header.
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let wrap = |source| Error::Parse { path: path.to_path_buf(), source };
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match parsed {
            Ok(p) => {
                if let Some(first) = points.first() {
                    if first.len() != p.len() {
                        return Err(wrap(ParseError::MalformedEntry {
                            line: idx + 1,
                            reason: format!("expected {} coordinates", first.len()),
                        }));
                    }
                }
                points.push(p);
            }
            Err(_) if idx == 0 => continue,
            Err(_) => {
                return Err(wrap(ParseError::MalformedEntry {
                    line: idx + 1,
                    reason: "coordinates must be numbers".into(),
                }))
            }
        }
    }
    if points.is_empty() {
        return Err(wrap(ParseError::Empty));
    }
    Ok(points)
}
