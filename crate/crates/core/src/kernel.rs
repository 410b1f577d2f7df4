//! Kernels and feature-space geometry evaluated through the kernel trick.
//!
//! Nothing here ever materialises a feature vector: norms, distances,
//! cosines and the kernel mean are all expressed in terms of `eval`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sum::{self, NeumaierSum};

/// Round-off allowance for quantities that are non-negative in exact arithmetic.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", try_from = "RawKernel")]
pub enum Kernel {
    /// Identity feature map, `(x, y)`.
    Linear,
    /// `((x, y) + 1)^degree`.
    Polynomial { degree: u32 },
    /// `exp(-|x - y|^2 / (2 sigma^2))`.
    Gaussian { sigma: f64 },
    /// `exp(-alpha |x - y|)`.
    Laplacian { alpha: f64 },
}

// Deserialisation goes through here so parameters are validated on load.
#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum RawKernel {
    Linear,
    Polynomial { degree: u32 },
    Gaussian { sigma: f64 },
    Laplacian { alpha: f64 },
}

impl TryFrom<RawKernel> for Kernel {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Self> {
        match raw {
            RawKernel::Linear => Ok(Kernel::Linear),
            RawKernel::Polynomial { degree } => Kernel::polynomial(degree),
            RawKernel::Gaussian { sigma } => Kernel::gaussian(sigma),
            RawKernel::Laplacian { alpha } => Kernel::laplacian(alpha),
        }
    }
}

impl Kernel {
    pub fn linear() -> Self {
        Kernel::Linear
    }

    pub fn polynomial(degree: u32) -> Result<Self> {
        if degree == 0 {
            return Err(invalid("degree", "polynomial degree must be >= 1"));
        }
        Ok(Kernel::Polynomial { degree })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid(
                "sigma",
                format!("must be positive and finite, got {sigma}"),
            ));
        }
        Ok(Kernel::Gaussian { sigma })
    }

    pub fn laplacian(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(
                "alpha",
                format!("must be positive and finite, got {alpha}"),
            ));
        }
        Ok(Kernel::Laplacian { alpha })
    }

    /// True when the kernel only takes values in `(0, 1]` (Gaussian, Laplacian).
    pub fn is_bounded_positive(&self) -> bool {
        matches!(self, Kernel::Gaussian { .. } | Kernel::Laplacian { .. })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    /// `eval` without the dimension check, for hot loops whose inputs are
    /// already known to agree in length.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => sum::dot(x, y),
            Kernel::Polynomial { degree } => (sum::dot(x, y) + 1.0).powi(degree as i32),
            Kernel::Gaussian { sigma } => (-sum::dist_sq(x, y) / (2.0 * sigma * sigma)).exp(),
            Kernel::Laplacian { alpha } => (-alpha * sum::dist_sq(x, y).sqrt()).exp(),
        }
    }

    /// `|phi(x) - phi(y)|^2 = k(x,x) - 2 k(x,y) + k(y,y)`.
    pub fn feature_distance_sq(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x.len(), y.len())?;
        let v =
            self.eval_unchecked(x, x) - 2.0 * self.eval_unchecked(x, y) + self.eval_unchecked(y, y);
        clamp_nonnegative(v, "feature distance")
    }

    pub fn feature_cosine(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x.len(), y.len())?;
        let kxx = self.eval_unchecked(x, x);
        let kyy = self.eval_unchecked(y, y);
        if kxx <= 0.0 || kyy <= 0.0 {
            return Err(Error::Degenerate(format!(
                "zero self-kernel (k(x,x) = {kxx}, k(y,y) = {kyy})"
            )));
        }
        Ok(self.eval_unchecked(x, y) / (kxx * kyy).sqrt())
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Linear => write!(f, "linear"),
            Kernel::Polynomial { degree } => write!(f, "poly:{degree}"),
            Kernel::Gaussian { sigma } => write!(f, "gauss:{sigma}"),
            Kernel::Laplacian { alpha } => write!(f, "laplace:{alpha}"),
        }
    }
}

/// Parses `linear`, `poly:<m>`, `gauss:<sigma>` or `laplace:<alpha>`.
impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let num = |what: &'static str| -> Result<f64> {
            arg.ok_or_else(|| invalid("kernel", format!("`{name}` needs a {what} argument")))?
                .parse::<f64>()
                .map_err(|e| invalid("kernel", format!("bad {what} in `{s}`: {e}")))
        };
        match name.to_ascii_lowercase().as_str() {
            "linear" | "identity" => match arg {
                None => Ok(Kernel::Linear),
                Some(_) => Err(invalid("kernel", "linear kernel takes no argument")),
            },
            "poly" | "polynomial" => {
                let m = arg
                    .ok_or_else(|| invalid("kernel", "polynomial kernel needs a degree"))?
                    .parse::<u32>()
                    .map_err(|e| invalid("kernel", format!("bad degree in `{s}`: {e}")))?;
                Kernel::polynomial(m)
            }
            "gauss" | "gaussian" | "rbf" => Kernel::gaussian(num("sigma")?),
            "laplace" | "laplacian" => Kernel::laplacian(num("alpha")?),
            other => Err(invalid("kernel", format!("unknown kernel `{other}`"))),
        }
    }
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn clamp_nonnegative(v: f64, what: &'static str) -> Result<f64> {
    if v < -PSD_TOLERANCE || v.is_nan() {
        return Err(Error::NotPsd { what, value: v });
    }
    Ok(v.max(0.0))
}

/// The labelled support set `Z` of a new class together with its Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSample {
    kernel: Kernel,
    points: Vec<Vec<f64>>,
    label: String,
    // row-major k x k
    gram: Vec<f64>,
}

impl SupportSample {
    pub fn new(kernel: Kernel, points: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(invalid(
                "support",
                "support sample must contain at least one point",
            ));
        };
        let n = first.len();
        if n == 0 {
            return Err(invalid(
                "support",
                "support points must have dimension >= 1",
            ));
        }
        for p in &points {
            check_dims(n, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(invalid("support", "support points must be finite"));
            }
        }
        let k = points.len();
        let mut gram = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                let v = kernel.eval_unchecked(&points[i], &points[j]);
                gram[i * k + j] = v;
                gram[j * k + i] = v;
            }
        }
        Ok(Self {
            kernel,
            points,
            label: label.into(),
            gram,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.k() + j]
    }

    pub fn gram_sum(&self) -> f64 {
        sum::sum(self.gram.iter().copied())
    }

    /// Kernel mean score `(1/k) sum_i k(x_i, x)`, the inner product of the
    /// empirical feature mean with `phi(x)`.
    pub fn mean_score(&self, x: &[f64]) -> Result<f64> {
        check_dims(self.dim(), x.len())?;
        let mut acc = NeumaierSum::new();
        for p in &self.points {
            acc.add(self.kernel.eval_unchecked(p, x));
        }
        Ok(acc.value() / self.k() as f64)
    }

    /// `D(Z) = (1/k) sqrt(sum_ij k(x_i, x_j))`, the norm of the empirical feature mean.
    pub fn d_statistic(&self) -> Result<f64> {
        let s = clamp_nonnegative(self.gram_sum(), "Gram sum")?;
        Ok(s.sqrt() / self.k() as f64)
    }
}
