use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stationary kernels for quantitative dimensions.
///
/// Each kernel is written as a function of a weighted distance `d = θ·g(s)`
/// where `s` is a signed coordinate difference: `g(s) = s²` for `squar_exp`
/// and `g(s) = |s|` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContinuousKernel {
    #[serde(rename = "abs_exp")]
    AbsExp,
    #[serde(rename = "squar_exp")]
    SquarExp,
    #[serde(rename = "matern32")]
    Matern32,
    #[serde(rename = "matern52")]
    Matern52,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;

impl ContinuousKernel {
    pub const ALL: [ContinuousKernel; 4] = [
        ContinuousKernel::AbsExp,
        ContinuousKernel::SquarExp,
        ContinuousKernel::Matern32,
        ContinuousKernel::Matern52,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ContinuousKernel::AbsExp => "abs_exp",
            ContinuousKernel::SquarExp => "squar_exp",
            ContinuousKernel::Matern32 => "matern32",
            ContinuousKernel::Matern52 => "matern52",
        }
    }

    /// Correlation at weighted distance `d >= 0`.
    #[inline]
    pub fn corr(self, d: f64) -> f64 {
        match self {
            ContinuousKernel::AbsExp | ContinuousKernel::SquarExp => (-d).exp(),
            ContinuousKernel::Matern32 => (1.0 + SQRT3 * d) * (-SQRT3 * d).exp(),
            ContinuousKernel::Matern52 => {
                (1.0 + SQRT5 * d + 5.0 / 3.0 * d * d) * (-SQRT5 * d).exp()
            }
        }
    }

    /// Derivative of [`ContinuousKernel::corr`] with respect to `d`.
    #[inline]
    pub fn dcorr(self, d: f64) -> f64 {
        match self {
            ContinuousKernel::AbsExp | ContinuousKernel::SquarExp => -(-d).exp(),
            ContinuousKernel::Matern32 => -3.0 * d * (-SQRT3 * d).exp(),
            ContinuousKernel::Matern52 => {
                -5.0 / 3.0 * d * (1.0 + SQRT5 * d) * (-SQRT5 * d).exp()
            }
        }
    }

    /// Unweighted distance `g(s)`.
    #[inline]
    pub fn base_distance(self, s: f64) -> f64 {
        match self {
            ContinuousKernel::SquarExp => s * s,
            _ => s.abs(),
        }
    }

    /// `dg/ds`, or `None` where the kernel is not differentiable in its input
    /// (`abs_exp` has a cusp at zero).
    pub fn dbase_distance(self, s: f64) -> Option<f64> {
        match self {
            ContinuousKernel::SquarExp => Some(2.0 * s),
            ContinuousKernel::AbsExp => None,
            // the Matérn profiles are flat at d = 0, so sign(0) = 0 is exact
            ContinuousKernel::Matern32 | ContinuousKernel::Matern52 => Some(if s > 0.0 {
                1.0
            } else if s < 0.0 {
                -1.0
            } else {
                0.0
            }),
        }
    }

    pub fn input_differentiable(self) -> bool {
        !matches!(self, ContinuousKernel::AbsExp)
    }
}

impl std::str::FromStr for ContinuousKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ContinuousKernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown continuous kernel '{s}'")))
    }
}

/// Correlation of `kind` at weighted distance `d`.
pub fn continuous_corr(kind: ContinuousKernel, d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::InvalidInput(format!("distance must be nonnegative, got {d}")));
    }
    Ok(kind.corr(d))
}
