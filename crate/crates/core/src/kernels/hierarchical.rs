//! Distances between decreed values in hierarchical spaces.
//!
//! When a decreed dimension acts in both points, its contribution uses a
//! transformed difference `s(a, b)` in place of `a - b`. When it acts in only
//! one of them the difference is fixed to 1; when it acts in neither it is 0.
//! Both transforms are chords of an embedding of `[0, 1]` on a curve, with a
//! non-acting value sitting at distance 1 from every acting one, so the
//! resulting kernels stay positive semi-definite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HierarchicalKernel {
    /// Algebraic distance `2|a-b| / (√(a²+1)√(b²+1))`.
    #[serde(rename = "ALG_KERNEL")]
    Alg,
    /// Chord length between the points `(sin(πx/2), cos(πx/2))`.
    #[serde(rename = "ARC_KERNEL")]
    Arc,
    /// Plain kernel on mean-imputed values, no residual term.
    #[serde(rename = "IMP_KERNEL")]
    Imp,
}

impl HierarchicalKernel {
    pub const ALL: [HierarchicalKernel; 3] = [
        HierarchicalKernel::Alg,
        HierarchicalKernel::Arc,
        HierarchicalKernel::Imp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HierarchicalKernel::Alg => "ALG_KERNEL",
            HierarchicalKernel::Arc => "ARC_KERNEL",
            HierarchicalKernel::Imp => "IMP_KERNEL",
        }
    }

    /// Signed transformed difference of two acting values.
    #[inline]
    pub fn signed_difference(self, a: f64, b: f64) -> f64 {
        match self {
            HierarchicalKernel::Alg => alg_signed(a, b),
            HierarchicalKernel::Arc => arc_signed(a, b),
            HierarchicalKernel::Imp => a - b,
        }
    }

    /// `∂s/∂a` of [`HierarchicalKernel::signed_difference`].
    #[inline]
    pub fn dsigned_da(self, a: f64, b: f64) -> f64 {
        match self {
            HierarchicalKernel::Alg => {
                2.0 * (1.0 + a * b) / ((a * a + 1.0).powf(1.5) * (b * b + 1.0).sqrt())
            }
            HierarchicalKernel::Arc => {
                std::f64::consts::FRAC_PI_2 * (std::f64::consts::FRAC_PI_4 * (a - b)).cos()
            }
            HierarchicalKernel::Imp => 1.0,
        }
    }
}

impl std::str::FromStr for HierarchicalKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase();
        HierarchicalKernel::ALL
            .into_iter()
            .find(|k| k.name() == upper || k.name().trim_end_matches("_KERNEL") == upper)
            .ok_or_else(|| Error::InvalidInput(format!("unknown hierarchical kernel '{s}'")))
    }
}

fn alg_signed(a: f64, b: f64) -> f64 {
    2.0 * (a - b) / ((a * a + 1.0).sqrt() * (b * b + 1.0).sqrt())
}

fn arc_signed(a: f64, b: f64) -> f64 {
    // |ω(a) - ω(b)| = 2 sin(π|a-b|/4) for ω(x) = (sin(πx/2), cos(πx/2))
    2.0 * (std::f64::consts::FRAC_PI_4 * (a - b)).sin()
}

/// Algebraic distance between two acting decreed values, weighted by `theta`.
pub fn alg_distance(a: f64, b: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!("theta must be positive, got {theta}")));
    }
    Ok(alg_signed(a, b).abs() * theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn algebraic_distance_values() {
        assert!((alg_distance(51.0, 54.0, 1.0).unwrap() - 2.178e-3).abs() < 1e-6);
        assert!((alg_distance(0.2, 0.8, 1.0).unwrap() - 0.919).abs() < 1e-3);
        assert!((alg_distance(0.0, 1.0, 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((alg_distance(0.2, 0.8, 3.0).unwrap() - 3.0 * 0.919).abs() < 3e-3);
        assert!(alg_distance(0.2, 0.8, 0.0).is_err());
    }

    #[test]
    fn arc_matches_explicit_embedding() {
        let omega = |x: f64| {
            let t = std::f64::consts::FRAC_PI_2 * x;
            (t.sin(), t.cos())
        };
        for (a, b) in [(0.0, 1.0), (0.2, 0.8), (0.9, 0.1), (0.5, 0.5)] {
            let (pa, pb) = (omega(a), omega(b));
            let chord = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
            assert!((HierarchicalKernel::Arc.signed_difference(a, b).abs() - chord).abs() < 1e-15);
        }
    }

    #[test]
    fn names_parse() {
        for k in HierarchicalKernel::ALL {
            assert_eq!(k.name().parse::<HierarchicalKernel>().unwrap(), k);
        }
        assert_eq!("alg".parse::<HierarchicalKernel>().unwrap(), HierarchicalKernel::Alg);
        assert!("wedge".parse::<HierarchicalKernel>().is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_zero_iff_equal(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            for k in HierarchicalKernel::ALL {
                let ab = k.signed_difference(a, b);
                let ba = k.signed_difference(b, a);
                prop_assert!((ab + ba).abs() < 1e-15);
                prop_assert_eq!(ab == 0.0, a == b);
            }
        }

        #[test]
        fn derivative_matches_differences(a in 0.05f64..0.95, b in 0.0f64..1.0) {
            let h = 1e-6;
            for k in HierarchicalKernel::ALL {
                let fd = (k.signed_difference(a + h, b) - k.signed_difference(a - h, b)) / (2.0 * h);
                prop_assert!((fd - k.dsigned_da(a, b)).abs() < 1e-8);
            }
        }

        #[test]
        fn bounded_by_unit_residual_triangle(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            // a non-acting value is at distance 1 from every acting one
            for k in [HierarchicalKernel::Alg, HierarchicalKernel::Arc] {
                prop_assert!(k.signed_difference(a, b).abs() <= 2.0 + 1e-12);
            }
        }
    }
}
