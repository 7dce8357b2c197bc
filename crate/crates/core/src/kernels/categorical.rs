//! Correlation between the levels of one categorical variable.
//!
//! All four parameterizations share one formula: for two different levels
//! `r != s`,
//!
//! ```text
//! k(r, s) = κ(2 Φ[s, r]) · κ(Φ[r, r]) · κ(Φ[s, s])
//! ```
//!
//! where `Φ` is a symmetric matrix built from the variable's hyperparameters
//! and `κ` is either `exp(-·)` or the identity. Identical levels correlate to
//! exactly 1.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CategoricalKernel {
    /// Gower distance: one θ per variable.
    #[serde(rename = "GOWER")]
    Gower,
    /// Continuous relaxation: one θ per level.
    #[serde(rename = "CONT_RELAX")]
    ContRelax,
    /// Exponential homoscedastic hypersphere: `L(L-1)/2` angles.
    #[serde(rename = "EXP_HOMO_HSPHERE")]
    ExpHomoHsphere,
    /// Homoscedastic hypersphere: `L(L-1)/2` angles.
    #[serde(rename = "HOMO_HSPHERE")]
    HomoHsphere,
}

impl CategoricalKernel {
    pub const ALL: [CategoricalKernel; 4] = [
        CategoricalKernel::Gower,
        CategoricalKernel::ContRelax,
        CategoricalKernel::ExpHomoHsphere,
        CategoricalKernel::HomoHsphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CategoricalKernel::Gower => "GOWER",
            CategoricalKernel::ContRelax => "CONT_RELAX",
            CategoricalKernel::ExpHomoHsphere => "EXP_HOMO_HSPHERE",
            CategoricalKernel::HomoHsphere => "HOMO_HSPHERE",
        }
    }

    /// Number of hyperparameters for a variable with `levels` levels.
    pub fn n_params(self, levels: usize) -> usize {
        match self {
            CategoricalKernel::Gower => 1,
            CategoricalKernel::ContRelax => levels,
            CategoricalKernel::ExpHomoHsphere | CategoricalKernel::HomoHsphere => {
                levels * (levels - 1) / 2
            }
        }
    }

    /// Whether the hyperparameters are hypersphere angles (else positive scales).
    pub fn uses_angles(self) -> bool {
        matches!(
            self,
            CategoricalKernel::ExpHomoHsphere | CategoricalKernel::HomoHsphere
        )
    }

    fn kappa(self, phi: f64) -> f64 {
        match self {
            CategoricalKernel::HomoHsphere => phi,
            _ => (-phi).exp(),
        }
    }
}

impl std::str::FromStr for CategoricalKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim_end_matches("_KERNEL");
        CategoricalKernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown categorical kernel '{s}'")))
    }
}

fn check_count(kind: CategoricalKernel, params: &[f64], levels: usize) -> Result<()> {
    let expected = kind.n_params(levels);
    if params.len() != expected {
        return Err(Error::HyperparameterCount {
            expected,
            got: params.len(),
        });
    }
    Ok(())
}

/// Lower-triangular `L x L` factor whose rows are unit vectors in hypersphere
/// coordinates. Row `j` consumes the angles `j(j-1)/2 .. j(j+1)/2`:
/// `C[j,k] = cos(a_k) ∏_{l<k} sin(a_l)` for `k < j` and `C[j,j] = ∏_{l<j} sin(a_l)`.
pub fn hypersphere_c(angles: &[f64], levels: usize) -> Result<DMatrix<f64>> {
    let expected = levels * levels.saturating_sub(1) / 2;
    if angles.len() != expected {
        return Err(Error::HyperparameterCount {
            expected,
            got: angles.len(),
        });
    }
    let mut c = DMatrix::zeros(levels, levels);
    if levels == 0 {
        return Ok(c);
    }
    c[(0, 0)] = 1.0;
    for j in 1..levels {
        let row = &angles[j * (j - 1) / 2..j * (j + 1) / 2];
        let mut prod = 1.0;
        for (k, a) in row.iter().enumerate() {
            c[(j, k)] = a.cos() * prod;
            prod *= a.sin();
        }
        c[(j, j)] = prod;
    }
    Ok(c)
}

/// Derivative of [`hypersphere_c`] with respect to each angle (one matrix per
/// angle, nonzero only on the angle's row).
fn hypersphere_c_grad(angles: &[f64], levels: usize) -> Vec<DMatrix<f64>> {
    let mut grads = Vec::with_capacity(angles.len());
    for j in 1..levels {
        let row = &angles[j * (j - 1) / 2..j * (j + 1) / 2];
        for m in 0..row.len() {
            let mut g = DMatrix::zeros(levels, levels);
            // prod = ∏_{l<k} (sin a_l, with the m-th factor differentiated once l passes m)
            let mut prod = 1.0;
            for (k, a) in row.iter().enumerate() {
                if k == m {
                    g[(j, k)] = -a.sin() * prod;
                    prod *= a.cos();
                } else {
                    if k > m {
                        g[(j, k)] = a.cos() * prod;
                    }
                    prod *= a.sin();
                }
            }
            g[(j, j)] = prod;
            grads.push(g);
        }
    }
    grads
}

/// The `Φ` matrix of the variable.
pub fn phi_matrix(
    kind: CategoricalKernel,
    params: &[f64],
    levels: usize,
    epsilon: f64,
) -> Result<DMatrix<f64>> {
    check_count(kind, params, levels)?;
    let phi = match kind {
        CategoricalKernel::Gower => DMatrix::from_diagonal_element(levels, levels, 0.5 * params[0]),
        CategoricalKernel::ContRelax => {
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(params))
        }
        CategoricalKernel::ExpHomoHsphere => {
            let c = hypersphere_c(params, levels)?;
            let t = &c * c.transpose();
            DMatrix::from_fn(levels, levels, |r, s| {
                if r == s {
                    0.0
                } else {
                    0.5 * epsilon.ln() * (t[(r, s)] - 1.0)
                }
            })
        }
        CategoricalKernel::HomoHsphere => {
            let c = hypersphere_c(params, levels)?;
            let t = &c * c.transpose();
            DMatrix::from_fn(levels, levels, |r, s| if r == s { 1.0 } else { 0.5 * t[(r, s)] })
        }
    };
    Ok(phi)
}

/// `L x L` matrix of level correlations.
pub fn level_correlation(
    kind: CategoricalKernel,
    params: &[f64],
    levels: usize,
    epsilon: f64,
) -> Result<DMatrix<f64>> {
    let phi = phi_matrix(kind, params, levels, epsilon)?;
    Ok(DMatrix::from_fn(levels, levels, |r, s| {
        if r == s {
            1.0
        } else {
            kind.kappa(2.0 * phi[(s, r)]) * kind.kappa(phi[(r, r)]) * kind.kappa(phi[(s, s)])
        }
    }))
}

/// Derivatives of [`level_correlation`] with respect to each hyperparameter.
pub fn level_correlation_grad(
    kind: CategoricalKernel,
    params: &[f64],
    levels: usize,
    epsilon: f64,
) -> Result<Vec<DMatrix<f64>>> {
    check_count(kind, params, levels)?;
    let off_diag = |f: &dyn Fn(usize, usize) -> f64| {
        DMatrix::from_fn(levels, levels, |r, s| if r == s { 0.0 } else { f(r, s) })
    };
    Ok(match kind {
        CategoricalKernel::Gower => {
            let v = -(-params[0]).exp();
            vec![off_diag(&|_, _| v)]
        }
        CategoricalKernel::ContRelax => {
            let k = level_correlation(kind, params, levels, epsilon)?;
            (0..levels)
                .map(|p| {
                    off_diag(&|r, s| -k[(r, s)] * (f64::from(u8::from(r == p)) + f64::from(u8::from(s == p))))
                })
                .collect()
        }
        CategoricalKernel::ExpHomoHsphere | CategoricalKernel::HomoHsphere => {
            let c = hypersphere_c(params, levels)?;
            let k = level_correlation(kind, params, levels, epsilon)?;
            let scale = -epsilon.ln();
            hypersphere_c_grad(params, levels)
                .into_iter()
                .map(|dc| {
                    let dt = &dc * c.transpose() + &c * dc.transpose();
                    if kind == CategoricalKernel::HomoHsphere {
                        off_diag(&|r, s| dt[(r, s)])
                    } else {
                        off_diag(&|r, s| k[(r, s)] * scale * dt[(r, s)])
                    }
                })
                .collect()
        }
    })
}

/// Correlation between levels `r` and `s` of one categorical variable.
pub fn categorical_corr(
    kind: CategoricalKernel,
    r: usize,
    s: usize,
    params: &[f64],
    levels: usize,
    epsilon: f64,
) -> Result<f64> {
    if r >= levels || s >= levels {
        return Err(Error::InvalidInput(format!(
            "level index out of range ({r}, {s}) for {levels} levels"
        )));
    }
    Ok(level_correlation(kind, params, levels, epsilon)?[(r, s)])
}
