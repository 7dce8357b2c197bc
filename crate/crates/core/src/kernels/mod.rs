//! Correlation kernels over mixed and hierarchical design spaces.
//!
//! The correlation between two points is a product of one factor per
//! variable. Quantitative variables contribute `k(θ·g(s))` for a continuous
//! kernel `k`, categorical variables look up a level-correlation matrix, and
//! decreed quantitative variables use a transformed difference `s` (see
//! [`HierarchicalKernel`]).

mod categorical;
mod continuous;
mod hierarchical;

pub use categorical::{
    categorical_corr, hypersphere_c, level_correlation, level_correlation_grad, phi_matrix,
    CategoricalKernel,
};
pub use continuous::{continuous_corr, ContinuousKernel};
pub use hierarchical::{alg_distance, HierarchicalKernel};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design_space::{DesignPoint, DesignSpace, ImputationPolicy, Role, VariableKind};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-13;
pub const THETA_BOUNDS: (f64, f64) = (1e-6, 20.0);
pub const EHH_ANGLE_BOUNDS: (f64, f64) = (1e-8, std::f64::consts::PI - 1e-8);
pub const HH_ANGLE_BOUNDS: (f64, f64) = (1e-8, std::f64::consts::FRAC_PI_2);

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// Kernel selection for a surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub continuous: ContinuousKernel,
    pub categorical: CategoricalKernel,
    pub hierarchical: HierarchicalKernel,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            continuous: ContinuousKernel::SquarExp,
            categorical: CategoricalKernel::ContRelax,
            hierarchical: HierarchicalKernel::Alg,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl KernelConfig {
    pub fn new(
        continuous: ContinuousKernel,
        categorical: CategoricalKernel,
        hierarchical: HierarchicalKernel,
    ) -> Self {
        KernelConfig {
            continuous,
            categorical,
            hierarchical,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// How a hyperparameter is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamScale {
    Log10,
    Linear,
}

/// One hyperparameter slot: owning variable and search box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub var: usize,
    pub scale: ParamScale,
    pub lower: f64,
    pub upper: f64,
}

impl ParamSpec {
    /// Maps a natural value to search coordinates.
    pub fn to_search(&self, value: f64) -> f64 {
        match self.scale {
            ParamScale::Log10 => value.log10(),
            ParamScale::Linear => value,
        }
    }

    pub fn from_search(&self, t: f64) -> f64 {
        match self.scale {
            ParamScale::Log10 => 10f64.powf(t),
            ParamScale::Linear => t,
        }
    }

    pub fn search_bounds(&self) -> (f64, f64) {
        (self.to_search(self.lower), self.to_search(self.upper))
    }

    /// Center of the search box (geometric mean for log-scaled slots).
    pub fn center(&self) -> f64 {
        let (lo, hi) = self.search_bounds();
        self.from_search(0.5 * (lo + hi))
    }
}

/// Flat hyperparameter vector in natural units (θ values, scales, angles),
/// laid out variable by variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterSet {
    pub values: Vec<f64>,
}

impl HyperparameterSet {
    pub fn new(values: Vec<f64>) -> Self {
        HyperparameterSet { values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum QuantMode {
    /// `s = a - b` on (imputed) values.
    Plain,
    /// Transformed difference with unit residual for one-sided activity.
    Hier(HierarchicalKernel),
}

#[derive(Debug, Clone, PartialEq)]
enum FactorKind {
    Quant(QuantMode),
    Cat { levels: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Factor {
    var: usize,
    offset: usize,
    n_params: usize,
    kind: FactorKind,
}

/// A point prepared for kernel evaluation: normalized values with non-acting
/// decreed entries replaced by a fixed imputation, plus the acting mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub x: Vec<f64>,
    pub acting: Vec<bool>,
}

/// Kernel structure of a space under a [`KernelConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel {
    space: DesignSpace,
    config: KernelConfig,
    factors: Vec<Factor>,
    params: Vec<ParamSpec>,
    imputed: Vec<f64>,
}

impl CorrelationModel {
    pub fn new(space: &DesignSpace, config: KernelConfig) -> Result<Self> {
        if !(config.epsilon > 0.0 && config.epsilon < 1.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in (0, 1), got {}",
                config.epsilon
            )));
        }
        let mut factors = Vec::with_capacity(space.n_vars());
        let mut params = Vec::new();
        for (i, var) in space.variables().iter().enumerate() {
            let decreed = space.role(i) == Role::Decreed;
            let offset = params.len();
            let (kind, specs) = match &var.kind {
                VariableKind::Categorical { levels } => {
                    if decreed && config.hierarchical != HierarchicalKernel::Imp {
                        return Err(Error::Unsupported(format!(
                            "categorical decreed variable '{}' requires IMP_KERNEL",
                            var.name
                        )));
                    }
                    let l = levels.len();
                    let (scale, (lower, upper)) = match config.categorical {
                        CategoricalKernel::Gower | CategoricalKernel::ContRelax => {
                            (ParamScale::Log10, THETA_BOUNDS)
                        }
                        CategoricalKernel::ExpHomoHsphere => (ParamScale::Linear, EHH_ANGLE_BOUNDS),
                        CategoricalKernel::HomoHsphere => (ParamScale::Linear, HH_ANGLE_BOUNDS),
                    };
                    let spec = ParamSpec { var: i, scale, lower, upper };
                    (FactorKind::Cat { levels: l }, vec![spec; config.categorical.n_params(l)])
                }
                _ => {
                    let mode = if decreed && config.hierarchical != HierarchicalKernel::Imp {
                        QuantMode::Hier(config.hierarchical)
                    } else {
                        QuantMode::Plain
                    };
                    let spec = ParamSpec {
                        var: i,
                        scale: ParamScale::Log10,
                        lower: THETA_BOUNDS.0,
                        upper: THETA_BOUNDS.1,
                    };
                    (FactorKind::Quant(mode), vec![spec])
                }
            };
            factors.push(Factor {
                var: i,
                offset,
                n_params: specs.len(),
                kind,
            });
            params.extend(specs);
        }
        // fixed stand-in for non-acting entries, in normalized units
        let mean_point = space.impute(
            DesignPoint {
                values: vec![0.0; space.n_vars()],
                acting: vec![false; space.n_vars()],
            },
            ImputationPolicy::Mean,
        );
        let imputed = space.normalize(&mean_point);
        Ok(CorrelationModel {
            space: space.clone(),
            config,
            factors,
            params,
            imputed,
        })
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn config(&self) -> KernelConfig {
        self.config
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.params
    }

    /// Hyperparameters at the center of the search box.
    pub fn center(&self) -> HyperparameterSet {
        HyperparameterSet::new(self.params.iter().map(ParamSpec::center).collect())
    }

    pub fn check_params(&self, hp: &[f64]) -> Result<()> {
        if hp.len() != self.params.len() {
            return Err(Error::HyperparameterCount {
                expected: self.params.len(),
                got: hp.len(),
            });
        }
        if let Some(v) = hp.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite hyperparameter {v}")));
        }
        Ok(())
    }

    /// Prepares a corrected point. Non-acting entries are never read.
    pub fn encode(&self, point: &DesignPoint) -> Result<Encoded> {
        if point.values.len() != self.space.n_vars() || point.acting.len() != self.space.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.space.n_vars(),
                got: point.values.len(),
            });
        }
        let x = self
            .space
            .variables()
            .iter()
            .enumerate()
            .map(|(i, var)| {
                if point.acting[i] {
                    var.normalize_value(point.values[i])
                } else {
                    self.imputed[i]
                }
            })
            .collect();
        Ok(Encoded {
            x,
            acting: point.acting.clone(),
        })
    }

    /// Level-correlation matrices of the categorical factors for `hp`.
    fn level_matrices(&self, hp: &[f64]) -> Result<Vec<Option<DMatrix<f64>>>> {
        self.factors
            .iter()
            .map(|f| match f.kind {
                FactorKind::Cat { levels } => level_correlation(
                    self.config.categorical,
                    &hp[f.offset..f.offset + f.n_params],
                    levels,
                    self.config.epsilon,
                )
                .map(Some),
                FactorKind::Quant(_) => Ok(None),
            })
            .collect()
    }

    fn level_grads(&self, hp: &[f64]) -> Result<Vec<Vec<DMatrix<f64>>>> {
        self.factors
            .iter()
            .map(|f| match f.kind {
                FactorKind::Cat { levels } => level_correlation_grad(
                    self.config.categorical,
                    &hp[f.offset..f.offset + f.n_params],
                    levels,
                    self.config.epsilon,
                ),
                FactorKind::Quant(_) => Ok(Vec::new()),
            })
            .collect()
    }

    /// Hyperparameter-free pair quantity of factor `f`: the base distance for
    /// quantitative factors, the level pair for categorical ones.
    fn pair_term(&self, f: &Factor, a: &Encoded, b: &Encoded) -> PairTerm {
        let i = f.var;
        match f.kind {
            FactorKind::Cat { .. } => PairTerm::Levels(a.x[i] as u32, b.x[i] as u32),
            FactorKind::Quant(QuantMode::Plain) => {
                PairTerm::Dist(self.config.continuous.base_distance(a.x[i] - b.x[i]))
            }
            FactorKind::Quant(QuantMode::Hier(kind)) => {
                let s = match (a.acting[i], b.acting[i]) {
                    (true, true) => kind.signed_difference(a.x[i], b.x[i]),
                    (false, false) => 0.0,
                    _ => 1.0,
                };
                PairTerm::Dist(self.config.continuous.base_distance(s))
            }
        }
    }

    fn factor_value(&self, f: &Factor, term: PairTerm, hp: &[f64], levels: &[Option<DMatrix<f64>>]) -> f64 {
        match term {
            PairTerm::Dist(g) => self.config.continuous.corr(hp[f.offset] * g),
            PairTerm::Levels(r, s) => {
                let k = levels[f.var].as_ref().expect("categorical factor");
                k[(r as usize, s as usize)]
            }
        }
    }

    /// Correlation between two encoded points.
    pub fn corr_encoded(&self, a: &Encoded, b: &Encoded, hp: &[f64]) -> Result<f64> {
        self.check_params(hp)?;
        let levels = self.level_matrices(hp)?;
        Ok(self
            .factors
            .iter()
            .map(|f| self.factor_value(f, self.pair_term(f, a, b), hp, &levels))
            .product())
    }

    /// Full correlation between two corrected points.
    pub fn corr(&self, u: &DesignPoint, v: &DesignPoint, hp: &[f64]) -> Result<f64> {
        self.corr_encoded(&self.encode(u)?, &self.encode(v)?, hp)
    }

    /// Product of the factors of the decreed quantitative variables.
    pub fn decreed_corr(&self, u: &DesignPoint, v: &DesignPoint, hp: &[f64]) -> Result<f64> {
        self.check_params(hp)?;
        let (a, b) = (self.encode(u)?, self.encode(v)?);
        let levels = self.level_matrices(hp)?;
        Ok(self
            .factors
            .iter()
            .filter(|f| self.space.role(f.var) == Role::Decreed && matches!(f.kind, FactorKind::Quant(_)))
            .map(|f| self.factor_value(f, self.pair_term(f, &a, &b), hp, &levels))
            .product())
    }

    /// Precomputes the hyperparameter-independent pair data of a training set.
    pub fn pairs(&self, points: &[Encoded]) -> PairSet {
        let n = points.len();
        let mut terms = Vec::with_capacity(n * n.saturating_sub(1) / 2 * self.factors.len());
        for i in 0..n {
            for j in i + 1..n {
                for f in &self.factors {
                    terms.push(self.pair_term(f, &points[i], &points[j]));
                }
            }
        }
        PairSet { n, terms }
    }

    /// Correlation matrix of a precomputed training set.
    pub fn matrix(&self, pairs: &PairSet, hp: &[f64]) -> Result<DMatrix<f64>> {
        self.check_params(hp)?;
        let levels = self.level_matrices(hp)?;
        let nf = self.factors.len();
        let mut r = DMatrix::identity(pairs.n, pairs.n);
        let mut k = 0;
        for i in 0..pairs.n {
            for j in i + 1..pairs.n {
                let terms = &pairs.terms[k * nf..(k + 1) * nf];
                let v: f64 = self
                    .factors
                    .iter()
                    .zip(terms)
                    .map(|(f, &t)| self.factor_value(f, t, hp, &levels))
                    .product();
                r[(i, j)] = v;
                r[(j, i)] = v;
                k += 1;
            }
        }
        Ok(r)
    }

    /// Visits every `(i<j, parameter, ∂R_ij/∂p)` triple with a nonzero slot.
    fn for_each_grad(
        &self,
        pairs: &PairSet,
        hp: &[f64],
        mut visit: impl FnMut(usize, usize, usize, f64),
    ) -> Result<()> {
        self.check_params(hp)?;
        let levels = self.level_matrices(hp)?;
        let dlevels = self.level_grads(hp)?;
        let nf = self.factors.len();
        let mut values = vec![0.0; nf];
        let mut prefix = vec![1.0; nf + 1];
        let mut suffix = vec![1.0; nf + 1];
        let mut k = 0;
        for i in 0..pairs.n {
            for j in i + 1..pairs.n {
                let terms = &pairs.terms[k * nf..(k + 1) * nf];
                for (q, (f, &t)) in self.factors.iter().zip(terms).enumerate() {
                    values[q] = self.factor_value(f, t, hp, &levels);
                }
                for q in 0..nf {
                    prefix[q + 1] = prefix[q] * values[q];
                }
                for q in (0..nf).rev() {
                    suffix[q] = suffix[q + 1] * values[q];
                }
                for (q, (f, &t)) in self.factors.iter().zip(terms).enumerate() {
                    let others = prefix[q] * suffix[q + 1];
                    match t {
                        PairTerm::Dist(g) => {
                            if g != 0.0 {
                                let d = self.config.continuous.dcorr(hp[f.offset] * g) * g;
                                visit(i, j, f.offset, d * others);
                            }
                        }
                        PairTerm::Levels(r, s) => {
                            if r != s {
                                for (p, dk) in dlevels[f.var].iter().enumerate() {
                                    visit(i, j, f.offset + p, dk[(r as usize, s as usize)] * others);
                                }
                            }
                        }
                    }
                }
                k += 1;
            }
        }
        Ok(())
    }

    /// `∂R/∂p` for every hyperparameter (natural units).
    pub fn matrix_grad(&self, pairs: &PairSet, hp: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let mut grads = vec![DMatrix::zeros(pairs.n, pairs.n); self.params.len()];
        self.for_each_grad(pairs, hp, |i, j, p, d| {
            grads[p][(i, j)] = d;
            grads[p][(j, i)] = d;
        })?;
        Ok(grads)
    }

    /// `Σ_ij W_ij ∂R_ij/∂p` for every hyperparameter, without forming `∂R/∂p`.
    pub fn weighted_grad(&self, pairs: &PairSet, hp: &[f64], w: &DMatrix<f64>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.params.len()];
        self.for_each_grad(pairs, hp, |i, j, p, d| {
            out[p] += (w[(i, j)] + w[(j, i)]) * d;
        })?;
        Ok(out)
    }

    /// Correlations between `x` and each training point.
    pub fn cross(&self, x: &Encoded, train: &[Encoded], hp: &[f64]) -> Result<DVector<f64>> {
        self.check_params(hp)?;
        let levels = self.level_matrices(hp)?;
        Ok(DVector::from_iterator(
            train.len(),
            train.iter().map(|t| {
                self.factors
                    .iter()
                    .map(|f| self.factor_value(f, self.pair_term(f, x, t), hp, &levels))
                    .product::<f64>()
            }),
        ))
    }

    /// Derivative of [`CorrelationModel::cross`] with respect to the
    /// normalized coordinate `var` of `x`. Only float variables qualify.
    pub fn cross_dx(&self, x: &Encoded, train: &[Encoded], hp: &[f64], var: usize) -> Result<DVector<f64>> {
        self.check_params(hp)?;
        let kind = self
            .space
            .variables()
            .get(var)
            .ok_or_else(|| Error::InvalidInput(format!("variable index {var} out of range")))?;
        if !kind.kind.is_float() {
            return Err(Error::Unsupported(format!(
                "derivative with respect to non-float variable '{}'",
                kind.name
            )));
        }
        let cont = self.config.continuous;
        if !cont.input_differentiable() {
            return Err(Error::Unsupported(format!(
                "kernel {} is not differentiable with respect to its inputs",
                cont.name()
            )));
        }
        let levels = self.level_matrices(hp)?;
        let target = &self.factors[var];
        let theta = hp[target.offset];
        let mut out = DVector::zeros(train.len());
        for (k, t) in train.iter().enumerate() {
            let ds_da = match target.kind {
                FactorKind::Quant(QuantMode::Plain) => {
                    if self.space.role(var) == Role::Decreed && !x.acting[var] {
                        0.0
                    } else {
                        1.0
                    }
                }
                FactorKind::Quant(QuantMode::Hier(h)) => {
                    if x.acting[var] && t.acting[var] {
                        h.dsigned_da(x.x[var], t.x[var])
                    } else {
                        0.0
                    }
                }
                FactorKind::Cat { .. } => unreachable!("float variables have quantitative factors"),
            };
            if ds_da == 0.0 {
                continue;
            }
            let s = match target.kind {
                FactorKind::Quant(QuantMode::Hier(h)) => h.signed_difference(x.x[var], t.x[var]),
                _ => x.x[var] - t.x[var],
            };
            let g = cont.base_distance(s);
            let dg = cont.dbase_distance(s).expect("differentiable kernel");
            let dfactor = cont.dcorr(theta * g) * theta * dg * ds_da;
            let others: f64 = self
                .factors
                .iter()
                .filter(|f| f.var != var)
                .map(|f| self.factor_value(f, self.pair_term(f, x, t), hp, &levels))
                .product();
            out[k] = dfactor * others;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PairTerm {
    Dist(f64),
    Levels(u32, u32),
}

/// Hyperparameter-independent data for all pairs `i < j` of a point set.
#[derive(Debug, Clone)]
pub struct PairSet {
    n: usize,
    terms: Vec<PairTerm>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Number of hyperparameters of `space` under `config`.
pub fn count_hyperparameters(space: &DesignSpace, config: KernelConfig) -> Result<usize> {
    Ok(CorrelationModel::new(space, config)?.n_params())
}

/// Count for the arc embedding with a free radius per decreed dimension and
/// the meta dimensions folded into their decreed ones (count comparison only).
pub fn free_radius_arc_count(space: &DesignSpace, config: KernelConfig) -> Result<usize> {
    let base = count_hyperparameters(space, KernelConfig {
        hierarchical: HierarchicalKernel::Arc,
        ..config
    })?;
    let quantitative_meta = (0..space.n_vars())
        .filter(|&i| space.role(i) == Role::Meta && space.variables()[i].kind.is_quantitative())
        .count();
    let decreed = (0..space.n_vars()).filter(|&i| space.role(i) == Role::Decreed).count();
    Ok(base - quantitative_meta + decreed)
}

/// Correlation between two corrected points.
pub fn full_corr(
    space: &DesignSpace,
    config: KernelConfig,
    u: &DesignPoint,
    v: &DesignPoint,
    hp: &HyperparameterSet,
) -> Result<f64> {
    CorrelationModel::new(space, config)?.corr(u, v, &hp.values)
}

/// Correlation matrix of a set of corrected points.
pub fn corr_matrix(
    space: &DesignSpace,
    config: KernelConfig,
    points: &[DesignPoint],
    hp: &HyperparameterSet,
) -> Result<DMatrix<f64>> {
    let model = CorrelationModel::new(space, config)?;
    let encoded = points.iter().map(|p| model.encode(p)).collect::<Result<Vec<_>>>()?;
    model.matrix(&model.pairs(&encoded), &hp.values)
}

/// `∂R/∂p` for every hyperparameter.
pub fn corr_matrix_grad(
    space: &DesignSpace,
    config: KernelConfig,
    points: &[DesignPoint],
    hp: &HyperparameterSet,
) -> Result<Vec<DMatrix<f64>>> {
    let model = CorrelationModel::new(space, config)?;
    let encoded = points.iter().map(|p| model.encode(p)).collect::<Result<Vec<_>>>()?;
    model.matrix_grad(&model.pairs(&encoded), &hp.values)
}
