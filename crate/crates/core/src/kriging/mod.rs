//! Ordinary Kriging with maximum-likelihood hyperparameters.
//!
//! Inputs are corrected, encoded by the kernel layer and normalized to the
//! unit box; outputs are standardized. The trend is a constant and the
//! process variance is concentrated out of the likelihood.

mod optimizer;

pub use optimizer::{minimize_box, Minimum};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::design_space::{DesignPoint, DesignSpace, VariableKind};
use crate::error::{Error, Result};
use crate::kernels::{CorrelationModel, Encoded, KernelConfig, PairSet};
use crate::sampling::{sample, SamplerConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_NUGGET: f64 = 1e-10;
pub const MAX_NUGGET: f64 = 1e-6;
const SIGMA2_FLOOR: f64 = 1e-300;

fn default_nugget() -> f64 {
    DEFAULT_NUGGET
}
fn default_starts() -> usize {
    10
}
fn default_evals() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrigingConfig {
    #[serde(flatten)]
    pub kernel: KernelConfig,
    #[serde(default = "default_nugget")]
    pub nugget: f64,
    #[serde(default = "default_starts")]
    pub n_starts: usize,
    /// Objective evaluations per start.
    #[serde(default = "default_evals")]
    pub max_evals: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for KrigingConfig {
    fn default() -> Self {
        KrigingConfig {
            kernel: KernelConfig::default(),
            nugget: DEFAULT_NUGGET,
            n_starts: default_starts(),
            max_evals: default_evals(),
            seed: 0,
        }
    }
}

impl KrigingConfig {
    pub fn with_kernel(kernel: KernelConfig) -> Self {
        KrigingConfig {
            kernel,
            ..KrigingConfig::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(Error::InvalidInput(format!("nugget must be nonnegative, got {}", self.nugget)));
        }
        if self.n_starts == 0 || self.max_evals == 0 {
            return Err(Error::InvalidInput("n_starts and max_evals must be positive".into()));
        }
        Ok(())
    }
}

/// Factorization of `R + nugget·I` and the quantities derived from it.
#[derive(Debug, Clone)]
struct Fit {
    chol: Cholesky<f64, Dyn>,
    nugget: f64,
    beta: f64,
    sigma2: f64,
    /// `(R + νI)⁻¹ (y - β)`
    alpha: DVector<f64>,
    /// `L⁻¹ 1`
    l_inv_ones: DVector<f64>,
    ones_r_ones: f64,
    log_det: f64,
}

fn factorize(r: &DMatrix<f64>, nugget: f64, escalate: bool) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = r.nrows();
    let mut nu = nugget;
    loop {
        let mut m = r.clone();
        for i in 0..n {
            m[(i, i)] += nu;
        }
        if let Some(chol) = Cholesky::new(m) {
            // numerically zero pivots mean a singular matrix
            let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, d| a.min(d * d));
            if min_pivot > 1e-15 {
                return Ok((chol, nu));
            }
        }
        if !escalate || nu <= 0.0 || nu * 10.0 > MAX_NUGGET * (1.0 + 1e-9) {
            return Err(Error::Cholesky { nugget: nu });
        }
        nu *= 10.0;
    }
}

fn fit(r: &DMatrix<f64>, y: &DVector<f64>, nugget: f64, escalate: bool) -> Result<Fit> {
    let n = y.len();
    let (chol, nugget) = factorize(r, nugget, escalate)?;
    let ones = DVector::from_element(n, 1.0);
    let l = chol.l();
    let l_inv_ones = l
        .solve_lower_triangular(&ones)
        .ok_or(Error::Cholesky { nugget })?;
    let l_inv_y = l.solve_lower_triangular(y).ok_or(Error::Cholesky { nugget })?;
    let ones_r_ones = l_inv_ones.dot(&l_inv_ones);
    let beta = l_inv_ones.dot(&l_inv_y) / ones_r_ones;
    let resid = y - DVector::from_element(n, beta);
    let alpha = chol.solve(&resid);
    let sigma2 = (resid.dot(&alpha) / n as f64).max(0.0);
    let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !(beta.is_finite() && sigma2.is_finite() && log_det.is_finite()) {
        return Err(Error::Cholesky { nugget });
    }
    Ok(Fit {
        chol,
        nugget,
        beta,
        sigma2,
        alpha,
        l_inv_ones,
        ones_r_ones,
        log_det,
    })
}

/// Concentrated negative log-likelihood of a training set, as a function of
/// the hyperparameters (natural units).
pub struct Likelihood {
    model: CorrelationModel,
    pairs: PairSet,
    y: DVector<f64>,
    nugget: f64,
}

impl Likelihood {
    /// `y` is used as given (no standardization).
    pub fn new(space: &DesignSpace, kernel: KernelConfig, points: &[DesignPoint], y: &[f64], nugget: f64) -> Result<Self> {
        let model = CorrelationModel::new(space, kernel)?;
        let encoded = points.iter().map(|p| model.encode(p)).collect::<Result<Vec<_>>>()?;
        check_training(points.len(), y)?;
        Ok(Likelihood {
            pairs: model.pairs(&encoded),
            model,
            y: DVector::from_column_slice(y),
            nugget,
        })
    }

    pub fn correlation(&self) -> &CorrelationModel {
        &self.model
    }

    fn fit(&self, hp: &[f64]) -> Result<Fit> {
        let r = self.model.matrix(&self.pairs, hp)?;
        fit(&r, &self.y, self.nugget, true)
    }

    fn nll_of(&self, f: &Fit) -> f64 {
        let n = self.y.len() as f64;
        0.5 * n * f.sigma2.max(SIGMA2_FLOOR).ln() + 0.5 * f.log_det
    }

    pub fn value(&self, hp: &[f64]) -> Result<f64> {
        Ok(self.nll_of(&self.fit(hp)?))
    }

    /// Value and analytic gradient.
    pub fn value_and_grad(&self, hp: &[f64]) -> Result<(f64, Vec<f64>)> {
        let f = self.fit(hp)?;
        let sigma2 = f.sigma2.max(SIGMA2_FLOOR);
        let r_inv = f.chol.inverse();
        let w = (r_inv - &f.alpha * f.alpha.transpose() / sigma2) * 0.5;
        let grad = self.model.weighted_grad(&self.pairs, hp, &w)?;
        Ok((self.nll_of(&f), grad))
    }

    /// Minimizes over the search box from the given starts; ties keep the
    /// lowest start index.
    fn optimize(&self, starts: &[Vec<f64>], max_evals: usize) -> Result<Vec<f64>> {
        let specs = self.model.param_specs();
        let (lower, upper): (Vec<f64>, Vec<f64>) = specs.iter().map(|s| s.search_bounds()).unzip();
        let to_natural = |t: &[f64]| -> Vec<f64> { specs.iter().zip(t).map(|(s, &v)| s.from_search(v)).collect() };
        let objective = |t: &[f64]| -> Option<(f64, Vec<f64>)> {
            let hp = to_natural(t);
            let (v, g) = self.value_and_grad(&hp).ok()?;
            let gt = specs
                .iter()
                .zip(g.iter().zip(&hp))
                .map(|(s, (gi, hi))| match s.scale {
                    crate::kernels::ParamScale::Log10 => gi * hi * std::f64::consts::LN_10,
                    crate::kernels::ParamScale::Linear => *gi,
                })
                .collect();
            Some((v, gt))
        };
        let mut best: Option<Minimum> = None;
        for start in starts {
            let t0: Vec<f64> = specs.iter().zip(start).map(|(s, &v)| s.to_search(v)).collect();
            if let Some(m) = minimize_box(objective, &t0, &lower, &upper, max_evals) {
                if best.as_ref().map_or(true, |b| m.value < b.value) {
                    best = Some(m);
                }
            }
        }
        best.map(|m| to_natural(&m.x))
            .ok_or_else(|| Error::Training("likelihood could not be evaluated at any start".into()))
    }
}

fn check_training(n: usize, y: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("no training points".into()));
    }
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite training output {v}")));
    }
    Ok(())
}

/// Starting hyperparameters: the warm start or box center, then LHS points.
fn starting_points(model: &CorrelationModel, config: &KrigingConfig, warm: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
    let specs = model.param_specs();
    let mut starts = vec![match warm {
        Some(hp) if hp.len() == specs.len() => hp.to_vec(),
        _ => model.center().values,
    }];
    if config.n_starts > 1 && !specs.is_empty() {
        let unit = sample(&SamplerConfig::lhs(config.n_starts - 1, None, config.seed), specs.len())?;
        for row in unit {
            starts.push(
                specs
                    .iter()
                    .zip(&row)
                    .map(|(s, u)| {
                        let (lo, hi) = s.search_bounds();
                        s.from_search(lo + u * (hi - lo))
                    })
                    .collect(),
            );
        }
    }
    Ok(starts)
}

/// A trained surrogate. Immutable; safe to query from several threads.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    correlation: CorrelationModel,
    config: KrigingConfig,
    points: Vec<DesignPoint>,
    encoded: Vec<Encoded>,
    y: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    hyperparameters: Vec<f64>,
    fit: Fit,
}

impl KrigingModel {
    /// Trains on raw input rows (corrected before use).
    pub fn train(space: &DesignSpace, config: KrigingConfig, x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        Self::train_warm(space, config, x, y, None)
    }

    /// Trains with `warm` (previous hyperparameters) replacing the center start.
    pub fn train_warm(
        space: &DesignSpace,
        config: KrigingConfig,
        x: &[Vec<f64>],
        y: &[f64],
        warm: Option<&[f64]>,
    ) -> Result<Self> {
        config.check()?;
        let points = x.iter().map(|row| space.correct(row)).collect::<Result<Vec<_>>>()?;
        check_training(points.len(), y)?;
        let (y_mean, y_std) = standardization(y);
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();
        let likelihood = Likelihood::new(space, config.kernel, &points, &ys, config.nugget)?;
        let starts = starting_points(&likelihood.model, &config, warm)?;
        let hp = if ys.iter().all(|v| *v == ys[0]) {
            // nothing to learn from a constant response
            starts[0].clone()
        } else {
            likelihood.optimize(&starts, config.max_evals)?
        };
        Self::assemble(likelihood.model, config, points, y.to_vec(), y_mean, y_std, hp)
    }

    /// Builds a model with fixed hyperparameters (no likelihood search).
    pub fn from_hyperparameters(
        space: &DesignSpace,
        config: KrigingConfig,
        x: &[Vec<f64>],
        y: &[f64],
        hyperparameters: &[f64],
    ) -> Result<Self> {
        config.check()?;
        let points = x.iter().map(|row| space.correct(row)).collect::<Result<Vec<_>>>()?;
        check_training(points.len(), y)?;
        let (y_mean, y_std) = standardization(y);
        let correlation = CorrelationModel::new(space, config.kernel)?;
        correlation.check_params(hyperparameters)?;
        Self::assemble(correlation, config, points, y.to_vec(), y_mean, y_std, hyperparameters.to_vec())
    }

    fn assemble(
        correlation: CorrelationModel,
        config: KrigingConfig,
        points: Vec<DesignPoint>,
        y: Vec<f64>,
        y_mean: f64,
        y_std: f64,
        hyperparameters: Vec<f64>,
    ) -> Result<Self> {
        let encoded = points.iter().map(|p| correlation.encode(p)).collect::<Result<Vec<_>>>()?;
        let r = correlation.matrix(&correlation.pairs(&encoded), &hyperparameters)?;
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_std));
        let fit = fit(&r, &ys, config.nugget, true)?;
        Ok(KrigingModel {
            correlation,
            config,
            points,
            encoded,
            y,
            y_mean,
            y_std,
            hyperparameters,
            fit,
        })
    }

    pub fn space(&self) -> &DesignSpace {
        self.correlation.space()
    }

    pub fn config(&self) -> &KrigingConfig {
        &self.config
    }

    pub fn hyperparameters(&self) -> &[f64] {
        &self.hyperparameters
    }

    pub fn n_train(&self) -> usize {
        self.points.len()
    }

    pub fn training_points(&self) -> &[DesignPoint] {
        &self.points
    }

    pub fn training_outputs(&self) -> &[f64] {
        &self.y
    }

    /// Nugget actually used (after escalation).
    pub fn nugget(&self) -> f64 {
        self.fit.nugget
    }

    /// Process variance in output units.
    pub fn process_variance(&self) -> f64 {
        self.fit.sigma2 * self.y_std * self.y_std
    }

    /// Trend coefficient in output units.
    pub fn trend(&self) -> f64 {
        self.y_mean + self.y_std * self.fit.beta
    }

    /// Concentrated log-likelihood of the standardized data at the trained
    /// hyperparameters.
    pub fn log_likelihood(&self) -> f64 {
        let n = self.points.len() as f64;
        -(0.5 * n * self.fit.sigma2.max(SIGMA2_FLOOR).ln() + 0.5 * self.fit.log_det)
    }

    /// `L Lᵀ` reconstruction error relative to `R + νI` (Frobenius).
    pub fn factor_error(&self) -> Result<f64> {
        let mut r = self.correlation.matrix(&self.correlation.pairs(&self.encoded), &self.hyperparameters)?;
        for i in 0..r.nrows() {
            r[(i, i)] += self.fit.nugget;
        }
        let l = self.fit.chol.l();
        Ok((&l * l.transpose() - &r).norm() / r.norm())
    }

    fn encode_query(&self, raw: &[f64]) -> Result<Encoded> {
        let point = self.space().correct(raw)?;
        self.correlation.encode(&point)
    }

    /// Correlations to the training set and `L⁻¹ r`.
    fn query(&self, e: &Encoded) -> Result<(DVector<f64>, DVector<f64>)> {
        let r = self.correlation.cross(e, &self.encoded, &self.hyperparameters)?;
        let v = self
            .fit
            .chol
            .l()
            .solve_lower_triangular(&r)
            .ok_or(Error::Cholesky { nugget: self.fit.nugget })?;
        Ok((r, v))
    }

    fn mean_std(&self, r: &DVector<f64>) -> f64 {
        self.fit.beta + r.dot(&self.fit.alpha)
    }

    fn variance_std(&self, v: &DVector<f64>) -> f64 {
        let u = 1.0 - self.fit.l_inv_ones.dot(v);
        let s2 = self.fit.sigma2 * (1.0 - v.dot(v) + u * u / self.fit.ones_r_ones);
        s2.max(0.0)
    }

    /// Predicted means at raw query rows.
    pub fn predict_values(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter()
            .map(|row| {
                let e = self.encode_query(row)?;
                let r = self.correlation.cross(&e, &self.encoded, &self.hyperparameters)?;
                Ok(self.y_mean + self.y_std * self.mean_std(&r))
            })
            .collect()
    }

    /// Predicted variances at raw query rows.
    pub fn predict_variances(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter()
            .map(|row| {
                let (_, v) = self.query(&self.encode_query(row)?)?;
                Ok(self.variance_std(&v) * self.y_std * self.y_std)
            })
            .collect()
    }

    /// Mean and variance at one raw row.
    pub fn predict(&self, raw: &[f64]) -> Result<(f64, f64)> {
        let (r, v) = self.query(&self.encode_query(raw)?)?;
        Ok((
            self.y_mean + self.y_std * self.mean_std(&r),
            self.variance_std(&v) * self.y_std * self.y_std,
        ))
    }

    /// Derivatives of the mean and the variance with respect to the float
    /// variable `var`, in raw units, at each query row.
    pub fn predict_derivatives(&self, x: &[Vec<f64>], var: usize) -> Result<Vec<(f64, f64)>> {
        let width = match self.space().variables().get(var).map(|v| &v.kind) {
            Some(VariableKind::Float { lower, upper }) => upper - lower,
            Some(_) => {
                return Err(Error::Unsupported(format!(
                    "derivative with respect to non-float variable '{}'",
                    self.space().variables()[var].name
                )))
            }
            None => return Err(Error::InvalidInput(format!("variable index {var} out of range"))),
        };
        let l = self.fit.chol.l();
        x.iter()
            .map(|row| {
                let e = self.encode_query(row)?;
                let (_, v) = self.query(&e)?;
                let dr = self.correlation.cross_dx(&e, &self.encoded, &self.hyperparameters, var)?;
                let dv = l.solve_lower_triangular(&dr).ok_or(Error::Cholesky { nugget: self.fit.nugget })?;
                let dmean = dr.dot(&self.fit.alpha);
                let u = 1.0 - self.fit.l_inv_ones.dot(&v);
                let du = -self.fit.l_inv_ones.dot(&dv);
                let dvar = self.fit.sigma2 * (-2.0 * v.dot(&dv) + 2.0 * u * du / self.fit.ones_r_ones);
                Ok((
                    self.y_std * dmean / width,
                    self.y_std * self.y_std * dvar / width,
                ))
            })
            .collect()
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            space: self.space().clone(),
            config: self.config,
            hyperparameters: self.hyperparameters.clone(),
            nugget: self.fit.nugget,
            y_mean: self.y_mean,
            y_std: self.y_std,
            x: self.points.iter().map(|p| p.values.clone()).collect(),
            y: self.y.clone(),
        }
    }

    /// Rebuilds a model, refactorizing at the stored nugget.
    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported model format_version {}", doc.format_version)));
        }
        let config = KrigingConfig {
            nugget: doc.nugget,
            ..doc.config
        };
        let mut model = Self::from_hyperparameters(&doc.space, config, &doc.x, &doc.y, &doc.hyperparameters)?;
        model.config = doc.config;
        if model.fit.nugget != doc.nugget {
            return Err(Error::Cholesky { nugget: doc.nugget });
        }
        if model.y_mean != doc.y_mean || model.y_std != doc.y_std {
            return Err(Error::InvalidInput("standardization constants do not match the training data".into()));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

/// Mean and sample standard deviation (1 when degenerate).
fn standardization(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    if y.len() < 2 {
        return (mean, 1.0);
    }
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    (mean, if std > 0.0 && std.is_finite() { std } else { 1.0 })
}

/// Serialized form of a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub space: DesignSpace,
    pub config: KrigingConfig,
    pub hyperparameters: Vec<f64>,
    pub nugget: f64,
    pub y_mean: f64,
    pub y_std: f64,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}
