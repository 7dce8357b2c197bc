//! Efficient global optimization over mixed and hierarchical spaces.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::design_space::{DesignPoint, DesignSpace, VariableKind};
use crate::error::{Error, Result};
use crate::kriging::{KrigingConfig, KrigingModel};
use crate::problems::Problem;
use crate::sampling::{expand_lhs, sample, sample_valid, unit_to_points, SamplerConfig};

pub const DEFAULT_KAPPA: f64 = 1.96;
pub const DEFAULT_POOL_SIZE: usize = 1000;
const DUPLICATE_TOLERANCE: f64 = 1e-9;
/// Best pool candidates that get a local refinement.
const REFINE_STARTS: usize = 5;
const REFINE_EVALS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// Expected improvement.
    EI,
    /// Surrogate-based optimization: the predicted mean.
    SBO,
    /// Lower confidence bound `μ - κ·s`.
    LCB,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EI" => Ok(Criterion::EI),
            "SBO" => Ok(Criterion::SBO),
            "LCB" => Ok(Criterion::LCB),
            _ => Err(Error::InvalidInput(format!("unknown criterion '{s}' (EI, SBO or LCB)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoConfig {
    pub n_iter: usize,
    pub criterion: Criterion,
    pub lcb_kappa: f64,
    pub seed: u64,
    pub candidate_pool_size: usize,
    pub kriging: KrigingConfig,
}

impl Default for EgoConfig {
    fn default() -> Self {
        EgoConfig {
            n_iter: 20,
            criterion: Criterion::EI,
            lcb_kappa: DEFAULT_KAPPA,
            seed: 0,
            candidate_pool_size: DEFAULT_POOL_SIZE,
            kriging: KrigingConfig::default(),
        }
    }
}

impl EgoConfig {
    fn check(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::InvalidInput("n_iter must be at least 1".into()));
        }
        if self.candidate_pool_size < 100 {
            return Err(Error::InvalidInput("candidate_pool_size must be at least 100".into()));
        }
        if !(self.lcb_kappa >= 0.0) {
            return Err(Error::InvalidInput("lcb_kappa must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// 0 for the initial design, then 1, 2, … for infill points.
    pub iter: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizationHistory {
    pub entries: Vec<HistoryEntry>,
}

impl OptimizationHistory {
    fn push(&mut self, iter: usize, x: Vec<f64>, y: f64) {
        let best_so_far = self.entries.last().map_or(y, |e| e.best_so_far.min(y));
        self.entries.push(HistoryEntry { iter, x, y, best_so_far });
    }

    pub fn n_eval(&self) -> usize {
        self.entries.len()
    }

    /// Point with the lowest objective (first one on ties).
    pub fn best(&self) -> Option<&HistoryEntry> {
        self.entries.iter().fold(None, |best: Option<&HistoryEntry>, e| match best {
            Some(b) if b.y <= e.y => Some(b),
            _ => Some(e),
        })
    }

    pub fn y_opt(&self) -> Option<f64> {
        self.best().map(|e| e.y)
    }

    pub fn x_opt(&self) -> Option<&[f64]> {
        self.best().map(|e| e.x.as_slice())
    }

    /// Best value after the initial design plus `k` infill evaluations.
    pub fn best_after(&self, k: usize) -> Option<f64> {
        let n_doe = self.entries.iter().filter(|e| e.iter == 0).count();
        self.entries.get((n_doe + k).min(self.entries.len()).checked_sub(1)?).map(|e| e.best_so_far)
    }

    /// Best-so-far value after each infill iteration `0..=n_iter`.
    pub fn curve(&self) -> Vec<f64> {
        let n_infill = self.entries.iter().filter(|e| e.iter > 0).count();
        (0..=n_infill).filter_map(|k| self.best_after(k)).collect()
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement below `y_min` of a Gaussian with mean `mu` and
/// standard deviation `s`.
pub fn expected_improvement(mu: f64, s: f64, y_min: f64) -> f64 {
    let gain = y_min - mu;
    if !(s > 0.0) {
        return gain.max(0.0);
    }
    let z = gain / s;
    (gain * normal_cdf(z) + s * normal_pdf(z)).max(0.0)
}

/// Criterion value to minimize at a raw point.
pub fn infill_criterion(criterion: Criterion, model: &KrigingModel, x: &[f64], y_min: f64, kappa: f64) -> Result<f64> {
    let (mu, s2) = model.predict(x)?;
    Ok(criterion_value(criterion, mu, s2.sqrt(), y_min, kappa))
}

fn criterion_value(criterion: Criterion, mu: f64, s: f64, y_min: f64, kappa: f64) -> f64 {
    match criterion {
        Criterion::EI => -expected_improvement(mu, s, y_min),
        Criterion::SBO => mu,
        Criterion::LCB => mu - kappa * s,
    }
}

fn normalized_distance(space: &DesignSpace, a: &DesignPoint, b: &DesignPoint) -> f64 {
    space
        .normalize(a)
        .iter()
        .zip(space.normalize(b))
        .map(|(u, v)| (u - v).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Coordinate-wise bounded descent on the acting float variables of `start`.
fn refine(
    space: &DesignSpace,
    start: DesignPoint,
    start_value: f64,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<(DesignPoint, f64)> {
    let dims: Vec<(usize, f64, f64)> = space
        .variables()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| match v.kind {
            VariableKind::Float { lower, upper } if start.acting[i] => Some((i, lower, upper)),
            _ => None,
        })
        .collect();
    let mut best = start;
    let mut best_value = start_value;
    if dims.is_empty() {
        return Ok((best, best_value));
    }
    let mut steps: Vec<f64> = dims.iter().map(|(_, lo, hi)| 0.05 * (hi - lo)).collect();
    let mut evals = 0;
    while evals < REFINE_EVALS {
        let mut improved = false;
        for (k, &(i, lo, hi)) in dims.iter().enumerate() {
            if steps[k] < 1e-9 * (hi - lo) {
                continue;
            }
            let mut moved = false;
            for dir in [1.0, -1.0] {
                let mut values = best.values.clone();
                values[i] = (values[i] + dir * steps[k]).clamp(lo, hi);
                if values[i] == best.values[i] {
                    continue;
                }
                evals += 1;
                let v = f(&values)?;
                if v < best_value {
                    best_value = v;
                    best = space.correct(&values)?;
                    improved = true;
                    moved = true;
                    steps[k] *= 2.0;
                    break;
                }
            }
            if !moved {
                steps[k] *= 0.5;
            }
        }
        if !improved && steps.iter().zip(&dims).all(|(s, (_, lo, hi))| *s < 1e-9 * (hi - lo)) {
            break;
        }
    }
    Ok((best, best_value))
}

/// Points differing from the best training point in one non-float variable:
/// every other level of ordinal/categorical variables, ±1 for integers.
fn incumbent_neighbours(model: &KrigingModel) -> Result<Vec<DesignPoint>> {
    let space = model.space();
    let y = model.training_outputs();
    let Some(best) = (0..y.len()).reduce(|a, b| if y[b] < y[a] { b } else { a }) else {
        return Ok(Vec::new());
    };
    let incumbent = &model.training_points()[best].values;
    let mut out = Vec::new();
    for (i, var) in space.variables().iter().enumerate() {
        let alternatives: Vec<f64> = match &var.kind {
            VariableKind::Float { .. } => continue,
            VariableKind::Integer { lower, upper } => [incumbent[i] - 1.0, incumbent[i] + 1.0]
                .into_iter()
                .filter(|v| *v >= *lower as f64 && *v <= *upper as f64)
                .collect(),
            VariableKind::Ordinal { levels } => (0..levels.len()).map(|l| l as f64).collect(),
            VariableKind::Categorical { levels } => (0..levels.len()).map(|l| l as f64).collect(),
        };
        for v in alternatives.into_iter().filter(|v| *v != incumbent[i]) {
            let mut raw = incumbent.clone();
            raw[i] = v;
            let point = space.correct(&raw)?;
            // changes to non-acting coordinates are undone by correction
            if point.values != *incumbent {
                out.push(point);
            }
        }
    }
    Ok(out)
}

/// Next point to evaluate: best of a corrected LHS pool plus the discrete
/// neighbours of the incumbent, refined locally on its float variables,
/// skipping duplicates of training points.
pub fn propose_next(model: &KrigingModel, config: &EgoConfig, y_min: f64, seed: u64) -> Result<DesignPoint> {
    let space = model.space();
    let mut pool = sample_valid(space, &SamplerConfig::lhs(config.candidate_pool_size, None, seed))?;
    pool.extend(incumbent_neighbours(model)?);
    let crit = |x: &[f64]| infill_criterion(config.criterion, model, x, y_min, config.lcb_kappa);
    let mut scored = pool
        .into_iter()
        .map(|p| crit(&p.values).map(|v| (p, v)))
        .collect::<Result<Vec<_>>>()?;
    // stable sort keeps the lowest pool index among ties
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));

    let is_duplicate = |p: &DesignPoint| {
        model
            .training_points()
            .iter()
            .any(|t| normalized_distance(space, p, t) <= DUPLICATE_TOLERANCE)
    };
    let mut best: Option<(DesignPoint, f64)> = None;
    for (start, start_value) in scored.iter().take(REFINE_STARTS).cloned() {
        let (refined, value) = refine(space, start, start_value, crit)?;
        if !is_duplicate(&refined) && best.as_ref().map_or(true, |b| value < b.1) {
            best = Some((refined, value));
        }
    }
    if let Some((point, _)) = best {
        return Ok(point);
    }
    Ok(scored
        .iter()
        .map(|(p, _)| p)
        .find(|p| !is_duplicate(p))
        .cloned()
        .unwrap_or_else(|| scored[0].0.clone()))
}

/// Runs the optimization loop from an initial design of raw rows.
pub fn optimize_with(
    space: &DesignSpace,
    mut objective: impl FnMut(&DesignPoint) -> Result<f64>,
    initial_doe: &[Vec<f64>],
    config: &EgoConfig,
) -> Result<OptimizationHistory> {
    config.check()?;
    if initial_doe.is_empty() {
        return Err(Error::InvalidInput("initial design is empty".into()));
    }
    let mut history = OptimizationHistory::default();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for row in initial_doe {
        let p = space.correct(row)?;
        let v = objective(&p)?;
        history.push(0, p.values.clone(), v);
        x.push(p.values);
        y.push(v);
    }
    let mut warm: Option<Vec<f64>> = None;
    for iter in 1..=config.n_iter {
        let kriging = KrigingConfig {
            seed: config.kriging.seed.wrapping_add(iter as u64),
            ..config.kriging
        };
        let model = KrigingModel::train_warm(space, kriging, &x, &y, warm.as_deref())?;
        warm = Some(model.hyperparameters().to_vec());
        let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let p = propose_next(&model, config, y_min, config.seed.wrapping_mul(1_000_003).wrapping_add(iter as u64))?;
        let v = objective(&p)?;
        history.push(iter, p.values.clone(), v);
        x.push(p.values);
        y.push(v);
    }
    Ok(history)
}

pub fn optimize(problem: &Problem, initial_doe: &[Vec<f64>], config: &EgoConfig) -> Result<OptimizationHistory> {
    optimize_with(&problem.space, |p| problem.evaluate(p), initial_doe, config)
}

/// Unit-hypercube LHS of `n` rows and the corresponding corrected raw rows.
pub fn initial_design(space: &DesignSpace, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let unit = sample(&SamplerConfig::lhs(n, None, seed), space.n_vars())?;
    let raw = unit_to_points(space, &unit)?.into_iter().map(|p| p.values).collect();
    Ok((unit, raw))
}

/// Random-search baseline: the unit-hypercube design is expanded once by
/// `n_add` LHS-consistent rows and every point is evaluated.
pub fn random_search(problem: &Problem, initial_unit: &[Vec<f64>], n_add: usize, seed: u64) -> Result<OptimizationHistory> {
    if n_add == 0 {
        return Err(Error::InvalidInput("random search needs at least one added point".into()));
    }
    let all = expand_lhs(initial_unit, n_add, seed)?;
    let points = unit_to_points(&problem.space, &all)?;
    let mut history = OptimizationHistory::default();
    for (k, p) in points.iter().enumerate() {
        let iter = if k < initial_unit.len() { 0 } else { k + 1 - initial_unit.len() };
        history.push(iter, p.values.clone(), problem.evaluate(p)?);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::Variable;
    use crate::kernels::{CategoricalKernel, KernelConfig};
    use crate::problems;
    use proptest::prelude::*;

    fn light() -> KrigingConfig {
        KrigingConfig {
            n_starts: 2,
            max_evals: 60,
            ..KrigingConfig::default()
        }
    }

    #[test]
    fn neighbours_keep_acting_floats() {
        let p = problems::goldstein_problem();
        let (_, x) = initial_design(&p.space, 8, 3).unwrap();
        let y: Vec<f64> = x.iter().map(|r| p.evaluate_raw(r).unwrap()).collect();
        let model = KrigingModel::from_hyperparameters(&p.space, light(), &x, &y, &[1.0; 15]).unwrap();
        let best = (0..8).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
        let incumbent = &model.training_points()[best];
        let near = incumbent_neighbours(&model).unwrap();
        assert!(!near.is_empty() && near.len() <= 8 + 3 + 1);
        for q in &near {
            assert!(p.space.is_valid(q));
            assert_ne!(q.values, incumbent.values);
            for (i, var) in p.space.variables().iter().enumerate() {
                if var.kind.is_float() && q.acting[i] && incumbent.acting[i] {
                    assert_eq!(q.values[i], incumbent.values[i]);
                }
            }
        }
    }

    #[test]
    fn ei_values() {
        assert_eq!(expected_improvement(1.0, 0.0, 1.0), 0.0);
        assert!((expected_improvement(0.0, 1.0, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(expected_improvement(10.0, 1.0, 0.0) < 1e-6);
        assert_eq!(expected_improvement(0.5, 0.0, 1.0), 0.5);
        // deep tail, bracketed with Mills-ratio bounds on the normal tail
        let z: f64 = 10.0;
        let ei = expected_improvement(z, 1.0, 0.0);
        assert!(ei > 0.0 && ei <= normal_pdf(z) / (z * z + 1.0));
        assert!(ei >= normal_pdf(z) * 2.0 / (z * z * z + 3.0 * z) * 0.99);
    }

    #[test]
    fn criterion_names() {
        assert_eq!("ei".parse::<Criterion>().unwrap(), Criterion::EI);
        assert_eq!("LCB".parse::<Criterion>().unwrap(), Criterion::LCB);
        assert!("PI".parse::<Criterion>().is_err());
    }

    fn toy_model(n: usize, seed: u64) -> (Problem, KrigingModel) {
        let p = problems::toy_problem();
        let (_, x) = initial_design(&p.space, n, seed).unwrap();
        let y: Vec<f64> = x.iter().map(|r| p.evaluate_raw(r).unwrap()).collect();
        let cfg = KrigingConfig {
            kernel: KernelConfig { categorical: CategoricalKernel::Gower, ..KernelConfig::default() },
            ..light()
        };
        let m = KrigingModel::train(&p.space, cfg, &x, &y).unwrap();
        (p, m)
    }

    #[test]
    fn criteria_relations() {
        let (_, m) = toy_model(12, 3);
        for (i, xi) in m.training_points().iter().enumerate() {
            let sbo = infill_criterion(Criterion::SBO, &m, &xi.values, 0.0, 0.0).unwrap();
            assert!((sbo - m.training_outputs()[i]).abs() < 1e-6);
        }
        for q in [[0.1, 2.0], [0.77, 9.0], [0.5, 4.0]] {
            let sbo = infill_criterion(Criterion::SBO, &m, &q, 0.0, 1.96).unwrap();
            let lcb0 = infill_criterion(Criterion::LCB, &m, &q, 0.0, 0.0).unwrap();
            assert_eq!(sbo, lcb0);
            assert!(infill_criterion(Criterion::EI, &m, &q, 0.0, 1.96).unwrap() <= 0.0);
        }
    }

    #[test]
    fn planted_peak_is_found() {
        // a single training point far below the rest makes EI peak near it
        let space = DesignSpace::new(vec![Variable::float("x", 0.0, 1.0)]).unwrap();
        let xs = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let x: Vec<Vec<f64>> = xs.iter().map(|v| vec![*v]).collect();
        let y: Vec<f64> = xs.iter().map(|v| (v - 0.63f64).powi(2)).collect();
        let m = KrigingModel::from_hyperparameters(&space, KrigingConfig::default(), &x, &y, &[10.0]).unwrap();
        let cfg = EgoConfig { criterion: Criterion::SBO, ..EgoConfig::default() };
        let p = propose_next(&m, &cfg, 0.0, 4).unwrap();
        // dense-grid oracle on the criterion
        let grid_best = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .min_by(|a, b| {
                let fa = infill_criterion(Criterion::SBO, &m, &[*a], 0.0, 0.0).unwrap();
                let fb = infill_criterion(Criterion::SBO, &m, &[*b], 0.0, 0.0).unwrap();
                fa.total_cmp(&fb)
            })
            .unwrap();
        assert!((p.values[0] - grid_best).abs() < 0.01, "{} vs {grid_best}", p.values[0]);
    }

    #[test]
    fn categorical_only_space_picks_best_level() {
        let space = DesignSpace::new(vec![Variable::categorical("c", ["a", "b", "c", "d"])]).unwrap();
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![3.0, 1.0];
        let kernel = KernelConfig { categorical: CategoricalKernel::ContRelax, ..KernelConfig::default() };
        let m = KrigingModel::from_hyperparameters(&space, KrigingConfig::with_kernel(kernel), &x, &y, &[1.0, 0.2, 0.1, 3.0])
            .unwrap();
        let ego = EgoConfig { criterion: Criterion::LCB, ..EgoConfig::default() };
        let p = propose_next(&m, &ego, 1.0, 0).unwrap();
        // exhaustive enumeration over the levels that are not training points
        let best = [2.0, 3.0]
            .into_iter()
            .min_by(|a, b| {
                let fa = infill_criterion(Criterion::LCB, &m, &[*a], 1.0, DEFAULT_KAPPA).unwrap();
                let fb = infill_criterion(Criterion::LCB, &m, &[*b], 1.0, DEFAULT_KAPPA).unwrap();
                fa.total_cmp(&fb)
            })
            .unwrap();
        assert_eq!(p.values[0], best);
    }

    #[test]
    fn never_proposes_a_duplicate() {
        let (_, m) = toy_model(8, 5);
        for seed in 0..5 {
            let p = propose_next(&m, &EgoConfig::default(), f64::NEG_INFINITY, seed).unwrap();
            for t in m.training_points() {
                assert!(normalized_distance(m.space(), &p, t) > DUPLICATE_TOLERANCE);
            }
        }
    }

    #[test]
    fn sbo_proposal_beats_pool() {
        let (_, m) = toy_model(10, 6);
        let cfg = EgoConfig { criterion: Criterion::SBO, ..EgoConfig::default() };
        let p = propose_next(&m, &cfg, 0.0, 11).unwrap();
        let pool = sample_valid(m.space(), &SamplerConfig::lhs(cfg.candidate_pool_size, None, 11)).unwrap();
        let pool_min = pool
            .iter()
            .map(|q| m.predict(&q.values).unwrap().0)
            .fold(f64::INFINITY, f64::min);
        assert!(m.predict(&p.values).unwrap().0 <= pool_min);
    }

    #[test]
    fn short_run_history() {
        let p = problems::branin_problem();
        let (_, doe) = initial_design(&p.space, 6, 1).unwrap();
        let cfg = EgoConfig { n_iter: 4, kriging: light(), seed: 2, ..EgoConfig::default() };
        let h = optimize(&p, &doe, &cfg).unwrap();
        assert_eq!(h.n_eval(), 10);
        assert_eq!(h.entries.iter().filter(|e| e.iter == 0).count(), 6);
        assert_eq!(h.entries.last().unwrap().iter, 4);
        for w in h.entries.windows(2) {
            assert!(w[1].best_so_far <= w[0].best_so_far);
        }
        let min = h.entries.iter().map(|e| e.y).fold(f64::INFINITY, f64::min);
        assert_eq!(h.y_opt().unwrap(), min);
        assert_eq!(h.curve().len(), 5);
        let again = optimize(&p, &doe, &cfg).unwrap();
        assert_eq!(h, again);
        assert!(optimize(&p, &[], &cfg).is_err());
        assert!(optimize(&p, &doe, &EgoConfig { n_iter: 0, ..cfg }).is_err());
    }

    #[test]
    fn evaluation_failures_carry_the_point() {
        let p = problems::branin_problem();
        let (_, doe) = initial_design(&p.space, 4, 1).unwrap();
        let cfg = EgoConfig { n_iter: 1, kriging: light(), ..EgoConfig::default() };
        let err = optimize_with(
            &p.space,
            |pt| Err(Error::Evaluation { point: pt.values.clone(), message: "boom".into() }),
            &doe,
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Evaluation { ref point, .. } if point == &doe[0]));
    }

    #[test]
    fn random_search_budget() {
        let p = problems::goldstein_problem();
        let (unit, _) = initial_design(&p.space, 12, 3).unwrap();
        let h = random_search(&p, &unit, 55, 4).unwrap();
        assert_eq!(h.n_eval(), 67);
        assert_eq!(h, random_search(&p, &unit, 55, 4).unwrap());
        assert!(random_search(&p, &unit, 0, 4).is_err());
        for w in h.entries.windows(2) {
            assert!(w[1].best_so_far <= w[0].best_so_far);
        }
    }

    proptest! {
        #[test]
        fn ei_is_nonnegative(mu in -10.0f64..10.0, s in 0.0f64..5.0, y_min in -10.0f64..10.0) {
            let ei = expected_improvement(mu, s, y_min);
            prop_assert!(ei >= 0.0);
            if s == 0.0 && mu >= y_min {
                prop_assert_eq!(ei, 0.0);
            }
        }
    }
}
