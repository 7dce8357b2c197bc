//! Designs of experiments in the unit hypercube and their mapping onto
//! mixed / hierarchical design spaces.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design_space::{DesignPoint, DesignSpace, VariableKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Random,
    FullFactorial,
    Lhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LhsCriterion {
    Center,
    Maximin,
    CenterMaximin,
    Correlation,
    Ese,
}

impl std::str::FromStr for LhsCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" | "c" => Ok(Self::Center),
            "maximin" | "m" => Ok(Self::Maximin),
            "centermaximin" | "cm" => Ok(Self::CenterMaximin),
            "correlation" | "corr" => Ok(Self::Correlation),
            "ese" => Ok(Self::Ese),
            other => Err(Error::InvalidInput(format!("unknown LHS criterion '{other}'"))),
        }
    }
}

/// `criterion` only applies to [`SamplingMethod::Lhs`]; `None` gives a plain
/// jittered LHS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: SamplingMethod,
    pub criterion: Option<LhsCriterion>,
    pub seed: u64,
    pub n_points: usize,
}

impl SamplerConfig {
    pub fn lhs(n_points: usize, criterion: Option<LhsCriterion>, seed: u64) -> Self {
        Self {
            method: SamplingMethod::Lhs,
            criterion,
            seed,
            n_points,
        }
    }
}

/// Candidates drawn by the best-of criteria (maximin, centermaximin, correlation).
const BEST_OF_CANDIDATES: usize = 100;

// ese schedule
const ESE_OUTER: usize = 50;
const ESE_INNER: usize = 30;
const ESE_COOLING: f64 = 0.95;
const ESE_T0_FACTOR: f64 = 0.5;

/// Draws an `n_points x n_dims` design in `[0, 1]^n_dims`.
pub fn sample(config: &SamplerConfig, n_dims: usize) -> Result<Vec<Vec<f64>>> {
    if n_dims == 0 {
        return Err(Error::InvalidInput("sampling needs at least one dimension".into()));
    }
    if config.n_points == 0 {
        return Err(Error::InvalidInput("n_points must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_points;
    Ok(match config.method {
        SamplingMethod::Random => (0..n)
            .map(|_| (0..n_dims).map(|_| rng.gen::<f64>()).collect())
            .collect(),
        SamplingMethod::FullFactorial => full_factorial(&grid_sizes(n, n_dims)),
        SamplingMethod::Lhs => match config.criterion {
            None => lhs_once(n, n_dims, false, &mut rng),
            Some(LhsCriterion::Center) => lhs_once(n, n_dims, true, &mut rng),
            Some(LhsCriterion::Maximin) => best_of(n, n_dims, false, &mut rng, min_distance),
            Some(LhsCriterion::CenterMaximin) => best_of(n, n_dims, true, &mut rng, min_distance),
            Some(LhsCriterion::Correlation) => {
                best_of(n, n_dims, false, &mut rng, |d| -max_abs_correlation(d))
            }
            Some(LhsCriterion::Ese) => ese(n, n_dims, &mut rng),
        },
    })
}

/// Per-dimension grid sizes whose product is the largest lattice with at most
/// `n` points and near-equal sides.
fn grid_sizes(n: usize, n_dims: usize) -> Vec<usize> {
    let mut base = (n as f64).powf(1.0 / n_dims as f64).floor().max(1.0) as usize;
    while (base + 1).checked_pow(n_dims as u32).is_some_and(|p| p <= n) {
        base += 1;
    }
    while base > 1 && base.pow(n_dims as u32) > n {
        base -= 1;
    }
    let mut sizes = vec![base; n_dims];
    for j in 0..n_dims {
        let product: usize = sizes.iter().product();
        if product / sizes[j] * (sizes[j] + 1) <= n {
            sizes[j] += 1;
        }
    }
    sizes
}

/// Full-factorial lattice with `levels[j]` points along dimension `j`.
pub fn full_factorial(levels: &[usize]) -> Vec<Vec<f64>> {
    let mut rows = vec![Vec::with_capacity(levels.len())];
    for &m in levels {
        let coords: Vec<f64> = if m <= 1 {
            vec![0.5]
        } else {
            (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
        };
        rows = rows
            .into_iter()
            .flat_map(|row| {
                coords.iter().map(move |&c| {
                    let mut r = row.clone();
                    r.push(c);
                    r
                })
            })
            .collect();
    }
    rows
}

fn lhs_once(n: usize, n_dims: usize, centered: bool, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; n_dims]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..n_dims {
        strata.shuffle(rng);
        for (row, &k) in rows.iter_mut().zip(&strata) {
            let offset = if centered { 0.5 } else { rng.gen::<f64>() };
            row[j] = (k as f64 + offset) / n as f64;
        }
    }
    rows
}

fn best_of(
    n: usize,
    n_dims: usize,
    centered: bool,
    rng: &mut ChaCha8Rng,
    score: impl Fn(&[Vec<f64>]) -> f64,
) -> Vec<Vec<f64>> {
    let mut best = lhs_once(n, n_dims, centered, rng);
    let mut best_score = score(&best);
    for _ in 1..BEST_OF_CANDIDATES {
        let cand = lhs_once(n, n_dims, centered, rng);
        let s = score(&cand);
        if s > best_score {
            best = cand;
            best_score = s;
        }
    }
    best
}

/// Simulated-annealing column swaps maximizing the minimum pairwise distance.
fn ese(n: usize, n_dims: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut current = lhs_once(n, n_dims, false, rng);
    if n < 2 {
        return current;
    }
    let mut f_current = min_distance(&current);
    let mut best = current.clone();
    let mut f_best = f_current;
    let mut temperature = ESE_T0_FACTOR * f_current;
    for _ in 0..ESE_OUTER {
        for _ in 0..ESE_INNER {
            let j = rng.gen_range(0..n_dims);
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            swap_entries(&mut current, a, b, j);
            let f_new = min_distance(&current);
            let delta = f_new - f_current;
            let accept = delta >= 0.0
                || (temperature > 0.0 && rng.gen::<f64>() < (delta / temperature).exp());
            if accept {
                f_current = f_new;
                if f_current > f_best {
                    f_best = f_current;
                    best.clone_from(&current);
                }
            } else {
                swap_entries(&mut current, a, b, j);
            }
        }
        temperature *= ESE_COOLING;
    }
    best
}

fn swap_entries(rows: &mut [Vec<f64>], a: usize, b: usize, j: usize) {
    let tmp = rows[a][j];
    rows[a][j] = rows[b][j];
    rows[b][j] = tmp;
}

/// Smallest Euclidean distance between two rows (infinite below two rows).
pub fn min_distance(rows: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

fn max_abs_correlation(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n < 2 || d < 2 {
        return 0.0;
    }
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in a + 1..d {
            let cov: f64 = rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum();
            let denom = sd[a] * sd[b];
            if denom > 0.0 {
                worst = worst.max((cov / denom).abs());
            }
        }
    }
    worst
}

/// Maps unit-hypercube rows onto valid design points (denormalize, correct,
/// impute).
pub fn unit_to_points(space: &DesignSpace, unit: &[Vec<f64>]) -> Result<Vec<DesignPoint>> {
    unit.iter()
        .map(|row| space.correct(&space.unit_to_raw(row)?))
        .collect()
}

/// Samples `config.n_points` valid points over the full space.
pub fn sample_valid(space: &DesignSpace, config: &SamplerConfig) -> Result<Vec<DesignPoint>> {
    let unit = sample(config, space.n_vars())?;
    unit_to_points(space, &unit)
}

/// Splits `config.n_points` evenly over the levels of the discrete variable
/// `meta` and draws an independent design for each level.
pub fn sample_valid_per_meta_level(
    space: &DesignSpace,
    config: &SamplerConfig,
    meta: usize,
) -> Result<Vec<DesignPoint>> {
    let var = space
        .variables()
        .get(meta)
        .ok_or_else(|| Error::InvalidInput(format!("variable index {meta} out of range")))?;
    let levels: Vec<f64> = match &var.kind {
        VariableKind::Integer { lower, upper } => (*lower..=*upper).map(|v| v as f64).collect(),
        VariableKind::Ordinal { levels } => (0..levels.len()).map(|i| i as f64).collect(),
        VariableKind::Categorical { levels } => (0..levels.len()).map(|i| i as f64).collect(),
        VariableKind::Float { .. } => {
            return Err(Error::InvalidInput(format!(
                "variable '{}' is continuous and has no levels",
                var.name
            )))
        }
    };
    if config.n_points < levels.len() {
        return Err(Error::InvalidInput(format!(
            "{} points cannot cover {} levels",
            config.n_points,
            levels.len()
        )));
    }
    let per_level = config.n_points / levels.len();
    let extra = config.n_points % levels.len();
    let mut points = Vec::with_capacity(config.n_points);
    for (k, &level) in levels.iter().enumerate() {
        let sub = SamplerConfig {
            n_points: per_level + usize::from(k < extra),
            seed: config.seed.wrapping_add(k as u64),
            ..*config
        };
        for row in sample(&sub, space.n_vars())? {
            let mut raw = space.unit_to_raw(&row)?;
            raw[meta] = level;
            points.push(space.correct(&raw)?);
        }
    }
    Ok(points)
}

/// Candidate draws when expanding; the one with the largest minimum distance wins.
const EXPAND_CANDIDATES: usize = 20;

/// Adds `n_add` rows to an LHS, filling only the fine strata (width
/// `1/(n + n_add)`) that the existing rows leave empty. Existing rows are
/// returned first and unmodified.
pub fn expand_lhs(doe: &[Vec<f64>], n_add: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n_add == 0 {
        return Err(Error::InvalidInput("expand_lhs needs n_add >= 1".into()));
    }
    let n_dims = doe.first().map(Vec::len).unwrap_or(0);
    if n_dims == 0 {
        return Err(Error::InvalidInput("cannot expand an empty design".into()));
    }
    if doe
        .iter()
        .any(|r| r.len() != n_dims || r.iter().any(|v| !(0.0..=1.0).contains(v)))
    {
        return Err(Error::InvalidInput("design rows must lie in the unit hypercube".into()));
    }
    let total = doe.len() + n_add;
    let stratum = |v: f64| ((v * total as f64).floor() as usize).min(total - 1);
    let empty: Vec<Vec<usize>> = (0..n_dims)
        .map(|j| {
            let mut used = vec![false; total];
            for row in doe {
                used[stratum(row[j])] = true;
            }
            (0..total).filter(|k| !used[*k]).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for _ in 0..EXPAND_CANDIDATES {
        let mut new_rows = vec![vec![0.0; n_dims]; n_add];
        for (j, free) in empty.iter().enumerate() {
            let mut chosen: Vec<usize> = free.choose_multiple(&mut rng, n_add).copied().collect();
            chosen.shuffle(&mut rng);
            for (row, k) in new_rows.iter_mut().zip(chosen) {
                row[j] = (k as f64 + rng.gen::<f64>()) / total as f64;
            }
        }
        let mut all = doe.to_vec();
        all.extend(new_rows);
        let score = min_distance(&all);
        if best.as_ref().map_or(true, |(s, _)| score > *s) {
            best = Some((score, all));
        }
    }
    Ok(best.map(|(_, rows)| rows).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use proptest::prelude::*;

    fn assert_stratified(rows: &[Vec<f64>]) {
        let n = rows.len();
        for j in 0..rows[0].len() {
            let mut seen = vec![0; n];
            for r in rows {
                assert!((0.0..=1.0).contains(&r[j]));
                seen[((r[j] * n as f64).floor() as usize).min(n - 1)] += 1;
            }
            assert!(seen.iter().all(|c| *c == 1), "dimension {j}: {seen:?}");
        }
    }

    #[test]
    fn every_lhs_criterion_is_stratified() {
        let crits = [
            None,
            Some(LhsCriterion::Center),
            Some(LhsCriterion::Maximin),
            Some(LhsCriterion::CenterMaximin),
            Some(LhsCriterion::Correlation),
            Some(LhsCriterion::Ese),
        ];
        for c in crits {
            let rows = sample(&SamplerConfig::lhs(5, c, 7), 2).unwrap();
            assert_eq!(rows.len(), 5);
            assert_stratified(&rows);
        }
    }

    #[test]
    fn center_points_sit_on_stratum_midpoints() {
        let rows = sample(&SamplerConfig::lhs(4, Some(LhsCriterion::Center), 3), 3).unwrap();
        for r in rows {
            for v in r {
                assert!(((v * 4.0 - 0.5).fract()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_factorial_lattice() {
        let rows = full_factorial(&[3, 4]);
        assert_eq!(rows.len(), 12);
        assert!(rows.contains(&vec![0.5, 1.0 / 3.0]));
        assert!(rows.contains(&vec![1.0, 1.0]));
        let cfg = SamplerConfig {
            method: SamplingMethod::FullFactorial,
            criterion: None,
            seed: 0,
            n_points: 12,
        };
        let rows = sample(&cfg, 2).unwrap();
        assert_eq!(rows.len(), 12);
    }

    #[test]
    fn grid_sizes_fill_budget() {
        assert_eq!(grid_sizes(12, 2).iter().product::<usize>(), 12);
        assert_eq!(grid_sizes(27, 3), vec![3, 3, 3]);
        assert_eq!(grid_sizes(1, 4), vec![1, 1, 1, 1]);
        assert!(grid_sizes(100, 3).iter().product::<usize>() <= 100);
    }

    #[test]
    fn zero_points_is_an_error() {
        assert!(sample(&SamplerConfig::lhs(0, None, 0), 2).is_err());
        assert!(sample(&SamplerConfig::lhs(3, None, 0), 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        for c in [None, Some(LhsCriterion::Ese), Some(LhsCriterion::Maximin)] {
            let cfg = SamplerConfig::lhs(12, c, 99);
            assert_eq!(sample(&cfg, 4).unwrap(), sample(&cfg, 4).unwrap());
        }
    }

    #[test]
    fn maximin_beats_median_random_design() {
        // oracle: median min-distance of 20 plain random designs per seed
        for seed in 0..5u64 {
            let maximin = sample(&SamplerConfig::lhs(10, Some(LhsCriterion::Maximin), seed), 3).unwrap();
            let mut random: Vec<f64> = (0..20)
                .map(|k| {
                    let cfg = SamplerConfig {
                        method: SamplingMethod::Random,
                        criterion: None,
                        seed: 1000 + 20 * seed + k,
                        n_points: 10,
                    };
                    min_distance(&sample(&cfg, 3).unwrap())
                })
                .collect();
            random.sort_by(f64::total_cmp);
            let median = 0.5 * (random[9] + random[10]);
            assert!(min_distance(&maximin) >= median);
        }
    }

    #[test]
    fn ese_improves_on_its_start() {
        let plain = sample(&SamplerConfig::lhs(20, None, 5), 3).unwrap();
        let ese = sample(&SamplerConfig::lhs(20, Some(LhsCriterion::Ese), 5), 3).unwrap();
        assert!(min_distance(&ese) >= min_distance(&plain));
    }

    #[test]
    fn mlp_sampling_imputes_third_layer() {
        let problem = problems::mlp_problem();
        let pts = sample_valid(&problem.space, &SamplerConfig::lhs(100, Some(LhsCriterion::Ese), 42)).unwrap();
        assert_eq!(pts.len(), 100);
        for p in &pts {
            assert!(problem.space.is_valid(p));
            if p.values[0] < 3.0 {
                assert!(!p.acting[7]);
                assert_eq!(p.values[7], 50.0);
            }
        }
        // every layer count is represented
        for l in 1..=3 {
            assert!(pts.iter().any(|p| p.values[0] == l as f64));
        }
    }

    #[test]
    fn goldstein_initial_doe() {
        let problem = problems::goldstein_problem();
        let pts = sample_valid(&problem.space, &SamplerConfig::lhs(12, Some(LhsCriterion::Ese), 1)).unwrap();
        assert_eq!(pts.len(), 12);
        assert!(pts.iter().all(|p| problem.space.is_valid(p)));
    }

    #[test]
    fn continuous_space_is_a_scaled_lhs() {
        let space = DesignSpace::new(vec![
            crate::design_space::Variable::float("a", -1.0, 1.0),
            crate::design_space::Variable::float("b", 10.0, 20.0),
        ])
        .unwrap();
        let cfg = SamplerConfig::lhs(8, None, 3);
        let unit = sample(&cfg, 2).unwrap();
        let pts = sample_valid(&space, &cfg).unwrap();
        for (u, p) in unit.iter().zip(&pts) {
            assert!((p.values[0] - (-1.0 + 2.0 * u[0])).abs() < 1e-12);
            assert!((p.values[1] - (10.0 + 10.0 * u[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn per_meta_level_sampling() {
        let problem = problems::mlp_problem();
        let pts = sample_valid_per_meta_level(&problem.space, &SamplerConfig::lhs(99, None, 4), 0).unwrap();
        assert_eq!(pts.len(), 99);
        for l in 1..=3 {
            assert_eq!(pts.iter().filter(|p| p.values[0] == l as f64).count(), 33);
        }
        assert!(sample_valid_per_meta_level(&problem.space, &SamplerConfig::lhs(99, None, 4), 1).is_err());
    }

    #[test]
    fn expand_preserves_rows() {
        let doe = sample(&SamplerConfig::lhs(5, None, 1), 3).unwrap();
        let big = expand_lhs(&doe, 5, 2).unwrap();
        assert_eq!(big.len(), 10);
        assert_eq!(&big[..5], &doe[..]);
        assert_stratified(&big);
        assert!(expand_lhs(&doe, 0, 2).is_err());
    }

    #[test]
    fn expand_12_to_67() {
        let doe = sample(&SamplerConfig::lhs(12, Some(LhsCriterion::Ese), 1), 11).unwrap();
        let big = expand_lhs(&doe, 55, 3).unwrap();
        assert_eq!(big.len(), 67);
        assert_eq!(&big[..12], &doe[..]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lhs_is_stratified(n in 1usize..40, d in 1usize..6, seed in any::<u64>()) {
            let rows = sample(&SamplerConfig::lhs(n, None, seed), d).unwrap();
            assert_stratified(&rows);
        }

        #[test]
        fn expanded_new_rows_take_distinct_empty_strata(n in 2usize..20, add in 1usize..30, seed in any::<u64>()) {
            let doe = sample(&SamplerConfig::lhs(n, None, seed), 3).unwrap();
            let big = expand_lhs(&doe, add, seed ^ 1).unwrap();
            prop_assert_eq!(&big[..n], &doe[..]);
            let total = n + add;
            for j in 0..3 {
                let mut count = vec![0usize; total];
                for r in &big {
                    count[((r[j] * total as f64).floor() as usize).min(total - 1)] += 1;
                }
                // new rows never share a stratum with anything
                for r in &big[n..] {
                    let k = ((r[j] * total as f64).floor() as usize).min(total - 1);
                    prop_assert_eq!(count[k], 1);
                }
                // when the fine grid refines the coarse one, the full design stays Latin
                if total % n == 0 {
                    prop_assert!(count.iter().all(|c| *c <= 1));
                }
            }
        }

        #[test]
        fn sampled_mixed_points_are_valid(seed in any::<u64>(), n in 1usize..30) {
            for problem in problems::all_problems() {
                let pts = sample_valid(&problem.space, &SamplerConfig::lhs(n, None, seed)).unwrap();
                prop_assert!(pts.iter().all(|p| problem.space.is_valid(p)));
            }
        }
    }
}
