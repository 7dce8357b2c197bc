//! Built-in benchmark problems.

use std::f64::consts::PI;

use crate::design_space::{DesignPoint, DesignSpace, Variable};
use crate::error::{Error, Result};

/// A known optimum and how it was established.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub y: f64,
    pub source: &'static str,
}

/// A design space with a deterministic objective.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: &'static str,
    pub space: DesignSpace,
    pub known_optimum: Option<KnownOptimum>,
    evaluator: fn(&[f64]) -> f64,
}

impl Problem {
    /// Evaluates a valid point.
    pub fn evaluate(&self, point: &DesignPoint) -> Result<f64> {
        self.space.validate(point)?;
        let y = (self.evaluator)(&point.values);
        if !y.is_finite() {
            return Err(Error::Evaluation {
                point: point.values.clone(),
                message: format!("{} returned {y}", self.name),
            });
        }
        Ok(y)
    }

    /// Corrects a raw vector, then evaluates it.
    pub fn evaluate_raw(&self, raw: &[f64]) -> Result<f64> {
        self.evaluate(&self.space.correct(raw)?)
    }
}

pub const PROBLEM_NAMES: [&str; 4] = ["toy", "goldstein-hier", "branin-mixed", "mlp"];

pub fn all_problems() -> Vec<Problem> {
    vec![toy_problem(), goldstein_problem(), branin_problem(), mlp_problem()]
}

pub fn problem_by_name(name: &str) -> Result<Problem> {
    all_problems()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "unknown problem '{name}' (expected one of {})",
                PROBLEM_NAMES.join(", ")
            ))
        })
}

/// One continuous and one 10-level categorical variable.
pub fn toy_eval(x: f64, c1: usize) -> Result<f64> {
    let y = match c1 {
        0 => (3.6 * PI * (x - 2.0)).cos() + x - 1.0,
        1 => 2.0 * (1.1 * PI * x.exp()).cos() - x / 2.0 + 2.0,
        2 => (2.0 * PI * x).cos() + 0.5 * x,
        3 => x * ((3.4 * PI * (x - 1.0)).cos() - (x - 1.0) / 2.0),
        4 => -x * x / 2.0,
        5 => 2.0 * (0.25 * PI * (-x.powi(4)).exp()).cos().powi(2) - x / 2.0 + 1.0,
        6 => x * (3.4 * PI * x).cos() - x / 2.0 + 1.0,
        7 => -x * ((3.5 * PI * x).cos() + x / 2.0) + 2.0,
        8 => -x.powi(5) / 2.0 + 1.0,
        9 => -(2.5 * PI * x).cos().powi(2) * x.sqrt() - 0.5 * (x + 0.5).ln() - 1.3,
        _ => return Err(Error::InvalidInput(format!("toy level {c1} out of range 0..=9"))),
    };
    Ok(y)
}

pub fn toy_problem() -> Problem {
    let space = DesignSpace::new(vec![
        Variable::float("x", 0.0, 1.0),
        Variable::categorical("c1", (0..10).map(|i| i.to_string()).collect::<Vec<_>>()),
    ])
    .expect("valid toy space");
    Problem {
        name: "toy",
        space,
        known_optimum: None,
        evaluator: |v| toy_eval(v[0], v[1] as usize).unwrap_or(f64::NAN),
    }
}

/// Continuous core of the hierarchical Goldstein function.
#[allow(clippy::too_many_arguments)]
pub fn gold_cont(x1: f64, x2: f64, x3: f64, x4: f64, z3: i32, z4: i32, x5: f64, w2: f64) -> f64 {
    53.3108 + 0.184901 * x1 - 5.02914 * x1.powi(3) * 1e-6 + 7.72522 * x1.powi(z3) * 1e-8
        - 0.0870775 * x2
        - 0.106959 * x3
        + 7.98772 * x3.powi(z4) * 1e-6
        + 0.00242482 * x4
        + 1.32851 * x4.powi(3) * 1e-6
        - 0.00146393 * x1 * x2
        - 0.00301588 * x1 * x3
        - 0.00272291 * x1 * x4
        + 0.0017004 * x2 * x3
        + 0.0038428 * x2 * x4
        - 0.000198969 * x3 * x4
        + 1.86025 * x1 * x2 * x3 * 1e-5
        - 1.88719 * x1 * x2 * x4 * 1e-6
        + 2.50923 * x1 * x3 * x4 * 1e-5
        - 5.62199 * x2 * x3 * x4 * 1e-5
        + w2 * (5.0 * (2.0 * PI / 100.0 * x5).cos() - 2.0)
}

const GOLD_LEVELS: [f64; 3] = [20.0, 50.0, 80.0];

/// Hierarchical Goldstein function, arguments in variable order
/// `(x1, x2, x3, x4, z1, z2, z3, z4, x5, w1, w2)`.
pub fn goldstein_eval(v: &[f64]) -> Result<f64> {
    if v.len() != 11 {
        return Err(Error::DimensionMismatch { expected: 11, got: v.len() });
    }
    let [x1, x2, x3, x4, z1, z2, z3, z4, x5, w1, w2] = [v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]];
    let level = |z: f64, n: usize, name: &str| -> Result<usize> {
        if z.fract() == 0.0 && z >= 0.0 && (z as usize) < n {
            Ok(z as usize)
        } else {
            Err(Error::InvalidInput(format!("{name} = {z} out of range")))
        }
    };
    let (z1, z2) = (level(z1, 3, "z1")?, level(z2, 3, "z2")?);
    let (z3, z4) = (level(z3, 3, "z3")? as i32, level(z4, 3, "z4")? as i32);
    let w1 = level(w1, 4, "w1")?;
    let w2 = level(w2, 2, "w2")? as f64;
    let y = match w1 {
        0 => gold_cont(x1, x2, GOLD_LEVELS[z1], GOLD_LEVELS[z2], z3, z4, x5, w2),
        1 => gold_cont(x1, x2, x3, GOLD_LEVELS[z2], z3, z4, x5, w2),
        2 => match z1 {
            // transcribed as published: the z1 = 1 branch passes (x1, 50, x2, ...)
            // where the other two branches pass (x1, x2, level, ...)
            1 => gold_cont(x1, 50.0, x2, x4, z3, z4, x5, w2),
            _ => gold_cont(x1, x2, GOLD_LEVELS[z1], x4, z3, z4, x5, w2),
        },
        _ => gold_cont(x1, x2, x3, x4, z3, z4, x5, w2),
    };
    Ok(y)
}

pub fn goldstein_space() -> DesignSpace {
    let mut space = DesignSpace::new(vec![
        Variable::float("x1", 0.0, 100.0),
        Variable::float("x2", 0.0, 100.0),
        Variable::float("x3", 0.0, 100.0),
        Variable::float("x4", 0.0, 100.0),
        Variable::integer("z1", 0, 2),
        Variable::integer("z2", 0, 2),
        Variable::integer("z3", 0, 2),
        Variable::integer("z4", 0, 2),
        Variable::float("x5", 0.0, 100.0),
        Variable::categorical("w1", ["0", "1", "2", "3"]),
        Variable::categorical("w2", ["0", "1"]),
    ])
    .expect("valid Goldstein space");
    let rules: [(usize, &[f64]); 4] = [(2, &[1.0, 3.0]), (3, &[2.0, 3.0]), (4, &[0.0, 2.0]), (5, &[0.0, 1.0])];
    for (decreed, values) in rules {
        space.declare_decreed_var(decreed, 9, values).expect("valid Goldstein rule");
    }
    space
}

pub fn goldstein_problem() -> Problem {
    Problem {
        name: "goldstein-hier",
        space: goldstein_space(),
        known_optimum: None,
        evaluator: |v| goldstein_eval(v).unwrap_or(f64::NAN),
    }
}

/// Standard Branin function.
pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

/// Branin with an integer first variable.
pub fn branin_problem() -> Problem {
    let space = DesignSpace::new(vec![Variable::integer("x1", -5, 10), Variable::float("x2", 0.0, 15.0)])
        .expect("valid Branin space");
    // at x1 = 3 the quadratic in x2 vanishes at x2 = b·9 - 3c + 6
    let x2 = 5.1 / (4.0 * PI * PI) * 9.0 - 15.0 / PI + 6.0;
    Problem {
        name: "branin-mixed",
        space,
        known_optimum: Some(KnownOptimum {
            x: vec![3.0, x2],
            y: branin(3.0, x2),
            source: "closed-form minimizer over x2 for each integer x1",
        }),
        evaluator: |v| branin(v[0], v[1]),
    }
}

fn mlp_variables() -> Vec<Variable> {
    vec![
        Variable::integer("l", 1, 3),
        Variable::float("r", 1e-5, 1e-2),
        Variable::float("alpha", 0.0, 1.0),
        Variable::categorical("a", ["ReLU", "Sigmoid", "Tanh"]),
        Variable::integer("b", 3, 8),
        Variable::integer("n1", 50, 55),
        Variable::integer("n2", 50, 55),
        Variable::integer("n3", 50, 55),
    ]
}

/// Neural-network hyperparameter space: the number of layers `l` activates
/// the second and third layer sizes. `b` is the base-2 exponent of the batch size.
pub fn mlp_space() -> DesignSpace {
    let mut space = DesignSpace::new(mlp_variables()).expect("valid MLP space");
    space.declare_decreed_var(6, 0, &[2.0, 3.0]).expect("valid rule");
    space.declare_decreed_var(7, 0, &[3.0]).expect("valid rule");
    space
}

/// Same variables with the first layer size also declared decreed by `l`
/// (active for every layer count).
pub fn mlp_layered_space() -> DesignSpace {
    let mut space = DesignSpace::new(mlp_variables()).expect("valid MLP space");
    space.declare_decreed_var(5, 0, &[1.0, 2.0, 3.0]).expect("valid rule");
    space.declare_decreed_var(6, 0, &[2.0, 3.0]).expect("valid rule");
    space.declare_decreed_var(7, 0, &[3.0]).expect("valid rule");
    space
}

/// Smooth stand-in objective for the MLP space.
pub fn mlp_eval(v: &[f64]) -> f64 {
    let layers = v[0] as usize;
    let r = v[1];
    let alpha = v[2];
    let activation = v[3];
    let batch_exp = v[4];
    let widths: f64 = v[5..5 + layers.min(3)].iter().map(|n| (n - 52.5).powi(2) / 25.0).sum();
    (2.0 * PI * r * 1e2).sin() + alpha * alpha + 0.1 * activation + batch_exp / 8.0 + widths
}

pub fn mlp_problem() -> Problem {
    Problem {
        name: "mlp",
        space: mlp_space(),
        known_optimum: None,
        evaluator: mlp_eval,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::Role;
    use proptest::prelude::*;

    #[test]
    fn toy_values() {
        assert_eq!(toy_eval(0.0, 4).unwrap(), 0.0);
        assert_eq!(toy_eval(0.0, 8).unwrap(), 1.0);
        assert!((toy_eval(0.5, 2).unwrap() + 0.75).abs() < 1e-15);
        assert!(toy_eval(0.5, 10).is_err());
    }

    #[test]
    fn toy_is_finite_on_grid() {
        for c in 0..10 {
            for i in 0..=1000 {
                assert!(toy_eval(i as f64 / 1000.0, c).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn goldstein_constant_terms() {
        // x = 0, z3 = z4 = 1, w2 = 0, w1 = 3: every term but the constant vanishes
        let v = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 3.0, 0.0];
        assert_eq!(goldstein_eval(&v).unwrap(), 53.3108);
        assert_eq!(gold_cont(0.0, 0.0, 0.0, 0.0, 1, 1, 0.0, 0.0), 53.3108);
    }

    #[test]
    fn goldstein_w2_toggle() {
        let mut v = [10.0, 20.0, 30.0, 40.0, 1.0, 2.0, 2.0, 0.0, 0.0, 3.0, 0.0];
        let off = goldstein_eval(&v).unwrap();
        v[10] = 1.0;
        let on = goldstein_eval(&v).unwrap();
        assert!((on - off - 3.0).abs() < 1e-12);
    }

    #[test]
    fn goldstein_dispatch() {
        let v = [11.0, 22.0, 33.0, 44.0, 0.0, 0.0, 2.0, 1.0, 55.0, 3.0, 1.0];
        assert_eq!(goldstein_eval(&v).unwrap(), gold_cont(11.0, 22.0, 33.0, 44.0, 2, 1, 55.0, 1.0));
        let mut w0 = v;
        w0[9] = 0.0;
        w0[4] = 2.0;
        w0[5] = 1.0;
        assert_eq!(goldstein_eval(&w0).unwrap(), gold_cont(11.0, 22.0, 80.0, 50.0, 2, 1, 55.0, 1.0));
        let mut w2 = v;
        w2[9] = 2.0;
        w2[4] = 1.0;
        assert_eq!(goldstein_eval(&w2).unwrap(), gold_cont(11.0, 50.0, 22.0, 44.0, 2, 1, 55.0, 1.0));
        assert!(goldstein_eval(&[0.0; 10]).is_err());
    }

    #[test]
    fn goldstein_roles() {
        let space = goldstein_space();
        let roles: Vec<Role> = (0..11).map(|i| space.role(i)).collect();
        use Role::*;
        assert_eq!(
            roles,
            vec![Neutral, Neutral, Decreed, Decreed, Decreed, Decreed, Neutral, Neutral, Neutral, Meta, Neutral]
        );
    }

    #[test]
    fn branin_values() {
        // second transcription, written out in full
        let reference = |x1: f64, x2: f64| {
            let a = x2 - 5.1 * x1 * x1 / (4.0 * PI * PI) + 5.0 * x1 / PI - 6.0;
            a * a + 10.0 * (1.0 - 1.0 / (8.0 * PI)) * x1.cos() + 10.0
        };
        assert!((branin(0.0, 0.0) - reference(0.0, 0.0)).abs() < 1e-12);
        assert!(branin(0.0, 0.0) > 0.0);
        assert!((branin(PI, 2.275) - 0.397887).abs() < 1e-5);
        // dense grid over x2 for every integer x1
        let mut best = f64::INFINITY;
        for x1 in -5..=10 {
            for i in 0..=150_000 {
                best = best.min(branin(x1 as f64, i as f64 * 1e-4));
            }
        }
        let opt = branin_problem().known_optimum.unwrap();
        assert!((best - opt.y).abs() < 1e-6);
        assert!((opt.y - 0.494).abs() < 1e-3);
        assert_eq!(opt.x[0], 3.0);
    }

    #[test]
    fn mlp_shape() {
        let p = mlp_problem();
        assert_eq!(p.space.n_vars(), 8);
        assert_eq!(p.space.rules().len(), 2);
        assert_eq!(mlp_layered_space().rules().len(), 3);
    }

    #[test]
    fn lookup_by_name() {
        for name in PROBLEM_NAMES {
            assert_eq!(problem_by_name(name).unwrap().name, name);
        }
        assert!(problem_by_name("rosenbrock").is_err());
    }

    #[test]
    fn evaluate_rejects_invalid_points() {
        let p = toy_problem();
        let bad = DesignPoint { values: vec![2.0, 0.0], acting: vec![true, true] };
        assert!(p.evaluate(&bad).is_err());
        assert_eq!(p.evaluate_raw(&[0.0, 4.0]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn goldstein_ignores_non_acting(raw in proptest::collection::vec(0.0f64..1.0, 11), perturb in 0.0f64..1.0) {
            let space = goldstein_space();
            let problem = goldstein_problem();
            let unit_raw = space.unit_to_raw(&raw).unwrap();
            let p = space.correct(&unit_raw).unwrap();
            let y = problem.evaluate(&p).unwrap();
            let mut q = p.clone();
            for i in 0..11 {
                if !q.acting[i] {
                    q.values[i] = space.variables()[i].correct_value(perturb * 100.0);
                }
            }
            prop_assert_eq!(goldstein_eval(&q.values).unwrap(), y);
        }

        #[test]
        fn mlp_ignores_non_acting(raw in proptest::collection::vec(0.0f64..1.0, 8), n in 50i32..=55) {
            let space = mlp_space();
            let p = space.correct(&space.unit_to_raw(&raw).unwrap()).unwrap();
            let mut q = p.values.clone();
            for i in 0..8 {
                if !p.acting[i] {
                    q[i] = n as f64;
                }
            }
            prop_assert_eq!(mlp_eval(&q), mlp_eval(&p.values));
        }

        #[test]
        fn evaluators_are_deterministic(raw in proptest::collection::vec(0.0f64..1.0, 11)) {
            for problem in all_problems() {
                let r = &raw[..problem.space.n_vars()];
                let x = problem.space.unit_to_raw(r).unwrap();
                let a = problem.evaluate_raw(&x).unwrap();
                let b = problem.evaluate_raw(&x).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
