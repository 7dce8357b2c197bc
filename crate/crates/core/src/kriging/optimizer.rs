//! Box-constrained quasi-Newton minimization (projected L-BFGS with
//! backtracking), used for likelihood maximization.

use std::collections::VecDeque;

const MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected gradient: zero where the gradient pushes against an active bound.
fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
///
/// `f` returns the value and gradient, or `None` where the objective is not
/// defined (treated as +∞). Returns `None` when the start itself fails.
pub fn minimize_box(
    mut f: impl FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_evals: usize,
) -> Option<Minimum> {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x)?;
    let mut evals = 1;
    if !fx.is_finite() {
        return None;
    }
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut stalls = 0;

    while evals < max_evals {
        let pg = projected_gradient(&x, &g, lower, upper);
        if pg.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-10 {
            break;
        }

        // two-loop recursion on the free variables
        let mut d: Vec<f64> = pg.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &d);
            for i in 0..n {
                d[i] -= a * y[i];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for i in 0..n {
                d[i] += (a - b) * s[i];
            }
        }
        for i in 0..n {
            if pg[i] == 0.0 && g[i] != 0.0 {
                d[i] = 0.0;
            }
        }
        if dot(&d, &g) >= 0.0 {
            memory.clear();
            d = pg.iter().map(|v| -v).collect();
        }
        let mut step = if memory.is_empty() {
            let norm = dot(&d, &d).sqrt();
            (1.0 / norm).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            if evals >= max_evals {
                break;
            }
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lower, upper);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if moved.iter().all(|m| *m == 0.0) {
                break;
            }
            evals += 1;
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + ARMIJO * dot(&g, &moved) {
                    accepted = Some((trial, ft, gt, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, ft, gt, s)) = accepted else {
            if memory.is_empty() {
                break;
            }
            memory.clear();
            continue;
        };
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(1e-300).sqrt() * dot(&s, &s).sqrt() {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - ft;
        x = trial;
        fx = ft;
        g = gt;
        if improvement <= 1e-12 * fx.abs().max(1.0) {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Some(Minimum {
        x,
        value: fx,
        evaluations: evals,
    })
}
