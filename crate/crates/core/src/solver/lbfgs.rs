//! Limited-memory BFGS with backtracking Armijo line search.

use std::collections::VecDeque;

/// Backtracking parameters: accept `t` once
/// `f(x + t d) <= f(x) + c1 t <g, d>`, starting from `t = 1` and shrinking.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoParams {
    pub c1: f64,
    pub shrink: f64,
    pub max_halvings: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            shrink: 0.5,
            max_halvings: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsParams {
    pub max_iters: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub armijo: ArmijoParams,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        Self {
            max_iters: 100,
            memory: 10,
            grad_tol: 1e-10,
            armijo: ArmijoParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbfgsStatus {
    GradientTolerance,
    MaxIterations,
    /// No step satisfied the Armijo condition; the returned iterate is the
    /// last accepted one.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
    /// Objective at the start and after every accepted step.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: returns `-H g`.
fn direction(grad: &[f64], memory: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for pair in memory.iter().rev() {
        let alpha = pair.rho * dot(&pair.s, &q);
        q.iter_mut().zip(&pair.y).for_each(|(qi, yi)| *qi -= alpha * yi);
        alphas.push(alpha);
    }
    let gamma = memory
        .back()
        .map(|p| dot(&p.s, &p.y) / dot(&p.y, &p.y))
        .unwrap_or(1.0);
    q.iter_mut().for_each(|v| *v *= gamma);
    for (pair, alpha) in memory.iter().zip(alphas.iter().rev()) {
        let beta = pair.rho * dot(&pair.y, &q);
        q.iter_mut().zip(&pair.s).for_each(|(qi, si)| *qi += (alpha - beta) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimize `f` from `x0`. `f` returns the value and gradient at a point.
pub fn lbfgs_minimize<F>(mut f: F, x0: Vec<f64>, params: &LbfgsParams) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut value, mut grad) = f(&x);
    let mut evaluations = 1;
    let mut history = vec![value];
    let mut memory: VecDeque<Pair> = VecDeque::with_capacity(params.memory);
    let mut status = LbfgsStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < params.max_iters {
        let gnorm = norm(&grad);
        if gnorm <= params.grad_tol {
            status = LbfgsStatus::GradientTolerance;
            break;
        }
        let mut d = if memory.is_empty() {
            // Unit-length first step.
            grad.iter().map(|g| -g / gnorm.max(1.0)).collect()
        } else {
            direction(&grad, &memory)
        };
        let mut slope = dot(&grad, &d);
        if !(slope < 0.0) {
            memory.clear();
            d = grad.iter().map(|g| -g / gnorm.max(1.0)).collect();
            slope = dot(&grad, &d);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=params.armijo.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (tv, tg) = f(&trial);
            evaluations += 1;
            if tv.is_finite() && tv <= value + params.armijo.c1 * step * slope {
                accepted = Some((trial, tv, tg));
                break;
            }
            step *= params.armijo.shrink;
        }
        let Some((next, next_value, next_grad)) = accepted else {
            status = LbfgsStatus::LineSearchFailed;
            break;
        };

        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if memory.len() == params.memory.max(1) {
                memory.pop_front();
            }
            memory.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        x = next;
        value = next_value;
        grad = next_grad;
        history.push(value);
        iterations += 1;
    }

    if status == LbfgsStatus::MaxIterations && norm(&grad) <= params.grad_tol {
        status = LbfgsStatus::GradientTolerance;
    }
    LbfgsOutcome {
        grad_norm: norm(&grad),
        x,
        value,
        iterations,
        evaluations,
        status,
        history,
    }
}
