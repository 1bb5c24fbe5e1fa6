//! Non-negative least squares by accelerated projected gradient, followed by
//! an exact least-squares polish on the active set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Step size as a fraction of 1/L, where L is the gradient Lipschitz constant.
    pub step: f64,
    pub max_iterations: usize,
    /// Relative tolerance on the projected gradient.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { step: 1.0, max_iterations: 50_000, tolerance: 1e-12, restarts: 5, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// ‖N·x − e‖₂.
    pub residual: f64,
    pub converged: bool,
    pub polished: bool,
}

/// Minimizes ‖N·x − e‖² subject to x ≥ 0.
pub fn nnls(n: &DMatrix<f64>, e: &DVector<f64>, cfg: &SolverConfig) -> Solution {
    let (m, l) = n.shape();
    assert_eq!(m, e.len(), "row count mismatch");
    if l == 0 {
        return Solution { x: vec![], iterations: 0, residual: e.norm(), converged: true, polished: false };
    }
    // Column scaling makes the problem well conditioned for gradient steps.
    let scale: Vec<f64> = (0..l).map(|j| n.column(j).norm()).collect();
    let mut a = n.clone();
    for j in 0..l {
        if scale[j] > 0.0 {
            a.column_mut(j).scale_mut(1.0 / scale[j]);
        }
    }
    let g = a.transpose() * &a;
    let b = a.transpose() * e;
    let lip = g.symmetric_eigenvalues().max().max(f64::MIN_POSITIVE);
    let step = cfg.step / lip;
    let bnorm = b.norm().max(f64::MIN_POSITIVE);

    let ones = DVector::from_element(l, 1.0);
    let a1 = &a * &ones;
    let level = if a1.norm_squared() > 0.0 { (a1.dot(e) / a1.norm_squared()).max(0.0) } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // The problem is convex: the first iterate whose polish verifies the
    // optimality conditions is a global minimum, so later restarts are skipped.
    let mut best: Option<(f64, DVector<f64>, usize, bool)> = None;
    let mut polished = false;
    for _ in 0..cfg.restarts.max(1) {
        let y0 = DVector::from_fn(l, |j, _| if scale[j] > 0.0 { rng.gen::<f64>() * 2.0 * level } else { 0.0 });
        let (y, it, conv, exact) = fista(&g, &b, y0, step, cfg, bnorm, &scale, |y| polish(&a, e, &g, &b, y, &scale));
        let obj = objective(&g, &b, &y);
        if exact || best.as_ref().map_or(true, |(o, ..)| obj < *o) {
            best = Some((obj, y, it, conv));
        }
        if exact {
            polished = true;
            break;
        }
    }
    let (_, y, iterations, converged) = best.expect("at least one restart");
    if !converged {
        log::warn!("nnls did not converge after {iterations} iterations; returning best iterate");
    }
    let x: Vec<f64> = (0..l).map(|j| if scale[j] > 0.0 { y[j] / scale[j] } else { 0.0 }).collect();
    let residual = (n * DVector::from_column_slice(&x) - e).norm();
    Solution { x, iterations, residual, converged, polished }
}

fn objective(g: &DMatrix<f64>, b: &DVector<f64>, y: &DVector<f64>) -> f64 {
    0.5 * y.dot(&(g * y)) - b.dot(y)
}

#[allow(clippy::too_many_arguments)]
fn fista(
    g: &DMatrix<f64>,
    b: &DVector<f64>,
    mut y: DVector<f64>,
    step: f64,
    cfg: &SolverConfig,
    bnorm: f64,
    scale: &[f64],
    polish: impl Fn(&DVector<f64>) -> Option<DVector<f64>>,
) -> (DVector<f64>, usize, bool, bool) {
    let project = |v: &mut DVector<f64>| {
        for (j, x) in v.iter_mut().enumerate() {
            if *x < 0.0 || scale[j] == 0.0 {
                *x = 0.0;
            }
        }
    };
    let mut z = y.clone();
    let mut t = 1.0f64;
    let mut prev_obj = objective(g, b, &y);
    for it in 1..=cfg.max_iterations {
        if it % 50 == 0 {
            if let Some(p) = polish(&y) {
                if objective(g, b, &p) <= prev_obj + 1e-12 * prev_obj.abs() {
                    return (p, it, true, true);
                }
            }
            let gy = g * &y - b;
            let pg: f64 = y.iter().zip(gy.iter()).map(|(x, d)| if *x > 0.0 { d * d } else { d.min(0.0).powi(2) }).sum::<f64>().sqrt();
            if pg <= cfg.tolerance * bnorm {
                return (y, it, true, false);
            }
        }
        let grad = g * &z - b;
        let mut next = &z - grad * step;
        project(&mut next);
        let obj = objective(g, b, &next);
        // Adaptive restart when the objective goes up.
        if obj > prev_obj {
            t = 1.0;
            z = y.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + (&next - &y) * ((t - 1.0) / t_next);
        project(&mut z);
        y = next;
        t = t_next;
        prev_obj = obj;
    }
    (y, cfg.max_iterations, false, false)
}

/// Least squares restricted to the support of `y`, accepted only if the
/// result stays non-negative and satisfies the optimality conditions.
fn polish(a: &DMatrix<f64>, e: &DVector<f64>, g: &DMatrix<f64>, b: &DVector<f64>, y: &DVector<f64>, scale: &[f64]) -> Option<DVector<f64>> {
    let l = a.ncols();
    // Try the unconstrained minimum-norm solution first, then the support.
    let all: Vec<usize> = (0..l).filter(|&j| scale[j] > 0.0).collect();
    let thresh = 1e-9 * y.amax().max(f64::MIN_POSITIVE);
    let support: Vec<usize> = all.iter().copied().filter(|&j| y[j] > thresh).collect();
    let gtol = 1e-8 * b.amax().max(f64::MIN_POSITIVE);
    let optimal = |x: &DVector<f64>| {
        let grad = g * x - b;
        (0..l).all(|j| scale[j] == 0.0 || x[j] > 0.0 || grad[j] >= -gtol)
    };
    for set in [all, support.clone()] {
        if set.is_empty() {
            continue;
        }
        let sub = a.select_columns(&set);
        let svd = sub.svd(true, true);
        let tol = 1e-10 * svd.singular_values.max();
        let Ok(sol) = svd.solve(e, tol) else { continue };
        if sol.iter().any(|v| *v < 0.0) {
            continue;
        }
        let mut full = DVector::zeros(l);
        for (k, &j) in set.iter().enumerate() {
            full[j] = sol[k];
        }
        if optimal(&full) {
            return Some(full);
        }
    }
    active_set(g, b, y, &support, scale, gtol).filter(|x| optimal(x))
}

/// Lawson-Hanson active-set iterations on the normal equations, started
/// from the support of a feasible iterate.
fn active_set(g: &DMatrix<f64>, b: &DVector<f64>, y: &DVector<f64>, support: &[usize], scale: &[f64], gtol: f64) -> Option<DVector<f64>> {
    let l = g.nrows();
    let mut x = DVector::from_fn(l, |j, _| if support.contains(&j) { y[j] } else { 0.0 });
    let mut passive: Vec<usize> = support.to_vec();
    let solve_on = |set: &[usize]| -> Option<DVector<f64>> {
        let gp = g.select_rows(set).select_columns(set);
        let bp = DVector::from_fn(set.len(), |k, _| b[set[k]]);
        let svd = gp.svd(true, true);
        let tol = 1e-12 * svd.singular_values.max();
        let zp = svd.solve(&bp, tol).ok()?;
        let mut z = DVector::zeros(l);
        for (k, &j) in set.iter().enumerate() {
            z[j] = zp[k];
        }
        Some(z)
    };
    for _ in 0..3 * l + 10 {
        // Inner loop: move towards the unconstrained optimum on the passive
        // set, dropping coordinates that hit zero.
        for _ in 0..l + 1 {
            if passive.is_empty() {
                break;
            }
            let z = solve_on(&passive)?;
            if passive.iter().all(|&j| z[j] > 0.0) {
                x = z;
                break;
            }
            let alpha = passive
                .iter()
                .filter(|&&j| z[j] <= 0.0)
                .map(|&j| x[j] / (x[j] - z[j]))
                .fold(f64::INFINITY, f64::min);
            x = &x + (z - &x) * alpha;
            passive.retain(|&j| x[j] > 1e-15);
            for j in 0..l {
                if !passive.contains(&j) {
                    x[j] = 0.0;
                }
            }
        }
        let w = b - g * &x;
        let next = (0..l)
            .filter(|j| scale[*j] > 0.0 && !passive.contains(j))
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
            .filter(|&j| w[j] > gtol);
        match next {
            Some(j) => passive.push(j),
            None => return Some(x),
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(rows: &[&[f64]], e: &[f64]) -> Vec<f64> {
        let n = DMatrix::from_row_slice(rows.len(), rows[0].len(), &rows.concat());
        nnls(&n, &DVector::from_column_slice(e), &SolverConfig::default()).x
    }

    #[test]
    fn diagonal_system() {
        let x = solve(&[&[2.0, 0.0], &[0.0, 4.0]], &[10.0, 8.0]);
        assert!((x[0] - 5.0).abs() < 1e-9 && (x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn negative_target_clamps_to_zero() {
        let x = solve(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]], &[-3.0, 2.0, -1.0]);
        assert!(x.iter().all(|v| *v >= 0.0));
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn zero_column_stays_zero() {
        let x = solve(&[&[1.0, 0.0], &[2.0, 0.0]], &[3.0, 6.0]);
        assert!((x[0] - 3.0).abs() < 1e-9);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn matches_brute_force_grid_on_small_system() {
        let rows: [&[f64]; 4] = [&[1.0, 2.0, 0.5], &[3.0, 1.0, 1.0], &[0.0, 1.0, 4.0], &[2.0, 2.0, 2.0]];
        let e = [1.0, 5.0, -2.0, 3.0];
        let x = solve(&rows, &e);
        let obj = |c: &[f64]| rows.iter().zip(e).map(|(r, t)| (r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() - t).powi(2)).sum::<f64>();
        let mut best = f64::INFINITY;
        for i in 0..=60 {
            for j in 0..=60 {
                for k in 0..=60 {
                    best = best.min(obj(&[i as f64 * 0.05, j as f64 * 0.05, k as f64 * 0.05]));
                }
            }
        }
        assert!(obj(&x) <= best + 1e-12);
    }
}
