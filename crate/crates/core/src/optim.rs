//! Derivative-free minimization: Nelder–Mead with dimension-adaptive
//! coefficients (reflection 1, expansion 1 + 2/n, contraction 0.75 − 1/(2n),
//! shrink 1 − 1/n). Objectives signal infeasible points by returning +∞.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Converged once every vertex lies within this ∞-norm distance of the best.
    pub tol: f64,
    pub max_evals: usize,
    /// Initial simplex edge, per coordinate max(step, 0.1 |x0_i|).
    pub step: f64,
    /// After convergence, restart once from the optimum with a smaller simplex
    /// and keep the result if it improves.
    pub polish: bool,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_evals: 5000, step: 0.2, polish: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes f from x0. On non-convergence the search restarts once from the
/// best point found.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> OptimResult {
    let mut total = 0;
    let first = run(&mut f, x0, opts.step, opts.tol, opts.max_evals, &mut total);
    let mut best = first;
    if !best.converged || opts.polish {
        let budget = opts.max_evals;
        let step = if best.converged { 0.25 * opts.step } else { opts.step };
        let second = run(&mut f, &best.x.clone(), step, opts.tol, budget, &mut total);
        let converged = second.converged || (best.converged && second.fx >= best.fx);
        if second.fx < best.fx {
            best = second;
        }
        best.converged = converged;
    }
    best.evals = total;
    best
}

fn run<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    step: f64,
    tol: f64,
    max_evals: usize,
    total: &mut usize,
) -> OptimResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let fx = eval(x0, &mut evals);
        *total += evals;
        return OptimResult { x: vec![], fx, evals, converged: true };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) =
        if n >= 2 { (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf) } else { (1.0, 2.0, 0.5, 0.5) };

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step.max(0.1 * x0[i].abs());
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();
    // an infeasible starting vertex is pulled halfway toward x0 until feasible
    for i in 1..=n {
        let mut tries = 0;
        while vals[i] == f64::INFINITY && tries < 30 {
            for k in 0..n {
                pts[i][k] = 0.5 * (pts[i][k] + x0[k]);
            }
            vals[i] = eval(&pts[i], &mut evals);
            tries += 1;
        }
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut xr = vec![0.0; n];
    let mut xe = vec![0.0; n];
    let mut xc = vec![0.0; n];
    loop {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let diam = pts
            .iter()
            .map(|p| p.iter().zip(&pts[best]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diam <= tol && vals[best].is_finite() {
            converged = true;
            break;
        }
        if evals >= max_evals {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for k in 0..n {
                centroid[k] += pts[i][k] / nf;
            }
        }
        for k in 0..n {
            xr[k] = centroid[k] + alpha * (centroid[k] - pts[worst][k]);
        }
        let fr = eval(&xr, &mut evals);
        if fr < vals[best] {
            for k in 0..n {
                xe[k] = centroid[k] + beta * (xr[k] - centroid[k]);
            }
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                pts[worst].copy_from_slice(&xe);
                vals[worst] = fe;
            } else {
                pts[worst].copy_from_slice(&xr);
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second_worst] {
            pts[worst].copy_from_slice(&xr);
            vals[worst] = fr;
            continue;
        }
        // contraction, outside if the reflection improved on the worst
        let outside = fr < vals[worst];
        for k in 0..n {
            xc[k] = if outside {
                centroid[k] + gamma * (xr[k] - centroid[k])
            } else {
                centroid[k] - gamma * (centroid[k] - pts[worst][k])
            };
        }
        let fc = eval(&xc, &mut evals);
        if (outside && fc <= fr) || (!outside && fc < vals[worst]) {
            pts[worst].copy_from_slice(&xc);
            vals[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        let xb = pts[best].clone();
        for &i in &order[1..] {
            for k in 0..n {
                pts[i][k] = xb[k] + delta * (pts[i][k] - xb[k]);
            }
            vals[i] = eval(&pts[i], &mut evals);
        }
    }
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    *total += evals;
    OptimResult { x: pts[order[0]].clone(), fx: vals[order[0]], evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize(
            |x| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2) + (x[2] - 0.5).powi(2),
            &[0.0, 0.0, 0.0],
            &NelderMeadOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-7 && (r.x[1] + 2.0).abs() < 1e-7 && (r.x[2] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &NelderMeadOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn one_dimensional_with_barrier() {
        let r = minimize(
            |x| if x[0] <= 0.0 { f64::INFINITY } else { x[0] - x[0].ln() },
            &[3.0],
            &NelderMeadOptions::default(),
        );
        assert!((r.x[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = NelderMeadOptions { max_evals: 20, polish: false, ..Default::default() };
        let r = minimize(|x| x.iter().map(|v| v * v).sum(), &[5.0; 6], &opts);
        assert!(!r.converged);
        assert!(r.evals <= 2 * (20 + 8));
    }

    #[test]
    fn monotone_from_start() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(4) + (x[1] * x[0]).powi(2);
        let x0 = [0.5, 0.5];
        let r = minimize(f, &x0, &NelderMeadOptions::default());
        assert!(r.fx <= f(&x0));
    }
}
