//! Quadrature primitives: Gauss-Legendre panels, adaptive refinement on
//! intervals and axis-aligned boxes.

use once_cell::sync::Lazy;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature failed to converge to relative tolerance {tol} (best error {err})")]
    NoConvergence { tol: f64, err: f64 },
    #[error("invalid integration domain")]
    BadDomain,
}

/// Gauss-Legendre nodes/weights on [-1, 1], computed once by Newton
/// iteration on the Legendre polynomial.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

pub static GL8: Lazy<(Vec<f64>, Vec<f64>)> = Lazy::new(|| gauss_legendre(8));
pub static GL16: Lazy<(Vec<f64>, Vec<f64>)> = Lazy::new(|| gauss_legendre(16));

/// Single Gauss-Legendre panel on [a, b].
pub fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        acc += w * f(c + h * x);
    }
    acc * h
}

/// Adaptive 1-d integration: GL16 on the panel versus the two halves,
/// bisecting until the local discrepancy fits the error budget.
pub fn adaptive_1d<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64, QuadError> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadError::BadDomain);
    }
    if a == b {
        return Ok(0.0);
    }
    let rough = gl_panel(f, a, b, &GL16).abs();
    let abs_tol = rel_tol * rough.max(1e-300);
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    let mut stack = vec![(a, b, abs_tol, 0usize)];
    while let Some((lo, hi, budget, depth)) = stack.pop() {
        let whole = gl_panel(f, lo, hi, &GL16);
        let mid = 0.5 * (lo + hi);
        let left = gl_panel(f, lo, mid, &GL16);
        let right = gl_panel(f, mid, hi, &GL16);
        let refined = left + right;
        let err = (refined - whole).abs();
        if err <= budget || depth >= 52 {
            total += refined;
            if depth >= 52 {
                worst = worst.max(err);
            }
        } else {
            stack.push((lo, mid, budget * 0.5, depth + 1));
            stack.push((mid, hi, budget * 0.5, depth + 1));
        }
    }
    if worst > abs_tol.max(rel_tol * total.abs()) {
        return Err(QuadError::NoConvergence {
            tol: rel_tol,
            err: worst / total.abs().max(1e-300),
        });
    }
    Ok(total)
}

/// Tensor-product Gauss-Legendre panel over an axis-aligned box.
pub fn gl_box<F: Fn(&[f64]) -> f64>(f: &F, rect: &[(f64, f64)], rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let d = rect.len();
    let n = rule.0.len();
    let mut pt = vec![0.0; d];
    let mut idx = vec![0usize; d];
    let mut acc = 0.0;
    let jac: f64 = rect.iter().map(|&(a, b)| 0.5 * (b - a)).product();
    'grid: loop {
        let mut w = 1.0;
        for j in 0..d {
            let (a, b) = rect[j];
            pt[j] = 0.5 * (a + b) + 0.5 * (b - a) * rule.0[idx[j]];
            w *= rule.1[idx[j]];
        }
        acc += w * f(&pt);
        let mut j = d;
        while j > 0 {
            j -= 1;
            if idx[j] + 1 < n {
                idx[j] += 1;
                for r in j + 1..d {
                    idx[r] = 0;
                }
                continue 'grid;
            }
        }
        break;
    }
    acc * jac
}

/// Adaptive box integration by bisection of the longest axis; the local
/// error estimate compares the whole-box panel against its two halves.
pub fn adaptive_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    rect: &[(f64, f64)],
    rel_tol: f64,
) -> Result<f64, QuadError> {
    if rect.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite()) || a > b) {
        return Err(QuadError::BadDomain);
    }
    if rect.iter().any(|&(a, b)| a == b) {
        return Ok(0.0);
    }
    let rough = gl_box(f, rect, &GL8).abs();
    let abs_tol = rel_tol * rough.max(1e-300);
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    let mut stack = vec![(rect.to_vec(), abs_tol, 0usize)];
    while let Some((r, budget, depth)) = stack.pop() {
        let whole = gl_box(f, &r, &GL8);
        // split the longest axis
        let (j, _) = r
            .iter()
            .enumerate()
            .map(|(j, &(a, b))| (j, b - a))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        let mid = 0.5 * (r[j].0 + r[j].1);
        let mut left = r.clone();
        left[j].1 = mid;
        let mut right = r.clone();
        right[j].0 = mid;
        let refined = gl_box(f, &left, &GL8) + gl_box(f, &right, &GL8);
        let err = (refined - whole).abs();
        if err <= budget || depth >= 60 {
            total += refined;
            if depth >= 60 {
                worst = worst.max(err);
            }
        } else {
            stack.push((left, budget * 0.5, depth + 1));
            stack.push((right, budget * 0.5, depth + 1));
        }
    }
    if worst > abs_tol.max(rel_tol * total.abs()) {
        return Err(QuadError::NoConvergence {
            tol: rel_tol,
            err: worst / total.abs().max(1e-300),
        });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_nodes_integrate_polynomials_exactly() {
        // GL16 is exact through degree 31
        for deg in [0usize, 3, 10, 31] {
            let f = |x: f64| x.powi(deg as i32);
            let got = gl_panel(&f, 0.0, 1.0, &GL16);
            let want = 1.0 / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-13, "deg={deg} got={got}");
        }
    }

    #[test]
    fn adaptive_1d_smooth() {
        let got = adaptive_1d(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((got - 2.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_1d_mild_singularity() {
        // integrable endpoint singularity x^(-1/2), handled by bisection
        let got = adaptive_1d(&|x: f64| x.abs().sqrt().recip(), 1e-12, 1.0, 1e-9).unwrap();
        assert!((got - 2.0).abs() < 1e-5, "got {got}");
    }

    #[test]
    fn adaptive_box_smooth_2d() {
        let got = adaptive_box(&|x: &[f64]| (x[0] + x[1]).exp(), &[(0.0, 1.0), (0.0, 1.0)], 1e-11)
            .unwrap();
        let e = std::f64::consts::E;
        let want = (e - 1.0) * (e - 1.0);
        assert!((got - want).abs() < 1e-9 * want);
    }
}
