//! Least squares through the SVD pseudo-inverse, and residual sums of
//! squares for nested column prefixes.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub rss: f64,
    /// Numerical rank of the design.
    pub rank: usize,
}

/// Minimum-norm least-squares solution of `design * b ≈ y`.
///
/// Singular values below `max(n, p) * eps * s_max` are treated as zero, so
/// degenerate columns receive a zero coefficient.
pub fn least_squares(design: &DMatrix<f64>, y: &[f64]) -> LeastSquares {
    let (n, p) = design.shape();
    debug_assert_eq!(n, y.len());
    let rhs = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = n.max(p) as f64 * f64::EPSILON * s_max;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let coef = if rank == 0 {
        DVector::zeros(p)
    } else {
        svd.solve(&rhs, tol).expect("u and v were computed")
    };
    let fitted = design * &coef;
    let rss = fitted.iter().zip(y).map(|(f, v)| (v - f).powi(2)).sum();
    LeastSquares {
        coefficients: coef.iter().cloned().collect(),
        fitted: fitted.iter().cloned().collect(),
        rss,
        rank,
    }
}

/// Residual sum of squares and rank of the least-squares fit on a column prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefixFit {
    pub rss: f64,
    pub rank: usize,
}

/// Fits of `y` on the first `c + 1` columns of `design`, for every `c`.
///
/// One Householder pass: column `c` joins the basis unless what remains of it
/// after the earlier reflections is below `1e-12` of its own norm, in which
/// case it counts as linearly dependent and leaves rank and RSS unchanged.
pub fn nested_fits(design: &DMatrix<f64>, y: &[f64]) -> Vec<PrefixFit> {
    let (n, p) = design.shape();
    debug_assert_eq!(n, y.len());
    let mut a = design.clone();
    let mut r = y.to_vec();
    let mut rank = 0;
    let mut out = Vec::with_capacity(p);
    for c in 0..p {
        let original = design.column(c).norm();
        let tail_norm = if rank < n {
            a.view((rank, c), (n - rank, 1)).norm()
        } else {
            0.0
        };
        if original > 0.0 && tail_norm > 1e-12 * original {
            // Reflector v = x + sign(x0) |x| e0, applied as I - 2 v v' / v'v.
            let x0 = a[(rank, c)];
            let alpha = if x0 >= 0.0 { -tail_norm } else { tail_norm };
            let mut v: Vec<f64> = (rank..n).map(|i| a[(i, c)]).collect();
            v[0] -= alpha;
            let vv: f64 = v.iter().map(|x| x * x).sum();
            for j in c..p {
                let dot: f64 = v
                    .iter()
                    .enumerate()
                    .map(|(k, vk)| vk * a[(rank + k, j)])
                    .sum();
                let scale = 2.0 * dot / vv;
                for (k, vk) in v.iter().enumerate() {
                    a[(rank + k, j)] -= scale * vk;
                }
            }
            let dot: f64 = v.iter().zip(&r[rank..]).map(|(vk, rk)| vk * rk).sum();
            let scale = 2.0 * dot / vv;
            for (vk, rk) in v.iter().zip(&mut r[rank..]) {
                *rk -= scale * vk;
            }
            rank += 1;
        }
        out.push(PrefixFit {
            rss: r[rank..].iter().map(|v| v * v).sum(),
            rank,
        });
    }
    out
}

/// Bayesian information criterion `n ln(RSS / n) + params ln n`.
///
/// The variance estimate is floored relative to the total sum of squares so
/// that exact fits compare through their penalty terms alone.
pub fn bic(rss: f64, tss: f64, n: usize, params: usize) -> f64 {
    let nf = n as f64;
    let floor = if tss > 0.0 {
        1e-24 * tss / nf
    } else {
        f64::MIN_POSITIVE
    };
    nf * (rss / nf).max(floor).ln() + params as f64 * nf.ln()
}

pub fn total_sum_of_squares(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum()
}
