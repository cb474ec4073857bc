//! Gauss rules for Gaussian expectations of integrands with a jump at zero.
//!
//! The one-bit likelihood is piecewise constant in each gradient entry, with
//! its only discontinuity at the origin. Integrating each half-line with its
//! own Gauss rule for the weight `exp(-x^2)` on `[0, inf)` (half-range
//! Gauss-Hermite) keeps the rule spectrally accurate, where a full-range
//! Gauss-Hermite rule would converge only algebraically.

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss rule from a symmetric Jacobi matrix (Golub-Welsch): nodes are the
/// eigenvalues, weights `mu0 * v_0^2`. Nodes ascend.
fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> Vec<(f64, f64)> {
    let n = diag.len();
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = diag[i];
        if i + 1 < n {
            jacobi[(i, i + 1)] = off[i];
            jacobi[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    golub_welsch(&diag, &off, 2.0)
}

/// Nodes and weights of the `n`-point Gauss rule for
/// `int_0^inf f(x) exp(-x^2) dx` (half-range Gauss-Hermite).
///
/// The recurrence coefficients have no closed form; they come from a
/// discretized Stieltjes procedure (Lanczos with full reorthogonalization)
/// on a composite Gauss-Legendre discretization of the weight over
/// `[0, 14]`, beyond which `exp(-x^2)` is below `1e-85`.
pub fn half_range_hermite(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "rule needs at least one node");
    const UPPER: f64 = 14.0;
    const PANELS: usize = 56;
    let base = gauss_legendre(32);
    let half = UPPER / PANELS as f64 / 2.0;
    let mut xs = Vec::with_capacity(PANELS * base.len());
    let mut ws = Vec::with_capacity(PANELS * base.len());
    for p in 0..PANELS {
        let mid = (2 * p + 1) as f64 * half;
        for &(t, w) in &base {
            let x = mid + half * t;
            xs.push(x);
            ws.push(half * w * (-x * x).exp());
        }
    }

    let mu0: f64 = ws.iter().sum();
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(&ws).map(|((x, y), w)| x * y * w).sum()
    };
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / mu0.sqrt(); xs.len()]];
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n);
    for k in 0..n {
        let q = &basis[k];
        let xq: Vec<f64> = q.iter().zip(&xs).map(|(v, x)| v * x).collect();
        diag.push(inner(&xq, q));
        if k + 1 == n {
            break;
        }
        let mut r = xq;
        for _ in 0..2 {
            for prev in &basis {
                let c = inner(&r, prev);
                r.iter_mut().zip(prev).for_each(|(ri, pi)| *ri -= c * pi);
            }
        }
        let norm = inner(&r, &r).sqrt();
        off.push(norm);
        basis.push(r.into_iter().map(|v| v / norm).collect());
    }
    golub_welsch(&diag, &off, mu0)
}

/// One node of a split rule for `E[f(g)]`, `g ~ N(0, std^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitNode {
    pub value: f64,
    /// Half-line the node belongs to (+1 or -1). Kept separately from the
    /// sign of `value` so the rule stays meaningful as `std -> 0`.
    pub side: i8,
    pub weight: f64,
}

/// `2n` nodes covering both half-lines of `N(0, std^2)`; weights sum to one.
pub fn split_normal_rule(std: f64, n: usize) -> Vec<SplitNode> {
    scale_half_rule(&half_range_hermite(n), std)
}

/// [`split_normal_rule`] from a precomputed [`half_range_hermite`] rule.
pub fn scale_half_rule(half: &[(f64, f64)], std: f64) -> Vec<SplitNode> {
    let n = half.len();
    let scale = std::f64::consts::SQRT_2 * std;
    let norm = 1.0 / std::f64::consts::PI.sqrt();
    let mut nodes = Vec::with_capacity(2 * n);
    for &(x, w) in half.iter().rev() {
        nodes.push(SplitNode {
            value: -scale * x,
            side: -1,
            weight: norm * w,
        });
    }
    for &(x, w) in half {
        nodes.push(SplitNode {
            value: scale * x,
            side: 1,
            weight: norm * w,
        });
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn integrate(n: usize, f: impl Fn(f64) -> f64) -> f64 {
        half_range_hermite(n).iter().map(|&(x, w)| w * f(x)).sum()
    }

    #[test]
    fn legendre_rule() {
        let rule = gauss_legendre(8);
        let e = |f: &dyn Fn(f64) -> f64| rule.iter().map(|&(x, w)| w * f(x)).sum::<f64>();
        assert!((e(&|_| 1.0) - 2.0).abs() < 1e-14);
        assert!((e(&|x| x.powi(14)) - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn half_range_moments() {
        // int_0^inf x^p e^{-x^2} dx = Gamma((p+1)/2) / 2
        assert!((integrate(32, |_| 1.0) - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((integrate(32, |x| x) - 0.5).abs() < 1e-13);
        assert!((integrate(32, |x| x * x) - PI.sqrt() / 4.0).abs() < 1e-13);
        assert!((integrate(32, |x| x.powi(3)) - 0.5).abs() < 1e-12);
        // Gamma(31/2)/2, the top of the exactness range for n = 16
        let gamma_15_5 = 6_190_283_353_629_375.0 / 32_768.0 * PI.sqrt();
        let rel = (integrate(16, |x| x.powi(30)) - gamma_15_5 / 2.0).abs() / (gamma_15_5 / 2.0);
        assert!(rel < 1e-11, "{rel}");
    }

    #[test]
    fn half_range_smooth_integrand() {
        // int_0^inf cos(x) e^{-x^2} dx = sqrt(pi)/2 * e^{-1/4}
        let exact = PI.sqrt() / 2.0 * (-0.25f64).exp();
        assert!((integrate(32, f64::cos) - exact).abs() < 1e-12);
    }

    #[test]
    fn split_rule_normal_moments() {
        let std = 1.7;
        let rule = split_normal_rule(std, 32);
        let e = |f: &dyn Fn(f64) -> f64| rule.iter().map(|n| n.weight * f(n.value)).sum::<f64>();
        assert!((e(&|_| 1.0) - 1.0).abs() < 1e-13);
        assert!(e(&|g| g).abs() < 1e-13);
        assert!((e(&|g| g * g) - std * std).abs() < 1e-12);
        assert!((e(&|g| g.abs()) - std * (2.0 / PI).sqrt()).abs() < 1e-12);
        assert!((e(&|g| g.powi(4)) - 3.0 * std.powi(4)).abs() < 1e-10);
        // the step function is integrated exactly
        assert!((e(&|g| if g > 0.0 { g } else { 0.0 }) - std / (2.0 * PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn split_rule_degenerate_prior() {
        let rule = split_normal_rule(0.0, 16);
        assert!(rule.iter().all(|n| n.value == 0.0));
        let plus: f64 = rule.iter().filter(|n| n.side == 1).map(|n| n.weight).sum();
        assert!((plus - 0.5).abs() < 1e-13);
    }
}
