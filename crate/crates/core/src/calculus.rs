//! Quadrature rules, special functions and the dimensional constants shared by
//! the solution formulas and the inversion operators.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// A positive-weight quadrature rule on a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Integrates over `[a, b]` by affinely transplanting this rule, without
    /// allocating a remapped copy.
    pub fn integrate_over<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let (lo, hi) = self.interval;
        let k = (b - a) / (hi - lo);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(a + (x - lo) * k);
        }
        acc * k
    }

    /// Returns this rule transplanted to `[a, b]`.
    pub fn remap(&self, a: f64, b: f64) -> QuadRule {
        let (lo, hi) = self.interval;
        let k = (b - a) / (hi - lo);
        QuadRule {
            nodes: self.nodes.iter().map(|&x| a + (x - lo) * k).collect(),
            weights: self.weights.iter().map(|&w| w * k).collect(),
            interval: (a, b),
        }
    }
}

/// Gauss–Legendre rule with `m` nodes on `(a, b)`.
///
/// Nodes are found by Newton iteration on the three-term recurrence for
/// `P_m`; both nodes and weights are accurate to a few ulps for `m` up to
/// several hundred.
pub fn gauss_legendre(m: usize, a: f64, b: f64) -> Result<QuadRule> {
    if m < 1 {
        return invalid("Gauss-Legendre rule needs at least one node");
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return invalid(format!(
            "Gauss-Legendre interval ({a}, {b}) is empty or not finite"
        ));
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    let mf = m as f64;
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(m, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Ascending order: the largest root comes first from the cosine guess.
        nodes[m - 1 - i] = x;
        nodes[i] = -x;
        weights[m - 1 - i] = w;
        weights[i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    let rule = QuadRule {
        nodes,
        weights,
        interval: (-1.0, 1.0),
    };
    Ok(if a == -1.0 && b == 1.0 {
        rule
    } else {
        rule.remap(a, b)
    })
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive real arguments (Lanczos, g = 7).
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    Ok(gamma_positive(x))
}

pub(crate) fn gamma_positive(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_positive(1.0 - x));
    }
    // Exact factorials keep small integer arguments free of rounding.
    if x == x.floor() && x <= 21.0 {
        return (1..x as u64).fold(1.0, |acc, k| acc * k as f64);
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * sum
}

/// Constants of the spherical-mean solution formulas in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionConstants {
    pub n: usize,
    /// `2·4···n` for even `n`, `1·3···(n-2)` for odd `n`.
    pub gamma_n: f64,
    /// Volume of the unit ball.
    pub omega_n: f64,
}

pub fn dimension_constants(n: usize) -> Result<DimensionConstants> {
    if n < 2 {
        return invalid(format!("dimension must be at least 2, got {n}"));
    }
    let gamma_n = if n.is_multiple_of(2) {
        (1..=n / 2).map(|k| (2 * k) as f64).product()
    } else {
        (0..(n - 1) / 2).map(|k| (2 * k + 1) as f64).product()
    };
    Ok(DimensionConstants {
        n,
        gamma_n,
        omega_n: unit_ball_volume(n),
    })
}

pub(crate) fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    PI.powf(h) / gamma_positive(h + 1.0)
}

/// Exact value of the coefficient `c_{k,l}` in dimension `n` of the expansion
/// of `(t^{-1} ∂_t)^k` applied to a ball integral with Abel weight.
pub fn coeff_c_exact(n: i64, k: i64, l: i64) -> Result<i64> {
    if n < 2 {
        return invalid(format!("coefficient dimension must be at least 2, got {n}"));
    }
    if l < 0 || k < 0 || l > k {
        return invalid(format!(
            "coefficient index needs 0 <= l <= k, got k={k}, l={l}"
        ));
    }
    let overflow = || Error::Overflow { n, k, l };
    // row[j] holds c_{kk, j} while sweeping kk = 0..=k.
    let mut row: Vec<i64> = vec![1];
    for kk in 1..=k {
        let prev = &row;
        let mut next = vec![0i64; kk as usize + 1];
        next[0] = prev[0]
            .checked_mul(n - (2 * (kk - 1) + 1))
            .ok_or_else(overflow)?;
        next[kk as usize] = 1;
        for j in 1..kk {
            let factor = n - (2 * (kk - 1) - (j - 1));
            let t = prev[j as usize].checked_mul(factor).ok_or_else(overflow)?;
            next[j as usize] = prev[j as usize - 1].checked_add(t).ok_or_else(overflow)?;
        }
        row = next;
    }
    Ok(row[l as usize])
}

pub fn coeff_c(n: usize, k: usize, l: usize) -> Result<f64> {
    coeff_c_exact(n as i64, k as i64, l as i64).map(|c| c as f64)
}

/// Central finite difference of `f` at `t`: fourth-order five-point stencil for
/// the first derivative, second-order three-point stencil for the second.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, t: f64, h: f64, order: u8) -> f64 {
    match order {
        1 => (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h),
        2 => (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h),
        _ => panic!("central_diff supports orders 1 and 2, got {order}"),
    }
}

/// Second-order central difference for derivative orders 0..=4.
pub fn central_diff_k<F: Fn(f64) -> f64>(f: &F, s: f64, h: f64, order: usize) -> f64 {
    match order {
        0 => f(s),
        1 => (f(s + h) - f(s - h)) / (2.0 * h),
        2 => (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h),
        3 => {
            (f(s + 2.0 * h) - 2.0 * f(s + h) + 2.0 * f(s - h) - f(s - 2.0 * h)) / (2.0 * h * h * h)
        }
        4 => {
            (f(s + 2.0 * h) - 4.0 * f(s + h) + 6.0 * f(s) - 4.0 * f(s - h) + f(s - 2.0 * h))
                / (h * h * h * h)
        }
        _ => panic!("central_diff_k supports orders up to 4, got {order}"),
    }
}

/// One Richardson step on top of [`central_diff_k`]: the stencils have even
/// error expansions, so `(4 D(h/2) - D(h)) / 3` is fourth-order accurate.
/// Samples `f` on `[s - 2h, s + 2h]`.
pub fn richardson_diff<F: Fn(f64) -> f64>(f: &F, s: f64, h: f64, order: usize) -> f64 {
    if order == 0 {
        return f(s);
    }
    let coarse = central_diff_k(f, s, h, order);
    let fine = central_diff_k(f, s, 0.5 * h, order);
    (4.0 * fine - coarse) / 3.0
}

/// Interval-halving Gauss–Legendre integration to an absolute tolerance.
/// Meant for reference values in checks, not for production paths.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let rule = gauss_legendre(8, -1.0, 1.0).expect("static rule");
    let whole = rule.integrate_over(a, b, f);
    adaptive_step(f, &rule, a, b, whole, tol, 0)
}

fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    rule: &QuadRule,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule.integrate_over(a, m, f);
    let right = rule.integrate_over(m, b, f);
    if (left + right - whole).abs() <= tol || depth >= 48 {
        return left + right;
    }
    adaptive_step(f, rule, a, m, left, 0.5 * tol, depth + 1)
        + adaptive_step(f, rule, m, b, right, 0.5 * tol, depth + 1)
}
