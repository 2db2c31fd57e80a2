//! Numerical checks of identities that the reconstruction relies on but does
//! not exercise directly: Green's integral identity for the wave equation,
//! the coefficient recursion for `(1/t ∂_t)^k`, the equivalence of the two
//! even-dimensional representations, and the mollifier normalisations.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::calculus::{
    adaptive_integrate, central_diff, coeff_c, coeff_c_exact, gauss_legendre, richardson_diff,
};
use crate::error::{invalid, Error, Result};
use crate::forward::{SolverParams, WaveSolver};
use crate::geometry::{ConvexDomain, DomainKind};
use crate::transforms::{bump_mean, mollifier_eval, mollifier_radon, Phantom};
use crate::vector::{self, Point};

/// Outcome of one identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    /// `abs_residual / max(scale, 1e-14)`; the scale is `|lhs|` unless stated.
    pub rel_residual: f64,
    pub resolution: String,
    /// Named intermediate quantities.
    pub terms: Vec<(String, f64)>,
    pub runtime: Duration,
}

const REL_FLOOR: f64 = 1e-14;

impl IdentityReport {
    fn new(name: &str, lhs: f64, rhs: f64, resolution: String, started: Instant) -> Self {
        Self::scaled(name, lhs, rhs, lhs.abs(), resolution, started)
    }

    fn scaled(
        name: &str,
        lhs: f64,
        rhs: f64,
        scale: f64,
        resolution: String,
        started: Instant,
    ) -> Self {
        let abs = (lhs - rhs).abs();
        IdentityReport {
            name: name.to_string(),
            lhs,
            rhs,
            abs_residual: abs,
            rel_residual: abs / scale.max(REL_FLOOR),
            resolution,
            terms: vec![],
            runtime: started.elapsed(),
        }
    }

    pub fn csv_header(timestamps: bool) -> String {
        let mut h = "name,lhs,rhs,abs_residual,rel_residual,resolution".to_string();
        if timestamps {
            h.push_str(",runtime_s");
        }
        h
    }

    pub fn csv_row(&self, timestamps: bool) -> String {
        let mut r = format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.name,
            self.lhs,
            self.rhs,
            self.abs_residual,
            self.rel_residual,
            self.resolution.replace(',', ";")
        );
        if timestamps {
            r.push_str(&format!(",{:.6}", self.runtime.as_secs_f64()));
        }
        r
    }
}

/// Resolution of the integral-identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResolution {
    /// Boundary quadrature resolution (polar Gauss nodes on the sphere).
    pub boundary: usize,
    /// Gauss nodes per time window.
    pub time_nodes: usize,
    /// Radial Gauss nodes of the volume rule.
    pub volume_radial: usize,
    /// Polar Gauss nodes of the volume rule (azimuths are twice as many).
    pub volume_angular: usize,
    /// Gauss nodes per axis of the product rule for `∫ f g`.
    pub box_nodes: usize,
    /// Laplacian stencil step relative to the smallest semi-axis.
    pub laplacian_step: f64,
    /// Starting azimuth of the volume rule.
    pub azimuth_offset: f64,
}

impl Default for IdentityResolution {
    fn default() -> Self {
        IdentityResolution {
            boundary: 16,
            time_nodes: 32,
            volume_radial: 12,
            volume_angular: 12,
            box_nodes: 32,
            laplacian_step: 1e-2,
            azimuth_offset: 0.0,
        }
    }
}

impl IdentityResolution {
    /// Every node count multiplied by `k`; the Laplacian step is unchanged.
    pub fn refined(&self, k: usize) -> Self {
        IdentityResolution {
            boundary: self.boundary * k,
            time_nodes: self.time_nodes * k,
            volume_radial: self.volume_radial * k,
            volume_angular: self.volume_angular * k,
            box_nodes: self.box_nodes * k,
            ..*self
        }
    }

    fn describe(&self) -> String {
        format!(
            "boundary={} time={} volume={}x{} box={} h_lap={}",
            self.boundary,
            self.time_nodes,
            self.volume_radial,
            self.volume_angular,
            self.box_nodes,
            self.laplacian_step
        )
    }
}

/// Green's identity for `u` (data `(f, 0)`) and `v` (data `(0, g)`) in three
/// dimensions: `∫ f g = 2 ∫_{∂Ω} ∫ v ∂_ν u dt dσ - ∫_Ω ∫ Δ(uv) dt dx`.
/// The time integrals stop at the Huygens horizon, after which both fields
/// vanish inside Ω.
pub fn check_integral_identity(
    f: &Phantom,
    g: &Phantom,
    domain: &ConvexDomain,
    res: &IdentityResolution,
) -> Result<IdentityReport> {
    let started = Instant::now();
    if domain.dim != 3 || f.dim != 3 || g.dim != 3 {
        return Err(Error::UnsupportedDimension(
            domain.dim.max(f.dim).max(g.dim),
        ));
    }
    if domain.kind != DomainKind::Ellipsoid {
        return invalid("the integral identity check needs an ellipsoid");
    }
    for (name, p) in [("f", f), ("g", g)] {
        if !p.bumps.is_empty() && !(p.margin(domain) > 0.0) {
            return Err(Error::Config(format!(
                "{name} is not supported inside the domain"
            )));
        }
    }
    let reach = domain.max_semi_axis();
    let horizon = f
        .bumps
        .iter()
        .chain(&g.bumps)
        .map(|b| vector::dist(&b.center, &domain.center) + reach + b.radius)
        .fold(0.0f64, f64::max);
    let mut params = SolverParams::new(domain, horizon.max(1.0));
    params.mean_resolution = 32;
    let fsolver = WaveSolver::new(f, &params)?;
    let time_rule = gauss_legendre(res.time_nodes, 0.0, 1.0)?;
    let radial_rule = gauss_legendre(params.mean_resolution, -1.0, 1.0)?;

    // ∫ u(p, t) v(q, t) dt over the windows of the g bumps around `center`,
    // widened by `pad`. With p = q this is the product of the two fields at one point.
    let uv_time_integral = |p: &Point, q: &Point, center: &Point, pad: f64| -> f64 {
        let uf = fsolver.at(p);
        g.bumps
            .iter()
            .map(|b| {
                let d = vector::dist(center, &b.center);
                let lo = (d - b.radius - pad).max(0.0);
                let hi = d + b.radius + pad;
                let dq = vector::dist(q, &b.center);
                time_rule.integrate_over(lo, hi, |t| {
                    let v = t * bump_mean(b, 3, dq, t, &radial_rule);
                    if v == 0.0 {
                        0.0
                    } else {
                        v * uf.u(t)
                    }
                })
            })
            .sum()
    };

    // Boundary term: 2 Σ w_j ∫ v(y_j, t) ∂_ν u(y_j, t) dt.
    let bq = domain.boundary_quadrature(res.boundary)?;
    let h_nu = params.h_nu;
    let boundary: f64 = bq
        .nodes
        .par_iter()
        .map(|node| {
            let plus = vector::axpy(&node.point, h_nu, &node.normal);
            let minus = vector::axpy(&node.point, -h_nu, &node.normal);
            let up = uv_time_integral(&plus, &node.point, &node.point, 0.0);
            let um = uv_time_integral(&minus, &node.point, &node.point, 0.0);
            node.weight * (up - um) / (2.0 * h_nu)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum::<f64>()
        * 2.0;

    // Volume term: ∫_Ω Δ P with P(x) = ∫ u v dt, Δ by the 7-point stencil.
    let h = res.laplacian_step * domain.min_semi_axis();
    let radial = gauss_legendre(res.volume_radial, 0.0, 1.0)?;
    let polar = gauss_legendre(res.volume_angular, -1.0, 1.0)?;
    let naz = 2 * res.volume_angular;
    let az_step = 2.0 * PI / naz as f64;
    let axes = domain.semi_axes;
    let jac = axes[0] * axes[1] * axes[2];
    let mut samples: Vec<(Point, f64)> = Vec::new();
    for (&rho, &wr) in radial.nodes.iter().zip(&radial.weights) {
        for (&u, &wu) in polar.nodes.iter().zip(&polar.weights) {
            for j in 0..naz {
                let dir = vector::polar3(u, res.azimuth_offset + j as f64 * az_step);
                let x = [
                    domain.center[0] + axes[0] * rho * dir[0],
                    domain.center[1] + axes[1] * rho * dir[1],
                    domain.center[2] + axes[2] * rho * dir[2],
                ];
                samples.push((x, wr * wu * az_step * rho * rho * jac));
            }
        }
    }
    let pad = 2.0 * h;
    let volume: f64 = samples
        .par_iter()
        .map(|(x, w)| {
            let p = |k: usize, s: f64| {
                let mut y = *x;
                y[k] += s;
                uv_time_integral(&y, &y, x, pad)
            };
            let centre = uv_time_integral(x, x, x, pad);
            let lap = (0..3)
                .map(|k| p(k, h) + p(k, -h) - 2.0 * centre)
                .sum::<f64>()
                / (h * h);
            w * lap
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();

    // ∫ f g by a product rule over the bounding box of each overlapping pair.
    let box_rule = gauss_legendre(res.box_nodes, -1.0, 1.0)?;
    let mut lhs = 0.0;
    for bf in &f.bumps {
        for bg in &g.bumps {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            let mut empty = false;
            for k in 0..3 {
                lo[k] = (bf.center[k] - bf.radius).max(bg.center[k] - bg.radius);
                hi[k] = (bf.center[k] + bf.radius).min(bg.center[k] + bg.radius);
                empty |= hi[k] <= lo[k];
            }
            if empty {
                continue;
            }
            let mid: Vec<f64> = (0..3).map(|k| 0.5 * (lo[k] + hi[k])).collect();
            let half: Vec<f64> = (0..3).map(|k| 0.5 * (hi[k] - lo[k])).collect();
            let mut acc = 0.0;
            for (&a, &wa) in box_rule.nodes.iter().zip(&box_rule.weights) {
                for (&b, &wb) in box_rule.nodes.iter().zip(&box_rule.weights) {
                    for (&c, &wc) in box_rule.nodes.iter().zip(&box_rule.weights) {
                        let y = [
                            mid[0] + half[0] * a,
                            mid[1] + half[1] * b,
                            mid[2] + half[2] * c,
                        ];
                        acc += wa * wb * wc * bf.eval(&y, 3) * bg.eval(&y, 3);
                    }
                }
            }
            lhs += acc * half[0] * half[1] * half[2];
        }
    }

    let mut rep = IdentityReport::new(
        "integral_identity",
        lhs,
        boundary - volume,
        res.describe(),
        started,
    );
    rep.terms = vec![
        ("boundary".into(), boundary),
        ("volume".into(), volume),
        ("horizon".into(), horizon),
    ];
    Ok(rep)
}

/// A polynomial in the coordinates, used as the test function of the
/// coefficient check.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(f64, [u32; 3])>,
}

impl Polynomial {
    pub fn constant(c: f64) -> Self {
        Polynomial {
            terms: vec![(c, [0, 0, 0])],
        }
    }

    /// `c0 + <grad, y>`
    pub fn affine(c0: f64, grad: &Point) -> Self {
        Polynomial {
            terms: vec![
                (c0, [0, 0, 0]),
                (grad[0], [1, 0, 0]),
                (grad[1], [0, 1, 0]),
                (grad[2], [0, 0, 1]),
            ],
        }
    }

    pub fn eval(&self, y: &Point) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                c * y[0].powi(e[0] as i32) * y[1].powi(e[1] as i32) * y[2].powi(e[2] as i32)
            })
            .sum()
    }

    fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(_, e)| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }
}

/// `(1/t ∂_t)^k (t^{n-1} J(t)) = Σ_l c_{k,l} t^{n-(2k+1-l)} ∂_t^l J(t)` with
/// `J(t) = ∫_{B(0,1)} g(x + t y) / sqrt(1 - |y|²) dy`.
///
/// For `n = 2` both sides are evaluated numerically: the left side from
/// `I(t) = ∫_{B(x,t)} g(y) / sqrt(t² - |x - y|²) dy` by nested central
/// differences, the right side from `J` with its own quadrature. For other
/// `n` the check is symbolic: both sides are applied to the monomials
/// `J = t^m`, `m = 0..=6`, where they reduce to integers.
pub fn check_lemma_coefficients(
    n: usize,
    k: usize,
    g: &Polynomial,
    x: &Point,
    t: f64,
) -> Result<IdentityReport> {
    let started = Instant::now();
    if n < 2 {
        return invalid(format!("dimension must be at least 2, got {n}"));
    }
    if !(1..=2).contains(&k) {
        return invalid(format!("k must be 1 or 2, got {k}"));
    }
    if n != 2 {
        let (mut lhs, mut rhs, mut worst) = (0.0, 0.0, 0.0f64);
        for m in 0..=6i64 {
            let ni = n as i64;
            let left: i64 = (0..k as i64).map(|i| ni - 1 + m - 2 * i).product();
            let mut right = 0i64;
            for l in 0..=k as i64 {
                let falling: i64 = (0..l).map(|i| m - i).product();
                right += coeff_c_exact(ni, k as i64, l)? * falling;
            }
            lhs += left as f64;
            rhs += right as f64;
            worst = worst.max((left - right).abs() as f64);
        }
        let mut rep = IdentityReport::new(
            &format!("lemma_coefficients_n{n}_k{k}"),
            lhs,
            rhs,
            "symbolic monomials m=0..6".into(),
            started,
        );
        rep.abs_residual = worst;
        rep.rel_residual = worst / lhs.abs().max(REL_FLOOR);
        return Ok(rep);
    }
    if !(t > 0.0 && t < 2.0) {
        return invalid(format!("t must lie in (0, 2), got {t}"));
    }
    let deg = g.degree() as usize;
    // Integral of g over the circle of radius ρ about `centre`, exact for
    // polynomials of degree below the node count.
    let circle = |centre: &Point, rho: f64, m: usize| -> f64 {
        let step = 2.0 * PI / m as f64;
        (0..m)
            .map(|j| {
                g.eval(&vector::axpy(
                    centre,
                    rho,
                    &vector::polar2(0.1 + j as f64 * step),
                ))
            })
            .sum::<f64>()
            * step
    };
    let lhs_rule = gauss_legendre(48 + deg, 0.0, 0.5 * PI)?;
    let rhs_rule = gauss_legendre(40 + deg, 0.0, 0.5 * PI)?;
    let big_i = |s: f64| {
        let (sign, s) = (s.signum(), s.abs());
        sign * s * lhs_rule.integrate(|phi| phi.sin() * circle(x, s * phi.sin(), 32 + deg))
    };
    let big_j = |s: f64| {
        let s = s.abs();
        rhs_rule.integrate(|phi| phi.sin() * circle(x, s * phi.sin(), 24 + deg))
    };
    let h = 1e-2 * t;
    let d1 = |s: f64| central_diff(big_i, s, h, 1) / s;
    let lhs = if k == 1 {
        d1(t)
    } else {
        central_diff(d1, t, h, 1) / t
    };
    let nf = n as f64;
    let mut rhs = 0.0;
    for l in 0..=k {
        let deriv = richardson_diff(&big_j, t, 2.0 * h, l);
        rhs += coeff_c(n, k, l)? * t.powf(nf - (2 * k + 1 - l) as f64) * deriv;
    }
    Ok(IdentityReport::new(
        &format!("lemma_coefficients_n{n}_k{k}"),
        lhs,
        rhs,
        format!("h={h:e} nested central differences"),
        started,
    ))
}

/// Largest deviation between the two even-dimensional representations over
/// the given samples, relative to `sup |f|`.
pub fn check_even_equivalence(
    f: &Phantom,
    points: &[Point],
    times: &[f64],
    params: &SolverParams,
) -> Result<IdentityReport> {
    let started = Instant::now();
    if f.dim != 2 {
        return Err(Error::UnsupportedDimension(f.dim));
    }
    if points.len() != times.len() {
        return invalid("points and times must have equal length");
    }
    let solver = WaveSolver::new(f, params)?;
    let mut worst = (0.0f64, 0.0, 0.0);
    for (x, &t) in points.iter().zip(times) {
        let a = solver.u(x, t)?;
        let b = solver.u_alt(x, t)?;
        if (a - b).abs() >= worst.0 {
            worst = ((a - b).abs(), a, b);
        }
    }
    Ok(IdentityReport::scaled(
        "even_equivalence",
        worst.1,
        worst.2,
        f.sup_bound(),
        format!(
            "samples={} abel_nodes={} mean_resolution={}",
            points.len(),
            params.abel_nodes,
            params.mean_resolution
        ),
        started,
    ))
}

/// The three normalisation identities of the mollifier `ψ_{μ,ε}`:
/// unit mass, the closed-form Radon transform against a direct line or
/// plane integral on a 21-point offset grid, and unit mass of the Radon
/// transform.
pub fn check_mollifier(n: usize, mu: u32, eps: f64) -> Result<Vec<IdentityReport>> {
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    if mu < 1 || !(eps > 0.0) {
        return invalid("mollifier needs mu >= 1 and eps > 0");
    }
    let tol = 1e-13;
    let radial = |rho: f64| mollifier_eval(mu, eps, &[rho, 0.0, 0.0], n);
    let label = format!("n={n} mu={mu} eps={eps}");

    let started = Instant::now();
    let sphere_area = if n == 2 { 2.0 * PI } else { 4.0 * PI };
    let mass =
        sphere_area * adaptive_integrate(&|r: f64| r.powi(n as i32 - 1) * radial(r), 0.0, eps, tol);
    let mass_rep = IdentityReport::new("mollifier_mass", mass, 1.0, label.clone(), started);

    let started = Instant::now();
    let mut worst = (0.0f64, 0.0, 0.0);
    for i in 0..21 {
        let s = -eps + 2.0 * eps * i as f64 / 20.0;
        let half = (eps * eps - s * s).max(0.0).sqrt();
        let direct = if half == 0.0 {
            0.0
        } else if n == 2 {
            adaptive_integrate(
                &|tau: f64| radial((s * s + tau * tau).sqrt()),
                -half,
                half,
                tol,
            )
        } else {
            2.0 * PI
                * adaptive_integrate(&|r: f64| r * radial((s * s + r * r).sqrt()), 0.0, half, tol)
        };
        let closed = mollifier_radon(mu, eps, s, n);
        if (direct - closed).abs() >= worst.0 {
            worst = ((direct - closed).abs(), direct, closed);
        }
    }
    let mut radon_rep = IdentityReport::new(
        "mollifier_radon",
        worst.1,
        worst.2,
        format!("{label} grid=21"),
        started,
    );
    radon_rep.abs_residual = worst.0;
    radon_rep.rel_residual = worst.0;

    let started = Instant::now();
    let radon_mass = adaptive_integrate(&|s: f64| mollifier_radon(mu, eps, s, n), -eps, eps, tol);
    let radon_mass_rep =
        IdentityReport::new("mollifier_radon_mass", radon_mass, 1.0, label, started);
    Ok(vec![mass_rep, radon_rep, radon_mass_rep])
}
