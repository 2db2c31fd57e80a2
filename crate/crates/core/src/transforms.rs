//! Spherical means, Radon transforms of indicator functions and mollifiers,
//! the principal-value Hilbert transform in the offset variable, and the
//! offset-derivative kernels that feed the correction operator.

use std::f64::consts::PI;

use sha2::{Digest, Sha256};

use crate::calculus::{
    gamma_positive, gauss_legendre, richardson_diff, unit_ball_volume, QuadRule,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ConvexDomain, DomainKind};
use crate::vector::{self, Point};

/// Radial profile of a bump, as a function of `q = |x - c| / ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `exp(1 - 1/(1 - q^2))`, peak value 1, infinitely smooth.
    Cinf,
    /// The normalized mollifier `ψ_{μ,ε}`, only `C^{μ-1}`.
    PolyMu(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
    pub profile: Profile,
}

impl Bump {
    /// Value at distance `rho` from the center in dimension `dim`.
    #[inline]
    pub fn radial(&self, rho: f64, dim: usize) -> f64 {
        let q2 = (rho * rho) / (self.radius * self.radius);
        if q2 >= 1.0 {
            return 0.0;
        }
        match self.profile {
            Profile::Cinf => self.amplitude * (1.0 - 1.0 / (1.0 - q2)).exp(),
            Profile::PolyMu(mu) => {
                self.amplitude * (1.0 - q2).powi(mu as i32)
                    / (mollifier_norm(mu, dim) * self.radius.powi(dim as i32))
            }
        }
    }

    pub fn eval(&self, x: &Point, dim: usize) -> f64 {
        self.radial(vector::dist(x, &self.center), dim)
    }
}

/// A finite sum of compactly supported radial bumps.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub dim: usize,
    pub bumps: Vec<Bump>,
}

impl Phantom {
    pub fn new(dim: usize, bumps: Vec<Bump>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        for b in &bumps {
            if !(b.radius > 0.0) || !b.radius.is_finite() {
                return invalid("bump radius must be positive");
            }
            if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return invalid("bump amplitude and center must be finite");
            }
            if dim == 2 && b.center[2] != 0.0 {
                return invalid("planar bump has a nonzero third coordinate");
            }
            if let Profile::PolyMu(0) = b.profile {
                return invalid("polynomial profile needs mu >= 1");
            }
        }
        Ok(Phantom { dim, bumps })
    }

    pub fn zero(dim: usize) -> Self {
        Phantom { dim, bumps: vec![] }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        self.bumps.iter().map(|b| b.eval(x, self.dim)).sum()
    }

    /// Upper bound for `sup |f|` (exact when supports are disjoint).
    pub fn sup_bound(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.radial(0.0, self.dim).abs())
            .sum()
    }

    /// Support margin ρ: smallest distance between a bump support and the boundary.
    pub fn margin(&self, domain: &ConvexDomain) -> f64 {
        self.bumps
            .iter()
            .map(|b| domain.distance_to_boundary(&b.center) - b.radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Stable content hash, used to tag trace files.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("dim={}\n", self.dim));
        for b in &self.bumps {
            let profile = match b.profile {
                Profile::Cinf => "cinf".to_string(),
                Profile::PolyMu(mu) => format!("poly{mu}"),
            };
            h.update(format!(
                "{:.16e},{:.16e},{:.16e};{:.16e};{:.16e};{}\n",
                b.center[0], b.center[1], b.center[2], b.radius, b.amplitude, profile
            ));
        }
        h.finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Spherical mean over `∂B(x, r)` by direct surface quadrature: `m`-point
/// trapezoid rule on the circle, or `m` Gauss–Legendre polar cosines times
/// `2m` azimuths on the sphere.
pub fn spherical_mean(f: &Phantom, x: &Point, r: f64, m: usize) -> Result<f64> {
    if !(r > 0.0) {
        return invalid(format!("spherical mean radius must be positive, got {r}"));
    }
    if m < 16 {
        return invalid(format!(
            "spherical mean resolution must be at least 16, got {m}"
        ));
    }
    Ok(if f.dim == 2 {
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|k| f.eval(&vector::axpy(x, r, &vector::polar2(k as f64 * h))))
            .sum::<f64>()
            / m as f64
    } else {
        let polar = gauss_legendre(m, -1.0, 1.0)?;
        let naz = 2 * m;
        let h = 2.0 * PI / naz as f64;
        let mut acc = 0.0;
        for (&u, &w) in polar.nodes.iter().zip(&polar.weights) {
            let mut ring = 0.0;
            for j in 0..naz {
                ring += f.eval(&vector::axpy(x, r, &vector::polar3(u, j as f64 * h)));
            }
            acc += w * ring;
        }
        acc * h / (4.0 * PI)
    })
}

/// Spherical mean of a single radial bump, reduced to a one-dimensional
/// integral by rotational symmetry about the axis through `x` and the bump
/// center. `d` is that axis length. The rule is any Gauss rule on `[-1, 1]`;
/// it is transplanted onto the part of the sphere that meets the support.
pub fn bump_mean(bump: &Bump, dim: usize, d: f64, r: f64, rule: &QuadRule) -> f64 {
    let eps = bump.radius;
    let r = r.abs();
    if d + r <= 0.0 || (d - r).abs() >= eps {
        return 0.0;
    }
    if d <= 1e-12 * eps || r <= 1e-12 * eps {
        return bump.radial(d.max(r), dim);
    }
    if dim == 3 {
        // M = (1 / (2 d r)) ∫_{|d-r|}^{d+r} ρ φ(ρ) dρ
        let lo = (d - r).abs();
        let hi = (d + r).min(eps);
        rule.integrate_over(lo, hi, |rho| rho * bump.radial(rho, 3)) / (2.0 * d * r)
    } else {
        // M = (1/π) ∫_0^{α_max} φ(ρ(α)) dα,  ρ² = (d - r)² + 4 d r sin²(α/2)
        let c = (d * d + r * r - eps * eps) / (2.0 * d * r);
        let alpha_max = if c <= -1.0 { PI } else { c.min(1.0).acos() };
        let base = (d - r) * (d - r);
        let dr4 = 4.0 * d * r;
        rule.integrate_over(0.0, alpha_max, |alpha| {
            let s = (0.5 * alpha).sin();
            bump.radial((base + dr4 * s * s).sqrt(), 2)
        }) / PI
    }
}

/// `a = π^{n/2} Γ(μ+1) / Γ(n/2 + μ + 1)`, the integral of `(1 - |x|^2)^μ` over the unit ball.
pub fn mollifier_norm(mu: u32, n: usize) -> f64 {
    let nh = n as f64 / 2.0;
    let m = mu as f64;
    PI.powf(nh) * gamma_positive(m + 1.0) / gamma_positive(nh + m + 1.0)
}

/// `ψ_{μ,ε}(x) = ε^{-n} ψ_μ(x/ε)`.
pub fn mollifier_eval(mu: u32, eps: f64, x: &Point, n: usize) -> f64 {
    let q2 = vector::dot(x, x) / (eps * eps);
    if q2 >= 1.0 {
        return 0.0;
    }
    (1.0 - q2).powi(mu as i32) / (mollifier_norm(mu, n) * eps.powi(n as i32))
}

/// Closed-form Radon transform of `ψ_{μ,ε}`; independent of the direction.
pub fn mollifier_radon(mu: u32, eps: f64, s: f64, n: usize) -> f64 {
    if s.abs() >= eps {
        return 0.0;
    }
    let nf = n as f64;
    let m = mu as f64;
    let c = gamma_positive(nf / 2.0 + m + 1.0)
        / (eps * PI.sqrt() * gamma_positive((nf - 1.0) / 2.0 + m + 1.0));
    c * (1.0 - s * s / (eps * eps)).powf((nf - 3.0) / 2.0 + m + 1.0)
}

fn check_unit(theta: &Point) -> Result<()> {
    let n = vector::norm(theta);
    if (n - 1.0).abs() > 1e-12 {
        return invalid(format!("direction must be a unit vector, |θ| = {n}"));
    }
    Ok(())
}

/// Radon transform of the indicator of Ω: chord length (n = 2) or section
/// area (n = 3) of the hyperplane `<x, θ> = s`.
pub fn radon_chi(domain: &ConvexDomain, theta: &Point, s: f64) -> Result<f64> {
    check_unit(theta)?;
    Ok(radon_chi_unchecked(domain, theta, s))
}

pub(crate) fn radon_chi_unchecked(domain: &ConvexDomain, theta: &Point, s: f64) -> f64 {
    match domain.kind {
        DomainKind::Ellipsoid => {
            let (amp, sigma, _) = ellipsoid_section(domain, theta, s);
            let q = 1.0 - sigma * sigma;
            if q <= 0.0 {
                return 0.0;
            }
            if domain.dim == 2 {
                amp * q.sqrt()
            } else {
                amp * q
            }
        }
        DomainKind::SuperEllipse2D { exponent } => superellipse_chord(domain, exponent, theta, s),
    }
}

/// `(A, σ, w)` with `ℛχ = A (1 - σ²)^{(n-1)/2}`, `σ = (s - <c,θ>)/w`.
fn ellipsoid_section(domain: &ConvexDomain, theta: &Point, s: f64) -> (f64, f64, f64) {
    let n = domain.dim;
    let mut w2 = 0.0;
    let mut prod = 1.0;
    for i in 0..n {
        let v = domain.semi_axes[i] * theta[i];
        w2 += v * v;
        prod *= domain.semi_axes[i];
    }
    let w = w2.sqrt();
    let sigma = (s - vector::dot(&domain.center, theta)) / w;
    (prod * unit_ball_volume(n - 1) / w, sigma, w)
}

fn superellipse_chord(domain: &ConvexDomain, p: f64, theta: &Point, s: f64) -> f64 {
    let (a, b) = (domain.semi_axes[0], domain.semi_axes[1]);
    let sc = s - vector::dot(&domain.center, theta);
    let perp = [-theta[1], theta[0]];
    let g = |tau: f64| {
        let x = sc * theta[0] + tau * perp[0];
        let y = sc * theta[1] + tau * perp[1];
        (x / a).abs().powf(p) + (y / b).abs().powf(p)
    };
    let reach = 2.0 * a.max(b);
    // The gauge is convex along the line: golden-section for its minimum.
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (-reach, reach);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..90 {
        if gc < gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - inv_phi * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + inv_phi * (hi - lo);
            gd = g(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    if g(mid) >= 1.0 {
        return 0.0;
    }
    let root = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let m = 0.5 * (inside + outside);
            if m == inside || m == outside {
                break;
            }
            if g(m) < 1.0 {
                inside = m;
            } else {
                outside = m;
            }
        }
        0.5 * (inside + outside)
    };
    root(mid, reach) - root(mid, -reach)
}

/// Tunables for the offset-derivative kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    /// Required distance of `s` from either end of the support of `ℛχ(θ, ·)`.
    pub margin: f64,
    /// Base finite-difference step in `s` (Richardson uses `h` and `h/2`).
    pub fd_step: f64,
    /// Node count of the graded principal-value rule.
    pub hilbert_nodes: usize,
}

impl KernelOptions {
    pub fn new(margin: f64) -> Self {
        KernelOptions {
            margin,
            fd_step: (0.25 * margin).min(0.02),
            hilbert_nodes: 256,
        }
    }

    fn step(&self) -> f64 {
        self.fd_step.min(0.25 * self.margin)
    }
}

fn check_safety(domain: &ConvexDomain, theta: &Point, s: f64, margin: f64) -> Result<()> {
    let (lo, hi) = domain.support_interval(theta);
    if !(margin > 0.0) || s < lo + margin || s > hi - margin {
        return Err(Error::OutOfRegion(format!(
            "offset {s} is within {margin} of the support ({lo}, {hi})"
        )));
    }
    Ok(())
}

fn check_order(domain: &ConvexDomain, order: usize) -> Result<()> {
    if order > domain.dim {
        return invalid(format!(
            "derivative order {order} exceeds the dimension {}",
            domain.dim
        ));
    }
    Ok(())
}

/// `∂_s^k ℛχ_Ω(θ, s)`. Ellipsoids are differentiated in closed form; other
/// domains fall back to Richardson-extrapolated central differences.
pub fn radon_chi_deriv(
    domain: &ConvexDomain,
    theta: &Point,
    s: f64,
    order: usize,
    opts: &KernelOptions,
) -> Result<f64> {
    check_unit(theta)?;
    check_order(domain, order)?;
    check_safety(domain, theta, s, opts.margin)?;
    Ok(match domain.kind {
        DomainKind::Ellipsoid => ellipsoid_radon_deriv(domain, theta, s, order),
        DomainKind::SuperEllipse2D { .. } => {
            let f = |t: f64| radon_chi_unchecked(domain, theta, t);
            richardson_diff(&f, s, opts.step(), order)
        }
    })
}

/// The finite-difference route for any domain, kept separate from the
/// closed-form ellipsoid derivatives so the two can be compared.
pub fn radon_chi_deriv_fd(
    domain: &ConvexDomain,
    theta: &Point,
    s: f64,
    order: usize,
    opts: &KernelOptions,
) -> Result<f64> {
    check_unit(theta)?;
    check_order(domain, order)?;
    check_safety(domain, theta, s, opts.margin)?;
    let f = |t: f64| radon_chi_unchecked(domain, theta, t);
    Ok(richardson_diff(&f, s, opts.step(), order))
}

pub fn ellipsoid_radon_deriv(domain: &ConvexDomain, theta: &Point, s: f64, order: usize) -> f64 {
    let (amp, sigma, w) = ellipsoid_section(domain, theta, s);
    let alpha = (domain.dim as f64 - 1.0) / 2.0;
    amp * power_of_quadratic_deriv(alpha, sigma, order) / w.powi(order as i32)
}

/// `d^k/dσ^k (1 - σ²)^α`, expanded as a sum of terms `c σ^j (1 - σ²)^{α - m}`
/// using `d/dσ [σ^j q^β] = j σ^{j-1} q^β - 2β σ^{j+1} q^{β-1}`.
fn power_of_quadratic_deriv(alpha: f64, sigma: f64, order: usize) -> f64 {
    let mut terms: Vec<(f64, i32, i32)> = vec![(1.0, 0, 0)];
    for _ in 0..order {
        let mut next = Vec::with_capacity(terms.len() * 2);
        for &(c, j, m) in &terms {
            if j > 0 {
                next.push((c * j as f64, j - 1, m));
            }
            let beta = alpha - m as f64;
            if beta != 0.0 {
                next.push((-2.0 * beta * c, j + 1, m + 1));
            }
        }
        terms = next;
    }
    let q = 1.0 - sigma * sigma;
    terms
        .iter()
        .map(|&(c, j, m)| c * sigma.powi(j) * q.powf(alpha - m as f64))
        .sum()
}

/// Quadrature for principal-value integrals over `[a, b]`. Nodes are graded
/// toward both ends through `t = a + (b - a) β^4 / (β^4 + (1 - β)^4)`, which
/// turns square-root and quartic-root endpoint behaviour into polynomial
/// behaviour in β.
#[derive(Debug, Clone)]
pub struct PvRule {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PvRule {
    pub fn new(a: f64, b: f64, m: usize) -> Result<Self> {
        if !(a < b) {
            return invalid(format!("empty support interval ({a}, {b})"));
        }
        let base = gauss_legendre(m, 0.0, 1.0)?;
        let len = b - a;
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for (&beta, &w) in base.nodes.iter().zip(&base.weights) {
            let p = beta.powi(4);
            let q = (1.0 - beta).powi(4);
            let den = p + q;
            let map = p / den;
            // d/dβ [p / (p + q)] = (p' q - p q') / (p + q)^2
            let dp = 4.0 * beta.powi(3);
            let dq = -4.0 * (1.0 - beta).powi(3);
            let jac = (dp * q - p * dq) / (den * den);
            nodes.push(a + len * map);
            weights.push(w * len * jac);
        }
        Ok(PvRule {
            a,
            b,
            nodes,
            weights,
        })
    }

    /// `(1/π) p.v. ∫ φ(t) / (s - t) dt` given `φ` at the nodes and `φ` itself
    /// for the value at `s`.
    pub fn apply<F: Fn(f64) -> f64>(&self, values: &[f64], phi: &F, s: f64) -> Result<f64> {
        let span = self.b - self.a;
        if (s - self.a).abs() <= 1e-12 * span.max(1.0)
            || (s - self.b).abs() <= 1e-12 * span.max(1.0)
        {
            return Err(Error::EndpointSingularity(s));
        }
        if s < self.a || s > self.b {
            let acc: f64 = self
                .nodes
                .iter()
                .zip(&self.weights)
                .zip(values)
                .map(|((&t, &w), &v)| w * v / (s - t))
                .sum();
            return Ok(acc / PI);
        }
        let fs = phi(s);
        let tiny = 1e-9 * span;
        let mut acc = 0.0;
        for ((&t, &w), &v) in self.nodes.iter().zip(&self.weights).zip(values) {
            let gap = s - t;
            if gap.abs() < tiny {
                // Removable singularity: the difference quotient tends to -φ'(s).
                let h = 1e-5 * span;
                acc -= w * (phi(s + h) - phi(s - h)) / (2.0 * h);
            } else {
                acc += w * (v - fs) / gap;
            }
        }
        acc += fs * ((s - self.a) / (self.b - s)).ln();
        Ok(acc / PI)
    }
}

/// Principal-value Hilbert transform `(1/π) p.v. ∫ φ(t)/(s - t) dt` of a
/// function supported on `[a, b]`, by singularity subtraction.
pub fn hilbert_pv<F: Fn(f64) -> f64>(phi: F, a: f64, b: f64, s: f64, m: usize) -> Result<f64> {
    if m < 64 {
        return invalid(format!("Hilbert resolution must be at least 64, got {m}"));
    }
    let rule = PvRule::new(a, b, m)?;
    let values: Vec<f64> = rule.nodes.iter().map(|&t| phi(t)).collect();
    rule.apply(&values, &phi, s)
}

/// `ℛχ_Ω(θ, ·)` along one direction, with the chord data cached at the
/// principal-value nodes so its Hilbert transform is cheap to re-evaluate.
#[derive(Debug, Clone)]
pub struct RadonLine {
    pub domain: ConvexDomain,
    pub theta: Point,
    rule: PvRule,
    values: Vec<f64>,
}

impl RadonLine {
    pub fn new(domain: &ConvexDomain, theta: &Point, hilbert_nodes: usize) -> Result<Self> {
        check_unit(theta)?;
        let (lo, hi) = domain.support_interval(theta);
        let rule = PvRule::new(lo, hi, hilbert_nodes)?;
        let values = rule
            .nodes
            .iter()
            .map(|&t| radon_chi_unchecked(domain, theta, t))
            .collect();
        Ok(RadonLine {
            domain: domain.clone(),
            theta: *theta,
            rule,
            values,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.rule.a, self.rule.b)
    }

    pub fn radon(&self, s: f64) -> f64 {
        radon_chi_unchecked(&self.domain, &self.theta, s)
    }

    pub fn hilbert(&self, s: f64) -> Result<f64> {
        let phi = |t: f64| radon_chi_unchecked(&self.domain, &self.theta, t);
        self.rule.apply(&self.values, &phi, s)
    }

    /// `∂_s^k ℋ_2 ℛχ_Ω(θ, s)` by Richardson-extrapolated central differences.
    pub fn hilbert_deriv(&self, s: f64, order: usize, opts: &KernelOptions) -> Result<f64> {
        check_order(&self.domain, order)?;
        check_safety(&self.domain, &self.theta, s, opts.margin)?;
        let phi = |t: f64| radon_chi_unchecked(&self.domain, &self.theta, t);
        let h = |t: f64| {
            self.rule
                .apply(&self.values, &phi, t)
                .expect("stencil stays inside the safety region")
        };
        Ok(richardson_diff(&h, s, opts.step(), order))
    }

    pub fn radon_deriv(&self, s: f64, order: usize, opts: &KernelOptions) -> Result<f64> {
        radon_chi_deriv(&self.domain, &self.theta, s, order, opts)
    }
}

/// `∂_s^k ℋ_2 ℛχ_Ω(θ, s)`.
pub fn hilbert_radon_chi_deriv(
    domain: &ConvexDomain,
    theta: &Point,
    s: f64,
    order: usize,
    opts: &KernelOptions,
) -> Result<f64> {
    check_safety(domain, theta, s, opts.margin)?;
    RadonLine::new(domain, theta, opts.hilbert_nodes)?.hilbert_deriv(s, order, opts)
}

/// One row of a kernel profile.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    pub s: f64,
    pub rchi: f64,
    /// `∂_s^k ℛχ` for `k = 1..=order`.
    pub derivs: Vec<f64>,
    pub hrchi: Option<f64>,
    /// `∂_s^k ℋ_2 ℛχ` for `k = 1..=order`, when the Hilbert columns are requested.
    pub hderivs: Vec<f64>,
}

/// Sampled `ℛχ_Ω(θ, ·)`, `ℋ_2 ℛχ_Ω(θ, ·)` and their offset derivatives along
/// one direction. Immutable once built.
#[derive(Debug, Clone)]
pub struct KernelProfile {
    pub domain: ConvexDomain,
    pub theta: Point,
    pub order: usize,
    pub samples: Vec<KernelSample>,
}

impl KernelProfile {
    pub fn build(
        domain: &ConvexDomain,
        theta: &Point,
        order: usize,
        offsets: &[f64],
        with_hilbert: bool,
        opts: &KernelOptions,
    ) -> Result<Self> {
        check_order(domain, order)?;
        let line = RadonLine::new(domain, theta, opts.hilbert_nodes)?;
        let mut samples = Vec::with_capacity(offsets.len());
        for &s in offsets {
            check_safety(domain, theta, s, opts.margin)?;
            let derivs = (1..=order)
                .map(|k| line.radon_deriv(s, k, opts))
                .collect::<Result<Vec<_>>>()?;
            let (hrchi, hderivs) = if with_hilbert {
                let hv = line.hilbert(s)?;
                let hd = (1..=order)
                    .map(|k| line.hilbert_deriv(s, k, opts))
                    .collect::<Result<Vec<_>>>()?;
                (Some(hv), hd)
            } else {
                (None, vec![])
            };
            samples.push(KernelSample {
                s,
                rchi: line.radon(s),
                derivs,
                hrchi,
                hderivs,
            });
        }
        Ok(KernelProfile {
            domain: domain.clone(),
            theta: *theta,
            order,
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::adaptive_integrate;
    use proptest::prelude::*;

    fn cinf(center: Point, radius: f64) -> Bump {
        Bump {
            center,
            radius,
            amplitude: 1.0,
            profile: Profile::Cinf,
        }
    }

    #[test]
    fn phantom_peak_and_support() {
        let f = Phantom::new(2, vec![cinf([0.2, 0.1, 0.0], 0.3)]).unwrap();
        assert_eq!(f.eval(&[0.2, 0.1, 0.0]), 1.0);
        assert_eq!(f.eval(&[0.5, 0.1, 0.0]), 0.0);
        assert_eq!(f.eval(&[2.0, 2.0, 0.0]), 0.0);
        assert!(Phantom::new(4, vec![]).is_err());
    }

    #[test]
    fn polymu_bump_peak_is_inverse_norm() {
        for n in [2usize, 3] {
            let f = Phantom::new(
                n,
                vec![Bump {
                    center: [0.0; 3],
                    radius: 1.0,
                    amplitude: 1.0,
                    profile: Profile::PolyMu(2),
                }],
            )
            .unwrap();
            let nh = n as f64 / 2.0;
            let a = PI.powf(nh) * gamma_positive(3.0) / gamma_positive(nh + 3.0);
            assert!((f.eval(&[0.0; 3]) - 1.0 / a).abs() < 1e-14);
        }
    }

    #[test]
    fn mean_at_bump_center_is_profile_value() {
        for n in [2usize, 3] {
            let f = Phantom::new(n, vec![cinf([0.0; 3], 0.5)]).unwrap();
            for r in [0.1, 0.25, 0.4] {
                let m = spherical_mean(&f, &[0.0; 3], r, 32).unwrap();
                assert!((m - f.eval(&[r, 0.0, 0.0])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn mean_vanishes_outside_support() {
        let f = Phantom::new(3, vec![cinf([0.1, 0.0, 0.0], 0.3)]).unwrap();
        assert_eq!(spherical_mean(&f, &[0.5, 0.0, 0.0], 0.75, 32).unwrap(), 0.0);
        assert!(spherical_mean(&f, &[0.5, 0.0, 0.0], 0.0, 32).is_err());
        assert!(spherical_mean(&f, &[0.5, 0.0, 0.0], 0.2, 8).is_err());
    }

    #[test]
    fn mean_matches_high_resolution_oracle() {
        let f = Phantom::new(2, vec![cinf([0.0; 3], 0.6)]).unwrap();
        let x = [0.3, 0.0, 0.0];
        let coarse = spherical_mean(&f, &x, 0.5, 128).unwrap();
        let oracle = spherical_mean(&f, &x, 0.5, 2048).unwrap();
        assert!((coarse - oracle).abs() < 1e-8);
        let f3 = Phantom::new(3, vec![cinf([0.0; 3], 0.6)]).unwrap();
        let coarse = spherical_mean(&f3, &x, 0.5, 48).unwrap();
        let oracle = spherical_mean(&f3, &x, 0.5, 384).unwrap();
        assert!((coarse - oracle).abs() < 1e-8);
    }

    #[test]
    fn mean_converges_rapidly_in_resolution() {
        let f = Phantom::new(2, vec![cinf([0.0; 3], 0.6)]).unwrap();
        let x = [0.3, 0.1, 0.0];
        let exact = spherical_mean(&f, &x, 0.45, 4096).unwrap();
        let mut prev = f64::INFINITY;
        for m in [32, 64, 128] {
            let err = (spherical_mean(&f, &x, 0.45, m).unwrap() - exact).abs();
            if prev > 1e-13 {
                assert!(err * 10.0 <= prev, "m={m}: {err:e} vs {prev:e}");
            }
            prev = err;
        }
    }

    #[test]
    fn reduced_bump_mean_matches_surface_quadrature() {
        let rule = gauss_legendre(48, -1.0, 1.0).unwrap();
        for n in [2usize, 3] {
            let b = cinf([0.1, -0.05, if n == 3 { 0.08 } else { 0.0 }], 0.4);
            let f = Phantom::new(n, vec![b.clone()]).unwrap();
            let x = [0.45, 0.2, 0.0];
            let d = vector::dist(&x, &b.center);
            for r in [0.05, 0.2, d, 0.5, 0.7, 0.85] {
                let fast = bump_mean(&b, n, d, r, &rule);
                let slow = spherical_mean(&f, &x, r, if n == 2 { 4096 } else { 256 }).unwrap();
                assert!((fast - slow).abs() < 1e-9, "n={n} r={r}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn mollifier_examples() {
        assert_eq!(mollifier_eval(2, 0.5, &[0.5, 0.0, 0.0], 2), 0.0);
        assert!((mollifier_eval(2, 1.0, &[0.0; 3], 2) - 3.0 / PI).abs() < 1e-14);
        assert_eq!(mollifier_radon(3, 0.7, 0.7, 3), 0.0);
        assert_eq!(mollifier_radon(3, 0.7, -0.9, 3), 0.0);
        let peak =
            gamma_positive(1.0 + 2.0 + 1.0) / (0.5 * PI.sqrt() * gamma_positive(0.5 + 2.0 + 1.0));
        assert!((mollifier_radon(2, 0.5, 0.0, 2) - peak).abs() < 1e-13);
    }

    #[test]
    fn radon_of_disk_and_ball() {
        let disk = ConvexDomain::ball(2, 1.0).unwrap();
        let th = vector::polar2(0.77);
        assert!((radon_chi(&disk, &th, 0.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((radon_chi(&disk, &th, 0.6).unwrap() - 1.6).abs() < 1e-14);
        assert_eq!(radon_chi(&disk, &th, 1.2).unwrap(), 0.0);
        let ball = ConvexDomain::ball(3, 1.0).unwrap();
        assert!((radon_chi(&ball, &[0.0, 0.0, 1.0], 0.0).unwrap() - PI).abs() < 1e-14);
        assert!(radon_chi(&ball, &[0.0, 0.0, 1.1], 0.0).is_err());
    }

    #[test]
    fn chord_length_against_line_quadrature() {
        let e = ConvexDomain::ellipsoid(&[0.2, -0.1], &[1.5, 1.0]).unwrap();
        let se = ConvexDomain::superellipse(&[0.2, -0.1], &[1.5, 1.0], 4.0).unwrap();
        for dom in [&e, &se] {
            for (phi, s) in [(0.3, 0.1), (1.9, -0.4), (3.0, 0.9)] {
                let th = vector::polar2(phi);
                let perp = [-th[1], th[0], 0.0];
                let ind = |tau: f64| {
                    let p = vector::axpy(&vector::scale(&th, s), tau, &perp);
                    if dom.contains(&p) {
                        1.0
                    } else {
                        0.0
                    }
                };
                let oracle = adaptive_integrate(&ind, -3.0, 3.0, 1e-11);
                let got = radon_chi(dom, &th, s).unwrap();
                assert!((got - oracle).abs() < 1e-5, "{got} vs {oracle}");
            }
        }
        // Axis-aligned chords have closed forms.
        for s in [-1.2, 0.0, 0.7, 1.4] {
            let got = radon_chi(&se, &[1.0, 0.0, 0.0], s + 0.2).unwrap();
            let exact = 2.0 * (1.0 - (s / 1.5f64).powi(4)).powf(0.25);
            assert!((got - exact).abs() < 1e-12, "{got} vs {exact}");
        }
    }

    #[test]
    fn section_area_of_ellipsoid_against_planar_quadrature() {
        let e = ConvexDomain::ellipsoid(&[0.0, 0.1, 0.0], &[1.0, 0.8, 1.2]).unwrap();
        let th = [0.0, 0.0, 1.0];
        let s = 0.3;
        // Section is an ellipse with semi-axes scaled by sqrt(1 - (s/c)^2).
        let k = (1.0f64 - (s / 1.2f64).powi(2)).sqrt();
        let area = adaptive_integrate(
            &|x: f64| {
                let half = 0.8 * k * (1.0 - (x / k).powi(2)).max(0.0).sqrt();
                2.0 * half
            },
            -k,
            k,
            1e-12,
        );
        assert!((radon_chi(&e, &th, s).unwrap() - area).abs() < 1e-9);
    }

    #[test]
    fn ball_radon_derivatives() {
        let ball = ConvexDomain::ball(3, 1.0).unwrap();
        let opts = KernelOptions::new(0.1);
        let th = vector::polar3(0.3, 1.1);
        for s in [-0.5, 0.0, 0.3, 0.8] {
            assert_eq!(radon_chi_deriv(&ball, &th, s, 3, &opts).unwrap(), 0.0);
            let d2 = radon_chi_deriv(&ball, &th, s, 2, &opts).unwrap();
            assert!((d2 + 2.0 * PI).abs() < 1e-13);
            assert!(radon_chi_deriv_fd(&ball, &th, s, 3, &opts).unwrap().abs() < 1e-6);
        }
        assert!(matches!(
            radon_chi_deriv(&ball, &th, 0.95, 2, &opts),
            Err(Error::OutOfRegion(_))
        ));
    }

    #[test]
    fn analytic_and_fd_derivatives_agree_on_ellipse() {
        let e = ConvexDomain::ellipsoid(&[0.1, 0.2], &[1.5, 1.0]).unwrap();
        let opts = KernelOptions::new(0.2);
        for phi in [0.0, 0.4, 2.2] {
            let th = vector::polar2(phi);
            for s in [-0.5, 0.1, 0.6] {
                for k in 0..=2 {
                    let a = radon_chi_deriv(&e, &th, s, k, &opts).unwrap();
                    let f = radon_chi_deriv_fd(&e, &th, s, k, &opts).unwrap();
                    assert!((a - f).abs() < 1e-6 * (1.0 + a.abs()), "k={k}: {a} vs {f}");
                }
            }
        }
    }

    #[test]
    fn superellipse_second_derivative_against_fd_oracle() {
        let se = ConvexDomain::superellipse(&[0.0, 0.0], &[1.0, 1.0], 4.0).unwrap();
        let th = [1.0, 0.0, 0.0];
        let opts = KernelOptions::new(0.2);
        for s in [0.3f64, -0.55] {
            let got = radon_chi_deriv(&se, &th, s, 2, &opts).unwrap();
            // L = 2 g^{1/4}, g = 1 - s^4
            let g = 1.0 - s.powi(4);
            let exact = -6.0 * s * s * g.powf(-0.75) - 6.0 * s.powi(6) * g.powf(-1.75);
            assert!(((got - exact) / exact).abs() < 1e-6, "{got} vs {exact}");
        }
    }

    #[test]
    fn hilbert_of_semicircle() {
        let phi = |t: f64| (1.0 - t * t).max(0.0).sqrt();
        for s in [-0.5, 0.0, 0.5, 0.9] {
            let h = hilbert_pv(phi, -1.0, 1.0, s, 128).unwrap();
            assert!((h - s).abs() < 1e-10, "s={s}: {h}");
        }
        // Outside the support: s - sqrt(s^2 - 1) for s > 1.
        let h = hilbert_pv(phi, -1.0, 1.0, 1.5, 128).unwrap();
        assert!((h - (1.5 - (1.25f64).sqrt())).abs() < 1e-10);
        assert!(matches!(
            hilbert_pv(phi, -1.0, 1.0, 1.0, 128),
            Err(Error::EndpointSingularity(_))
        ));
        assert!(hilbert_pv(phi, -1.0, 1.0, 0.0, 32).is_err());
    }

    #[test]
    fn hilbert_of_even_function_vanishes_at_origin() {
        let phi = |t: f64| (1.0 - t * t).powi(3) * (2.0 + t * t);
        assert!(hilbert_pv(phi, -1.0, 1.0, 0.0, 65).unwrap().abs() < 1e-13);
    }

    #[test]
    fn hilbert_kernel_vanishes_for_disk_and_ellipse() {
        let disk = ConvexDomain::ball(2, 1.0).unwrap();
        let opts = KernelOptions::new(0.15);
        let th = vector::polar2(0.4);
        let line = RadonLine::new(&disk, &th, 256).unwrap();
        assert!((line.hilbert(0.3).unwrap() - 0.6).abs() < 1e-10);
        let e = ConvexDomain::ellipsoid(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        for phi in [0.0, 0.5, 1.3, 2.8] {
            let th = vector::polar2(phi);
            for s in [-0.6, 0.0, 0.45] {
                let v = hilbert_radon_chi_deriv(&e, &th, s, 2, &opts).unwrap();
                assert!(v.abs() < 1e-4, "phi={phi} s={s}: {v}");
            }
        }
    }

    #[test]
    fn superellipse_hilbert_kernel_is_nonzero_and_converged() {
        let se = ConvexDomain::superellipse(&[0.0, 0.0], &[1.0, 1.0], 4.0).unwrap();
        let th = [1.0, 0.0, 0.0];
        let mut opts = KernelOptions::new(0.2);
        let coarse = hilbert_radon_chi_deriv(&se, &th, 0.3, 2, &opts).unwrap();
        opts.hilbert_nodes *= 2;
        opts.fd_step *= 0.5;
        let fine = hilbert_radon_chi_deriv(&se, &th, 0.3, 2, &opts).unwrap();
        // Odd in s for a centred symmetric domain.
        assert!(
            hilbert_radon_chi_deriv(&se, &th, 0.0, 2, &opts)
                .unwrap()
                .abs()
                < 1e-8
        );
        assert!(fine.abs() > 1e-3);
        assert!(((coarse - fine) / fine).abs() < 1e-3, "{coarse} vs {fine}");
    }

    #[test]
    fn kernel_profile_columns() {
        let e = ConvexDomain::ellipsoid(&[0.0, 0.0], &[1.5, 1.0]).unwrap();
        let opts = KernelOptions::new(0.2);
        let offsets: Vec<f64> = (0..5).map(|k| -0.4 + 0.2 * k as f64).collect();
        let p = KernelProfile::build(&e, &[1.0, 0.0, 0.0], 2, &offsets, true, &opts).unwrap();
        assert_eq!(p.samples.len(), 5);
        for smp in &p.samples {
            assert!(smp.rchi > 0.0);
            assert_eq!(smp.derivs.len(), 2);
            assert_eq!(smp.hderivs.len(), 2);
            // ℋℛχ is linear for an ellipse: slope 2 a b / w^2 with w = a.
            assert!((smp.hderivs[0] - 2.0 * 1.5 / (1.5 * 1.5)).abs() < 1e-6);
        }
        assert!(KernelProfile::build(&e, &[1.0, 0.0, 0.0], 2, &[1.45], true, &opts).is_err());
    }

    proptest! {
        #[test]
        fn radon_parity(phi in 0.0f64..6.3, s in -1.6f64..1.6) {
            let e = ConvexDomain::ellipsoid(&[0.0, 0.0], &[1.5, 1.0]).unwrap();
            let se = ConvexDomain::superellipse(&[0.0, 0.0], &[1.2, 0.8], 4.0).unwrap();
            let shifted = ConvexDomain::ellipsoid(&[0.3, -0.2], &[1.5, 1.0]).unwrap();
            let th = vector::polar2(phi);
            let neg = vector::scale(&th, -1.0);
            for d in [&e, &se] {
                let a = radon_chi(d, &th, s).unwrap();
                prop_assert!((a - radon_chi(d, &th, -s).unwrap()).abs() < 1e-10);
            }
            for d in [&e, &se, &shifted] {
                let a = radon_chi(d, &neg, s).unwrap();
                prop_assert!((a - radon_chi(d, &th, -s).unwrap()).abs() < 1e-10);
                prop_assert!(a >= 0.0);
            }
        }

        #[test]
        fn kernel_flips_sign_with_hyperplane_orientation(phi in 0.0f64..6.3, s in -0.5f64..0.5) {
            let se = ConvexDomain::superellipse(&[0.1, 0.0], &[1.2, 0.9], 4.0).unwrap();
            let opts = KernelOptions::new(0.15);
            let th = vector::polar2(phi);
            let neg = vector::scale(&th, -1.0);
            let sc = s + vector::dot(&se.center, &th);
            let a = hilbert_radon_chi_deriv(&se, &th, sc, 2, &opts).unwrap();
            let b = hilbert_radon_chi_deriv(&se, &neg, -sc, 2, &opts).unwrap();
            prop_assert!((a + b).abs() < 1e-6 * (1.0 + a.abs()), "{} vs {}", a, b);
            let ball = ConvexDomain::ellipsoid(&[0.0, 0.1, 0.0], &[1.0, 0.9, 1.1]).unwrap();
            let th3 = vector::polar3(phi.cos(), phi);
            let k = ellipsoid_radon_deriv(&ball, &th3, 0.3 * s, 2);
            let kneg = ellipsoid_radon_deriv(&ball, &vector::scale(&th3, -1.0), -0.3 * s, 2);
            prop_assert!((k - kneg).abs() < 1e-12);
        }
    }
}
