//! The wave field with initial data `(f, 0)` from its spherical-mean
//! representation, and the Neumann trace `∂_ν u` sampled on the boundary.
//!
//! In three dimensions `u = ∂_t (t ℳf(x, t))`. In two dimensions
//! `u = ∂_t I(t)` with `I(t) = ∫_0^t r ℳf(x, r) / sqrt(t² - r²) dr`; the Abel
//! weight is removed by `r = t sin φ`. Both outer time derivatives are taken by
//! central differences; `t ℳ` is odd in `t` and `I` is odd in `t`, so the
//! stencils may reach negative times.

pub mod io;

use rayon::prelude::*;

use crate::calculus::{central_diff, gauss_legendre, QuadRule};
use crate::error::{invalid, Error, Result};
use crate::geometry::{BoundaryQuadrature, ConvexDomain};
use crate::transforms::{bump_mean, spherical_mean, Bump, Phantom};
use crate::vector::{self, Point};

/// How spherical means are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanRule {
    /// Per-bump reduction to a one-dimensional radial integral.
    Radial,
    /// Direct surface quadrature of the whole phantom.
    Quadrature,
}

impl MeanRule {
    pub fn name(&self) -> &'static str {
        match self {
            MeanRule::Radial => "radial",
            MeanRule::Quadrature => "quadrature",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "radial" => Ok(MeanRule::Radial),
            "quadrature" => Ok(MeanRule::Quadrature),
            _ => invalid(format!(
                "unknown mean rule '{s}' (expected radial or quadrature)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Time step of the outer central difference.
    pub h_t: f64,
    /// Step of the normal-derivative stencil.
    pub h_nu: f64,
    /// Gauss nodes of the radial mean (radial rule) or surface resolution (quadrature rule).
    pub mean_resolution: usize,
    /// Gauss nodes of the desingularized Abel integral (n = 2).
    pub abel_nodes: usize,
    /// 2 for the second-order normal difference, 4 for the fourth-order one.
    pub normal_stencil: usize,
    pub mean_rule: MeanRule,
}

impl SolverParams {
    /// Defaults: `h_t = 1e-3 t_max`, `h_ν = 1e-3 · (smallest semi-axis)`.
    pub fn new(domain: &ConvexDomain, t_max: f64) -> Self {
        SolverParams {
            h_t: 1e-3 * t_max,
            h_nu: 1e-3 * domain.min_semi_axis(),
            mean_resolution: 32,
            abel_nodes: 48,
            normal_stencil: 2,
            mean_rule: MeanRule::Radial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_t > 0.0) || !(self.h_nu > 0.0) {
            return invalid("solver steps h_t and h_nu must be positive");
        }
        if self.mean_resolution < 16 {
            return invalid("mean resolution must be at least 16");
        }
        if self.abel_nodes < 8 {
            return invalid("abel_nodes must be at least 8");
        }
        if self.normal_stencil != 2 && self.normal_stencil != 4 {
            return invalid("normal_stencil must be 2 or 4");
        }
        Ok(())
    }
}

/// Uniform samples `t_i = i t_max / (nt - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub nt: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, nt: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return invalid(format!("t_max must be positive, got {t_max}"));
        }
        if nt < 2 {
            return invalid(format!("nt must be at least 2, got {nt}"));
        }
        Ok(TimeGrid { t_max, nt })
    }

    pub fn step(&self) -> f64 {
        self.t_max / (self.nt - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.nt {
            self.t_max
        } else {
            i as f64 * self.step()
        }
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.nt).map(|i| self.time(i)).collect()
    }
}

/// Samples of `∂_ν u(y_j, t_i)`, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceGrid {
    pub domain: ConvexDomain,
    pub boundary: BoundaryQuadrature,
    pub times: TimeGrid,
    pub values: Vec<f64>,
    pub phantom_hash: String,
    pub params: SolverParams,
}

impl TraceGrid {
    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn row(&self, node: usize) -> &[f64] {
        let nt = self.times.nt;
        &self.values[node * nt..(node + 1) * nt]
    }

    pub fn value(&self, node: usize, i: usize) -> f64 {
        self.values[node * self.times.nt + i]
    }
}

/// Evaluates `u` for one phantom with fixed quadrature rules.
#[derive(Debug, Clone)]
pub struct WaveSolver<'a> {
    phantom: &'a Phantom,
    params: SolverParams,
    radial: QuadRule,
    abel: QuadRule,
}

/// Per-bump data cached at one evaluation point.
#[derive(Debug, Clone)]
struct BumpWindow<'a> {
    bump: &'a Bump,
    d: f64,
    r_lo: f64,
    r_hi: f64,
    /// Times from which the cached far-field sum is used (n = 2).
    far_from: f64,
    r_nodes: Vec<f64>,
    coeffs: Vec<f64>,
}

/// The wave field restricted to one spatial point, with the radius-only work done once.
#[derive(Debug, Clone)]
pub struct PointField<'s, 'a> {
    solver: &'s WaveSolver<'a>,
    x: Point,
    windows: Vec<BumpWindow<'a>>,
}

impl<'a> WaveSolver<'a> {
    pub fn new(phantom: &'a Phantom, params: &SolverParams) -> Result<Self> {
        params.validate()?;
        Ok(WaveSolver {
            phantom,
            params: params.clone(),
            radial: gauss_legendre(params.mean_resolution, -1.0, 1.0)?,
            abel: gauss_legendre(params.abel_nodes, -1.0, 1.0)?,
        })
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.phantom.dim
    }

    /// `ℳf(x, |r|)`, with the limit `f(x)` at `r = 0`.
    pub fn mean(&self, x: &Point, r: f64) -> f64 {
        let r = r.abs();
        if r == 0.0 {
            return self.phantom.eval(x);
        }
        match self.params.mean_rule {
            MeanRule::Radial => self
                .phantom
                .bumps
                .iter()
                .map(|b| {
                    bump_mean(
                        b,
                        self.phantom.dim,
                        vector::dist(x, &b.center),
                        r,
                        &self.radial,
                    )
                })
                .sum(),
            MeanRule::Quadrature => spherical_mean(self.phantom, x, r, self.params.mean_resolution)
                .expect("radius and resolution validated"),
        }
    }

    pub fn at(&self, x: &Point) -> PointField<'_, 'a> {
        let dim = self.phantom.dim;
        let windows = if self.params.mean_rule == MeanRule::Radial {
            self.phantom
                .bumps
                .iter()
                .map(|b| {
                    let d = vector::dist(x, &b.center);
                    let r_lo = (d - b.radius).max(0.0);
                    let r_hi = d + b.radius;
                    let mut w = BumpWindow {
                        bump: b,
                        d,
                        r_lo,
                        r_hi,
                        far_from: r_hi + 0.25 * (r_hi - r_lo),
                        r_nodes: vec![],
                        coeffs: vec![],
                    };
                    if dim == 2 {
                        let half = 0.5 * (r_hi - r_lo);
                        let mid = 0.5 * (r_hi + r_lo);
                        for (&z, &wt) in self.abel.nodes.iter().zip(&self.abel.weights) {
                            let r = mid + half * z;
                            w.r_nodes.push(r);
                            w.coeffs
                                .push(half * wt * r * bump_mean(b, 2, d, r, &self.radial));
                        }
                    }
                    w
                })
                .collect()
        } else {
            vec![]
        };
        PointField {
            solver: self,
            x: *x,
            windows,
        }
    }

    /// `u(x, t)` for `t > 0`.
    pub fn u(&self, x: &Point, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return invalid(format!("wave_solution needs t > 0, got {t}"));
        }
        Ok(self.at(x).u(t))
    }

    /// The same field through the alternative Abel substitution (n = 2).
    pub fn u_alt(&self, x: &Point, t: f64) -> Result<f64> {
        if self.phantom.dim != 2 {
            return Err(Error::UnsupportedDimension(self.phantom.dim));
        }
        if !(t > 0.0) {
            return invalid(format!("wave_solution_even_alt needs t > 0, got {t}"));
        }
        let field = self.at(x);
        Ok(central_diff(|s| field.abel_alt(s), t, self.params.h_t, 1))
    }
}

impl PointField<'_, '_> {
    pub fn point(&self) -> &Point {
        &self.x
    }

    /// `u(x, t)`; even in `t`, equal to `f(x)` at `t = 0`.
    pub fn u(&self, t: f64) -> f64 {
        let h = self.solver.params.h_t;
        if self.solver.phantom.dim == 3 {
            central_diff(|s| s * self.mean(s), t, h, 1)
        } else {
            central_diff(|s| self.abel(s), t, h, 1)
        }
    }

    fn mean(&self, r: f64) -> f64 {
        let r = r.abs();
        if self.windows.is_empty() || r == 0.0 {
            return self.solver.mean(&self.x, r);
        }
        self.windows
            .iter()
            .map(|w| bump_mean(w.bump, self.solver.phantom.dim, w.d, r, &self.solver.radial))
            .sum()
    }

    /// `I(t) = t ∫_0^{π/2} sin φ ℳ(x, t sin φ) dφ`, extended oddly to `t < 0`.
    fn abel(&self, t: f64) -> f64 {
        let (sign, t) = (t.signum(), t.abs());
        if t == 0.0 {
            return 0.0;
        }
        let s = &self.solver;
        if s.params.mean_rule == MeanRule::Quadrature {
            let v = s
                .abel
                .integrate_over(0.0, 0.5 * std::f64::consts::PI, |phi| {
                    phi.sin() * s.mean(&self.x, t * phi.sin())
                });
            return sign * t * v;
        }
        let mut acc = 0.0;
        for w in &self.windows {
            if t <= w.r_lo {
                continue;
            }
            if t >= w.far_from {
                acc += w
                    .r_nodes
                    .iter()
                    .zip(&w.coeffs)
                    .map(|(&r, &c)| c / ((t - r) * (t + r)).sqrt())
                    .sum::<f64>();
            } else {
                let lo = (w.r_lo / t).asin();
                let hi = (w.r_hi / t).min(1.0).asin();
                acc += t * s.abel.integrate_over(lo, hi, |phi| {
                    phi.sin() * bump_mean(w.bump, 2, w.d, t * phi.sin(), &s.radial)
                });
            }
        }
        sign * acc
    }

    /// `∫_0^t ℳ(x, sqrt(t² - v²)) dv`, the same integral as [`Self::abel`]
    /// after the substitution `v = sqrt(t² - r²)`.
    fn abel_alt(&self, t: f64) -> f64 {
        let (sign, t) = (t.signum(), t.abs());
        if t == 0.0 {
            return 0.0;
        }
        let s = &self.solver;
        let radius = |v: f64| ((t - v) * (t + v)).max(0.0).sqrt();
        if s.params.mean_rule == MeanRule::Quadrature {
            return sign
                * s.abel
                    .integrate_over(0.0, t, |v| s.mean(&self.x, radius(v)));
        }
        let mut acc = 0.0;
        for w in &self.windows {
            if t <= w.r_lo {
                continue;
            }
            let top = w.r_hi.min(t);
            let v_lo = ((t - top) * (t + top)).max(0.0).sqrt();
            let v_hi = ((t - w.r_lo) * (t + w.r_lo)).sqrt();
            acc += s.abel.integrate_over(v_lo, v_hi, |v| {
                bump_mean(w.bump, 2, w.d, radius(v), &s.radial)
            });
        }
        sign * acc
    }
}

/// `u(x, t)` for the initial data `(f, 0)`.
pub fn wave_solution(f: &Phantom, x: &Point, t: f64, params: &SolverParams) -> Result<f64> {
    WaveSolver::new(f, params)?.u(x, t)
}

/// `u(x, t)` in two dimensions through the alternative Abel substitution.
pub fn wave_solution_even_alt(
    f: &Phantom,
    x: &Point,
    t: f64,
    params: &SolverParams,
) -> Result<f64> {
    WaveSolver::new(f, params)?.u_alt(x, t)
}

fn normal_difference<F: Fn(&Point) -> f64>(
    u: F,
    y: &Point,
    nu: &Point,
    h: f64,
    stencil: usize,
) -> f64 {
    let at = |k: f64| u(&vector::axpy(y, k * h, nu));
    if stencil == 4 {
        (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
    } else {
        (at(1.0) - at(-1.0)) / (2.0 * h)
    }
}

fn stencil_offsets(stencil: usize) -> &'static [f64] {
    if stencil == 4 {
        &[2.0, 1.0, -1.0, -2.0]
    } else {
        &[1.0, -1.0]
    }
}

fn combine_stencil(values: &[f64], h: f64, stencil: usize) -> f64 {
    if stencil == 4 {
        (-values[0] + 8.0 * values[1] - 8.0 * values[2] + values[3]) / (12.0 * h)
    } else {
        (values[0] - values[1]) / (2.0 * h)
    }
}

/// `∂_ν u(y, t)` by a central difference across the boundary point `y`.
pub fn neumann_trace(
    f: &Phantom,
    domain: &ConvexDomain,
    y: &Point,
    nu: &Point,
    t: f64,
    params: &SolverParams,
) -> Result<f64> {
    if !(t >= 0.0) {
        return invalid(format!("neumann_trace needs t >= 0, got {t}"));
    }
    if (domain.gauge(y) - 1.0).abs() > 1e-6 {
        return invalid("trace point is not on the boundary");
    }
    let solver = WaveSolver::new(f, params)?;
    let (h, st) = (params.h_nu, params.normal_stencil);
    if t == 0.0 {
        return Ok(normal_difference(|p| f.eval(p), y, nu, h, st));
    }
    Ok(normal_difference(|p| solver.at(p).u(t), y, nu, h, st))
}

/// Fills the node × time matrix of Neumann-trace samples.
pub fn simulate_traces(
    f: &Phantom,
    domain: &ConvexDomain,
    bq: &BoundaryQuadrature,
    tg: &TimeGrid,
    params: &SolverParams,
) -> Result<TraceGrid> {
    if f.dim != domain.dim {
        return invalid(format!(
            "phantom dimension {} does not match domain dimension {}",
            f.dim, domain.dim
        ));
    }
    let rho = f.margin(domain);
    if !(rho > 2.0 * params.h_nu) {
        return Err(Error::Config(format!(
            "phantom support margin {rho} must exceed 2 h_nu = {}",
            2.0 * params.h_nu
        )));
    }
    // Each bump is differenced on its own and the traces are summed, so the
    // result is additive in the phantom up to the rounding of that sum.
    let singles: Vec<Phantom> = f
        .bumps
        .iter()
        .map(|b| Phantom {
            dim: f.dim,
            bumps: vec![b.clone()],
        })
        .collect();
    let solvers = singles
        .iter()
        .map(|g| WaveSolver::new(g, params))
        .collect::<Result<Vec<_>>>()?;
    let times = tg.samples();
    let (h, st) = (params.h_nu, params.normal_stencil);
    let rows: Vec<Vec<f64>> = bq
        .nodes
        .par_iter()
        .map(|node| {
            let mut row = vec![0.0; times.len()];
            for (solver, g) in solvers.iter().zip(&singles) {
                let fields: Vec<PointField> = stencil_offsets(st)
                    .iter()
                    .map(|&k| solver.at(&vector::axpy(&node.point, k * h, &node.normal)))
                    .collect();
                for (slot, &t) in row.iter_mut().zip(&times) {
                    let v: Vec<f64> = if t == 0.0 {
                        fields.iter().map(|p| g.eval(p.point())).collect()
                    } else {
                        fields.iter().map(|p| p.u(t)).collect()
                    };
                    *slot += combine_stencil(&v, h, st);
                }
            }
            row
        })
        .collect();
    Ok(TraceGrid {
        domain: domain.clone(),
        boundary: bq.clone(),
        times: *tg,
        values: rows.concat(),
        phantom_hash: f.fingerprint(),
        params: params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::Profile;

    fn bump(center: Point, radius: f64) -> Bump {
        Bump {
            center,
            radius,
            amplitude: 1.0,
            profile: Profile::Cinf,
        }
    }

    fn params(domain: &ConvexDomain, t_max: f64) -> SolverParams {
        SolverParams::new(domain, t_max)
    }

    /// `∂_t (t ℳ)` for one radial bump in three dimensions, in closed form:
    /// `[(d + t) φ(d + t) + (d - t) φ(|d - t|)] / (2 d)`.
    fn odd_oracle(b: &Bump, x: &Point, t: f64) -> f64 {
        let d = vector::dist(x, &b.center);
        ((d + t) * b.radial(d + t, 3) + (d - t) * b.radial((d - t).abs(), 3)) / (2.0 * d)
    }

    #[test]
    fn three_dimensional_solution_matches_closed_form() {
        let ball = ConvexDomain::ball(3, 1.0).unwrap();
        let b = bump([0.1, 0.0, 0.0], 0.35);
        let f = Phantom::new(3, vec![b.clone()]).unwrap();
        let p = params(&ball, 3.0);
        for (x, t) in [
            ([0.5, 0.2, 0.0], 0.3),
            ([0.0, 0.0, 0.6], 0.55),
            ([0.3, 0.0, 0.0], 0.1),
        ] {
            let got = wave_solution(&f, &x, t, &p).unwrap();
            let exact = odd_oracle(&b, &x, t);
            assert!((got - exact).abs() < 1e-6, "{got} vs {exact}");
        }
    }

    #[test]
    fn initial_value_is_recovered() {
        for n in [2usize, 3] {
            let dom = ConvexDomain::ball(n, 1.0).unwrap();
            let f = Phantom::new(n, vec![bump([0.1, 0.0, 0.0], 0.35)]).unwrap();
            let p = params(&dom, 3.0);
            let x = [0.15, 0.05, 0.0];
            let u = wave_solution(&f, &x, 1e-3, &p).unwrap();
            assert!((u - f.eval(&x)).abs() <= 1e-4, "n={n}: {u}");
        }
    }

    #[test]
    fn nonpositive_time_is_rejected() {
        let dom = ConvexDomain::ball(3, 1.0).unwrap();
        let f = Phantom::new(3, vec![bump([0.0; 3], 0.3)]).unwrap();
        assert!(wave_solution(&f, &[0.0; 3], 0.0, &params(&dom, 1.0)).is_err());
        assert!(wave_solution(&f, &[0.0; 3], -1.0, &params(&dom, 1.0)).is_err());
    }

    #[test]
    fn huygens_in_three_dimensions() {
        let dom = ConvexDomain::ball(3, 1.0).unwrap();
        let b = bump([0.1, 0.0, 0.0], 0.35);
        let f = Phantom::new(3, vec![b]).unwrap();
        let x = [-0.4, 0.3, 0.2];
        let d = vector::dist(&x, &[0.1, 0.0, 0.0]);
        let u = wave_solution(&f, &x, d + 0.36, &params(&dom, 3.0)).unwrap();
        assert!(u.abs() <= 1e-10);
    }

    #[test]
    fn two_dimensional_solution_self_converges() {
        let dom = ConvexDomain::ball(2, 1.0).unwrap();
        let f = Phantom::new(2, vec![bump([0.0; 3], 0.3)]).unwrap();
        let p = params(&dom, 2.0);
        let mut fine = p.clone();
        fine.mean_resolution *= 4;
        fine.abel_nodes *= 4;
        let x = [0.3, 0.0, 0.0];
        let a = wave_solution(&f, &x, 0.7, &p).unwrap();
        let b = wave_solution(&f, &x, 0.7, &fine).unwrap();
        assert!(a.abs() > 1e-3);
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn radial_and_surface_means_agree() {
        for n in [2usize, 3] {
            let dom = ConvexDomain::ball(n, 1.0).unwrap();
            let f = Phantom::new(
                n,
                vec![bump([0.1, -0.1, 0.0], 0.35), bump([-0.3, 0.2, 0.0], 0.25)],
            )
            .unwrap();
            let p = params(&dom, 2.0);
            let mut q = p.clone();
            q.mean_rule = MeanRule::Quadrature;
            q.mean_resolution = if n == 2 { 512 } else { 160 };
            q.abel_nodes = 256;
            for (x, t) in [([0.2, 0.3, 0.0], 0.35), ([0.0, -0.2, 0.0], 0.6)] {
                let a = wave_solution(&f, &x, t, &p).unwrap();
                let b = wave_solution(&f, &x, t, &q).unwrap();
                assert!((a - b).abs() < 1e-6, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn even_representations_agree() {
        let dom = ConvexDomain::ball(2, 1.0).unwrap();
        let f = Phantom::new(2, vec![bump([0.1, 0.0, 0.0], 0.3)]).unwrap();
        let p = params(&dom, 3.0);
        let mut fine = p.clone();
        fine.mean_resolution = 64;
        fine.abel_nodes = 96;
        for (x, t) in [
            ([0.3, 0.1, 0.0], 0.25),
            ([-0.4, 0.2, 0.0], 0.8),
            ([0.0, 0.0, 0.0], 2.5),
        ] {
            for (q, tol) in [(&p, 1e-6), (&fine, 1e-8)] {
                let a = wave_solution(&f, &x, t, q).unwrap();
                let b = wave_solution_even_alt(&f, &x, t, q).unwrap();
                assert!((a - b).abs() < tol, "{a} vs {b} at {} nodes", q.abel_nodes);
            }
        }
        assert!(wave_solution_even_alt(&Phantom::zero(2), &[0.0; 3], 0.5, &p).unwrap() == 0.0);
        let f3 = Phantom::zero(3);
        assert!(wave_solution_even_alt(&f3, &[0.0; 3], 0.5, &p).is_err());
    }

    #[test]
    fn far_field_cache_is_continuous() {
        let dom = ConvexDomain::ball(2, 1.0).unwrap();
        let f = Phantom::new(2, vec![bump([0.2, 0.0, 0.0], 0.3)]).unwrap();
        let p = params(&dom, 4.0);
        let solver = WaveSolver::new(&f, &p).unwrap();
        let x = [-0.5, 0.0, 0.0];
        let field = solver.at(&x);
        let switch = field.windows[0].far_from;
        // Both sides of the switch against the sine-substitution route alone.
        for t in [switch - 1e-9, switch + 1e-9, switch + 0.5] {
            let cached = field.abel(t);
            let lo = (field.windows[0].r_lo / t).asin();
            let hi = (field.windows[0].r_hi / t).min(1.0).asin();
            let direct = t * gauss_legendre(256, lo, hi)
                .unwrap()
                .integrate(|phi| phi.sin() * solver.mean(&x, t * phi.sin()));
            assert!(
                (cached - direct).abs() < 1e-12,
                "t={t}: {cached} vs {direct}"
            );
        }
    }

    #[test]
    fn trace_is_rotation_invariant_for_centered_bump() {
        for n in [2usize, 3] {
            let dom = ConvexDomain::ball(n, 1.0).unwrap();
            let f = Phantom::new(n, vec![bump([0.0; 3], 0.4)]).unwrap();
            let p = params(&dom, 2.0);
            let bq = dom.boundary_quadrature(8).unwrap();
            let vals: Vec<f64> = bq
                .nodes
                .iter()
                .map(|nd| neumann_trace(&f, &dom, &nd.point, &nd.normal, 0.9, &p).unwrap())
                .collect();
            assert!(vals[0].abs() > 1e-3);
            for v in &vals {
                assert!((v - vals[0]).abs() < 1e-8, "n={n}: {v} vs {}", vals[0]);
            }
            assert_eq!(
                neumann_trace(&f, &dom, &bq.nodes[0].point, &bq.nodes[0].normal, 0.0, &p).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn fourth_order_normal_stencil_agrees() {
        let dom = ConvexDomain::ball(3, 1.0).unwrap();
        let f = Phantom::new(3, vec![bump([0.1, 0.0, 0.0], 0.35)]).unwrap();
        let mut p = params(&dom, 3.0);
        let y = vector::polar3(0.3, 0.4);
        let a = neumann_trace(&f, &dom, &y, &y, 0.8, &p).unwrap();
        p.normal_stencil = 4;
        let b = neumann_trace(&f, &dom, &y, &y, 0.8, &p).unwrap();
        assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()), "{a} vs {b}");
        assert!(neumann_trace(&f, &dom, &[0.5, 0.0, 0.0], &y, 0.8, &p).is_err());
    }

    #[test]
    fn simulated_traces_basic_invariants() {
        let dom = ConvexDomain::ball(3, 1.0).unwrap();
        let b = bump([0.1, 0.0, 0.0], 0.35);
        let f = Phantom::new(3, vec![b.clone()]).unwrap();
        let bq = dom.boundary_quadrature(8).unwrap();
        let tg = TimeGrid::new(3.0, 61).unwrap();
        let p = params(&dom, 3.0);
        let tr = simulate_traces(&f, &dom, &bq, &tg, &p).unwrap();
        assert_eq!(tr.values.len(), bq.len() * 61);
        for j in 0..bq.len() {
            assert_eq!(tr.value(j, 0), 0.0);
            let horizon =
                vector::dist(&bq.nodes[j].point, &b.center) + b.radius + 2.0 * p.h_nu + 2.0 * p.h_t;
            for i in 0..61 {
                if tg.time(i) > horizon {
                    assert!(tr.value(j, i).abs() <= 1e-8);
                }
            }
        }
        let zero = simulate_traces(&Phantom::zero(3), &dom, &bq, &tg, &p).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        // Pointwise in time: refining the grid reproduces shared samples.
        let fine = simulate_traces(&f, &dom, &bq, &TimeGrid::new(3.0, 121).unwrap(), &p).unwrap();
        for j in 0..bq.len() {
            for i in 0..61 {
                assert!((fine.value(j, 2 * i) - tr.value(j, i)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn margin_violation_is_a_configuration_error() {
        let dom = ConvexDomain::ball(2, 1.0).unwrap();
        let f = Phantom::new(2, vec![bump([0.0; 3], 0.9995)]).unwrap();
        let bq = dom.boundary_quadrature(16).unwrap();
        let tg = TimeGrid::new(2.0, 10).unwrap();
        let r = simulate_traces(&f, &dom, &bq, &tg, &params(&dom, 2.0));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn time_grid_endpoints() {
        let tg = TimeGrid::new(3.0, 7).unwrap();
        assert_eq!(tg.time(0), 0.0);
        assert_eq!(tg.time(6), 3.0);
        assert!((tg.step() - 0.5).abs() < 1e-15);
        assert!(TimeGrid::new(3.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 5).is_err());
    }
}
