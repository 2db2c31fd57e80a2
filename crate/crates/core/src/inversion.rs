//! Back-projection of Neumann traces and the correction operator `K_Ω`,
//! combined into a reconstructor that solves `f = b + σ K_Ω f` by fixed-point
//! iteration on a grid, with `σ =` [`CORRECTION_SIGN`].
//!
//! `K_Ω f(x) = C ∫_Ω f(y) κ(ñ(x, y), s̃(x, y)) / |x - y|^{n-1} dy` with
//! `ñ = (y - x)/|y - x|` and `s̃ = (|y|² - |x|²) / (2 |y - x|)`. Writing
//! `y = x + r ω` gives `s̃ = <x, ω> + r/2` and the polar Jacobian `r^{n-1}`
//! cancels the singular factor, so the integrand is bounded.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::calculus::{gauss_legendre, QuadRule};
use crate::error::{invalid, Error, Result};
use crate::forward::TraceGrid;
use crate::geometry::{ConvexDomain, DomainKind};
use crate::transforms::{
    ellipsoid_radon_deriv, radon_chi_deriv, KernelOptions, Phantom, RadonLine,
};
use crate::vector::{self, Point};

/// Time interpolation of trace samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceInterp {
    /// Four-point Lagrange.
    Cubic,
    Linear,
}

impl TraceInterp {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cubic" => Ok(TraceInterp::Cubic),
            "linear" => Ok(TraceInterp::Linear),
            _ => invalid(format!(
                "unknown interpolation '{s}' (expected cubic or linear)"
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TraceInterp::Cubic => "cubic",
            TraceInterp::Linear => "linear",
        }
    }
}

/// Samples `row` (uniform step `dt`, starting at 0) at time `t`.
pub fn interpolate(row: &[f64], dt: f64, t: f64, mode: TraceInterp) -> f64 {
    let n = row.len();
    let u = (t / dt).max(0.0);
    match mode {
        TraceInterp::Linear => {
            let i = (u.floor() as usize).min(n - 2);
            let a = u - i as f64;
            row[i] * (1.0 - a) + row[i + 1] * a
        }
        TraceInterp::Cubic => {
            let i = (u.floor() as usize).clamp(1, n.saturating_sub(3).max(1)) - 1;
            let a = u - i as f64;
            // Lagrange basis on the nodes 0, 1, 2, 3 (relative to i).
            let (a0, a1, a2, a3) = (a, a - 1.0, a - 2.0, a - 3.0);
            -row[i] * a1 * a2 * a3 / 6.0 + row[i + 1] * a0 * a2 * a3 / 2.0
                - row[i + 2] * a0 * a1 * a3 / 2.0
                + row[i + 3] * a0 * a1 * a2 / 6.0
        }
    }
}

/// Fixed-point iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correction {
    None,
    FixedPoint { max_iter: usize, tol: f64 },
}

/// Resolution of the `K_Ω` quadrature and of its kernel tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionOptions {
    /// Angles on the circle; polar Gauss nodes on the sphere (azimuths are twice as many).
    pub directions: usize,
    /// Gauss nodes per radial interval (smooth fields) or per grid panel (grids use 4).
    pub radial_nodes: usize,
    /// Offset samples per kernel table.
    pub kernel_samples: usize,
    pub hilbert_nodes: usize,
    /// Upper bound for the kernel finite-difference step.
    pub fd_step: f64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        CorrectionOptions {
            directions: 128,
            radial_nodes: 64,
            kernel_samples: 129,
            hilbert_nodes: 256,
            fd_step: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionOptions {
    pub interp: TraceInterp,
    /// Even n: data are used on `[0, T_max_factor · diam Ω]`.
    pub t_max_factor: f64,
    pub correction: Correction,
    /// Width of one Abel-integral panel in trace time steps (even n).
    pub abel_panel: f64,
    /// Gauss nodes per Abel panel (even n).
    pub abel_order: usize,
    pub kernel: CorrectionOptions,
    /// Required distance of reconstruction points from the boundary (ρ/2).
    pub safety_margin: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        ReconstructionOptions {
            interp: TraceInterp::Cubic,
            t_max_factor: 4.0,
            correction: Correction::None,
            abel_panel: 2.0,
            abel_order: 3,
            kernel: CorrectionOptions::default(),
            safety_margin: 0.0,
        }
    }
}

impl ReconstructionOptions {
    pub fn validate(&self) -> Result<()> {
        if let Correction::FixedPoint { max_iter, tol } = self.correction {
            if max_iter < 1 || !(tol > 0.0) {
                return Err(Error::Config(
                    "fixed-point iteration needs max_iter >= 1 and tol > 0".into(),
                ));
            }
        }
        if !(self.abel_panel > 0.0) || self.abel_order < 1 {
            return Err(Error::Config(
                "abel_panel must be positive and abel_order at least 1".into(),
            ));
        }
        if !(self.safety_margin >= 0.0) {
            return Err(Error::Config("safety margin must be non-negative".into()));
        }
        Ok(())
    }
}

fn node_distance(x: &Point, y: &Point, node: usize) -> Result<f64> {
    let d = vector::dist(x, y);
    if d <= 1e-14 {
        return Err(Error::InsufficientData {
            node,
            reason: "reconstruction point coincides with the boundary node".into(),
        });
    }
    Ok(d)
}

/// `f(x)` on an ellipsoid in three dimensions:
/// `(1/2π) Σ_j w_j ∂_ν u(y_j, t) / t` at `t = |x - y_j|`.
pub fn backproject_odd(traces: &TraceGrid, x: &Point, interp: TraceInterp) -> Result<f64> {
    if traces.dim() != 3 {
        return Err(Error::UnsupportedDimension(traces.dim()));
    }
    let dt = traces.times.step();
    let t_max = traces.times.t_max;
    let mut acc = 0.0;
    for (j, node) in traces.boundary.nodes.iter().enumerate() {
        let d = node_distance(x, &node.point, j)?;
        if d >= t_max {
            return Err(Error::InsufficientData {
                node: j,
                reason: format!("needs t = {d} but traces end at {t_max}"),
            });
        }
        acc += node.weight * interpolate(traces.row(j), dt, d, interp) / d;
    }
    Ok(acc / (2.0 * PI))
}

/// Even-dimension back-projection with the data window `[0, T_max_factor · diam Ω]`.
pub fn backproject_even(
    traces: &TraceGrid,
    x: &Point,
    opts: &ReconstructionOptions,
) -> Result<f64> {
    if opts.t_max_factor < 2.0 {
        return Err(Error::Config(format!(
            "T_max_factor must be at least 2, got {}",
            opts.t_max_factor
        )));
    }
    let rule = gauss_legendre(opts.abel_order, 0.0, 1.0)?;
    backproject_even_to(
        traces,
        x,
        opts.t_max_factor * traces.domain.diameter(),
        opts,
        &rule,
    )
}

/// `(1/π) Σ_j w_j ∫_0^{sqrt(T² - d²)} ∂_ν u(y_j, τ) / τ dv`, `τ = sqrt(d² + v²)`,
/// the Abel integral `∫_d^T ∂_ν u(y_j, t) / sqrt(t² - d²) dt` after `t = τ(v)`.
fn backproject_even_to(
    traces: &TraceGrid,
    x: &Point,
    horizon: f64,
    opts: &ReconstructionOptions,
    panel_rule: &QuadRule,
) -> Result<f64> {
    if traces.dim() != 2 {
        return Err(Error::UnsupportedDimension(traces.dim()));
    }
    let t_max = traces.times.t_max;
    if horizon > t_max * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "back-projection needs data up to t = {horizon} but traces end at {t_max}"
        )));
    }
    let dt = traces.times.step();
    let width = opts.abel_panel * dt;
    let mut acc = 0.0;
    for (j, node) in traces.boundary.nodes.iter().enumerate() {
        let d = node_distance(x, &node.point, j)?;
        if d >= horizon {
            return Err(Error::InsufficientData {
                node: j,
                reason: format!("distance {d} exceeds the data horizon {horizon}"),
            });
        }
        let row = traces.row(j);
        let v_max = ((horizon - d) * (horizon + d)).sqrt();
        let panels = (v_max / width).ceil().max(1.0) as usize;
        let h = v_max / panels as f64;
        let d2 = d * d;
        let mut inner = 0.0;
        for p in 0..panels {
            let a = p as f64 * h;
            for (&z, &w) in panel_rule.nodes.iter().zip(&panel_rule.weights) {
                let v = a + h * z;
                let tau = (d2 + v * v).sqrt().min(t_max);
                inner += w * interpolate(row, dt, tau, opts.interp) / tau;
            }
        }
        acc += node.weight * inner * h;
    }
    Ok(acc / PI)
}

/// A function that `K_Ω` can integrate.
pub trait Field: Sync {
    fn value(&self, y: &Point) -> f64;

    /// Sorted, disjoint intervals of `r ≥ 0` outside which `f(x + r ω)` vanishes.
    fn ray_support(&self, x: &Point, omega: &Point) -> Vec<(f64, f64)>;

    /// Panel width for composite quadrature along rays, for fields that are
    /// only piecewise smooth; `None` for smooth fields.
    fn panel_width(&self) -> Option<f64> {
        None
    }
}

impl Field for Phantom {
    fn value(&self, y: &Point) -> f64 {
        self.eval(y)
    }

    fn ray_support(&self, x: &Point, omega: &Point) -> Vec<(f64, f64)> {
        let mut spans: Vec<(f64, f64)> = self
            .bumps
            .iter()
            .filter_map(|b| {
                let rel = vector::sub(&b.center, x);
                let proj = vector::dot(&rel, omega);
                let disc = proj * proj - (vector::dot(&rel, &rel) - b.radius * b.radius);
                if disc <= 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                let (lo, hi) = ((proj - root).max(0.0), proj + root);
                (hi > lo).then_some((lo, hi))
            })
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(spans.len());
        for (lo, hi) in spans {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    }
}

/// `κ(θ, ·)` sampled on a uniform offset grid, cubic-interpolated.
#[derive(Debug, Clone)]
struct KernelTable {
    lo: f64,
    hi: f64,
    step: f64,
    values: Vec<f64>,
}

impl KernelTable {
    fn eval(&self, s: f64) -> Option<f64> {
        let slack = 1e-9 * self.step;
        if s < self.lo - slack || s > self.hi + slack {
            return None;
        }
        let u = ((s - self.lo) / self.step).clamp(0.0, (self.values.len() - 1) as f64);
        Some(interpolate(&self.values, 1.0, u, TraceInterp::Cubic))
    }
}

/// `K_Ω` with precomputed kernel tables over a fixed direction set.
#[derive(Debug, Clone)]
pub struct CorrectionOperator {
    pub domain: ConvexDomain,
    pub margin: f64,
    pub constant: f64,
    directions: Vec<(Point, f64)>,
    tables: Vec<KernelTable>,
    radial: QuadRule,
    panel: QuadRule,
}

/// Sign with which `K_Ω` enters `f = b + σ K_Ω f`. Simulated data on a
/// non-ellipsoidal domain satisfy `b = f + K_Ω f` with `K_Ω` as defined
/// here; this follows from Green's identity with the volume term
/// `-∫∫ Δ(uv)`, from which `K_Ω` is derived.
pub const CORRECTION_SIGN: f64 = -1.0;

/// `(-1)^{⌊(n-2)/2⌋} / (2^{n+1} π^{n-1})`.
pub fn correction_constant(n: usize) -> f64 {
    let sign = if ((n - 2) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    sign / (2f64.powi(n as i32 + 1) * PI.powi(n as i32 - 1))
}

impl CorrectionOperator {
    /// `margin` is the safety distance: kernels are tabulated for hyperplanes
    /// at least this far inside the support interval of every direction.
    pub fn build(domain: &ConvexDomain, margin: f64, opts: &CorrectionOptions) -> Result<Self> {
        if !(margin > 0.0) {
            return Err(Error::OutOfRegion(format!(
                "safety margin must be positive, got {margin}"
            )));
        }
        if opts.directions < 8 || opts.radial_nodes < 2 || opts.kernel_samples < 8 {
            return invalid("correction resolution too small");
        }
        let n = domain.dim;
        let directions: Vec<(Point, f64)> = if n == 2 {
            let m = opts.directions;
            let h = 2.0 * PI / m as f64;
            (0..m).map(|k| (vector::polar2(k as f64 * h), h)).collect()
        } else {
            let polar = gauss_legendre(opts.directions, -1.0, 1.0)?;
            let naz = 2 * opts.directions;
            let h = 2.0 * PI / naz as f64;
            polar
                .nodes
                .iter()
                .zip(&polar.weights)
                .flat_map(|(&u, &w)| {
                    (0..naz).map(move |j| (vector::polar3(u, j as f64 * h), w * h))
                })
                .collect()
        };
        let kopts = KernelOptions {
            margin,
            fd_step: opts.fd_step,
            hilbert_nodes: opts.hilbert_nodes,
        };
        let samples = opts.kernel_samples;
        let tables = directions
            .par_iter()
            .map(|(theta, _)| {
                let (a, b) = domain.support_interval(theta);
                let (lo, hi) = (a + margin, b - margin);
                if !(hi > lo) {
                    return Err(Error::OutOfRegion(format!(
                        "safety margin {margin} leaves no admissible offsets"
                    )));
                }
                let step = (hi - lo) / (samples - 1) as f64;
                let offsets = (0..samples).map(|i| {
                    if i + 1 == samples {
                        hi
                    } else {
                        lo + i as f64 * step
                    }
                });
                let values = if n == 2 {
                    let line = RadonLine::new(domain, theta, opts.hilbert_nodes)?;
                    offsets
                        .map(|s| line.hilbert_deriv(s, 2, &kopts))
                        .collect::<Result<Vec<_>>>()?
                } else if domain.kind == DomainKind::Ellipsoid {
                    offsets
                        .map(|s| ellipsoid_radon_deriv(domain, theta, s, 3))
                        .collect()
                } else {
                    offsets
                        .map(|s| radon_chi_deriv(domain, theta, s, 3, &kopts))
                        .collect::<Result<Vec<_>>>()?
                };
                Ok(KernelTable {
                    lo,
                    hi,
                    step,
                    values,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CorrectionOperator {
            domain: domain.clone(),
            margin,
            constant: correction_constant(n),
            directions,
            tables,
            radial: gauss_legendre(opts.radial_nodes, 0.0, 1.0)?,
            panel: gauss_legendre(4, 0.0, 1.0)?,
        })
    }

    /// Largest tabulated `|κ|`.
    pub fn kernel_sup(&self) -> f64 {
        self.tables
            .iter()
            .flat_map(|t| t.values.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `K_Ω f(x)`; `x` is assumed to lie in the safety region.
    pub fn apply<F: Field + ?Sized>(&self, f: &F, x: &Point) -> Result<f64> {
        let mut acc = 0.0;
        for ((omega, w), table) in self.directions.iter().zip(&self.tables) {
            let base = vector::dot(x, omega);
            let mut line = 0.0;
            for (lo, hi) in f.ray_support(x, omega) {
                let (rule, panels) = match f.panel_width() {
                    Some(pw) => (&self.panel, ((hi - lo) / pw).ceil().max(1.0) as usize),
                    None => (&self.radial, 1),
                };
                let h = (hi - lo) / panels as f64;
                for p in 0..panels {
                    let a = lo + p as f64 * h;
                    for (&z, &wz) in rule.nodes.iter().zip(&rule.weights) {
                        let r = a + h * z;
                        let y = vector::axpy(x, r, omega);
                        let fy = f.value(&y);
                        if fy == 0.0 {
                            continue;
                        }
                        let s = base + 0.5 * r;
                        let k = table.eval(s).ok_or_else(|| {
                            Error::OutOfRegion(format!(
                                "hyperplane offset {s} outside the safety region at x = {x:?}"
                            ))
                        })?;
                        line += wz * h * fy * k;
                    }
                }
            }
            acc += w * line;
        }
        Ok(self.constant * acc)
    }
}

/// `K_Ω f(x)` with a freshly built operator.
pub fn correction_k<F: Field + ?Sized>(
    f: &F,
    x: &Point,
    domain: &ConvexDomain,
    margin: f64,
    res: &CorrectionOptions,
) -> Result<f64> {
    let dist = domain.distance_to_boundary(x);
    if dist < margin {
        return Err(Error::OutOfRegion(format!(
            "point {x:?} is {dist} from the boundary, inside the margin {margin}"
        )));
    }
    CorrectionOperator::build(domain, margin, res)?.apply(f, x)
}

/// Axis-aligned sample grid, optionally masked to a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub lower: Point,
    pub upper: Point,
    /// Samples per axis; an axis with one sample is fixed at `lower`.
    pub shape: [usize; 3],
    pub mask: Option<(Point, f64)>,
}

impl GridSpec {
    pub fn new(dim: usize, lower: &[f64], upper: &[f64], shape: &[usize]) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if lower.len() != dim || upper.len() != dim || shape.len() != dim {
            return invalid(format!("grid bounds and shape need {dim} entries"));
        }
        let mut sh = [1usize; 3];
        for i in 0..dim {
            if shape[i] == 0 || (shape[i] > 1 && !(upper[i] > lower[i])) {
                return invalid(format!("grid axis {i} is empty or inverted"));
            }
            sh[i] = shape[i];
        }
        Ok(GridSpec {
            dim,
            lower: vector::from_slice(lower),
            upper: vector::from_slice(upper),
            shape: sh,
            mask: None,
        })
    }

    pub fn with_mask(mut self, center: Point, radius: f64) -> Self {
        self.mask = Some((center, radius));
        self
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if self.shape[axis] > 1 {
            (self.upper[axis] - self.lower[axis]) / (self.shape[axis] - 1) as f64
        } else {
            0.0
        }
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.shape[axis] && i > 0 {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing(axis)
        }
    }

    /// Grid point with flat index `k` (last axis fastest).
    pub fn point(&self, k: usize) -> Point {
        let i2 = k % self.shape[2];
        let i1 = (k / self.shape[2]) % self.shape[1];
        let i0 = k / (self.shape[2] * self.shape[1]);
        [
            self.coord(0, i0),
            self.coord(1, i1),
            if self.dim == 3 {
                self.coord(2, i2)
            } else {
                0.0
            },
        ]
    }

    pub fn is_active(&self, p: &Point) -> bool {
        match self.mask {
            Some((c, r)) => vector::dist(p, &c) <= r + 1e-12,
            None => true,
        }
    }

    fn full_dimensional(&self) -> bool {
        (0..self.dim).all(|a| self.shape[a] > 1)
    }
}

/// Reconstructed values on a grid, with the fixed-point diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub spec: GridSpec,
    pub active: Vec<bool>,
    pub values: Vec<f64>,
    /// The back-projection term `b` alone.
    pub background: Vec<f64>,
    /// Sup-norm change per fixed-point iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Even n: `|f̂(p; T) - f̂(p; T/2)|` at the probe `p` of largest `|b|`.
    pub truncation_estimate: Option<f64>,
    pub probe: Option<Point>,
}

impl ImageGrid {
    pub fn points(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        (0..self.spec.len())
            .filter(|&k| self.active[k])
            .map(|k| (self.spec.point(k), self.values[k]))
    }

    fn with_values<'a>(&'a self, values: &'a [f64]) -> GridField<'a> {
        GridField {
            spec: &self.spec,
            active: &self.active,
            values,
        }
    }
}

/// Multilinear interpolation of grid values; zero in cells with an inactive corner.
struct GridField<'a> {
    spec: &'a GridSpec,
    active: &'a [bool],
    values: &'a [f64],
}

impl Field for GridField<'_> {
    fn value(&self, y: &Point) -> f64 {
        let sp = self.spec;
        let n = sp.dim;
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..n {
            let h = sp.spacing(a);
            let u = (y[a] - sp.lower[a]) / h;
            let cells = (sp.shape[a] - 1) as f64;
            if !(u >= -1e-12 && u <= cells + 1e-12) {
                return 0.0;
            }
            let i = (u.floor().max(0.0) as usize).min(sp.shape[a] - 2);
            base[a] = i;
            frac[a] = (u - i as f64).clamp(0.0, 1.0);
        }
        let corners = 1usize << n;
        let mut acc = 0.0;
        for c in 0..corners {
            let mut idx = [0usize; 3];
            let mut w = 1.0;
            for a in 0..n {
                let bit = (c >> a) & 1;
                idx[a] = base[a] + bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            let k = (idx[0] * sp.shape[1] + idx[1]) * sp.shape[2] + idx[2];
            if !self.active[k] {
                return 0.0;
            }
            acc += w * self.values[k];
        }
        acc
    }

    fn ray_support(&self, x: &Point, omega: &Point) -> Vec<(f64, f64)> {
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        for a in 0..self.spec.dim {
            let (l, u) = (self.spec.lower[a], self.spec.upper[a]);
            if omega[a].abs() < 1e-300 {
                if x[a] < l || x[a] > u {
                    return vec![];
                }
                continue;
            }
            let (t1, t2) = ((l - x[a]) / omega[a], (u - x[a]) / omega[a]);
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
        if hi > lo {
            vec![(lo, hi)]
        } else {
            vec![]
        }
    }

    fn panel_width(&self) -> Option<f64> {
        let h = (0..self.spec.dim)
            .map(|a| self.spec.spacing(a))
            .fold(f64::INFINITY, f64::min);
        Some(h)
    }
}

/// Back-projection on a grid, optionally followed by the fixed-point
/// iteration `f_{k+1} = b + σ K_Ω f_k` with `f_0 = b`.
pub fn reconstruct(
    traces: &TraceGrid,
    domain: &ConvexDomain,
    spec: &GridSpec,
    opts: &ReconstructionOptions,
) -> Result<ImageGrid> {
    opts.validate()?;
    let n = domain.dim;
    if traces.dim() != n || spec.dim != n {
        return Err(Error::Config(format!(
            "dimension mismatch: traces {}, domain {n}, grid {}",
            traces.dim(),
            spec.dim
        )));
    }
    if traces.domain != *domain {
        return Err(Error::Config(
            "trace file was simulated on a different domain".into(),
        ));
    }
    let corrected = matches!(opts.correction, Correction::FixedPoint { .. });
    if corrected && !spec.full_dimensional() {
        return Err(Error::Config(
            "the correction needs a grid with at least two samples per axis".into(),
        ));
    }
    if n == 2 && opts.t_max_factor < 2.0 {
        return Err(Error::Config(format!(
            "T_max_factor must be at least 2, got {}",
            opts.t_max_factor
        )));
    }
    let points: Vec<Point> = (0..spec.len()).map(|k| spec.point(k)).collect();
    let active: Vec<bool> = points.iter().map(|p| spec.is_active(p)).collect();
    for (p, _) in points.iter().zip(&active).filter(|(_, &a)| a) {
        let dist = domain.distance_to_boundary(p);
        if dist < opts.safety_margin {
            return Err(Error::OutOfRegion(format!(
                "grid point {:?} is {dist} from the boundary, inside the safety margin {}",
                &p[..n],
                opts.safety_margin
            )));
        }
    }
    let panel_rule = gauss_legendre(opts.abel_order, 0.0, 1.0)?;
    let horizon = opts.t_max_factor * domain.diameter();
    let project = |p: &Point, h: f64| -> Result<f64> {
        if n == 3 {
            backproject_odd(traces, p, opts.interp)
        } else {
            backproject_even_to(traces, p, h, opts, &panel_rule)
        }
    };
    let background: Vec<f64> = points
        .par_iter()
        .zip(&active)
        .map(|(p, &a)| if a { project(p, horizon) } else { Ok(0.0) })
        .collect::<Result<_>>()?;

    let (truncation_estimate, probe) = if n == 2 {
        let best = (0..points.len())
            .filter(|&k| active[k])
            .max_by(|&a, &b| background[a].abs().total_cmp(&background[b].abs()));
        match best {
            Some(k) => {
                let half = project(&points[k], 0.5 * horizon)?;
                (Some((background[k] - half).abs()), Some(points[k]))
            }
            None => (None, None),
        }
    } else {
        (None, None)
    };

    let mut image = ImageGrid {
        spec: spec.clone(),
        active,
        values: background.clone(),
        background,
        residuals: vec![],
        converged: true,
        truncation_estimate,
        probe,
    };
    if let Correction::FixedPoint { max_iter, tol } = opts.correction {
        let op =
            CorrectionOperator::build(domain, opts.safety_margin * (1.0 - 1e-9), &opts.kernel)?;
        image.converged = false;
        for _ in 0..max_iter {
            let current = image.values.clone();
            let field = image.with_values(&current);
            let next: Vec<f64> = points
                .par_iter()
                .enumerate()
                .map(|(k, p)| {
                    if image.active[k] {
                        Ok(image.background[k] + CORRECTION_SIGN * op.apply(&field, p)?)
                    } else {
                        Ok(0.0)
                    }
                })
                .collect::<Result<_>>()?;
            let change = next
                .iter()
                .zip(&current)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            image.values = next;
            image.residuals.push(change);
            if change < tol {
                image.converged = true;
                break;
            }
        }
    }
    Ok(image)
}
