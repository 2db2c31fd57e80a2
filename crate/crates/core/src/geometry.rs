//! Convex domains, their boundary quadratures and the bisector chord
//! parameters that index the correction kernels.

use std::f64::consts::PI;

use crate::calculus::gauss_legendre;
use crate::error::{invalid, Error, Result};
use crate::vector::{self, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    Ellipsoid,
    /// `|x/a|^p + |y/b|^p < 1` in the plane, `p >= 2`.
    SuperEllipse2D {
        exponent: f64,
    },
}

/// An axis-aligned ellipsoid (any dimension 2 or 3) or a planar superellipse.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexDomain {
    pub kind: DomainKind,
    pub center: Point,
    /// Unused trailing entries are zero.
    pub semi_axes: Point,
    pub dim: usize,
}

/// A point of the boundary together with its outward unit normal and
/// quadrature weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub point: Point,
    pub normal: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryQuadrature {
    pub nodes: Vec<BoundaryNode>,
    pub resolution: usize,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

impl ConvexDomain {
    pub fn ellipsoid(center: &[f64], semi_axes: &[f64]) -> Result<Self> {
        let dim = semi_axes.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if center.len() != dim {
            return invalid(format!(
                "center has {} coordinates but {} semi-axes were given",
                center.len(),
                dim
            ));
        }
        check_axes(semi_axes)?;
        if center.iter().any(|c| !c.is_finite()) {
            return invalid("domain center must be finite");
        }
        Ok(ConvexDomain {
            kind: DomainKind::Ellipsoid,
            center: vector::from_slice(center),
            semi_axes: vector::from_slice(semi_axes),
            dim,
        })
    }

    pub fn superellipse(center: &[f64], semi_axes: &[f64], exponent: f64) -> Result<Self> {
        if semi_axes.len() != 2 || center.len() != 2 {
            return invalid("a superellipse is planar: center and semi-axes need two entries");
        }
        check_axes(semi_axes)?;
        if !(exponent >= 2.0) || !exponent.is_finite() {
            return invalid(format!(
                "superellipse exponent must be >= 2, got {exponent}"
            ));
        }
        Ok(ConvexDomain {
            kind: DomainKind::SuperEllipse2D { exponent },
            center: vector::from_slice(center),
            semi_axes: vector::from_slice(semi_axes),
            dim: 2,
        })
    }

    /// Centered ball of the given radius.
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ellipsoid(&vec![0.0; dim], &vec![radius; dim])
    }

    pub fn max_semi_axis(&self) -> f64 {
        self.semi_axes[..self.dim]
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn min_semi_axis(&self) -> f64 {
        self.semi_axes[..self.dim]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Gauge function: `< 1` inside, `= 1` on the boundary.
    pub fn gauge(&self, x: &Point) -> f64 {
        let mut acc = 0.0;
        match self.kind {
            DomainKind::Ellipsoid => {
                for i in 0..self.dim {
                    let r = (x[i] - self.center[i]) / self.semi_axes[i];
                    acc += r * r;
                }
            }
            DomainKind::SuperEllipse2D { exponent } => {
                for i in 0..2 {
                    acc += ((x[i] - self.center[i]) / self.semi_axes[i])
                        .abs()
                        .powf(exponent);
                }
            }
        }
        acc
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &Point) -> bool {
        self.gauge(x) < 1.0
    }

    /// Outward unit normal at a boundary point (the normalized gauge gradient).
    pub fn outward_normal(&self, b: &Point) -> Point {
        let mut g = [0.0; 3];
        match self.kind {
            DomainKind::Ellipsoid => {
                for i in 0..self.dim {
                    g[i] = (b[i] - self.center[i]) / (self.semi_axes[i] * self.semi_axes[i]);
                }
            }
            DomainKind::SuperEllipse2D { exponent } => {
                for i in 0..2 {
                    let r = (b[i] - self.center[i]) / self.semi_axes[i];
                    g[i] = r.signum() * r.abs().powf(exponent - 1.0) / self.semi_axes[i];
                }
            }
        }
        vector::scale(&g, 1.0 / vector::norm(&g))
    }

    /// Support function `h(θ) = sup_{x∈Ω} <x, θ>` for a unit vector θ.
    pub fn support(&self, theta: &Point) -> f64 {
        let shift = vector::dot(&self.center, theta);
        match self.kind {
            DomainKind::Ellipsoid => {
                let mut w2 = 0.0;
                for i in 0..self.dim {
                    let v = self.semi_axes[i] * theta[i];
                    w2 += v * v;
                }
                shift + w2.sqrt()
            }
            DomainKind::SuperEllipse2D { exponent } => {
                let q = exponent / (exponent - 1.0);
                let a = (self.semi_axes[0] * theta[0]).abs().powf(q);
                let b = (self.semi_axes[1] * theta[1]).abs().powf(q);
                shift + (a + b).powf(1.0 / q)
            }
        }
    }

    /// The offsets `s` for which the hyperplane `<x, θ> = s` meets Ω.
    pub fn support_interval(&self, theta: &Point) -> (f64, f64) {
        (
            -self.support(&vector::scale(theta, -1.0)),
            self.support(theta),
        )
    }

    /// Distance from an interior point to the boundary, computed as the
    /// minimum over directions of `h(θ) - <x, θ>`. Negative outside.
    pub fn distance_to_boundary(&self, x: &Point) -> f64 {
        let gap = |theta: &Point| self.support(theta) - vector::dot(x, theta);
        if self.dim == 2 {
            let samples = 720;
            let step = 2.0 * PI / samples as f64;
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..samples {
                let phi = k as f64 * step;
                let v = gap(&vector::polar2(phi));
                if v < best.0 {
                    best = (v, phi);
                }
            }
            let (mut lo, mut hi) = (best.1 - step, best.1 + step);
            let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
            let mut c = hi - inv_phi * (hi - lo);
            let mut d = lo + inv_phi * (hi - lo);
            let mut fc = gap(&vector::polar2(c));
            let mut fd = gap(&vector::polar2(d));
            for _ in 0..80 {
                if fc < fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - inv_phi * (hi - lo);
                    fc = gap(&vector::polar2(c));
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + inv_phi * (hi - lo);
                    fd = gap(&vector::polar2(d));
                }
            }
            best.0.min(fc.min(fd))
        } else {
            let dir = |polar: f64, az: f64| vector::polar3(polar.cos(), az);
            let (np, na) = (60usize, 120usize);
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for i in 0..=np {
                let polar = PI * i as f64 / np as f64;
                for j in 0..na {
                    let az = 2.0 * PI * j as f64 / na as f64;
                    let v = gap(&dir(polar, az));
                    if v < best.0 {
                        best = (v, polar, az);
                    }
                }
            }
            let mut step = PI / np as f64;
            while step > 1e-10 {
                let mut moved = false;
                for dp in [-1.0, 0.0, 1.0] {
                    for da in [-1.0, 0.0, 1.0] {
                        let p = best.1 + dp * step;
                        let a = best.2 + da * step;
                        let v = gap(&dir(p, a));
                        if v < best.0 {
                            best = (v, p, a);
                            moved = true;
                        }
                    }
                }
                if !moved {
                    step *= 0.5;
                }
            }
            best.0
        }
    }

    /// Largest width over all directions.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Ellipsoid => 2.0 * self.max_semi_axis(),
            DomainKind::SuperEllipse2D { .. } => {
                let width = |phi: f64| {
                    let th = vector::polar2(phi);
                    let (lo, hi) = self.support_interval(&th);
                    hi - lo
                };
                let samples = 2000;
                (0..samples)
                    .map(|k| width(PI * k as f64 / samples as f64))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Boundary nodes with outward normals and positive weights summing to the
    /// surface measure of the boundary.
    ///
    /// Planar domains use `resolution` equispaced parameter values with the
    /// trapezoid rule; the ellipsoid in R^3 uses `resolution` Gauss–Legendre
    /// nodes in the polar cosine times `2 * resolution` azimuths.
    pub fn boundary_quadrature(&self, resolution: usize) -> Result<BoundaryQuadrature> {
        if resolution < 8 {
            return invalid(format!(
                "boundary resolution must be at least 8, got {resolution}"
            ));
        }
        let nodes = match (self.kind, self.dim) {
            (DomainKind::Ellipsoid, 2) => self.ellipse_nodes(resolution),
            (DomainKind::Ellipsoid, _) => self.ellipsoid_nodes(resolution)?,
            (DomainKind::SuperEllipse2D { exponent }, _) => {
                self.superellipse_nodes(resolution, exponent)
            }
        };
        Ok(BoundaryQuadrature { nodes, resolution })
    }

    fn ellipse_nodes(&self, n: usize) -> Vec<BoundaryNode> {
        let (a, b) = (self.semi_axes[0], self.semi_axes[1]);
        let h = 2.0 * PI / n as f64;
        (0..n)
            .map(|k| {
                let t = k as f64 * h;
                let (s, c) = t.sin_cos();
                let point = [self.center[0] + a * c, self.center[1] + b * s, 0.0];
                let g = [c / a, s / b, 0.0];
                BoundaryNode {
                    point,
                    normal: vector::scale(&g, 1.0 / vector::norm(&g)),
                    weight: h * (a * a * s * s + b * b * c * c).sqrt(),
                }
            })
            .collect()
    }

    fn ellipsoid_nodes(&self, m: usize) -> Result<Vec<BoundaryNode>> {
        let [a, b, c] = self.semi_axes;
        let polar = gauss_legendre(m, -1.0, 1.0)?;
        let naz = 2 * m;
        let h = 2.0 * PI / naz as f64;
        let mut nodes = Vec::with_capacity(m * naz);
        for (&u, &wu) in polar.nodes.iter().zip(&polar.weights) {
            let s = (1.0 - u * u).sqrt();
            for j in 0..naz {
                let phi = j as f64 * h;
                let (sp, cp) = phi.sin_cos();
                let point = [
                    self.center[0] + a * s * cp,
                    self.center[1] + b * s * sp,
                    self.center[2] + c * u,
                ];
                // |∂_u X × ∂_φ X| for X(u, φ) = (a s cos φ, b s sin φ, c u).
                let cross = [b * c * s * cp, a * c * s * sp, a * b * u];
                let jac = vector::norm(&cross);
                nodes.push(BoundaryNode {
                    point,
                    normal: vector::scale(&cross, 1.0 / jac),
                    weight: wu * h * jac,
                });
            }
        }
        Ok(nodes)
    }

    // Polar-angle parametrization r(φ) = S(φ)^{-1/p}; smooth for even p, unlike
    // the signed-power map whose Jacobian blows up at the axis points.
    fn superellipse_nodes(&self, n: usize, p: f64) -> Vec<BoundaryNode> {
        let (a, b) = (self.semi_axes[0], self.semi_axes[1]);
        let h = 2.0 * PI / n as f64;
        (0..n)
            .map(|k| {
                let phi = k as f64 * h;
                let (s, c) = phi.sin_cos();
                let sx = (c / a).abs();
                let sy = (s / b).abs();
                let big_s = sx.powf(p) + sy.powf(p);
                let r = big_s.powf(-1.0 / p);
                let ds = p * sx.powf(p - 1.0) * c.signum() * (-s) / a
                    + p * sy.powf(p - 1.0) * s.signum() * c / b;
                let dr = -r / (p * big_s) * ds;
                let point = [self.center[0] + r * c, self.center[1] + r * s, 0.0];
                BoundaryNode {
                    point,
                    normal: self.outward_normal(&point),
                    weight: h * (r * r + dr * dr).sqrt(),
                }
            })
            .collect()
    }
}

fn check_axes(semi_axes: &[f64]) -> Result<()> {
    if semi_axes.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return invalid("semi-axes must be finite and strictly positive");
    }
    Ok(())
}

/// Parameters of the perpendicular bisector of `[x, y]`: unit direction
/// `(y - x)/|y - x|` and offset `(|y|^2 - |x|^2) / (2 |y - x|)`.
pub fn chord_params(x: &Point, y: &Point) -> Result<(Point, f64)> {
    let d = vector::sub(y, x);
    let len = vector::norm(&d);
    if len <= 1e-14 {
        return Err(Error::DegeneratePair(len));
    }
    let dir = vector::scale(&d, 1.0 / len);
    let offset = (vector::dot(y, y) - vector::dot(x, x)) / (2.0 * len);
    Ok((dir, offset))
}
