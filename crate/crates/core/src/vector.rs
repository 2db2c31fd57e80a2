//! Points in R^2 and R^3 share one fixed-size representation. Planar points
//! carry a zero third coordinate, so norms and dot products need no
//! dimension switch.

pub type Point = [f64; 3];

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, k: f64) -> Point {
    [a[0] * k, a[1] * k, a[2] * k]
}

/// `a + k * b`
#[inline]
pub fn axpy(a: &Point, k: f64, b: &Point) -> Point {
    [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

/// Builds a point from the first `n` coordinates of a slice, zero-padding the rest.
pub fn from_slice(xs: &[f64]) -> Point {
    let mut p = [0.0; 3];
    for (dst, src) in p.iter_mut().zip(xs) {
        *dst = *src;
    }
    p
}

/// Unit vector in the plane at angle `phi`.
#[inline]
pub fn polar2(phi: f64) -> Point {
    [phi.cos(), phi.sin(), 0.0]
}

/// Unit vector from a polar cosine `u` and an azimuth `phi`.
#[inline]
pub fn polar3(u: f64, phi: f64) -> Point {
    let s = (1.0 - u * u).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), u]
}
