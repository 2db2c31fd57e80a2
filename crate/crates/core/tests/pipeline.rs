//! Forward simulation followed by reconstruction, and structural properties
//! of the simulated traces.

use neumann_core::forward::{simulate_traces, SolverParams, TimeGrid, TraceGrid};
use neumann_core::inversion::{
    reconstruct, Correction, GridSpec, ImageGrid, ReconstructionOptions,
};
use neumann_core::transforms::{Bump, Phantom, Profile};
use neumann_core::{ConvexDomain, Point};
use proptest::prelude::*;

fn bump(center: Point, radius: f64, amplitude: f64) -> Bump {
    Bump {
        center,
        radius,
        amplitude,
        profile: Profile::Cinf,
    }
}

fn traces(f: &Phantom, dom: &ConvexDomain, resolution: usize, t_max: f64, nt: usize) -> TraceGrid {
    let params = SolverParams::new(dom, t_max);
    let bq = dom.boundary_quadrature(resolution).unwrap();
    simulate_traces(f, dom, &bq, &TimeGrid::new(t_max, nt).unwrap(), &params).unwrap()
}

fn relative_error(img: &ImageGrid, f: &Phantom) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (p, v) in img.points() {
        let e = f.eval(&p);
        num += (v - e).powi(2);
        den += e * e;
    }
    (num / den).sqrt()
}

fn corrected(margin: f64) -> ReconstructionOptions {
    let mut opts = ReconstructionOptions {
        correction: Correction::FixedPoint {
            max_iter: 6,
            tol: 1e-9,
        },
        safety_margin: margin,
        ..Default::default()
    };
    opts.kernel.directions = 64;
    opts
}

#[test]
fn correction_improves_superellipse_reconstruction() {
    let dom = ConvexDomain::superellipse(&[0.0, 0.0], &[1.0, 1.0], 4.0).unwrap();
    let f = Phantom::new(2, vec![bump([0.3, 0.0, 0.0], 0.3, 1.0)]).unwrap();
    let tr = traces(&f, &dom, 256, 4.0 * dom.diameter(), 1000);
    let margin = 0.5 * f.margin(&dom);
    let spec = GridSpec::new(2, &[-0.45, -0.45], &[0.45, 0.45], &[13, 13]).unwrap();
    let plain = ReconstructionOptions {
        safety_margin: margin,
        ..Default::default()
    };
    let before = relative_error(&reconstruct(&tr, &dom, &spec, &plain).unwrap(), &f);
    let img = reconstruct(&tr, &dom, &spec, &corrected(margin)).unwrap();
    let after = relative_error(&img, &f);
    assert!(img.converged, "{:?}", img.residuals);
    // The iteration contracts: each change is much smaller than the last.
    for w in img.residuals.windows(2) {
        assert!(w[1] < 0.1 * w[0], "{:?}", img.residuals);
    }
    assert!(
        after < 0.5 * before,
        "uncorrected {before:e}, corrected {after:e}"
    );
}

#[test]
fn correction_is_inert_on_an_ellipse() {
    let dom = ConvexDomain::ellipsoid(&[0.0, 0.0], &[1.2, 1.0]).unwrap();
    let f = Phantom::new(2, vec![bump([0.2, 0.1, 0.0], 0.3, 1.0)]).unwrap();
    let tr = traces(&f, &dom, 192, 4.0 * dom.diameter(), 800);
    let margin = 0.5 * f.margin(&dom);
    let spec = GridSpec::new(2, &[-0.4, -0.4], &[0.4, 0.4], &[9, 9]).unwrap();
    let img = reconstruct(&tr, &dom, &spec, &corrected(margin)).unwrap();
    let peak = img.background.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(img.residuals[0] < 1e-4 * peak, "{:?}", img.residuals);
}

#[test]
fn three_dimensional_round_trip() {
    let dom = ConvexDomain::ellipsoid(&[0.0, 0.0, 0.0], &[1.2, 1.0, 0.9]).unwrap();
    let f = Phantom::new(3, vec![bump([0.1, -0.1, 0.05], 0.3, 2.0)]).unwrap();
    let tr = traces(&f, &dom, 24, 2.9, 400);
    let spec = GridSpec::new(3, &[-0.3, -0.3, -0.2], &[0.3, 0.3, 0.2], &[7, 7, 5]).unwrap();
    let img = reconstruct(&tr, &dom, &spec, &ReconstructionOptions::default()).unwrap();
    assert!(relative_error(&img, &f) < 0.02);
}

#[test]
fn reconstruction_follows_translations_in_a_ball() {
    let dom = ConvexDomain::ball(3, 1.0).unwrap();
    let c = [0.1, 0.0, 0.0];
    let x = [0.15, 0.05, 0.0];
    let tol = 1e-2;
    let value = |shift: Point| {
        let f = Phantom::new(
            3,
            vec![bump(
                [c[0] + shift[0], c[1] + shift[1], c[2] + shift[2]],
                0.3,
                1.0,
            )],
        )
        .unwrap();
        let tr = traces(&f, &dom, 24, 2.5, 400);
        let p = [x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]];
        let img = reconstruct(
            &tr,
            &dom,
            &GridSpec::new(3, &p, &p, &[1, 1, 1]).unwrap(),
            &ReconstructionOptions::default(),
        )
        .unwrap();
        assert!((img.values[0] - f.eval(&p)).abs() < tol);
        img.values[0]
    };
    let base = value([0.0; 3]);
    for d in [[0.2, -0.1, 0.0], [-0.1, 0.1, 0.25]] {
        assert!((value(d) - base).abs() <= 2.0 * tol);
    }
}

fn small_traces(f: &Phantom, dom: &ConvexDomain) -> TraceGrid {
    traces(f, dom, 16, 2.0, 24)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn traces_are_additive(cx in -0.3f64..0.3, cy in -0.3f64..0.3, a in 0.5f64..2.0) {
        let dom = ConvexDomain::ellipsoid(&[0.0, 0.0], &[1.3, 1.0]).unwrap();
        let f1 = bump([cx, cy, 0.0], 0.25, a);
        let f2 = bump([-0.2, 0.25, 0.0], 0.2, 1.0);
        let t1 = small_traces(&Phantom::new(2, vec![f1.clone()]).unwrap(), &dom);
        let t2 = small_traces(&Phantom::new(2, vec![f2.clone()]).unwrap(), &dom);
        let t = small_traces(&Phantom::new(2, vec![f1, f2]).unwrap(), &dom);
        let scale = max_abs(&t.values);
        let diff: Vec<f64> = t.values.iter().zip(t1.values.iter().zip(&t2.values)).map(|(x, (y, z))| x - (y + z)).collect();
        prop_assert!(max_abs(&diff) <= 1e-12 * scale, "{:e}", max_abs(&diff) / scale);
    }

    #[test]
    fn traces_are_translation_invariant(dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0) {
        let axes = [1.0, 0.9, 0.8];
        let here = ConvexDomain::ellipsoid(&[0.0, 0.0, 0.0], &axes).unwrap();
        let there = ConvexDomain::ellipsoid(&[dx, dy, dz], &axes).unwrap();
        let c = [0.1, 0.05, -0.1];
        let f = Phantom::new(3, vec![bump(c, 0.3, 1.0)]).unwrap();
        let g = Phantom::new(3, vec![bump([c[0] + dx, c[1] + dy, c[2] + dz], 0.3, 1.0)]).unwrap();
        let a = small_traces(&f, &here);
        let b = small_traces(&g, &there);
        let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        prop_assert!(max_abs(&diff) <= 1e-8 * max_abs(&a.values));
    }
}
