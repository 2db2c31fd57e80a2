//! The four subcommands. Each returns its output as text and writes it to
//! the configured path; outputs depend only on the configuration and the
//! input files unless timestamps are requested.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neumann_core::forward::io::{domain_spec, fmt_f64, read_trace, trace_to_string};
use neumann_core::forward::{simulate_traces, TraceGrid};
use neumann_core::inversion::{reconstruct, ImageGrid};
use neumann_core::transforms::KernelProfile;
use neumann_core::validation::{
    check_even_equivalence, check_integral_identity, check_lemma_coefficients, check_mollifier,
    IdentityReport, Polynomial,
};
use neumann_core::Point;

use crate::config::RunConfig;
use crate::error::CliError;

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the configured primary output path.
    pub out: Option<PathBuf>,
    /// Trace file read by `reconstruct`; defaults to `output.trace`.
    pub traces: Option<PathBuf>,
    pub timestamps: bool,
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn output(opts: &RunOptions, configured: &str) -> PathBuf {
    opts.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(configured))
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Simulates the Neumann traces of the configured phantom.
pub fn simulate(cfg: &RunConfig) -> Result<TraceGrid, CliError> {
    let bq = cfg.domain.boundary_quadrature(cfg.boundary_resolution)?;
    Ok(simulate_traces(
        &cfg.phantom,
        &cfg.domain,
        &bq,
        &cfg.time,
        &cfg.solver,
    )?)
}

/// `forward`: writes the trace file and returns its path.
pub fn cmd_forward(cfg: &RunConfig, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let path = output(opts, &cfg.outputs.trace);
    let traces = simulate(cfg)?;
    let mut text = trace_to_string(&traces)?;
    if opts.timestamps {
        let split = text.find('\n').map_or(text.len(), |i| i + 1);
        text.insert_str(split, &format!("# created {}\n", unix_seconds()));
    }
    write(&path, &text)?;
    Ok(path)
}

/// Reads a trace file.
pub fn load_traces(path: &Path) -> Result<TraceGrid, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_trace(BufReader::new(file))?)
}

/// Reconstructs on the configured grid from the given traces.
pub fn reconstruct_image(cfg: &RunConfig, traces: &TraceGrid) -> Result<ImageGrid, CliError> {
    if !cfg.phantom.bumps.is_empty() && traces.phantom_hash != cfg.phantom.fingerprint() {
        return Err(CliError::Invalid(format!(
            "trace file was simulated from phantom {}, the configuration describes {}",
            traces.phantom_hash,
            cfg.phantom.fingerprint()
        )));
    }
    Ok(reconstruct(traces, &cfg.domain, &cfg.grid, &cfg.recon)?)
}

/// Image CSV: `x_1..x_n,value` for every active grid point.
pub fn image_csv(img: &ImageGrid) -> String {
    let n = img.spec.dim;
    let mut s = (1..=n)
        .map(|i| format!("x_{i}"))
        .collect::<Vec<_>>()
        .join(",");
    s.push_str(",value\n");
    for (p, v) in img.points() {
        for c in &p[..n] {
            s.push_str(&fmt_f64(*c));
            s.push(',');
        }
        s.push_str(&fmt_f64(v));
        s.push('\n');
    }
    s
}

/// Range of the active values, mapped affinely onto `[0, 65535]`.
fn value_range(img: &ImageGrid) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, v) in img.points() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

/// Plain (P2) PGM of a grid with exactly two axes of more than one sample.
/// The first such axis runs left to right, the second bottom to top.
/// Inactive points are black.
pub fn image_pgm(img: &ImageGrid) -> Result<String, CliError> {
    let sp = &img.spec;
    let axes: Vec<usize> = (0..sp.dim).filter(|&a| sp.shape[a] > 1).collect();
    if axes.len() != 2 {
        return Err(CliError::Invalid(
            "PGM output needs a grid with exactly two non-trivial axes".into(),
        ));
    }
    let (ax, ay) = (axes[0], axes[1]);
    let (w, h) = (sp.shape[ax], sp.shape[ay]);
    let (lo, hi) = value_range(img);
    let scale = if hi > lo { 65535.0 / (hi - lo) } else { 0.0 };
    let strides = [sp.shape[1] * sp.shape[2], sp.shape[2], 1];
    let mut s = format!("P2\n{w} {h}\n65535\n");
    for row in 0..h {
        let iy = h - 1 - row;
        let line: Vec<String> = (0..w)
            .map(|ix| {
                let k = ix * strides[ax] + iy * strides[ay];
                if img.active[k] {
                    format!(
                        "{}",
                        ((img.values[k] - lo) * scale).round().clamp(0.0, 65535.0) as u32
                    )
                } else {
                    "0".to_string()
                }
            })
            .collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    Ok(s)
}

fn fmt_point(p: &Point, n: usize) -> String {
    p[..n]
        .iter()
        .map(|&c| fmt_f64(c))
        .collect::<Vec<_>>()
        .join(",")
}

/// Sidecar text: grid, value mapping and iteration diagnostics.
pub fn image_sidecar(img: &ImageGrid, traces: &TraceGrid, elapsed: Option<f64>) -> String {
    let n = img.spec.dim;
    let (lo, hi) = value_range(img);
    let mut s = String::new();
    let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
    kv("domain", domain_spec(&traces.domain));
    kv("phantom", traces.phantom_hash.clone());
    kv("grid.lower", fmt_point(&img.spec.lower, n));
    kv("grid.upper", fmt_point(&img.spec.upper, n));
    kv(
        "grid.shape",
        img.spec.shape[..n]
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    if let Some((c, r)) = img.spec.mask {
        kv(
            "grid.mask",
            format!("{} radius={}", fmt_point(&c, n), fmt_f64(r)),
        );
    }
    kv("value.min", fmt_f64(lo));
    kv("value.max", fmt_f64(hi));
    kv("pgm.maxval", "65535".into());
    kv(
        "pgm.mapping",
        "pixel = round((value - value.min) * 65535 / (value.max - value.min))".into(),
    );
    if let Some(t) = img.truncation_estimate {
        kv("truncation_estimate", fmt_f64(t));
    }
    if let Some(p) = img.probe {
        kv("truncation_probe", fmt_point(&p, n));
    }
    kv("iterations", img.residuals.len().to_string());
    kv("converged", img.converged.to_string());
    kv(
        "residuals",
        img.residuals
            .iter()
            .map(|&r| fmt_f64(r))
            .collect::<Vec<_>>()
            .join(","),
    );
    if let Some(e) = elapsed {
        kv("elapsed_s", format!("{e:.6}"));
    }
    s
}

/// `reconstruct`: writes the image CSV, the sidecar and optionally the PGM.
pub fn cmd_reconstruct(cfg: &RunConfig, opts: &RunOptions) -> Result<ImageGrid, CliError> {
    let started = Instant::now();
    let trace_path = opts
        .traces
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.outputs.trace));
    let traces = load_traces(&trace_path)?;
    let img = reconstruct_image(cfg, &traces)?;
    let path = output(opts, &cfg.outputs.image);
    write(&path, &image_csv(&img))?;
    if let Some(pgm) = &cfg.outputs.pgm {
        write(Path::new(pgm), &image_pgm(&img)?)?;
    }
    let elapsed = opts.timestamps.then(|| started.elapsed().as_secs_f64());
    let mut sidecar = path.clone().into_os_string();
    sidecar.push(".meta");
    write(Path::new(&sidecar), &image_sidecar(&img, &traces, elapsed))?;
    Ok(img)
}

/// One validation result with the bound it is held to.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub report: IdentityReport,
    pub bound: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.report.rel_residual <= self.bound
    }
}

/// Runs the configured checks.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckOutcome>, CliError> {
    let v = &cfg.validate;
    let mut out = vec![];
    for check in &v.checks {
        match check.as_str() {
            "integral_identity" => {
                let g = v.partner.as_ref().unwrap_or(&cfg.phantom);
                let report = check_integral_identity(&cfg.phantom, g, &cfg.domain, &v.identity)?;
                out.push(CheckOutcome {
                    report,
                    bound: v.identity_bound,
                });
            }
            "lemma_coefficients" => {
                let poly = Polynomial::affine(v.lemma_constant, &v.lemma_gradient);
                for &k in &v.lemma_k {
                    let report =
                        check_lemma_coefficients(cfg.dim, k, &poly, &v.lemma_point, v.lemma_t)?;
                    out.push(CheckOutcome {
                        report,
                        bound: v.lemma_bound,
                    });
                }
            }
            "even_equivalence" => {
                let (points, times) = random_samples(cfg, v.samples, v.seed);
                let report = check_even_equivalence(&cfg.phantom, &points, &times, &cfg.solver)?;
                out.push(CheckOutcome {
                    report,
                    bound: v.equivalence_bound,
                });
            }
            "mollifier" => {
                for report in check_mollifier(cfg.dim, v.mollifier_mu, v.mollifier_eps)? {
                    out.push(CheckOutcome {
                        report,
                        bound: v.mollifier_bound,
                    });
                }
            }
            other => return Err(CliError::Invalid(format!("unknown check '{other}'"))),
        }
    }
    Ok(out)
}

/// Seeded sample points inside the domain with times in `(0, diam Ω]`.
pub fn random_samples(cfg: &RunConfig, count: usize, seed: u64) -> (Vec<Point>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = &cfg.domain;
    let diam = d.diameter();
    let (mut points, mut times) = (vec![], vec![]);
    while points.len() < count {
        let mut p = [0.0; 3];
        for i in 0..d.dim {
            p[i] = d.center[i] + d.semi_axes[i] * rng.gen_range(-1.0..1.0);
        }
        if d.contains(&p) {
            points.push(p);
            times.push(diam * (1.0 - rng.gen::<f64>()));
        }
    }
    (points, times)
}

pub fn report_csv(outcomes: &[CheckOutcome], timestamps: bool) -> String {
    let mut s = IdentityReport::csv_header(timestamps);
    s.push_str(",bound,status\n");
    for o in outcomes {
        s.push_str(&o.report.csv_row(timestamps));
        s.push_str(&format!(
            ",{},{}\n",
            fmt_f64(o.bound),
            if o.passed() { "pass" } else { "fail" }
        ));
    }
    s
}

/// `validate`: writes the report CSV and returns whether every check passed.
pub fn cmd_validate(
    cfg: &RunConfig,
    opts: &RunOptions,
) -> Result<(Vec<CheckOutcome>, bool), CliError> {
    let outcomes = run_checks(cfg)?;
    write(
        &output(opts, &cfg.outputs.report),
        &report_csv(&outcomes, opts.timestamps),
    )?;
    let ok = outcomes.iter().all(CheckOutcome::passed);
    Ok((outcomes, ok))
}

/// Kernel CSV: `s,Rchi,d1..dN` and, with Hilbert columns, `HRchi,Hd1..HdN`.
pub fn kernel_csv(profile: &KernelProfile, hilbert: bool) -> String {
    let n = profile.order;
    let mut cols = vec!["s".to_string(), "Rchi".to_string()];
    cols.extend((1..=n).map(|k| format!("d{k}")));
    if hilbert {
        cols.push("HRchi".into());
        cols.extend((1..=n).map(|k| format!("Hd{k}")));
    }
    let mut s = cols.join(",");
    s.push('\n');
    for smp in &profile.samples {
        let mut row = vec![fmt_f64(smp.s), fmt_f64(smp.rchi)];
        row.extend(smp.derivs.iter().map(|&v| fmt_f64(v)));
        if let Some(h) = smp.hrchi {
            row.push(fmt_f64(h));
            row.extend(smp.hderivs.iter().map(|&v| fmt_f64(v)));
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `kernel`: tabulates the Radon (and Hilbert) derivatives of the indicator.
pub fn cmd_kernel(cfg: &RunConfig, opts: &RunOptions) -> Result<KernelProfile, CliError> {
    let k = &cfg.kernel;
    let profile = KernelProfile::build(
        &cfg.domain,
        &k.theta,
        k.order,
        &k.offsets(),
        k.hilbert,
        &k.opts,
    )?;
    write(
        &output(opts, &cfg.outputs.kernel),
        &kernel_csv(&profile, k.hilbert),
    )?;
    Ok(profile)
}
