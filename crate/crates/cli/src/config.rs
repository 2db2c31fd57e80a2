//! Line-based `key = value` run configuration.
//!
//! Blank lines and everything after `#` are ignored. Lists are
//! comma-separated. Bumps are declared as `phantom.bump.N.<field>` with any
//! non-negative integer `N`; bumps are ordered by `N`. Unknown keys,
//! repeated keys and malformed values are errors that carry the line number.

use std::collections::BTreeMap;

use neumann_core::forward::{MeanRule, SolverParams, TimeGrid};
use neumann_core::inversion::{
    Correction, CorrectionOptions, GridSpec, ReconstructionOptions, TraceInterp,
};
use neumann_core::transforms::{Bump, KernelOptions, Phantom, Profile};
use neumann_core::{vector, ConvexDomain, Point};

use crate::error::CliError;

/// Every key with its default, as documented in the README.
pub const KEYS: &[(&str, &str)] = &[
    ("dimension", "required; 2 or 3"),
    ("domain.kind", "ellipsoid"),
    ("domain.center", "origin"),
    ("domain.semi_axes", "required"),
    ("domain.exponent", "required when domain.kind = superellipse"),
    ("phantom.bump.N.center", "required per bump"),
    ("phantom.bump.N.radius", "required per bump"),
    ("phantom.bump.N.amplitude", "1"),
    ("phantom.bump.N.profile", "cinf"),
    ("boundary.resolution", "256 for n = 2, 24 for n = 3"),
    ("time.nt", "2000 for n = 2, 400 for n = 3"),
    ("time.t_max", "t_max_factor * diam for n = 2, diam + largest bump radius for n = 3"),
    ("time.t_max_factor", "4"),
    ("solver.h_t", "1e-3 * t_max"),
    ("solver.h_nu", "1e-3 * smallest semi-axis"),
    ("solver.mean_resolution", "32"),
    ("solver.abel_nodes", "48"),
    ("solver.normal_stencil", "2"),
    ("solver.mean_rule", "radial"),
    ("grid.lower", "centre - c * semi_axes / sqrt(n), c keeps the box in the safety region"),
    ("grid.upper", "centre + c * semi_axes / sqrt(n)"),
    ("grid.shape", "21 per axis"),
    ("grid.mask_center", "none"),
    ("grid.mask_radius", "none"),
    ("recon.interp", "cubic"),
    ("recon.correction", "none"),
    ("recon.max_iter", "20"),
    ("recon.tol", "1e-8"),
    ("recon.abel_panel", "2"),
    ("recon.abel_order", "3"),
    ("recon.safety_margin", "half the phantom support margin"),
    ("kernel.directions", "128"),
    ("kernel.radial_nodes", "64"),
    ("kernel.samples", "129"),
    ("kernel.hilbert_nodes", "256"),
    ("kernel.fd_step", "0.02"),
    ("kernel.margin", "recon.safety_margin, or 0.1 * smallest semi-axis when that is 0"),
    ("kernel.theta", "first coordinate axis"),
    ("kernel.order", "n"),
    ("kernel.s_lower", "lower support offset + kernel.margin"),
    ("kernel.s_upper", "upper support offset - kernel.margin"),
    ("kernel.s_count", "101"),
    ("kernel.hilbert", "true for n = 2, false for n = 3"),
    ("validate.checks", "lemma_coefficients,even_equivalence,mollifier for n = 2; integral_identity,lemma_coefficients,mollifier for n = 3"),
    ("validate.partner.bump.N.*", "the phantom itself"),
    ("validate.boundary", "16"),
    ("validate.time_nodes", "32"),
    ("validate.volume_radial", "12"),
    ("validate.volume_angular", "12"),
    ("validate.box_nodes", "32"),
    ("validate.laplacian_step", "1e-2"),
    ("validate.identity_bound", "0.02"),
    ("validate.lemma_k", "1,2"),
    ("validate.lemma_t", "0.8"),
    ("validate.lemma_point", "domain centre"),
    ("validate.lemma_constant", "0.5"),
    ("validate.lemma_gradient", "1,-2 for n = 2, 1,-2,0.5 for n = 3"),
    ("validate.lemma_bound", "1e-4"),
    ("validate.samples", "5"),
    ("validate.seed", "1"),
    ("validate.equivalence_bound", "1e-5"),
    ("validate.mollifier_mu", "2"),
    ("validate.mollifier_eps", "0.5"),
    ("validate.mollifier_bound", "1e-6"),
    ("threads", "0 (all cores)"),
    ("output.trace", "traces.csv"),
    ("output.image", "image.csv"),
    ("output.pgm", "none"),
    ("output.report", "report.csv"),
    ("output.kernel", "kernel.csv"),
];

pub const CHECKS: &[&str] = &[
    "integral_identity",
    "lemma_coefficients",
    "even_equivalence",
    "mollifier",
];

/// Checks that apply in dimension `n`.
pub fn default_checks(n: usize) -> &'static [&'static str] {
    if n == 2 {
        &["lemma_coefficients", "even_equivalence", "mollifier"]
    } else {
        &["integral_identity", "lemma_coefficients", "mollifier"]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSettings {
    pub theta: Point,
    pub order: usize,
    pub s_lower: f64,
    pub s_upper: f64,
    pub s_count: usize,
    pub hilbert: bool,
    pub opts: KernelOptions,
}

impl KernelSettings {
    pub fn offsets(&self) -> Vec<f64> {
        if self.s_count == 1 {
            return vec![self.s_lower];
        }
        let step = (self.s_upper - self.s_lower) / (self.s_count - 1) as f64;
        (0..self.s_count)
            .map(|i| {
                if i + 1 == self.s_count {
                    self.s_upper
                } else {
                    self.s_lower + i as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSettings {
    pub checks: Vec<String>,
    pub partner: Option<Phantom>,
    pub identity: neumann_core::validation::IdentityResolution,
    pub identity_bound: f64,
    pub lemma_k: Vec<usize>,
    pub lemma_t: f64,
    pub lemma_point: Point,
    pub lemma_constant: f64,
    pub lemma_gradient: Point,
    pub lemma_bound: f64,
    pub samples: usize,
    pub seed: u64,
    pub equivalence_bound: f64,
    pub mollifier_mu: u32,
    pub mollifier_eps: f64,
    pub mollifier_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub trace: String,
    pub image: String,
    pub pgm: Option<String>,
    pub report: String,
    pub kernel: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub domain: ConvexDomain,
    pub phantom: Phantom,
    pub boundary_resolution: usize,
    pub time: TimeGrid,
    pub solver: SolverParams,
    pub grid: GridSpec,
    pub recon: ReconstructionOptions,
    pub kernel: KernelSettings,
    pub validate: ValidateSettings,
    pub threads: usize,
    pub outputs: Outputs,
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Table {
    entries: BTreeMap<String, Entry>,
}

fn err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        msg: msg.into(),
    }
}

fn known_key(key: &str) -> bool {
    if KEYS.iter().any(|(k, _)| *k == key && !k.contains(".N.")) {
        return true;
    }
    let bump_field = |rest: &str| {
        rest.split_once('.').is_some_and(|(idx, field)| {
            idx.parse::<usize>().is_ok()
                && matches!(field, "center" | "radius" | "amplitude" | "profile")
        })
    };
    key.strip_prefix("phantom.bump.").is_some_and(bump_field)
        || key
            .strip_prefix("validate.partner.bump.")
            .is_some_and(bump_field)
}

impl Table {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected 'key = value', got '{content}'")))?;
            let key = key.trim();
            if !known_key(key) {
                return Err(err(line, format!("unknown key '{key}'")));
            }
            let entry = Entry {
                line,
                value: value.trim().to_string(),
                used: false,
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(err(
                    line,
                    format!("key '{key}' already set on line {}", prev.line),
                ));
            }
        }
        Ok(Table { entries })
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| err(line, format!("'{key}' expects {what}, got '{v}'"))),
        }
    }

    fn real(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        self.get::<f64>(key, "a real number")
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, CliError> {
        self.get::<usize>(key, "a non-negative integer")
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| {
                    err(
                        line,
                        format!("'{key}' expects comma-separated reals, got '{v}'"),
                    )
                }),
        }
    }

    fn counts(&mut self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| {
                    err(
                        line,
                        format!("'{key}' expects comma-separated integers, got '{v}'"),
                    )
                }),
        }
    }

    fn point(&mut self, key: &str, dim: usize) -> Result<Option<Point>, CliError> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) if v.len() == dim => Ok(Some(vector::from_slice(&v))),
            Some(v) => Err(err(
                self.line(key),
                format!("'{key}' needs {dim} entries, got {}", v.len()),
            )),
        }
    }

    fn text(&mut self, key: &str) -> Option<String> {
        self.raw(key).map(|(_, v)| v)
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>, CliError> {
        self.get::<bool>(key, "true or false")
    }

    fn bump_indices(&self, prefix: &str) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .entries
            .keys()
            .filter_map(|k| k.strip_prefix(prefix))
            .filter_map(|rest| rest.split_once('.').and_then(|(i, _)| i.parse().ok()))
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    fn bumps(&mut self, prefix: &str, dim: usize) -> Result<Vec<Bump>, CliError> {
        let mut bumps = vec![];
        for i in self.bump_indices(prefix) {
            let key = |f: &str| format!("{prefix}{i}.{f}");
            let first_line = ["center", "radius", "amplitude", "profile"]
                .iter()
                .map(|f| self.line(&key(f)))
                .filter(|&l| l > 0)
                .min()
                .unwrap_or(0);
            let center = self
                .point(&key("center"), dim)?
                .ok_or_else(|| err(first_line, format!("bump {i} lacks '{}'", key("center"))))?;
            let radius = self
                .real(&key("radius"))?
                .ok_or_else(|| err(first_line, format!("bump {i} lacks '{}'", key("radius"))))?;
            let amplitude = self.real(&key("amplitude"))?.unwrap_or(1.0);
            let profile = match self.raw(&key("profile")) {
                None => Profile::Cinf,
                Some((line, v)) => parse_profile(&v).ok_or_else(|| {
                    err(
                        line,
                        format!("profile must be 'cinf' or 'poly:<mu>', got '{v}'"),
                    )
                })?,
            };
            if !(radius > 0.0) {
                return Err(err(
                    self.line(&key("radius")),
                    format!("bump {i} needs a positive radius"),
                ));
            }
            bumps.push(Bump {
                center,
                radius,
                amplitude,
                profile,
            });
        }
        Ok(bumps)
    }
}

fn parse_profile(v: &str) -> Option<Profile> {
    match v {
        "cinf" => Some(Profile::Cinf),
        _ => v
            .strip_prefix("poly:")
            .and_then(|m| m.parse::<u32>().ok())
            .filter(|&m| m >= 1)
            .map(Profile::PolyMu),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut t = Table::parse(text)?;
    let dim_line = t.line("dimension");
    let dim = t
        .count("dimension")?
        .ok_or_else(|| invalid("missing required key 'dimension'"))?;
    if !(2..=3).contains(&dim) {
        return Err(err(
            dim_line,
            format!("unsupported dimension {dim}; only 2 and 3 are supported"),
        ));
    }

    // Domain.
    let kind_line = t.line("domain.kind");
    let kind = t.text("domain.kind").unwrap_or_else(|| "ellipsoid".into());
    let center = t.point("domain.center", dim)?.unwrap_or([0.0; 3]);
    let axes_line = t.line("domain.semi_axes");
    let axes = t
        .list("domain.semi_axes")?
        .ok_or_else(|| invalid("missing required key 'domain.semi_axes'"))?;
    let exponent_line = t.line("domain.exponent");
    let exponent = t.real("domain.exponent")?;
    let domain = match kind.as_str() {
        "ellipsoid" => {
            if exponent.is_some() {
                return Err(err(
                    exponent_line,
                    "domain.exponent applies to superellipses only",
                ));
            }
            ConvexDomain::ellipsoid(&center[..dim], &axes)
        }
        "superellipse" => {
            let p = exponent.ok_or_else(|| invalid("superellipse needs 'domain.exponent'"))?;
            ConvexDomain::superellipse(&center[..dim], &axes, p)
        }
        other => return Err(err(kind_line, format!("unknown domain kind '{other}'"))),
    }
    .map_err(|e| err(axes_line.max(kind_line), e.to_string()))?;

    // Phantom.
    let bumps = t.bumps("phantom.bump.", dim)?;
    let phantom = Phantom::new(dim, bumps).map_err(|e| invalid(e.to_string()))?;
    let margin = phantom.margin(&domain);
    if !phantom.bumps.is_empty() && !(margin > 0.0) {
        return Err(invalid(format!(
            "margin error: a phantom bump reaches the boundary (support margin {margin:.6})"
        )));
    }

    // Time grid and solver.
    let boundary_resolution =
        t.count("boundary.resolution")?
            .unwrap_or(if dim == 2 { 256 } else { 24 });
    let nt = t
        .count("time.nt")?
        .unwrap_or(if dim == 2 { 2000 } else { 400 });
    let factor = t.real("time.t_max_factor")?.unwrap_or(4.0);
    let max_radius = phantom.bumps.iter().map(|b| b.radius).fold(0.0, f64::max);
    let t_max = match t.real("time.t_max")? {
        Some(v) => v,
        None if dim == 2 => factor * domain.diameter(),
        None => domain.diameter() + max_radius,
    };
    let time = TimeGrid::new(t_max, nt).map_err(|e| invalid(e.to_string()))?;
    let mut solver = SolverParams::new(&domain, t_max);
    if let Some(v) = t.real("solver.h_t")? {
        solver.h_t = v;
    }
    if let Some(v) = t.real("solver.h_nu")? {
        solver.h_nu = v;
    }
    if let Some(v) = t.count("solver.mean_resolution")? {
        solver.mean_resolution = v;
    }
    if let Some(v) = t.count("solver.abel_nodes")? {
        solver.abel_nodes = v;
    }
    if let Some(v) = t.count("solver.normal_stencil")? {
        solver.normal_stencil = v;
    }
    let rule_line = t.line("solver.mean_rule");
    if let Some(v) = t.text("solver.mean_rule") {
        solver.mean_rule = MeanRule::parse(&v).map_err(|e| err(rule_line, e.to_string()))?;
    }
    solver.validate().map_err(|e| invalid(e.to_string()))?;
    if !phantom.bumps.is_empty() && !(margin > 2.0 * solver.h_nu) {
        return Err(invalid(format!(
            "margin error: phantom support margin {margin:.6} must exceed 2 h_nu = {:.6}",
            2.0 * solver.h_nu
        )));
    }

    // Reconstruction options.
    let mut recon = ReconstructionOptions {
        t_max_factor: factor,
        ..Default::default()
    };
    let interp_line = t.line("recon.interp");
    if let Some(v) = t.text("recon.interp") {
        recon.interp = TraceInterp::parse(&v).map_err(|e| err(interp_line, e.to_string()))?;
    }
    let max_iter = t.count("recon.max_iter")?.unwrap_or(20);
    let tol = t.real("recon.tol")?.unwrap_or(1e-8);
    let corr_line = t.line("recon.correction");
    recon.correction = match t.text("recon.correction").as_deref() {
        None | Some("none") => Correction::None,
        Some("fixed_point") => Correction::FixedPoint { max_iter, tol },
        Some(other) => {
            return Err(err(
                corr_line,
                format!("recon.correction must be 'none' or 'fixed_point', got '{other}'"),
            ))
        }
    };
    if let Some(v) = t.real("recon.abel_panel")? {
        recon.abel_panel = v;
    }
    if let Some(v) = t.count("recon.abel_order")? {
        recon.abel_order = v;
    }
    let default_safety = if phantom.bumps.is_empty() {
        0.0
    } else {
        0.5 * margin
    };
    recon.safety_margin = t.real("recon.safety_margin")?.unwrap_or(default_safety);
    let mut kopts = CorrectionOptions::default();
    if let Some(v) = t.count("kernel.directions")? {
        kopts.directions = v;
    }
    if let Some(v) = t.count("kernel.radial_nodes")? {
        kopts.radial_nodes = v;
    }
    if let Some(v) = t.count("kernel.samples")? {
        kopts.kernel_samples = v;
    }
    if let Some(v) = t.count("kernel.hilbert_nodes")? {
        kopts.hilbert_nodes = v;
    }
    if let Some(v) = t.real("kernel.fd_step")? {
        kopts.fd_step = v;
    }
    recon.kernel = kopts;
    recon.validate().map_err(|e| invalid(e.to_string()))?;

    // Grid.
    let shape = match t.counts("grid.shape")? {
        Some(v) if v.len() == dim => v,
        Some(v) => {
            return Err(err(
                t.line("grid.shape"),
                format!("grid.shape needs {dim} entries, got {}", v.len()),
            ))
        }
        None => vec![21; dim],
    };
    let min_axis = domain.min_semi_axis();
    let (lower, upper) = match (t.point("grid.lower", dim)?, t.point("grid.upper", dim)?) {
        (Some(l), Some(u)) => (l, u),
        (None, None) => {
            let c = 0.999 * (1.0 - recon.safety_margin / min_axis);
            if !(c > 0.0) {
                return Err(invalid("safety margin leaves no room for a default grid"));
            }
            let s = c / (dim as f64).sqrt();
            let mut l = [0.0; 3];
            let mut u = [0.0; 3];
            for i in 0..dim {
                l[i] = domain.center[i] - s * domain.semi_axes[i];
                u[i] = domain.center[i] + s * domain.semi_axes[i];
            }
            (l, u)
        }
        _ => return Err(invalid("grid.lower and grid.upper must be given together")),
    };
    let mut grid = GridSpec::new(dim, &lower[..dim], &upper[..dim], &shape).map_err(|e| {
        err(
            t.line("grid.shape").max(t.line("grid.lower")),
            e.to_string(),
        )
    })?;
    let mask_center = t.point("grid.mask_center", dim)?;
    let mask_radius = t.real("grid.mask_radius")?;
    match (mask_center, mask_radius) {
        (None, None) => {}
        (c, Some(r)) if r > 0.0 => grid = grid.with_mask(c.unwrap_or(domain.center), r),
        (_, Some(_)) => {
            return Err(err(
                t.line("grid.mask_radius"),
                "grid.mask_radius must be positive",
            ))
        }
        (Some(_), None) => return Err(invalid("grid.mask_center needs grid.mask_radius")),
    }
    for k in 0..grid.len() {
        let p = grid.point(k);
        if !grid.is_active(&p) {
            continue;
        }
        let d = domain.distance_to_boundary(&p);
        if d < recon.safety_margin || d <= 0.0 {
            return Err(invalid(format!(
                "grid point {:?} lies outside the safety region (distance {d:.6} to the boundary, required {:.6})",
                &p[..dim],
                recon.safety_margin
            )));
        }
    }

    // Kernel dump.
    let kmargin = match t.real("kernel.margin")? {
        Some(v) => v,
        None if recon.safety_margin > 0.0 => recon.safety_margin,
        None => 0.1 * min_axis,
    };
    let mut kernel_opts = KernelOptions::new(kmargin);
    kernel_opts.hilbert_nodes = kopts.hilbert_nodes;
    kernel_opts.fd_step = kernel_opts.fd_step.min(kopts.fd_step);
    let theta_line = t.line("kernel.theta");
    let theta = match t.point("kernel.theta", dim)? {
        Some(v) => {
            let norm = vector::norm(&v);
            if !(norm > 0.0) {
                return Err(err(theta_line, "kernel.theta must be nonzero"));
            }
            vector::scale(&v, 1.0 / norm)
        }
        None => [1.0, 0.0, 0.0],
    };
    let (lo, hi) = domain.support_interval(&theta);
    let kernel = KernelSettings {
        theta,
        order: t.count("kernel.order")?.unwrap_or(dim),
        s_lower: t.real("kernel.s_lower")?.unwrap_or(lo + kmargin),
        s_upper: t.real("kernel.s_upper")?.unwrap_or(hi - kmargin),
        s_count: t.count("kernel.s_count")?.unwrap_or(101),
        hilbert: t.boolean("kernel.hilbert")?.unwrap_or(dim == 2),
        opts: kernel_opts,
    };
    if kernel.s_count == 0 || kernel.s_upper < kernel.s_lower {
        return Err(invalid(
            "kernel offsets need s_count >= 1 and s_lower <= s_upper",
        ));
    }

    // Validation.
    let checks_line = t.line("validate.checks");
    let checks: Vec<String> = match t.text("validate.checks") {
        Some(v) => v.split(',').map(|s| s.trim().to_string()).collect(),
        None => default_checks(dim).iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = checks.iter().find(|c| !CHECKS.contains(&c.as_str())) {
        return Err(err(checks_line, format!("unknown check '{bad}'")));
    }
    let partner_bumps = t.bumps("validate.partner.bump.", dim)?;
    let partner = if partner_bumps.is_empty() {
        None
    } else {
        Some(Phantom::new(dim, partner_bumps).map_err(|e| invalid(e.to_string()))?)
    };
    let defaults = neumann_core::validation::IdentityResolution::default();
    let identity = neumann_core::validation::IdentityResolution {
        boundary: t.count("validate.boundary")?.unwrap_or(defaults.boundary),
        time_nodes: t
            .count("validate.time_nodes")?
            .unwrap_or(defaults.time_nodes),
        volume_radial: t
            .count("validate.volume_radial")?
            .unwrap_or(defaults.volume_radial),
        volume_angular: t
            .count("validate.volume_angular")?
            .unwrap_or(defaults.volume_angular),
        box_nodes: t.count("validate.box_nodes")?.unwrap_or(defaults.box_nodes),
        laplacian_step: t
            .real("validate.laplacian_step")?
            .unwrap_or(defaults.laplacian_step),
        azimuth_offset: 0.0,
    };
    let lemma_k = t.counts("validate.lemma_k")?.unwrap_or_else(|| vec![1, 2]);
    let mu_line = t.line("validate.mollifier_mu");
    let mollifier_mu = t.count("validate.mollifier_mu")?.unwrap_or(2);
    let mollifier_mu = u32::try_from(mollifier_mu)
        .map_err(|_| err(mu_line, "validate.mollifier_mu is too large"))?;
    let validate = ValidateSettings {
        checks,
        partner,
        identity,
        identity_bound: t.real("validate.identity_bound")?.unwrap_or(0.02),
        lemma_k,
        lemma_t: t.real("validate.lemma_t")?.unwrap_or(0.8),
        lemma_point: t
            .point("validate.lemma_point", dim)?
            .unwrap_or(domain.center),
        lemma_constant: t.real("validate.lemma_constant")?.unwrap_or(0.5),
        lemma_gradient: t.point("validate.lemma_gradient", dim)?.unwrap_or([
            1.0,
            -2.0,
            if dim == 3 { 0.5 } else { 0.0 },
        ]),
        lemma_bound: t.real("validate.lemma_bound")?.unwrap_or(1e-4),
        samples: t.count("validate.samples")?.unwrap_or(5),
        seed: t
            .get::<u64>("validate.seed", "a non-negative integer")?
            .unwrap_or(1),
        equivalence_bound: t.real("validate.equivalence_bound")?.unwrap_or(1e-5),
        mollifier_mu,
        mollifier_eps: t.real("validate.mollifier_eps")?.unwrap_or(0.5),
        mollifier_bound: t.real("validate.mollifier_bound")?.unwrap_or(1e-6),
    };

    let threads = t.count("threads")?.unwrap_or(0);
    let outputs = Outputs {
        trace: t
            .text("output.trace")
            .unwrap_or_else(|| "traces.csv".into()),
        image: t.text("output.image").unwrap_or_else(|| "image.csv".into()),
        pgm: t.text("output.pgm"),
        report: t
            .text("output.report")
            .unwrap_or_else(|| "report.csv".into()),
        kernel: t
            .text("output.kernel")
            .unwrap_or_else(|| "kernel.csv".into()),
    };

    // Every key must have been consumed by some section.
    if let Some((key, e)) = t.entries.iter().find(|(_, e)| !e.used) {
        return Err(err(
            e.line,
            format!("key '{key}' is not used by this configuration"),
        ));
    }

    Ok(RunConfig {
        dim,
        domain,
        phantom,
        boundary_resolution,
        time,
        solver,
        grid,
        recon,
        kernel,
        validate,
        threads,
        outputs,
    })
}
