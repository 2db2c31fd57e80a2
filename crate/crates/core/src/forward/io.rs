//! Text interchange format for [`TraceGrid`]: `#` header lines, then one CSV
//! row per (node, time) sample. Floats are written with 17 significant
//! digits, which round-trips every `f64` exactly.

use std::io::{BufRead, Write};

use super::{MeanRule, SolverParams, TimeGrid, TraceGrid};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryNode, BoundaryQuadrature, ConvexDomain, DomainKind};
use crate::vector::Point;

pub const FORMAT_VERSION: &str = "neumann-trace/1";

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

fn io_err(e: std::io::Error) -> Error {
    Error::Format(format!("i/o failure: {e}"))
}

/// One-line description of a domain, shared by trace headers and sidecars.
pub fn domain_spec(d: &ConvexDomain) -> String {
    let n = d.dim;
    let base = format!(
        "center={} semi_axes={}",
        fmt_list(&d.center[..n]),
        fmt_list(&d.semi_axes[..n])
    );
    match d.kind {
        DomainKind::Ellipsoid => format!("ellipsoid {base}"),
        DomainKind::SuperEllipse2D { exponent } => {
            format!("superellipse {base} exponent={}", fmt_f64(exponent))
        }
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("cannot parse {what} from '{s}'")))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',').map(|p| parse_f64(p, what)).collect()
}

fn parse_domain(spec: &str) -> Result<ConvexDomain> {
    let mut words = spec.split_whitespace();
    let kind = words.next().unwrap_or_default();
    let (mut center, mut axes, mut exponent) = (None, None, None);
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed domain field '{w}'")))?;
        match k {
            "center" => center = Some(parse_list(v, "domain center")?),
            "semi_axes" => axes = Some(parse_list(v, "domain semi-axes")?),
            "exponent" => exponent = Some(parse_f64(v, "domain exponent")?),
            _ => return Err(Error::Format(format!("unknown domain field '{k}'"))),
        }
    }
    let center = center.ok_or_else(|| Error::Format("domain center missing".into()))?;
    let axes = axes.ok_or_else(|| Error::Format("domain semi-axes missing".into()))?;
    match kind {
        "ellipsoid" => ConvexDomain::ellipsoid(&center, &axes),
        "superellipse" => ConvexDomain::superellipse(
            &center,
            &axes,
            exponent.ok_or_else(|| Error::Format("superellipse exponent missing".into()))?,
        ),
        _ => Err(Error::Format(format!("unknown domain kind '{kind}'"))),
    }
}

fn solver_spec(p: &SolverParams) -> String {
    format!(
        "h_t={} h_nu={} mean_resolution={} abel_nodes={} normal_stencil={} mean_rule={}",
        fmt_f64(p.h_t),
        fmt_f64(p.h_nu),
        p.mean_resolution,
        p.abel_nodes,
        p.normal_stencil,
        p.mean_rule.name()
    )
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Format(format!("cannot parse {what} from '{s}'")))
}

fn parse_solver(spec: &str) -> Result<SolverParams> {
    let mut p = SolverParams {
        h_t: f64::NAN,
        h_nu: f64::NAN,
        mean_resolution: 0,
        abel_nodes: 0,
        normal_stencil: 0,
        mean_rule: MeanRule::Radial,
    };
    for w in spec.split_whitespace() {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed solver field '{w}'")))?;
        match k {
            "h_t" => p.h_t = parse_f64(v, "h_t")?,
            "h_nu" => p.h_nu = parse_f64(v, "h_nu")?,
            "mean_resolution" => p.mean_resolution = parse_usize(v, "mean_resolution")?,
            "abel_nodes" => p.abel_nodes = parse_usize(v, "abel_nodes")?,
            "normal_stencil" => p.normal_stencil = parse_usize(v, "normal_stencil")?,
            "mean_rule" => {
                p.mean_rule = MeanRule::parse(v).map_err(|e| Error::Format(e.to_string()))?
            }
            _ => return Err(Error::Format(format!("unknown solver field '{k}'"))),
        }
    }
    p.validate()
        .map_err(|e| Error::Format(format!("solver header: {e}")))?;
    Ok(p)
}

pub fn write_trace<W: Write>(tr: &TraceGrid, mut w: W) -> Result<()> {
    let n = tr.dim();
    let mut header = String::new();
    header.push_str(&format!("# format {FORMAT_VERSION}\n"));
    header.push_str(&format!("# dimension {n}\n"));
    header.push_str(&format!("# domain {}\n", domain_spec(&tr.domain)));
    header.push_str(&format!(
        "# boundary_resolution {}\n",
        tr.boundary.resolution
    ));
    header.push_str(&format!("# nodes {}\n", tr.boundary.len()));
    header.push_str(&format!("# nt {}\n", tr.times.nt));
    header.push_str(&format!("# t_max {}\n", fmt_f64(tr.times.t_max)));
    header.push_str(&format!("# phantom {}\n", tr.phantom_hash));
    header.push_str(&format!("# solver {}\n", solver_spec(&tr.params)));
    let ys: Vec<String> = (1..=n).map(|i| format!("y_{i}")).collect();
    let nus: Vec<String> = (1..=n).map(|i| format!("nu_{i}")).collect();
    header.push_str(&format!(
        "# columns node_index,time_index,{},{},weight,t,value\n",
        ys.join(","),
        nus.join(",")
    ));
    w.write_all(header.as_bytes()).map_err(io_err)?;
    let mut line = String::with_capacity(256);
    for (j, node) in tr.boundary.nodes.iter().enumerate() {
        let prefix = format!(
            "{},{},{}",
            fmt_list(&node.point[..n]),
            fmt_list(&node.normal[..n]),
            fmt_f64(node.weight)
        );
        for i in 0..tr.times.nt {
            line.clear();
            line.push_str(&format!(
                "{j},{i},{prefix},{},{}\n",
                fmt_f64(tr.times.time(i)),
                fmt_f64(tr.value(j, i))
            ));
            w.write_all(line.as_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn trace_to_string(tr: &TraceGrid) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(tr, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Default)]
struct Header {
    dimension: Option<usize>,
    domain: Option<ConvexDomain>,
    resolution: Option<usize>,
    nodes: Option<usize>,
    nt: Option<usize>,
    t_max: Option<f64>,
    phantom: Option<String>,
    solver: Option<SolverParams>,
}

fn missing(what: &str) -> Error {
    Error::Format(format!("trace header lacks '{what}'"))
}

/// Reads a trace file. Rows may be missing at the end (a truncated file);
/// the first node without a complete time series is then reported.
pub fn read_trace<R: BufRead>(r: R) -> Result<TraceGrid> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty trace file".into()))?
        .map_err(io_err)?;
    match first.strip_prefix("# format ") {
        Some(v) if v.trim() == FORMAT_VERSION => {}
        Some(v) => {
            return Err(Error::Format(format!(
                "format-version mismatch: file has '{}', expected '{FORMAT_VERSION}'",
                v.trim()
            )))
        }
        None => return Err(Error::Format("missing format header line".into())),
    }
    let mut h = Header::default();
    let mut rows: Vec<String> = Vec::new();
    for line in lines {
        let line = line.map_err(io_err)?;
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            let (key, val) = rest.split_once(' ').unwrap_or((rest, ""));
            match key {
                "dimension" => h.dimension = Some(parse_usize(val, "dimension")?),
                "domain" => h.domain = Some(parse_domain(val)?),
                "boundary_resolution" => {
                    h.resolution = Some(parse_usize(val, "boundary resolution")?)
                }
                "nodes" => h.nodes = Some(parse_usize(val, "node count")?),
                "nt" => h.nt = Some(parse_usize(val, "nt")?),
                "t_max" => h.t_max = Some(parse_f64(val, "t_max")?),
                "phantom" => h.phantom = Some(val.trim().to_string()),
                "solver" => h.solver = Some(parse_solver(val)?),
                "columns" | "created" => {}
                _ => return Err(Error::Format(format!("unknown header key '{key}'"))),
            }
        } else if !line.trim().is_empty() {
            rows.push(line);
        }
    }
    let n = h.dimension.ok_or_else(|| missing("dimension"))?;
    let domain = h.domain.ok_or_else(|| missing("domain"))?;
    if domain.dim != n {
        return Err(Error::Format(
            "domain dimension disagrees with header".into(),
        ));
    }
    let nodes = h.nodes.ok_or_else(|| missing("nodes"))?;
    let times = TimeGrid::new(
        h.t_max.ok_or_else(|| missing("t_max"))?,
        h.nt.ok_or_else(|| missing("nt"))?,
    )
    .map_err(|e| Error::Format(e.to_string()))?;
    let nt = times.nt;
    let ncols = 2 + 2 * n + 3;
    let mut values = vec![0.0; nodes * nt];
    let mut seen = vec![0usize; nodes];
    let mut filled = vec![false; nodes * nt];
    let mut bnodes: Vec<Option<BoundaryNode>> = vec![None; nodes];
    let last = rows.len().saturating_sub(1);
    for (k, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != ncols {
            if k == last {
                // An interrupted final write; completeness is checked below.
                break;
            }
            return Err(Error::Format(format!(
                "row {} has {} columns, expected {ncols}",
                k + 1,
                cols.len()
            )));
        }
        let j = parse_usize(cols[0], "node index")?;
        let i = parse_usize(cols[1], "time index")?;
        if j >= nodes || i >= nt {
            return Err(Error::Format(format!(
                "row {} indexes outside the grid",
                k + 1
            )));
        }
        let nums: Vec<f64> = cols[2..]
            .iter()
            .map(|c| parse_f64(c, "sample"))
            .collect::<Result<_>>()?;
        let mut point: Point = [0.0; 3];
        let mut normal: Point = [0.0; 3];
        point[..n].copy_from_slice(&nums[..n]);
        normal[..n].copy_from_slice(&nums[n..2 * n]);
        let weight = nums[2 * n];
        if bnodes[j].is_none() {
            bnodes[j] = Some(BoundaryNode {
                point,
                normal,
                weight,
            });
        }
        if !filled[j * nt + i] {
            filled[j * nt + i] = true;
            seen[j] += 1;
        }
        values[j * nt + i] = nums[2 * n + 2];
    }
    for (j, &count) in seen.iter().enumerate() {
        if count < nt {
            return Err(Error::InsufficientData {
                node: j,
                reason: format!("trace file holds {count} of {nt} time samples"),
            });
        }
    }
    Ok(TraceGrid {
        domain,
        boundary: BoundaryQuadrature {
            nodes: bnodes
                .into_iter()
                .map(|b| b.expect("counted above"))
                .collect(),
            resolution: h.resolution.ok_or_else(|| missing("boundary_resolution"))?,
        },
        times,
        values,
        phantom_hash: h.phantom.ok_or_else(|| missing("phantom"))?,
        params: h.solver.ok_or_else(|| missing("solver"))?,
    })
}
