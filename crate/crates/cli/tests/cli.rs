//! End-to-end runs of the `neumann` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DISK: &str = "dimension = 2
domain.semi_axes = 1,1
phantom.bump.0.center = 0.1,0
phantom.bump.0.radius = 0.3
boundary.resolution = 48
time.nt = 240
grid.shape = 7,5
";

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.cfg"), config).unwrap();
        Run { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn neumann(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_neumann"))
            .current_dir(self.dir.path())
            .args(args)
            .arg("--config")
            .arg(self.path("run.cfg"))
            .output()
            .unwrap()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn forward_then_reconstruct_with_pgm() {
    let run = Run::new(&format!("{DISK}output.pgm = image.pgm\n"));
    assert!(run.neumann(&["forward"]).status.success());
    let trace = read(&run.path("traces.csv"));
    assert!(trace.starts_with("# format neumann-trace/1\n"));
    let o = run.neumann(&["reconstruct"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&run.path("image.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x_1,x_2,value"));
    assert_eq!(lines.count(), 35);
    let pgm = read(&run.path("image.pgm"));
    assert!(pgm.starts_with("P2\n7 5\n65535\n"));
    let meta = read(&run.path("image.csv.meta"));
    assert!(meta.contains("truncation_estimate = "));
    assert!(!meta.contains("elapsed_s"));
}

#[test]
fn timestamps_only_when_requested() {
    let run = Run::new(DISK);
    assert!(run.neumann(&["forward", "--timestamps"]).status.success());
    assert!(read(&run.path("traces.csv"))
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("# created "));
    // The stamped file is still readable.
    let o = run.neumann(&["reconstruct", "--timestamps"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(&run.path("image.csv.meta")).contains("elapsed_s = "));
}

#[test]
fn truncated_trace_names_the_node() {
    let run = Run::new(DISK);
    assert!(run.neumann(&["forward"]).status.success());
    let text = read(&run.path("traces.csv"));
    // Keep the header and the first 3 nodes plus part of node 3's rows.
    let header = text.lines().take_while(|l| l.starts_with('#')).count();
    let keep: Vec<&str> = text.lines().take(header + 3 * 241 + 100).collect();
    let mut cut = keep.join("\n");
    cut.push_str("\n3,100,0.9"); // an interrupted final row
    std::fs::write(run.path("traces.csv"), cut).unwrap();
    let o = run.neumann(&["reconstruct"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("boundary node 3"), "{msg}");
}

#[test]
fn version_mismatch_is_reported() {
    let run = Run::new(DISK);
    assert!(run.neumann(&["forward"]).status.success());
    let text = read(&run.path("traces.csv")).replacen("neumann-trace/1", "neumann-trace/9", 1);
    std::fs::write(run.path("traces.csv"), text).unwrap();
    let o = run.neumann(&["reconstruct"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mismatch"), "{}", stderr(&o));
}

#[test]
fn reconstruct_rejects_traces_of_another_phantom() {
    let run = Run::new(DISK);
    assert!(run.neumann(&["forward"]).status.success());
    std::fs::write(run.path("run.cfg"), DISK.replace("0.1,0", "0.2,0")).unwrap();
    let o = run.neumann(&["reconstruct"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("phantom"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let run = Run::new("dimension = 4\n");
    let o = run.neumann(&["forward"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported dimension"));
    let run = Run::new(&format!("{DISK}recon.bogus = 3\n"));
    let o = run.neumann(&["forward"]);
    assert!(
        stderr(&o).contains("line 8") && stderr(&o).contains("unknown key"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn validate_writes_rows_and_sets_exit_code() {
    let run = Run::new(&format!(
        "{DISK}validate.checks = mollifier,lemma_coefficients\n"
    ));
    let o = run.neumann(&["validate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read(&run.path("report.csv"));
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(
        rows[0],
        "name,lhs,rhs,abs_residual,rel_residual,resolution,bound,status"
    );
    assert_eq!(rows.len(), 1 + 3 + 2);
    assert!(rows[1..].iter().all(|r| r.ends_with(",pass")));

    let strict = Run::new(&format!(
        "{DISK}validate.checks = lemma_coefficients\nvalidate.lemma_k = 2\nvalidate.lemma_bound = 1e-20\n"
    ));
    let o = strict.neumann(&["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(read(&strict.path("report.csv")).contains(",fail"));
}

#[test]
fn kernel_dump_columns() {
    let run = Run::new(
        "dimension = 2\ndomain.kind = superellipse\ndomain.semi_axes = 1,1\ndomain.exponent = 4\nkernel.s_count = 11\n",
    );
    let o = run.neumann(&["kernel", "--out", "k.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&run.path("k.csv"));
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "s,Rchi,d1,d2,HRchi,Hd1,Hd2");
    assert_eq!(rows.len(), 12);
}
