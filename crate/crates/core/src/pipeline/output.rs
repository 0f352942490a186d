//! Report directory layout.
//!
//! ```text
//! report.json   full ExperimentReport (schema "trotsens-report/1")
//! config.toml   effective configuration; re-running from it reproduces the CSVs
//! indices.csv   term_index,s_index,partial_variance,weakened_flag,removed_flag
//! errors.csv    order,t,steps,variant,epsilon,gate_count
//! ```
//!
//! Both CSVs open with one `#` comment line carrying the schema tag, the seed
//! and the effective configuration as compact JSON. Floats are written in
//! shortest round-trip form, so identical runs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ErrorEntry, ExperimentConfig, ExperimentReport, Variant, REPORT_SCHEMA, UNITARITY_TOL};
use crate::error::{Error, Result};
use crate::sensitivity::{select_below_mean_threshold, SensitivityReport};
use crate::trotter::{gate_count, Order};

pub const REPORT_JSON: &str = "report.json";
pub const CONFIG_TOML: &str = "config.toml";
pub const INDICES_CSV: &str = "indices.csv";
pub const ERRORS_CSV: &str = "errors.csv";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub config: PathBuf,
    pub indices: PathBuf,
    pub errors: PathBuf,
}

impl ReportFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            report: dir.join(REPORT_JSON),
            config: dir.join(CONFIG_TOML),
            indices: dir.join(INDICES_CSV),
            errors: dir.join(ERRORS_CSV),
        }
    }
}

/// The `#` comment line that opens every CSV written for `cfg`.
pub fn csv_preamble(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    format!("# {REPORT_SCHEMA} seed={} config={json}\n", cfg.seed)
}

fn write_csv(path: &Path, cfg: &ExperimentConfig, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut out = csv_preamble(cfg).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes `indices.csv` for a sensitivity analysis.
pub fn write_indices_csv(
    path: &Path,
    cfg: &ExperimentConfig,
    sensitivity: &SensitivityReport,
    weakened: &[usize],
    removed: &[usize],
) -> Result<()> {
    let rows = (0..sensitivity.d)
        .map(|k| {
            vec![
                k.to_string(),
                sensitivity.s_index[k].to_string(),
                sensitivity.partial_variance[k].to_string(),
                u8::from(weakened.binary_search(&k).is_ok()).to_string(),
                u8::from(removed.binary_search(&k).is_ok()).to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        cfg,
        &["term_index", "s_index", "partial_variance", "weakened_flag", "removed_flag"],
        rows,
    )
}

fn write_errors_csv(path: &Path, cfg: &ExperimentConfig, errors: &[ErrorEntry]) -> Result<()> {
    let rows = errors
        .iter()
        .map(|e| {
            vec![
                e.order.to_string(),
                e.time.to_string(),
                e.steps.to_string(),
                e.variant.as_str().to_string(),
                e.epsilon.to_string(),
                e.gate_count.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        cfg,
        &["order", "t", "steps", "variant", "epsilon", "gate_count"],
        rows,
    )
}

fn write_pretty_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_report_dir(report: &ExperimentReport, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir)?;
    let files = ReportFiles::in_dir(dir);
    write_pretty_json(&files.report, report)?;
    fs::write(&files.config, report.config.to_toml())?;
    write_indices_csv(
        &files.indices,
        &report.config,
        &report.sensitivity,
        &report.weakened,
        &report.removed,
    )?;
    write_errors_csv(&files.errors, &report.config, &report.errors)?;
    Ok(files)
}

#[derive(Clone, Debug, PartialEq)]
struct IndexRow {
    term: usize,
    s_index: f64,
    weakened: bool,
    removed: bool,
}

#[derive(Clone, Debug, PartialEq)]
struct ErrorRow {
    order: Order,
    time: f64,
    steps: usize,
    variant: Variant,
    epsilon: f64,
    gate_count: usize,
}

fn csv_records(path: &Path, expected_header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let text = fs::read_to_string(path)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().ne(expected_header.iter().copied()) {
        return Err(Error::Report(format!("{}: unexpected header {header:?}", path.display())));
    }
    Ok(r.records().collect::<std::result::Result<_, _>>()?)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::Report(format!(
            "{}: line {}: cannot parse {raw:?}",
            path.display(),
            rec.position().map_or(0, |p| p.line())
        ))
    })
}

fn read_indices(path: &Path) -> Result<Vec<IndexRow>> {
    csv_records(
        path,
        &["term_index", "s_index", "partial_variance", "weakened_flag", "removed_flag"],
    )?
    .iter()
    .map(|rec| {
        Ok(IndexRow {
            term: field(rec, 0, path)?,
            s_index: field(rec, 1, path)?,
            weakened: field::<u8>(rec, 3, path)? == 1,
            removed: field::<u8>(rec, 4, path)? == 1,
        })
    })
    .collect()
}

fn read_errors(path: &Path) -> Result<Vec<ErrorRow>> {
    csv_records(path, &["order", "t", "steps", "variant", "epsilon", "gate_count"])?
        .iter()
        .map(|rec| {
            let order: u8 = field(rec, 0, path)?;
            Ok(ErrorRow {
                order: Order::try_from(order).map_err(Error::Report)?,
                time: field(rec, 1, path)?,
                steps: field(rec, 2, path)?,
                variant: field(rec, 3, path)?,
                epsilon: field(rec, 4, path)?,
                gate_count: field(rec, 5, path)?,
            })
        })
        .collect()
}

pub fn read_report_dir(dir: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(dir.join(REPORT_JSON))?;
    Ok(serde_json::from_str(&text)?)
}

/// A report invariant that does not hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

/// Re-checks a written report directory. Missing or unparseable files are
/// errors; broken invariants are returned in check order.
pub fn validate_report_dir(dir: &Path) -> Result<Vec<Violation>> {
    let files = ReportFiles::in_dir(dir);
    for p in [&files.report, &files.config, &files.indices, &files.errors] {
        if !p.is_file() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("missing report file {}", p.display()),
            )));
        }
    }
    let report = read_report_dir(dir)?;
    let indices = read_indices(&files.indices)?;
    let errors = read_errors(&files.errors)?;
    let config_file = ExperimentConfig::from_toml(&fs::read_to_string(&files.config)?)?;

    let mut v = Vec::new();
    let mut fail = |invariant: &'static str, detail: String| v.push(Violation { invariant, detail });
    let n_terms = report.config.n_terms;
    let reduced = n_terms.saturating_sub(report.removed.len());

    if report.schema != REPORT_SCHEMA {
        fail("schema", format!("found {:?}", report.schema));
    }
    if config_file != report.config {
        fail("config echo", "config.toml differs from the report's config".into());
    }

    // Gate-count arithmetic, in the report and in errors.csv.
    let expected_terms = |variant| match variant {
        Variant::Full => n_terms,
        Variant::Reduced => reduced,
    };
    for g in &report.gate_counts {
        let want = gate_count(expected_terms(g.variant), g.order, g.steps);
        if g.term_count != expected_terms(g.variant) || g.gates != want {
            fail(
                "gate-count arithmetic",
                format!(
                    "order {} {}: {} gates over {} terms, expected {want}",
                    g.order,
                    g.variant.as_str(),
                    g.gates,
                    g.term_count
                ),
            );
        }
    }
    for e in &errors {
        let want = gate_count(expected_terms(e.variant), e.order, e.steps);
        if e.gate_count != want {
            fail(
                "gate-count arithmetic",
                format!(
                    "{}: order {} t={} {}: gate_count {} expected {want}",
                    ERRORS_CSV,
                    e.order,
                    e.time,
                    e.variant.as_str(),
                    e.gate_count
                ),
            );
        }
    }

    // Truncation rule and subset property.
    let ratio = report.config.effective_threshold_ratio();
    let reselected = select_below_mean_threshold(&report.sensitivity, ratio);
    if reselected != report.removed {
        fail(
            "threshold rule",
            format!("removed {:?} but the indices select {:?}", report.removed, reselected),
        );
    }
    let not_weakened: Vec<usize> = report
        .removed
        .iter()
        .copied()
        .filter(|k| report.weakened.binary_search(k).is_err())
        .collect();
    if !not_weakened.is_empty() {
        fail("subset property", format!("removed terms {not_weakened:?} were not weakened"));
    }
    if report.removed_is_subset_of_weakened != not_weakened.is_empty() {
        fail("subset property", "subset flag disagrees with removed/weakened sets".into());
    }

    // Unitarity residuals logged at run time.
    let tol = UNITARITY_TOL * report.dim as f64;
    for e in &report.errors {
        if !(e.unitarity_residual <= tol) {
            fail(
                "unitarity",
                format!(
                    "order {} t={} {}: residual {:e} > {tol:e}",
                    e.order,
                    e.time,
                    e.variant.as_str(),
                    e.unitarity_residual
                ),
            );
        }
        if !(e.epsilon >= 0.0 && e.epsilon <= 2.0 * (report.dim as f64).sqrt() + 1e-9) {
            fail("epsilon bound", format!("epsilon {} outside [0, 2√dim]", e.epsilon));
        }
    }
    for x in &report.exact_unitarity {
        if !(x.residual <= tol) {
            fail("unitarity", format!("exact evolution t={}: residual {:e}", x.time, x.residual));
        }
    }

    // CSVs agree with the report.
    let index_rows_match = indices.len() == report.sensitivity.d
        && indices.iter().enumerate().all(|(k, row)| {
            row.term == k
                && row.s_index == report.sensitivity.s_index[k]
                && row.weakened == report.weakened.binary_search(&k).is_ok()
                && row.removed == report.removed.binary_search(&k).is_ok()
        });
    if !index_rows_match {
        fail("indices.csv consistency", "rows differ from report.json".into());
    }
    let error_rows_match = errors.len() == report.errors.len()
        && errors.iter().zip(&report.errors).all(|(a, b)| {
            a.order == b.order
                && a.time == b.time
                && a.steps == b.steps
                && a.variant == b.variant
                && a.epsilon == b.epsilon
                && a.gate_count == b.gate_count
        });
    if !error_rows_match {
        fail("errors.csv consistency", "rows differ from report.json".into());
    }

    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::run_experiment;

    fn small_report() -> ExperimentReport {
        // Five qubits: at smaller dimensions the weakened terms' indices sit
        // too close to the threshold for the subset property to be reliable.
        run_experiment(&ExperimentConfig {
            qubits: 5,
            n_terms: 10,
            weaken_count: 3,
            samples: 128,
            seed: 42,
            time_grid: vec![0.1, 0.2],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn written_report_validates() {
        let dir = tempfile::tempdir().unwrap();
        let r = small_report();
        write_report_dir(&r, dir.path()).unwrap();
        assert_eq!(validate_report_dir(dir.path()).unwrap(), vec![]);
        let back = read_report_dir(dir.path()).unwrap();
        assert_eq!(back, r);
        let text = fs::read_to_string(dir.path().join(ERRORS_CSV)).unwrap();
        assert!(text.starts_with("# trotsens-report/1 seed=42 config={"));
        assert_eq!(text.lines().count(), 2 + 8);
        assert!(r.removed_is_subset_of_weakened);
    }

    #[test]
    fn edited_gate_count_is_caught() {
        let dir = tempfile::tempdir().unwrap();
        write_report_dir(&small_report(), dir.path()).unwrap();
        let path = dir.path().join(ERRORS_CSV);
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let last = lines.last_mut().unwrap();
        let (head, _) = last.rsplit_once(',').unwrap();
        *last = format!("{head},999");
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        let v = validate_report_dir(dir.path()).unwrap();
        assert_eq!(v[0].invariant, "gate-count arithmetic");
    }

    #[test]
    fn missing_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_report_dir(&small_report(), dir.path()).unwrap();
        fs::remove_file(dir.path().join(INDICES_CSV)).unwrap();
        assert!(matches!(validate_report_dir(dir.path()), Err(Error::Io(_))));
    }

    #[test]
    fn tampered_removed_set_is_caught() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = small_report();
        let strong = (0..10).find(|k| !r.weakened.contains(k)).unwrap();
        r.removed.push(strong);
        r.removed.sort_unstable();
        write_report_dir(&r, dir.path()).unwrap();
        let names: Vec<_> = validate_report_dir(dir.path())
            .unwrap()
            .into_iter()
            .map(|v| v.invariant)
            .collect();
        assert!(names.contains(&"threshold rule"));
        assert!(names.contains(&"subset property"));
        assert!(names.contains(&"gate-count arithmetic"));
    }
}
