//! CSV and Markdown rendering of convergence reports.
//!
//! Errors are printed as `d.dddddddddde±XX`, EOCs with two decimals; the EOC
//! cells of the first level are empty.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{ConvergenceReport, NormFamily, Quantity, Variant};
use crate::error::{Result, StokesError};

pub const CSV_HEADER: &str = "level,tau,h,err_u_H1,eoc_u_H1,err_dtu_L2,eoc_dtu_L2,err_p_L2,eoc_p_L2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

/// Scientific notation with ten digits after the point and a signed
/// two-digit exponent, e.g. `1.5106628370e+00`.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.10e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn format_eoc(eoc: Option<f64>) -> String {
    eoc.map(|e| format!("{e:.2}")).unwrap_or_default()
}

/// CSV table of one norm family, LF line endings.
pub fn to_csv(report: &ConvergenceReport, family: NormFamily) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, rec) in report.records.iter().enumerate() {
        write!(out, "{},{},{}", rec.level, format_sci(rec.tau), format_sci(rec.h)).unwrap();
        for q in Quantity::ALL {
            write!(
                out,
                ",{},{}",
                format_sci(rec.errors.get(family, q)),
                format_eoc(report.eoc(i, family, q))
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

fn column_titles(variant: Variant, family: NormFamily) -> [String; 3] {
    let (u, p) = match variant {
        Variant::Collocation => ("u~", "p~"),
        Variant::Interpolation => ("u", "pbar"),
    };
    let norm = match family {
        NormFamily::L2 => "L2",
        NormFamily::LBar2 => "lbar2",
        NormFamily::L2Plus => "l2",
    };
    [
        format!("‖u − {u}‖ {norm}(H1)"),
        format!("‖∂t u − ∂t {u}‖ {norm}(L2)"),
        format!("‖p − {p}‖ {norm}(L2)"),
    ]
}

/// Three stacked Markdown tables, one per norm family.
pub fn to_markdown(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    writeln!(out, "## {} post-processing", report.variant.name()).unwrap();
    for family in NormFamily::ALL {
        let titles = column_titles(report.variant, family);
        out.push('\n');
        writeln!(
            out,
            "| τ | h | {} | EOC | {} | EOC | {} | EOC |",
            titles[0], titles[1], titles[2]
        )
        .unwrap();
        out.push_str("|---|---|---:|---:|---:|---:|---:|---:|\n");
        for (i, rec) in report.records.iter().enumerate() {
            write!(out, "| {} | {} ", format_sci(rec.tau), format_sci(rec.h)).unwrap();
            for q in Quantity::ALL {
                let eoc = report.eoc(i, family, q).map(|e| format!("{e:.2}"));
                write!(
                    out,
                    "| {} | {} ",
                    format_sci(rec.errors.get(family, q)),
                    eoc.as_deref().unwrap_or("–")
                )
                .unwrap();
            }
            out.push_str("|\n");
        }
    }
    out
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub level: usize,
    pub tau: f64,
    pub h: f64,
    pub errors: [f64; 3],
    pub eocs: [Option<f64>; 3],
}

/// Reads a table produced by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let bad = |msg: String| StokesError::InvalidArgument(msg);
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(bad(format!("unexpected CSV header {other:?}"))),
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad number {s:?}: {e}")));
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 9 {
                return Err(bad(format!("expected 9 columns, got {}", c.len())));
            }
            Ok(CsvRow {
                level: c[0].parse().map_err(|e| bad(format!("bad level {:?}: {e}", c[0])))?,
                tau: num(c[1])?,
                h: num(c[2])?,
                errors: [num(c[3])?, num(c[5])?, num(c[7])?],
                eocs: [opt(c[4])?, opt(c[6])?, opt(c[8])?],
            })
        })
        .collect()
}

/// File name of one CSV table.
pub fn csv_file_name(variant: Variant, family: NormFamily) -> String {
    format!("{}_{}.csv", variant.name(), family.name())
}

/// Writes `reports` into directory `dir`: one CSV per variant and norm
/// family, or one Markdown file per variant. Returns the files written.
pub fn emit_report(reports: &[&ConvergenceReport], format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |p: &Path, e: std::io::Error| StokesError::InvalidArgument(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for report in reports {
        match format {
            OutputFormat::Csv => {
                for family in NormFamily::ALL {
                    let path = dir.join(csv_file_name(report.variant, family));
                    fs::write(&path, to_csv(report, family)).map_err(|e| io(&path, e))?;
                    written.push(path);
                }
            }
            OutputFormat::Markdown => {
                let path = dir.join(format!("{}.md", report.variant.name()));
                fs::write(&path, to_markdown(report)).map_err(|e| io(&path, e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{ErrorTable, LevelRecord};

    fn synthetic(errors: &[f64]) -> ConvergenceReport {
        ConvergenceReport {
            variant: Variant::Interpolation,
            records: errors
                .iter()
                .enumerate()
                .map(|(level, &e)| LevelRecord {
                    level,
                    tau: 1.0 / (1 << level) as f64,
                    h: 0.25 * 2f64.sqrt() / (1 << level) as f64,
                    errors: ErrorTable { values: [[e; 3]; 3] },
                })
                .collect(),
        }
    }

    #[test]
    fn number_format() {
        assert_eq!(format_sci(1.5106628370e+00), "1.5106628370e+00");
        assert_eq!(format_sci(4.1881864102e-04), "4.1881864102e-04");
        assert_eq!(format_sci(0.0), "0.0000000000e+00");
        assert_eq!(format_sci(-2.5e12), "-2.5000000000e+12");
        assert_eq!(format_sci(1e-100), "1.0000000000e-100");
        assert_eq!(format_eoc(Some(1.996)), "2.00");
        assert_eq!(format_eoc(None), "");
    }

    #[test]
    fn one_level_has_empty_eocs() {
        let csv = to_csv(&synthetic(&[0.5]), NormFamily::L2);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].ends_with(",5.0000000000e-01,"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn two_levels_eoc_cell() {
        let csv = to_csv(&synthetic(&[4e-2, 1e-2]), NormFamily::LBar2);
        let row = csv.lines().nth(2).unwrap();
        assert_eq!(row.split(',').nth(4), Some("2.00"));
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows[1].eocs, [Some(2.0); 3]);
        assert_eq!(rows[0].eocs, [None; 3]);
    }

    #[test]
    fn markdown_has_three_tables() {
        let md = to_markdown(&synthetic(&[4e-2, 1e-2]));
        assert_eq!(md.matches("|---|").count(), 3);
        assert!(md.contains("| 2.00 |"));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_csv("a,b\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2\n")).is_err());
    }
}
