//! CSV artifacts. Every file starts with `#` comment lines carrying
//! provenance, followed by a header row and one row per point. Floats are
//! written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::ensembles::{EnsembleSpec, SymmetryClass};
use crate::spectral::SurvivalCurve;
use crate::theory::{Formula, TheoryCurve};

pub const SURVIVAL_COLUMNS: [&str; 5] = ["tau", "t", "p_mean", "p_stderr", "n"];
pub const THEORY_COLUMNS: [&str; 6] = ["tau", "p_theory", "quad_err", "formula", "gamma", "class"];
pub const SWEEP_COLUMNS: [&str; 7] = [
    "gamma",
    "g",
    "p_res_mc",
    "p_res_stderr",
    "n",
    "p_res_theory",
    "p_fgr",
];
pub const RESIDENCE_COLUMNS: [&str; 5] = ["gamma", "p_res_closed", "p_res_integral", "discrepancy", "p_fgr"];

pub fn version_string() -> String {
    format!("leveldot v{}", env!("CARGO_PKG_VERSION"))
}

/// Ordered `key: value` metadata written as comment lines.
pub type Header = Vec<(String, String)>;

pub fn header(kind: &str) -> Header {
    vec![
        ("artifact".into(), kind.into()),
        ("version".into(), version_string()),
    ]
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

fn write_table(path: &Path, header: &Header, columns: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (k, v) in header {
        writeln!(out, "# {k}: {v}").map_err(|e| HarnessError::io(path, e))?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(columns).map_err(|e| HarnessError::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

/// A parsed artifact: comment metadata plus named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut meta = BTreeMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line[1..].split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let columns = reader
            .headers()
            .map_err(|e| HarnessError::csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { meta, columns, rows })
    }

    pub fn has_columns(&self, want: &[&str]) -> bool {
        want.iter().all(|c| self.columns.iter().any(|h| h == c))
    }

    fn index(&self, name: &str, path: &Path) -> Result<usize, HarnessError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| HarnessError::Schema(format!("{}: missing column `{name}`", path.display())))
    }

    pub fn floats(&self, name: &str, path: &Path) -> Result<Vec<f64>, HarnessError> {
        let i = self.index(name, path)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[i].parse::<f64>().map_err(|_| {
                    HarnessError::Schema(format!("{}: row {} column `{name}`: bad number {:?}", path.display(), r + 1, row[i]))
                })
            })
            .collect()
    }

    pub fn strings(&self, name: &str, path: &Path) -> Result<Vec<String>, HarnessError> {
        let i = self.index(name, path)?;
        Ok(self.rows.iter().map(|r| r[i].clone()).collect())
    }
}

pub fn write_survival(path: &Path, curve: &SurvivalCurve, mut meta: Header) -> Result<(), HarnessError> {
    meta.push(("spec".into(), serde_json::to_string(&curve.spec).expect("spec serializes")));
    meta.push(("seed".into(), curve.master_seed.to_string()));
    meta.push(("samples".into(), curve.samples.to_string()));
    meta.push(("failures".into(), curve.failures.to_string()));
    let rows: Vec<Vec<String>> = (0..curve.taus.len())
        .map(|i| {
            vec![
                fmt_f64(curve.taus[i]),
                fmt_f64(curve.times[i]),
                fmt_f64(curve.mean[i]),
                fmt_f64(curve.stderr[i]),
                curve.samples.to_string(),
            ]
        })
        .collect();
    write_table(path, &meta, &SURVIVAL_COLUMNS, &rows)
}

pub fn read_survival(path: &Path) -> Result<SurvivalCurve, HarnessError> {
    let t = Table::read(path)?;
    if !t.has_columns(&SURVIVAL_COLUMNS) {
        return Err(HarnessError::Schema(format!("{}: not a survival curve", path.display())));
    }
    let spec: EnsembleSpec = t
        .meta
        .get("spec")
        .ok_or_else(|| HarnessError::Schema(format!("{}: missing `spec` header", path.display())))
        .and_then(|s| serde_json::from_str(s).map_err(|e| HarnessError::Schema(format!("{}: spec header: {e}", path.display()))))?;
    let meta_u64 = |k: &str| t.meta.get(k).and_then(|v| v.parse::<u64>().ok()).unwrap_or(0);
    let n = t.floats("n", path)?;
    Ok(SurvivalCurve {
        taus: t.floats("tau", path)?,
        times: t.floats("t", path)?,
        mean: t.floats("p_mean", path)?,
        stderr: t.floats("p_stderr", path)?,
        samples: n.first().map(|&x| x as u64).unwrap_or(0),
        failures: meta_u64("failures"),
        spec,
        master_seed: meta_u64("seed"),
    })
}

pub fn write_theory(path: &Path, curve: &TheoryCurve, meta: Header) -> Result<(), HarnessError> {
    let rows: Vec<Vec<String>> = (0..curve.taus.len())
        .map(|i| {
            vec![
                fmt_f64(curve.taus[i]),
                fmt_f64(curve.values[i]),
                fmt_f64(curve.errors[i]),
                curve.formula.tag().to_string(),
                fmt_f64(curve.gamma),
                curve.class.label().to_string(),
            ]
        })
        .collect();
    write_table(path, &meta, &THEORY_COLUMNS, &rows)
}

pub fn read_theory(path: &Path) -> Result<TheoryCurve, HarnessError> {
    let t = Table::read(path)?;
    if !t.has_columns(&THEORY_COLUMNS) {
        return Err(HarnessError::Schema(format!("{}: not a theory curve", path.display())));
    }
    let formulas = t.strings("formula", path)?;
    let classes = t.strings("class", path)?;
    let gammas = t.floats("gamma", path)?;
    let (Some(f), Some(c), Some(&g)) = (formulas.first(), classes.first(), gammas.first()) else {
        return Err(HarnessError::Schema(format!("{}: empty theory curve", path.display())));
    };
    let formula: Formula = f
        .parse()
        .map_err(|_| HarnessError::Schema(format!("{}: unknown formula {f:?}", path.display())))?;
    let class: SymmetryClass = c
        .parse()
        .map_err(|_| HarnessError::Schema(format!("{}: unknown class {c:?}", path.display())))?;
    Ok(TheoryCurve {
        taus: t.floats("tau", path)?,
        values: t.floats("p_theory", path)?,
        errors: t.floats("quad_err", path)?,
        formula,
        gamma: g,
        class,
        failed: Vec::new(),
    })
}

/// One row of a coupling sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub g: f64,
    pub p_res_mc: f64,
    pub p_res_stderr: f64,
    pub n: u64,
    pub p_res_theory: f64,
    pub p_fgr: f64,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow], meta: Header) -> Result<(), HarnessError> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.gamma),
                fmt_f64(r.g),
                fmt_f64(r.p_res_mc),
                fmt_f64(r.p_res_stderr),
                r.n.to_string(),
                fmt_f64(r.p_res_theory),
                fmt_f64(r.p_fgr),
            ]
        })
        .collect();
    write_table(path, &meta, &SWEEP_COLUMNS, &rows)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let t = Table::read(path)?;
    let cols: Vec<Vec<f64>> = SWEEP_COLUMNS
        .iter()
        .map(|c| t.floats(c, path))
        .collect::<Result<_, _>>()?;
    Ok((0..t.rows.len())
        .map(|i| SweepRow {
            gamma: cols[0][i],
            g: cols[1][i],
            p_res_mc: cols[2][i],
            p_res_stderr: cols[3][i],
            n: cols[4][i] as u64,
            p_res_theory: cols[5][i],
            p_fgr: cols[6][i],
        })
        .collect())
}

pub fn write_residence(path: &Path, points: &[crate::theory::CrossoverPoint], meta: Header) -> Result<(), HarnessError> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                fmt_f64(p.gamma),
                fmt_f64(p.p_res),
                fmt_f64(p.p_res_integral),
                fmt_f64(p.discrepancy),
                fmt_f64(1.0 / p.gamma),
            ]
        })
        .collect();
    write_table(path, &meta, &RESIDENCE_COLUMNS, &rows)
}

/// Writes `text` to `path` through a temporary file and rename, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}
