use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;
use mixqnm::evolution::{Observables, Trajectory};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Format;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tool version, config hash and anything run-specific, never a timestamp.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub command: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(command: &str, hash: &str) -> Self {
        Provenance { tool: "mixqnm", version: VERSION, config_sha256: hash.to_string(), command: command.to_string(), notes: Vec::new() }
    }
}

/// A named-column numeric table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

const PAIRS: [&str; 4] = ["11", "12", "21", "22"];

pub fn trajectory_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["t", "phi1", "phi2", "pi1", "pi2"].iter().map(|s| s.to_string()).collect();
    for blk in ["A", "B"] {
        for p in PAIRS {
            cols.push(format!("{blk}{p}.re"));
            cols.push(format!("{blk}{p}.im"));
        }
    }
    for s in ["S0", "S1", "S2", "S3", "Ntilde1", "Ntilde2", "Avac11", "Avac22"] {
        cols.push(s.to_string());
    }
    cols
}

pub fn trajectory_table(tr: &Trajectory, obs: &Observables) -> Table {
    let mut rows = Vec::with_capacity(tr.t.len());
    for i in 0..tr.t.len() {
        let mut r = vec![tr.t[i], tr.phi[i][0], tr.phi[i][1], tr.pi[i][0], tr.pi[i][1]];
        for z in tr.a[i].iter().chain(&tr.b[i]) {
            r.push(z.re);
            r.push(z.im);
        }
        r.extend_from_slice(&obs.s[i]);
        r.extend_from_slice(&obs.ntilde[i]);
        r.push(tr.a_vac[i][0].re);
        r.push(tr.a_vac[i][3].re);
        rows.push(r);
    }
    Table { columns: trajectory_columns(), rows }
}

/// Shortest representation that round-trips.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn render_csv(table: &Table, prov: &Provenance) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} {}", prov.tool, prov.version);
    let _ = writeln!(s, "# command: {}", prov.command);
    let _ = writeln!(s, "# config-sha256: {}", prov.config_sha256);
    for n in &prov.notes {
        let _ = writeln!(s, "# {n}");
    }
    s.push_str(&table.columns.join(","));
    s.push('\n');
    for r in &table.rows {
        let line: Vec<String> = r.iter().map(|x| num(*x)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// JSON has no infinities: non-finite values become strings.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(num(x))
    }
}

pub fn jc(z: Complex64) -> Value {
    json!([jnum(z.re), jnum(z.im)])
}

pub fn table_json(table: &Table) -> Value {
    json!({
        "columns": table.columns,
        "rows": table.rows.iter().map(|r| r.iter().map(|x| jnum(*x)).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

pub fn render_json(data: Value, prov: &Provenance) -> String {
    let doc = json!({ "provenance": prov, "data": data });
    let mut s = serde_json::to_string_pretty(&doc).expect("serialisable");
    s.push('\n');
    s
}

pub fn render_table(table: &Table, prov: &Provenance, format: Format) -> String {
    match format {
        Format::Csv => render_csv(table, prov),
        Format::Json => render_json(table_json(table), prov),
    }
}

/// Writes to `path`, or stdout when absent.
pub fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing stdout")?;
            out.flush().context("flushing stdout")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_list() {
        let cols = trajectory_columns();
        assert_eq!(cols.len(), 5 + 16 + 8);
        assert_eq!(&cols[..6], &["t", "phi1", "phi2", "pi1", "pi2", "A11.re"]);
        assert_eq!(cols[20], "B22.im");
        assert_eq!(cols.last().unwrap(), "Avac22");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e10] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
