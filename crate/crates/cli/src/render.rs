//! JSON and CSV emission.

use serde::Serialize;
use tlpq_core::circuit::{matrix_to_json, JsonMatrix};
use tlpq_core::linalg::CMatrix;

use crate::config::{Format, Resolved};
use crate::experiments::{ImagtimeRow, NonhermRow, Triple};
use crate::CliError;

pub const NONHERM_COLUMNS: [&str; 16] = [
    "T",
    "M",
    "pairs",
    "fidelity",
    "sx_tlp",
    "sx_lchs_dense",
    "sx_oracle",
    "sy_tlp",
    "sy_lchs_dense",
    "sy_oracle",
    "sz_tlp",
    "sz_lchs_dense",
    "sz_oracle",
    "R_tlp",
    "R_lchs_dense",
    "R_oracle",
];

pub const IMAGTIME_COLUMNS: [&str; 14] = [
    "gamma",
    "terms",
    "H_tlp",
    "H_lchs_dense",
    "H_oracle",
    "sx_tlp",
    "sx_lchs_dense",
    "sx_oracle",
    "sz_tlp",
    "sz_lchs_dense",
    "sz_oracle",
    "H_oracle_baseline",
    "E0_exact",
    "fidelity",
];

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::execution)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
pub struct GhzJson {
    pub experiment: String,
    pub circuits: usize,
    pub evaluations: usize,
    pub shots: Option<u64>,
    pub seed: u64,
    pub projected: bool,
    pub fidelity: f64,
    pub rho: JsonMatrix,
}

/// `i,j,re,im` per entry.
pub fn matrix_csv(m: &CMatrix) -> String {
    let mut s = String::from("i,j,re,im\n");
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m[(i, j)];
            s.push_str(&format!("{i},{j},{},{}\n", z.re, z.im));
        }
    }
    s
}

fn triple_cells(t: &Triple) -> [String; 3] {
    [t.tlp.to_string(), t.lchs_dense.to_string(), t.oracle.to_string()]
}

fn params_line(r: &Resolved) -> String {
    format!(
        "# eps={} c={} dt={} emulate_float_truncation={} normalize={} shots={} seed={}\n",
        r.eps,
        r.c,
        r.dt,
        r.emulate_float_truncation,
        r.normalize,
        r.cluster.shots.map_or("exact".to_string(), |s| s.to_string()),
        r.cluster.seed
    )
}

#[derive(Serialize)]
struct NonhermJson<'a> {
    params: &'a Resolved,
    #[serde(rename = "R")]
    r: JsonMatrix,
    rows: &'a [NonhermRow],
}

pub fn nonherm(r: &Resolved, obs_r: &CMatrix, rows: &[NonhermRow]) -> Result<String, CliError> {
    if r.format == Format::Json {
        return json(&NonhermJson { params: r, r: matrix_to_json(obs_r), rows });
    }
    let mut s = params_line(r);
    let rj = serde_json::to_string(&matrix_to_json(obs_r)).map_err(CliError::execution)?;
    s.push_str(&format!("# R={rj}\n"));
    s.push_str(&NONHERM_COLUMNS.join(","));
    s.push('\n');
    for row in rows {
        let mut cells = vec![row.t.to_string(), row.m.to_string(), row.pairs.to_string(), row.fidelity.to_string()];
        for t in [&row.sx, &row.sy, &row.sz, &row.r] {
            cells.extend(triple_cells(t));
        }
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    Ok(s)
}

#[derive(Serialize)]
struct ImagtimeJson<'a> {
    params: &'a Resolved,
    rows: &'a [ImagtimeRow],
}

pub fn imagtime(r: &Resolved, rows: &[ImagtimeRow]) -> Result<String, CliError> {
    if r.format == Format::Json {
        return json(&ImagtimeJson { params: r, rows });
    }
    let mut s = params_line(r);
    s.push_str(&format!(
        "# T={} baseline_T={}\n",
        r.t[0],
        r.baseline_t.map_or("none".to_string(), |t| t.to_string())
    ));
    s.push_str(&IMAGTIME_COLUMNS.join(","));
    s.push('\n');
    for row in rows {
        let mut cells = vec![row.gamma.to_string(), row.terms.to_string()];
        for t in [&row.h, &row.sx, &row.sz] {
            cells.extend(triple_cells(t));
        }
        cells.push(row.h_baseline.map_or(String::new(), |v| v.to_string()));
        cells.push(row.e0_exact.to_string());
        cells.push(row.fidelity.to_string());
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    Ok(s)
}
