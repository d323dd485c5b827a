//! JSON state and tomogram files.
//!
//! Both formats carry `schema_version` and a `kind` of `"spin"` or `"top"`.
//! Complex numbers are `[re, im]` pairs and every float is written in its
//! shortest round-tripping decimal form, so write → read → write is
//! byte-identical.
//!
//! State entries are nested arrays: `entries[m][m']` for a spin and
//! `entries[M][k][M'][k']` for a top, each index running from `j` down to `-j`.
//! Tomogram values are flat, `(i, θ, φ, ψ)` for a spin and
//! `(i1, i2, point of u, point of u')` for a top.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::HalfInt;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quadrature::{QuadratureGrid, ThetaNode};
use crate::spin::SpinTomogram;
use crate::states::DensityMatrix;
use crate::top::{TopDensityMatrix, TopTomogram};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Spin,
    Top,
}

type Pair = [f64; 2];

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Entries {
    Spin(Vec<Vec<Pair>>),
    Top(Vec<Vec<Vec<Vec<Pair>>>>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    schema_version: u32,
    kind: Kind,
    twice_j: HalfInt,
    entries: Entries,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    /// `[θ, weight]` per Gauss–Legendre node.
    theta_nodes: Vec<[f64; 2]>,
    n_phi: usize,
    n_psi: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TomogramFile {
    schema_version: u32,
    kind: Kind,
    twice_j: HalfInt,
    grid: GridFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_uprime: Option<GridFile>,
    values: Vec<f64>,
}

/// Contents of a state file.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Spin(DensityMatrix),
    Top(TopDensityMatrix),
}

impl State {
    pub fn kind(&self) -> Kind {
        match self {
            State::Spin(_) => Kind::Spin,
            State::Top(_) => Kind::Top,
        }
    }

    pub fn twice_j(&self) -> HalfInt {
        match self {
            State::Spin(r) => r.twice_j(),
            State::Top(r) => r.twice_j(),
        }
    }

    pub fn entries(&self) -> &CMatrix {
        match self {
            State::Spin(r) => r.entries(),
            State::Top(r) => r.entries(),
        }
    }
}

/// Contents of a tomogram file.
#[derive(Clone, Debug, PartialEq)]
pub enum Tomogram {
    Spin(SpinTomogram),
    Top(TopTomogram),
}

fn format_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

fn check_j(twice_j: HalfInt) -> Result<()> {
    if twice_j.twice() < 0 {
        return Err(Error::Format(format!(
            "negative twice_j {}",
            twice_j.twice()
        )));
    }
    Ok(())
}

fn pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

fn shape_err(what: &str, n: usize) -> Error {
    Error::Format(format!("{what} must have {n} entries at every level"))
}

fn spin_matrix(rows: &[Vec<Pair>], n: usize) -> Result<CMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(shape_err("spin entries", n));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| {
        let [re, im] = rows[r][c];
        Complex64::new(re, im)
    }))
}

fn top_matrix(e: &[Vec<Vec<Vec<Pair>>>], n: usize) -> Result<CMatrix> {
    let ok = e.len() == n
        && e.iter().all(|a| {
            a.len() == n
                && a.iter()
                    .all(|b| b.len() == n && b.iter().all(|c| c.len() == n))
        });
    if !ok {
        return Err(shape_err("top entries", n));
    }
    Ok(CMatrix::from_fn(n * n, n * n, |r, c| {
        let [re, im] = e[r / n][r % n][c / n][c % n];
        Complex64::new(re, im)
    }))
}

/// Parses and validates a state file.
pub fn parse_state(text: &str) -> Result<State> {
    let file: StateFile = serde_json::from_str(text).map_err(format_err)?;
    check_version(file.schema_version)?;
    check_j(file.twice_j)?;
    let n = file.twice_j.multiplicity();
    match (file.kind, &file.entries) {
        (Kind::Spin, Entries::Spin(rows)) => Ok(State::Spin(DensityMatrix::new(
            file.twice_j,
            spin_matrix(rows, n)?,
        )?)),
        (Kind::Top, Entries::Top(e)) => Ok(State::Top(TopDensityMatrix::new(
            file.twice_j,
            top_matrix(e, n)?,
        )?)),
        (kind, _) => Err(Error::Format(format!(
            "entries nesting does not match kind {kind:?}"
        ))),
    }
}

pub fn state_to_string(state: &State) -> String {
    let j = state.twice_j();
    let n = j.multiplicity();
    let m = state.entries();
    let entries = match state {
        State::Spin(_) => Entries::Spin(
            (0..n)
                .map(|r| (0..n).map(|c| pair(m[(r, c)])).collect())
                .collect(),
        ),
        State::Top(_) => Entries::Top(
            (0..n)
                .map(|a| {
                    (0..n)
                        .map(|b| {
                            (0..n)
                                .map(|c| (0..n).map(|d| pair(m[(a * n + b, c * n + d)])).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        ),
    };
    let file = StateFile {
        schema_version: SCHEMA_VERSION,
        kind: state.kind(),
        twice_j: j,
        entries,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("state serializes");
    s.push('\n');
    s
}

pub fn read_state(path: &Path) -> Result<State> {
    parse_state(&fs::read_to_string(path)?)
}

pub fn write_state(path: &Path, state: &State) -> Result<()> {
    fs::write(path, state_to_string(state))?;
    Ok(())
}

fn grid_file(grid: &QuadratureGrid) -> GridFile {
    GridFile {
        theta_nodes: grid
            .theta_nodes()
            .iter()
            .map(|n| [n.theta, n.weight])
            .collect(),
        n_phi: grid.n_phi(),
        n_psi: grid.n_psi(),
    }
}

fn grid_from_file(g: &GridFile) -> Result<QuadratureGrid> {
    let nodes = g
        .theta_nodes
        .iter()
        .map(|&[theta, weight]| ThetaNode { theta, weight })
        .collect();
    QuadratureGrid::from_parts(nodes, g.n_phi, g.n_psi)
}

/// Parses a tomogram file; values are checked for range and normalization.
pub fn parse_tomogram(text: &str) -> Result<Tomogram> {
    let file: TomogramFile = serde_json::from_str(text).map_err(format_err)?;
    check_version(file.schema_version)?;
    check_j(file.twice_j)?;
    let grid = grid_from_file(&file.grid)?;
    match (file.kind, file.grid_uprime) {
        (Kind::Spin, None) => Ok(Tomogram::Spin(SpinTomogram::new(
            file.twice_j,
            grid,
            file.values,
        )?)),
        (Kind::Top, Some(gp)) => Ok(Tomogram::Top(TopTomogram::new(
            file.twice_j,
            grid,
            grid_from_file(&gp)?,
            file.values,
        )?)),
        (Kind::Spin, Some(_)) => Err(Error::Format("spin tomogram with a second grid".into())),
        (Kind::Top, None) => Err(Error::Format("top tomogram without grid_uprime".into())),
    }
}

pub fn tomogram_to_string(tomogram: &Tomogram) -> String {
    let file = match tomogram {
        Tomogram::Spin(t) => TomogramFile {
            schema_version: SCHEMA_VERSION,
            kind: Kind::Spin,
            twice_j: t.twice_j(),
            grid: grid_file(t.grid()),
            grid_uprime: None,
            values: t.values().to_vec(),
        },
        Tomogram::Top(t) => TomogramFile {
            schema_version: SCHEMA_VERSION,
            kind: Kind::Top,
            twice_j: t.twice_j(),
            grid: grid_file(t.grid_u()),
            grid_uprime: Some(grid_file(t.grid_uprime())),
            values: t.values().to_vec(),
        },
    };
    let mut s = serde_json::to_string_pretty(&file).expect("tomogram serializes");
    s.push('\n');
    s
}

pub fn read_tomogram(path: &Path) -> Result<Tomogram> {
    parse_tomogram(&fs::read_to_string(path)?)
}

pub fn write_tomogram(path: &Path, tomogram: &Tomogram) -> Result<()> {
    fs::write(path, tomogram_to_string(tomogram))?;
    Ok(())
}
