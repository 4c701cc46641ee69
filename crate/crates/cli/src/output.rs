//! JSON report pieces.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use smm_core::{DualPoint, Matrix, PrimalPoint};

use crate::{Failure, THREADS_ENV};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Environment {
    /// Threads used by the solvers.
    pub threads: usize,
    /// Value of the thread-count variable, if set.
    pub threads_requested: Option<usize>,
    pub seed: Option<u64>,
    pub version: String,
}

impl Environment {
    pub fn current(seed: Option<u64>) -> Result<Self, Failure> {
        let requested = match std::env::var(THREADS_ENV) {
            Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| {
                Failure::usage(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))
            })?),
            Err(_) => None,
        };
        if requested.is_some_and(|t| t > 1) {
            log::info!("solvers are single-threaded; {THREADS_ENV} is recorded only");
        }
        Ok(Self {
            threads: 1,
            threads_requested: requested,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Full primal-dual point; matrices are lists of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDump {
    pub w: Vec<Vec<f64>>,
    pub b: f64,
    pub v: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub lambda_mat: Vec<Vec<f64>>,
}

impl SolutionDump {
    pub fn new(primal: &PrimalPoint, dual: &DualPoint) -> Self {
        Self {
            w: rows(&primal.w),
            b: primal.b,
            v: primal.v.iter().copied().collect(),
            u: rows(&primal.u),
            lambda: dual.lambda.iter().copied().collect(),
            lambda_mat: rows(&dual.lambda_mat),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let f = File::create(path)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

/// A number, or a file with a number or a JSON report carrying
/// `primal_objective` (top level or under `report`).
pub fn parse_reference(arg: &str) -> Result<f64, Failure> {
    if let Ok(x) = arg.trim().parse::<f64>() {
        return finite(x);
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| Failure::io(format!("cannot read reference {arg}: {e}")))?;
    if let Ok(x) = text.trim().parse::<f64>() {
        return finite(x);
    }
    let json: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::io(format!("reference {arg}: not a number or JSON: {e}")))?;
    json.get("primal_objective")
        .or_else(|| json.get("report").and_then(|r| r.get("primal_objective")))
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| Failure::io(format!("reference {arg}: no primal_objective field")))
        .and_then(finite)
}

fn finite(x: f64) -> Result<f64, Failure> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Failure::usage("reference objective must be finite"))
    }
}
