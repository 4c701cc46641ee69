//! Adaptive sieving along an increasing grid of `C` values.
//!
//! Each grid point is solved on a guessed active set `I`. Samples outside
//! `I` with nonnegative hinge argument are added (largest first, at most
//! `d_max` per round) until none remain; the reduced solution, extended by
//! `λⱼ = −C` on violators and `0` elsewhere, is then a KKT point of the
//! full problem up to the reduced-solve accuracy.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alm::{solve_problem, AlmConfig, WarmStart};
use crate::error::{Result, SmmError};
use crate::model::{Dataset, DualPoint, Hyperparams, PrimalPoint, Problem, RawKktResiduals};
use crate::report::{final_metrics, Solution, SolveReport};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathConfig {
    /// Strictly increasing `C₁ < … < C_N`.
    pub grid: Vec<f64>,
    /// Where the initial active set comes from.
    pub initial: InitialModel,
    /// Bound on the unnormalized KKT residuals of every reduced solve.
    pub eps: f64,
    /// Margin slack `ε̂` of the carried-over active set.
    pub eps_hat: f64,
    /// Cap on samples added per sieving round.
    pub d_max: usize,
    pub tau: f64,
    /// Settings for the reduced ALM solves; `kkt_tol` is the first
    /// tolerance tried and is tightened until `eps` is met.
    pub alm: AlmConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialModel {
    /// `I⁰ = [n]` at the first grid point.
    AllSamples,
    /// A full solve at `C₀`.
    SolveAt(f64),
}

impl PathConfig {
    pub fn new(grid: Vec<f64>, tau: f64) -> Self {
        Self {
            initial: InitialModel::AllSamples,
            grid,
            eps: 1e-6,
            eps_hat: 0.05,
            d_max: 500,
            tau,
            alm: AlmConfig::with_tol(1e-7),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(SmmError::Config("path: grid is empty".into()));
        }
        if self.grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(SmmError::Config("path: grid values must be > 0".into()));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SmmError::Config(
                "path: grid must be strictly increasing".into(),
            ));
        }
        if let InitialModel::SolveAt(c0) = self.initial {
            if !(c0 > 0.0 && c0 < self.grid[0]) {
                return Err(SmmError::Config(
                    "path: C0 must satisfy 0 < C0 < C1".into(),
                ));
            }
        }
        if !(self.eps > 0.0) || !(self.eps_hat >= 0.0) || self.d_max == 0 {
            return Err(SmmError::Config(
                "path: need eps > 0, eps_hat >= 0, d_max >= 1".into(),
            ));
        }
        Hyperparams::new(self.grid[0], self.tau)?;
        self.alm.validate()
    }
}

/// Log- or linearly spaced grid of `points` values in `[c_min, c_max]`.
pub fn c_grid(c_min: f64, c_max: f64, points: usize, log_scale: bool) -> Result<Vec<f64>> {
    if !(c_min > 0.0 && c_max >= c_min) || points == 0 {
        return Err(SmmError::Config(
            "grid: need 0 < c_min <= c_max and points >= 1".into(),
        ));
    }
    if points == 1 {
        return Ok(vec![c_min]);
    }
    let m = (points - 1) as f64;
    Ok((0..points)
        .map(|k| {
            let t = k as f64 / m;
            if log_scale {
                (c_min.ln() + t * (c_max.ln() - c_min.ln())).exp()
            } else {
                c_min + t * (c_max - c_min)
            }
        })
        .collect())
}

/// `1 − yⱼ(⟨W, Xⱼ⟩ + b)` for every sample.
pub fn hinge_arguments(ds: &Dataset, w: &Matrix, b: f64) -> Result<Vector> {
    let aw = ds.apply_a(w)?;
    let y = ds.labels();
    Ok(Vector::from_iterator(
        ds.n_samples(),
        (0..ds.n_samples()).map(|j| 1.0 - aw[j] - b * y[j]),
    ))
}

/// `{j : yⱼ(⟨W, Xⱼ⟩ + b) ≤ 1 + ε̂}`, sorted.
pub fn initial_active_set(ds: &Dataset, w: &Matrix, b: f64, eps_hat: f64) -> Result<Vec<usize>> {
    let v = hinge_arguments(ds, w, b)?;
    Ok((0..ds.n_samples())
        .filter(|&j| 1.0 - v[j] <= 1.0 + eps_hat)
        .collect())
}

/// Result of one reduced solve.
#[derive(Debug, Clone)]
pub struct ReducedSolve {
    /// Sorted sample indices of the reduced problem.
    pub indices: Vec<usize>,
    /// Solution of the reduced problem (vectors indexed like `indices`).
    pub solution: Solution,
    /// Unnormalized KKT residuals of the reduced problem.
    pub raw: RawKktResiduals,
    /// Final tolerance handed to ALM.
    pub kkt_tol: f64,
    /// ALM calls needed to meet `eps`.
    pub attempts: usize,
}

const MIN_REDUCED_TOL: f64 = 1e-14;

/// Solves the problem restricted to `indices` until every unnormalized
/// KKT residual is at most `eps`.
pub fn solve_reduced(
    ds: &Dataset,
    indices: &[usize],
    hyper: &Hyperparams,
    eps: f64,
    alm: &AlmConfig,
    warm: Option<&WarmStart>,
) -> Result<ReducedSolve> {
    if indices.is_empty() {
        return Err(SmmError::Config("reduced solve needs a nonempty set".into()));
    }
    let sub = ds.subset(indices)?;
    let problem = Problem::smm(&sub, *hyper);
    let mut cfg = alm.clone();
    let mut warm = warm.cloned();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let sol = solve_problem(&problem, &cfg, warm.as_ref())?;
        let raw = problem.raw_kkt(&sol.primal, &sol.dual)?;
        if raw.max() <= eps || cfg.kkt_tol <= MIN_REDUCED_TOL {
            if raw.max() > eps {
                log::warn!(
                    "reduced solve: residual {:.3e} above eps {eps:.1e} at the minimum tolerance",
                    raw.max()
                );
            }
            return Ok(ReducedSolve {
                indices: indices.to_vec(),
                solution: sol,
                raw,
                kkt_tol: cfg.kkt_tol,
                attempts,
            });
        }
        cfg.kkt_tol = (cfg.kkt_tol * 0.1).max(MIN_REDUCED_TOL);
        warm = Some(WarmStart {
            primal: sol.primal,
            dual: sol.dual,
        });
    }
}

/// Violators outside `I`: `J = {j ∉ I : vⱼ ≥ 0}` with
/// `vⱼ = 1 − yⱼ(⟨W, Xⱼ⟩ + b)`. Returns `J` and `v` over all samples.
pub fn violation_set(
    ds: &Dataset,
    indices: &[usize],
    w: &Matrix,
    b: f64,
) -> Result<(Vec<usize>, Vector)> {
    let v = hinge_arguments(ds, w, b)?;
    let inside = membership(ds.n_samples(), indices);
    let j = (0..ds.n_samples())
        .filter(|&j| !inside[j] && v[j] >= 0.0)
        .collect();
    Ok((j, v))
}

fn membership(n: usize, indices: &[usize]) -> Vec<bool> {
    let mut inside = vec![false; n];
    for &i in indices {
        inside[i] = true;
    }
    inside
}

/// Extends a reduced solution to all samples: outside `I`, `vⱼ` is the
/// hinge argument and `λⱼ = −C` on `J`, `0` elsewhere.
pub fn extend_solution(
    ds: &Dataset,
    reduced: &ReducedSolve,
    violators: &[usize],
    hinge: &Vector,
    c: f64,
) -> (PrimalPoint, DualPoint) {
    let n = ds.n_samples();
    let mut v = hinge.clone();
    let mut lambda = Vector::zeros(n);
    for &j in violators {
        lambda[j] = -c;
    }
    let sol = &reduced.solution;
    for (k, &i) in reduced.indices.iter().enumerate() {
        v[i] = sol.primal.v[k];
        lambda[i] = sol.dual.lambda[k];
    }
    (
        PrimalPoint {
            w: sol.primal.w.clone(),
            b: sol.primal.b,
            v,
            u: sol.primal.u.clone(),
        },
        DualPoint {
            lambda,
            lambda_mat: sol.dual.lambda_mat.clone(),
        },
    )
}

/// Adds the `min(|J|, d_max)` violators with the largest `v` to `I`
/// (ties broken by smaller index). The result is sorted.
pub fn expand(indices: &[usize], violators: &[usize], v: &Vector, d_max: usize) -> Vec<usize> {
    let mut ranked = violators.to_vec();
    ranked.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    ranked.truncate(d_max.min(ranked.len()));
    let mut out: Vec<usize> = indices.iter().copied().chain(ranked).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Makes sure `I` contains both classes, adding for a missing class the
/// outside sample of that class with the largest `v`.
fn ensure_both_classes(ds: &Dataset, indices: &mut Vec<usize>, v: &Vector) {
    let y = ds.labels();
    for class in [1.0, -1.0] {
        if indices.iter().any(|&i| y[i] == class) {
            continue;
        }
        let best = (0..ds.n_samples())
            .filter(|&j| y[j] == class)
            .max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a)));
        if let Some(j) = best {
            indices.push(j);
        }
    }
    indices.sort_unstable();
    indices.dedup();
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub c: f64,
    /// Full-dimensional solution with its report.
    pub solution: Solution,
    /// `|I|` at each sieving round.
    pub active_set_sizes: Vec<usize>,
    pub sieving_rounds: usize,
    /// Unnormalized KKT residuals of the full problem at the extended tuple.
    pub full_raw_kkt: RawKktResiduals,
    /// Size of `I*(C)` passed on to the next grid point.
    pub next_active_set: usize,
    pub time_s: f64,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub points: Vec<PathPoint>,
    /// Time of the initial solve at `C₀`, if any.
    pub init_time_s: f64,
    pub total_time_s: f64,
}

/// Restriction of a full-dimensional warm start to `indices`.
fn restrict(ws: &WarmStart, indices: &[usize]) -> WarmStart {
    let pick = |x: &Vector| Vector::from_iterator(indices.len(), indices.iter().map(|&i| x[i]));
    WarmStart {
        primal: PrimalPoint {
            w: ws.primal.w.clone(),
            b: ws.primal.b,
            v: pick(&ws.primal.v),
            u: ws.primal.u.clone(),
        },
        dual: DualPoint {
            lambda: pick(&ws.dual.lambda),
            lambda_mat: ws.dual.lambda_mat.clone(),
        },
    }
}

/// Adaptive sieving over `config.grid`.
pub fn solve_path(ds: &Dataset, config: &PathConfig) -> Result<PathResult> {
    config.validate()?;
    let n = ds.n_samples();
    let start = Instant::now();

    let (mut active, mut warm) = match config.initial {
        InitialModel::AllSamples => ((0..n).collect::<Vec<_>>(), None),
        InitialModel::SolveAt(c0) => {
            let h = Hyperparams::new(c0, config.tau)?;
            let sol = solve_problem(&Problem::smm(ds, h), &config.alm, None)?;
            let set = initial_active_set(ds, &sol.primal.w, sol.primal.b, config.eps_hat)?;
            (
                set,
                Some(WarmStart {
                    primal: sol.primal,
                    dual: sol.dual,
                }),
            )
        }
    };
    let init_time_s = start.elapsed().as_secs_f64();

    let mut points = Vec::with_capacity(config.grid.len());
    for &c in &config.grid {
        let t0 = Instant::now();
        let hyper = Hyperparams::new(c, config.tau)?;
        if active.is_empty() {
            active.push(0);
        }
        let hinge0 = match &warm {
            Some(ws) => hinge_arguments(ds, &ws.primal.w, ws.primal.b)?,
            None => Vector::zeros(n),
        };
        ensure_both_classes(ds, &mut active, &hinge0);

        let mut sizes = Vec::new();
        let mut rounds = 0;
        let (primal, dual, raw_reduced) = loop {
            rounds += 1;
            if rounds > n {
                return Err(SmmError::Numerical(format!(
                    "adaptive sieving exceeded {n} rounds at C = {c}"
                )));
            }
            sizes.push(active.len());
            let local_warm = warm.as_ref().map(|ws| restrict(ws, &active));
            let red = solve_reduced(ds, &active, &hyper, config.eps, &config.alm, local_warm.as_ref())?;
            let sol = &red.solution;
            let (viol, v) = violation_set(ds, &active, &sol.primal.w, sol.primal.b)?;
            let (primal, dual) = extend_solution(ds, &red, &viol, &v, c);
            if viol.is_empty() {
                break (primal, dual, red);
            }
            log::debug!(
                "sieving C={c:.4e}: round {rounds}, |I|={}, |J|={}",
                active.len(),
                viol.len()
            );
            active = expand(&active, &viol, &v, config.d_max);
            warm = Some(WarmStart { primal, dual });
        };

        let problem = Problem::smm(ds, hyper);
        let full_raw = problem.raw_kkt(&primal, &dual)?;
        let metrics = final_metrics(&problem, &primal, &dual)?;
        let red_report = &raw_reduced.solution.report;
        let mut report = SolveReport::assemble(
            "as",
            metrics,
            full_raw.max() <= config.eps * 11.0,
            red_report.iterations,
            red_report.inner_iterations,
            red_report.cg_iterations,
            red_report.sigma_final,
            t0.elapsed().as_secs_f64(),
            Vec::new(),
            None,
        );
        report.notes.push(format!("sieving rounds {rounds}"));
        let next = initial_active_set(ds, &primal.w, primal.b, config.eps_hat)?;
        let next_len = next.len();
        active = next;
        warm = Some(WarmStart {
            primal: primal.clone(),
            dual: dual.clone(),
        });
        points.push(PathPoint {
            c,
            solution: Solution {
                primal,
                dual,
                report,
            },
            active_set_sizes: sizes,
            sieving_rounds: rounds,
            full_raw_kkt: full_raw,
            next_active_set: next_len,
            time_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(PathResult {
        points,
        init_time_s,
        total_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Full solves along the grid, each warm-started from the previous one.
pub fn solve_path_warm(ds: &Dataset, config: &PathConfig, kkt_tol: f64) -> Result<PathResult> {
    config.validate()?;
    let start = Instant::now();
    let mut alm = config.alm.clone();
    alm.kkt_tol = kkt_tol;
    let mut warm = match config.initial {
        InitialModel::AllSamples => None,
        InitialModel::SolveAt(c0) => {
            let h = Hyperparams::new(c0, config.tau)?;
            let sol = solve_problem(&Problem::smm(ds, h), &alm, None)?;
            Some(WarmStart {
                primal: sol.primal,
                dual: sol.dual,
            })
        }
    };
    let init_time_s = start.elapsed().as_secs_f64();
    let mut points = Vec::new();
    for &c in &config.grid {
        let t0 = Instant::now();
        let hyper = Hyperparams::new(c, config.tau)?;
        let problem = Problem::smm(ds, hyper);
        let sol = solve_problem(&problem, &alm, warm.as_ref())?;
        let raw = problem.raw_kkt(&sol.primal, &sol.dual)?;
        warm = Some(WarmStart {
            primal: sol.primal.clone(),
            dual: sol.dual.clone(),
        });
        points.push(PathPoint {
            c,
            solution: sol,
            active_set_sizes: vec![ds.n_samples()],
            sieving_rounds: 1,
            full_raw_kkt: raw,
            next_active_set: ds.n_samples(),
            time_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(PathResult {
        points,
        init_time_s,
        total_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_ds() -> Dataset {
        // Scalars 1..6 with labels -,-,-,+,+,+ as 1x1 samples.
        let xs: Vec<Matrix> = (1..=6)
            .map(|k| Matrix::from_element(1, 1, k as f64))
            .collect();
        Dataset::from_samples(&xs, &[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn origin_model_selects_everything() {
        let ds = line_ds();
        let set = initial_active_set(&ds, &Matrix::zeros(1, 1), 0.0, 0.0).unwrap();
        assert_eq!(set, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn active_set_monotone_in_eps_hat() {
        let ds = line_ds();
        let w = Matrix::from_element(1, 1, 1.0);
        let mut prev = 0;
        for k in 0..20 {
            let s = initial_active_set(&ds, &w, -3.5, 0.25 * k as f64).unwrap();
            assert!(s.len() >= prev);
            prev = s.len();
        }
    }

    #[test]
    fn violation_set_includes_margin_and_matches_restatement() {
        let ds = line_ds();
        // W = 1, b = -3.5: margins y(x - 3.5) = 2.5, 1.5, 0.5, 0.5, 1.5, 2.5
        let w = Matrix::from_element(1, 1, 1.0);
        let (j, v) = violation_set(&ds, &[2, 3], &w, -3.5).unwrap();
        assert!(j.is_empty());
        assert!(v[0] < 0.0);
        // b = -4: margins 3, 2, 1, 0, 1, 2 → sample 3 (outside) and 2 on/inside margin
        let (j, _) = violation_set(&ds, &[0], &w, -4.0).unwrap();
        assert_eq!(j, vec![2, 3, 4]);
        let (j2, v2) = violation_set(&ds, &[0], &w, -4.0).unwrap();
        let restated: Vec<usize> = (1..6).filter(|&k| 1.0 - v2[k] <= 1.0).collect();
        assert_eq!(j2, restated);
    }

    #[test]
    fn expand_top_d_with_ties() {
        let v = Vector::from_vec(vec![0.0, 0.5, 0.5, 0.1, 0.9, 0.5]);
        assert_eq!(expand(&[0], &[1, 2, 3, 4, 5], &v, 10), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(expand(&[0], &[1, 2, 3, 4, 5], &v, 2), vec![0, 1, 4]);
        assert_eq!(expand(&[0], &[5, 2, 1], &v, 2), vec![0, 1, 2]);
    }

    #[test]
    fn grid_shapes() {
        let g = c_grid(0.1, 10.0, 3, true).unwrap();
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert_eq!(c_grid(1.0, 2.0, 3, false).unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(c_grid(1.0, 2.0, 1, true).unwrap(), vec![1.0]);
    }

    #[test]
    fn config_rejects_unsorted_grid() {
        let cfg = PathConfig::new(vec![1.0, 0.5], 0.1);
        assert!(cfg.validate().is_err());
    }
}
