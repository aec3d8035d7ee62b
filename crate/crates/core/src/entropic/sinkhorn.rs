use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

use super::grid::PointCloud;

/// Kernel entries with exponent below `-TRUNCATION` are dropped (`e^-36 ~ 2e-16`).
const TRUNCATION: f64 = 36.0;
/// Looser truncation for the warm-start stages of a schedule.
const WARM_TRUNCATION: f64 = 24.0;
/// Scalings are absorbed into the potentials once `|ln u|` or `|ln v|` exceeds this.
const ABSORB: f64 = 5.0;
/// Largest kernel exponent stored without shifting the row .
const MAX_EXPONENT: f64 = 60.0;
/// Allowed growth (in units of eps) of dropped kernel exponents before a full rescan.
const REFRESH_MARGIN: f64 = 8.0;

/// Annealing schedule and stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOptions {
    /// Decreasing list of regularization strengths; the last one is the target.
    pub epsilons: Vec<f64>,
    /// Max marginal violation at the final stage.
    pub tol: f64,
    /// Total iteration budget across stages.
    pub max_iter: usize,
    /// Record the dual objective after every iteration.
    pub record_objective: bool,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            epsilons: vec![0.1, 0.03, 0.01, 0.003, 0.001],
            tol: 1e-8,
            max_iter: 20_000,
            record_objective: false,
        }
    }
}

impl SinkhornOptions {
    pub fn single(epsilon: f64, tol: f64, max_iter: usize) -> Self {
        Self {
            epsilons: vec![epsilon],
            tol,
            max_iter,
            record_objective: false,
        }
    }

    pub fn final_epsilon(&self) -> f64 {
        *self.epsilons.last().unwrap_or(&f64::NAN)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return domain("epsilon schedule is empty");
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return domain("epsilon must be positive");
        }
        if !(self.tol > 0.0) {
            return domain("tolerance must be positive");
        }
        if self.max_iter == 0 {
            return domain("max_iter must be positive");
        }
        Ok(())
    }
}

/// Per-stage summary of an annealed solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub epsilon: f64,
    pub iterations: usize,
    pub marginal_err: f64,
    pub rebuilds: usize,
    pub kernel_entries: usize,
}

/// Entropic plan `pi_kj = a_k b_j exp((f_k + g_j - |x_k - y_j|^2 / 2) / epsilon)`.
///
/// The potentials `f`, `g` are the log-domain scalings in cost units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCoupling {
    pub epsilon: f64,
    pub source: PointCloud,
    pub source_masses: Vec<f64>,
    pub target: PointCloud,
    pub target_masses: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub marginal_err: f64,
    pub iterations: usize,
    pub stages: Vec<StageLog>,
    /// `(stage, dual objective)` after every iteration when recorded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective: Vec<(usize, f64)>,
}

#[inline]
pub(crate) fn half_sq_dist(x: &[f64], y: &[f64]) -> f64 {
    0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

impl GridCoupling {
    /// Plan entry `pi_kj`.
    pub fn entry(&self, k: usize, j: usize) -> f64 {
        let c = half_sq_dist(self.source.point(k), self.target.point(j));
        self.source_masses[k]
            * self.target_masses[j]
            * ((self.f[k] + self.g[j] - c) / self.epsilon).exp()
    }

    /// Dense plan, refused above `cap` entries.
    pub fn dense(&self, cap: usize) -> Result<Vec<Vec<f64>>> {
        let (n, m) = (self.source.len(), self.target.len());
        if n.saturating_mul(m) > cap {
            return domain(format!("dense plan has {} entries, cap is {cap}", n * m));
        }
        Ok((0..n)
            .map(|k| (0..m).map(|j| self.entry(k, j)).collect())
            .collect())
    }

    /// Dual objective `<a, f> + <b, g> - eps <pi, 1> + eps`, computed densely.
    pub fn dual_objective(&self) -> f64 {
        let mass: f64 = (0..self.source.len())
            .into_par_iter()
            .map(|k| {
                (0..self.target.len())
                    .map(|j| self.entry(k, j))
                    .sum::<f64>()
            })
            .sum();
        dot(&self.source_masses, &self.f) + dot(&self.target_masses, &self.g) - self.epsilon * mass
            + self.epsilon
    }

    /// Writes the dense plan as CSV rows `k,j,pi`.
    pub fn write_dense_csv(&self, path: &std::path::Path, cap: usize) -> Result<()> {
        let plan = self.dense(cap)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["k", "j", "pi"])?;
        for (k, row) in plan.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                w.write_record([k.to_string(), j.to_string(), format!("{p:.17e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One stored row of the truncated Gibbs kernel `exp((f_k + g_j - c_kj) / eps)`.
#[derive(Default)]
struct KernelRow {
    cols: Vec<u32>,
    vals: Vec<f64>,
}

struct State<'a> {
    x: &'a PointCloud,
    a: &'a [f64],
    y: &'a PointCloud,
    b: &'a [f64],
    eps: f64,
    truncation: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    rows: Vec<KernelRow>,
    /// `(eps, f, g)` at the last full kernel scan.
    scanned: Option<(f64, Vec<f64>, Vec<f64>)>,
}

impl State<'_> {
    /// Folds the scalings into the potentials and rebuilds the kernel. A row
    /// whose largest exponent is far from zero (poor warm start) is shifted so
    /// that it becomes zero; the following row update recomputes `u`, so the
    /// shift is harmless.
    fn rebuild(&mut self) {
        self.absorb();
        self.scanned = Some((self.eps, self.f.clone(), self.g.clone()));
        let (x, y, eps, trunc) = (self.x, self.y, self.eps, self.truncation);
        // z_kj = (f_k - |x_k|^2/2 + g_j - |y_j|^2/2 + <x_k, y_j>) / eps
        let gs: Vec<f64> = self
            .g
            .iter()
            .zip(y.iter())
            .map(|(g, p)| (g - 0.5 * dot(p, p)) / eps)
            .collect();
        let ys: Vec<f64> = y.coords.iter().map(|c| c / eps).collect();
        let d = y.dim;
        let built: Vec<(f64, KernelRow)> = self
            .f
            .par_iter()
            .enumerate()
            .map_init(Vec::new, |z: &mut Vec<f64>, (k, &fk)| {
                let xk = x.point(k);
                let fs = (fk - 0.5 * dot(xk, xk)) / eps;
                z.clear();
                if d == 2 {
                    z.extend(
                        ys.chunks_exact(2)
                            .zip(&gs)
                            .map(|(p, g)| fs + g + xk[0] * p[0] + xk[1] * p[1]),
                    );
                } else {
                    z.extend(
                        ys.chunks_exact(d)
                            .zip(&gs)
                            .map(|(p, g)| fs + g + dot(xk, p)),
                    );
                }
                let mut zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if zmax > -0.5 * trunc && zmax < MAX_EXPONENT {
                    zmax = 0.0;
                }
                let cut = zmax - trunc;
                let n = z.iter().filter(|&&v| v > cut).count();
                let mut row = KernelRow {
                    cols: Vec::with_capacity(n),
                    vals: Vec::with_capacity(n),
                };
                for (j, &zj) in z.iter().enumerate() {
                    if zj > cut {
                        row.cols.push(j as u32);
                        row.vals.push((zj - zmax).exp());
                    }
                }
                (fk - eps * zmax, row)
            })
            .collect();
        for (k, (fk, row)) in built.into_iter().enumerate() {
            self.f[k] = fk;
            self.rows[k] = row;
        }
        if let Some((_, f, _)) = &mut self.scanned {
            f.copy_from_slice(&self.f);
        }
    }

    /// Absorbs the scalings. The kernel is recomputed on its current sparsity
    /// pattern unless the potentials have grown enough since the last full scan
    /// that a dropped entry could exceed `exp(-truncation + REFRESH_MARGIN)`.
    fn refresh(&mut self) {
        self.absorb();
        let eps = self.eps;
        let stale = match &self.scanned {
            Some((e, f0, g0)) if *e == eps => {
                let grow = |now: &[f64], then: &[f64]| {
                    now.iter()
                        .zip(then)
                        .map(|(a, b)| (a - b) / eps)
                        .fold(0.0f64, f64::max)
                };
                grow(&self.f, f0) + grow(&self.g, g0) > REFRESH_MARGIN
            }
            _ => true,
        };
        if stale {
            self.rebuild();
            return;
        }
        let (x, y, g, trunc) = (self.x, self.y, &self.g, self.truncation);
        let in_range = self
            .rows
            .par_iter_mut()
            .zip(&self.f)
            .enumerate()
            .map(|(k, (row, &fk))| {
                let xk = x.point(k);
                let mut zmax = f64::NEG_INFINITY;
                for (&j, val) in row.cols.iter().zip(row.vals.iter_mut()) {
                    let j = j as usize;
                    let z = (fk + g[j] - half_sq_dist(xk, y.point(j))) / eps;
                    zmax = zmax.max(z);
                    *val = z.exp();
                }
                zmax > -0.5 * trunc && zmax < MAX_EXPONENT
            })
            .reduce(|| true, |a, b| a && b);
        if !in_range {
            self.rebuild();
        }
    }

    fn absorb(&mut self) {
        let eps = self.eps;
        for (f, u) in self.f.iter_mut().zip(self.u.iter_mut()) {
            *f += eps * u.ln();
            *u = 1.0;
        }
        for (g, v) in self.g.iter_mut().zip(self.v.iter_mut()) {
            *g += eps * v.ln();
            *v = 1.0;
        }
    }

    fn entries(&self) -> usize {
        self.rows.iter().map(|r| r.cols.len()).sum()
    }

    /// Row sums `s_k = sum_j K_kj b_j v_j`.
    fn row_sums(&self) -> Vec<f64> {
        let bv: Vec<f64> = self.b.iter().zip(&self.v).map(|(b, v)| b * v).collect();
        self.rows
            .par_iter()
            .map(|row| {
                row.cols
                    .iter()
                    .zip(&row.vals)
                    .map(|(&j, &k)| k * bv[j as usize])
                    .sum()
            })
            .collect()
    }

    /// Column sums `t_j = sum_k K_kj a_k u_k`. Rows are split into a fixed
    /// number of blocks whose partial sums are added in order, so the result
    /// does not depend on the thread count.
    fn col_sums(&self) -> Vec<f64> {
        const BLOCKS: usize = 64;
        let m = self.y.len();
        let au: Vec<f64> = self.a.iter().zip(&self.u).map(|(a, u)| a * u).collect();
        let size = self.rows.len().div_ceil(BLOCKS).max(1);
        let partial: Vec<Vec<f64>> = self
            .rows
            .par_chunks(size)
            .enumerate()
            .map(|(b, rows)| {
                let mut acc = vec![0.0; m];
                for (i, row) in rows.iter().enumerate() {
                    let w = au[b * size + i];
                    for (&j, &kv) in row.cols.iter().zip(&row.vals) {
                        acc[j as usize] += kv * w;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; m];
        for p in partial {
            out.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        out
    }

    /// Exact log-domain updates `f_k = -eps log sum_j b_j exp((G_j - c_kj) / eps)`
    /// for the listed rows.
    fn dense_rows(&self, rows: &[usize]) -> Vec<f64> {
        let lw = self.log_weights(self.b, &self.g, &self.v);
        rows.par_iter()
            .map(|&k| dense_update(self.x.point(k), self.y, &lw, self.eps))
            .collect()
    }

    fn dense_cols(&self, cols: &[usize]) -> Vec<f64> {
        let lw = self.log_weights(self.a, &self.f, &self.u);
        cols.par_iter()
            .map(|&j| dense_update(self.y.point(j), self.x, &lw, self.eps))
            .collect()
    }

    /// `ln m_i + (h_i + eps ln s_i) / eps`.
    fn log_weights(&self, m: &[f64], h: &[f64], s: &[f64]) -> Vec<f64> {
        m.iter()
            .zip(h.iter().zip(s))
            .map(|(m, (h, s))| m.ln() + h / self.eps + s.ln())
            .collect()
    }

    /// Dual objective right after a column update, where the plan has unit mass.
    fn objective(&self) -> f64 {
        let eps = self.eps;
        let fa: f64 = self
            .a
            .iter()
            .zip(self.f.iter().zip(&self.u))
            .map(|(a, (f, u))| a * (f + eps * u.ln()))
            .sum();
        let gb: f64 = self
            .b
            .iter()
            .zip(self.g.iter().zip(&self.v))
            .map(|(b, (g, v))| b * (g + eps * v.ln()))
            .sum();
        fa + gb
    }
}

fn dense_update(p: &[f64], others: &PointCloud, log_w: &[f64], eps: f64) -> f64 {
    let z = others
        .iter()
        .zip(log_w)
        .map(|(q, lw)| lw - half_sq_dist(p, q) / eps);
    -eps * log_sum_exp(z)
}

pub(crate) fn log_sum_exp(z: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = z.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn check_masses(name: &str, pts: &PointCloud, m: &[f64]) -> Result<()> {
    if pts.len() != m.len() || m.is_empty() {
        return domain(format!(
            "{name}: {} points but {} masses",
            pts.len(),
            m.len()
        ));
    }
    if m.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return domain(format!("{name}: masses must be positive"));
    }
    let total: f64 = m.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("{name}: masses sum to {total}"));
    }
    Ok(())
}

/// Log-domain Sinkhorn between weighted point clouds for the cost
/// `|x - y|^2 / 2`, annealed over `opts.epsilons` with warm starts.
///
/// Iterations use a truncated Gibbs kernel relative to the current potentials
/// (absorption stabilization); rows or columns whose kernel sum vanishes fall
/// back to an exact log-sum-exp update.
pub fn solve_transport(
    x: &PointCloud,
    a: &[f64],
    y: &PointCloud,
    b: &[f64],
    opts: &SinkhornOptions,
) -> Result<GridCoupling> {
    opts.validate()?;
    if x.dim != y.dim {
        return domain(format!("source is {}-d, target is {}-d", x.dim, y.dim));
    }
    check_masses("source", x, a)?;
    check_masses("target", y, b)?;
    let (n, m) = (x.len(), y.len());
    if m > u32::MAX as usize {
        return domain("target too large");
    }
    let mut st = State {
        x,
        a,
        y,
        b,
        eps: opts.epsilons[0],
        truncation: TRUNCATION,
        f: vec![0.0; n],
        g: vec![0.0; m],
        u: vec![1.0; n],
        v: vec![1.0; m],
        rows: (0..n).map(|_| KernelRow::default()).collect(),
        scanned: None,
    };
    let mut stages = Vec::new();
    let mut objective = Vec::new();
    let mut total_iter = 0usize;
    let mut err = f64::INFINITY;
    let last = opts.epsilons.len() - 1;
    for (stage, &eps) in opts.epsilons.iter().enumerate() {
        st.absorb();
        st.eps = eps;
        if stage == 0 {
            // Cold start: one exact column update so every target node enters
            // the truncated kernel.
            let all: Vec<usize> = (0..m).collect();
            st.g = st.dense_cols(&all);
        }
        st.truncation = if stage == last {
            TRUNCATION
        } else {
            WARM_TRUNCATION
        };
        st.rebuild();
        let mut rebuilds = 1usize;
        let stage_tol = if stage == last {
            opts.tol
        } else {
            100.0 * opts.tol
        };
        let mut valid = false;
        let mut stage_iter = 0usize;
        loop {
            let s = st.row_sums();
            if valid {
                err =
                    st.a.iter()
                        .zip(st.u.iter().zip(&s))
                        .map(|(a, (u, s))| a * (u * s - 1.0).abs())
                        .fold(0.0, f64::max);
                if stage_iter.is_multiple_of(500) {
                    log::trace!(
                        "stage {stage} iteration {stage_iter} error {err:e} rebuilds {rebuilds}"
                    );
                }
                if err <= stage_tol {
                    break;
                }
            }
            if total_iter >= opts.max_iter {
                return Err(Error::Convergence {
                    iterations: total_iter,
                    residual: err,
                });
            }
            total_iter += 1;
            stage_iter += 1;
            let mut bad_rows = Vec::new();
            for (k, sk) in s.iter().enumerate() {
                if *sk > 0.0 && sk.is_finite() {
                    st.u[k] = 1.0 / sk;
                } else {
                    bad_rows.push(k);
                }
            }
            if !bad_rows.is_empty() {
                for (k, fk) in bad_rows.iter().zip(st.dense_rows(&bad_rows)) {
                    st.f[*k] = fk;
                    st.u[*k] = 1.0;
                }
            }
            let t = st.col_sums();
            let mut bad_cols = Vec::new();
            for (j, tj) in t.iter().enumerate() {
                if *tj > 0.0 && tj.is_finite() {
                    st.v[j] = 1.0 / tj;
                } else {
                    bad_cols.push(j);
                }
            }
            if !bad_cols.is_empty() {
                for (j, gj) in bad_cols.iter().zip(st.dense_cols(&bad_cols)) {
                    st.g[*j] = gj;
                    st.v[*j] = 1.0;
                }
            }
            let dirty = !(bad_rows.is_empty() && bad_cols.is_empty());
            if !dirty {
                valid = true;
                if opts.record_objective {
                    objective.push((stage, st.objective()));
                }
            }
            let big = st.u.iter().chain(&st.v).any(|s| s.ln().abs() > ABSORB);
            if dirty {
                st.rebuild();
                rebuilds += 1;
                valid = false;
            } else if big {
                st.refresh();
                rebuilds += 1;
                valid = false;
            }
        }
        log::debug!(
            "sinkhorn eps={eps:e}: {stage_iter} iterations, err={err:e}, {rebuilds} rebuilds, {} kernel entries",
            st.entries()
        );
        stages.push(StageLog {
            epsilon: eps,
            iterations: stage_iter,
            marginal_err: err,
            rebuilds,
            kernel_entries: st.entries(),
        });
    }
    st.absorb();
    Ok(GridCoupling {
        epsilon: st.eps,
        source: x.clone(),
        source_masses: a.to_vec(),
        target: y.clone(),
        target_masses: b.to_vec(),
        f: st.f,
        g: st.g,
        marginal_err: err,
        iterations: total_iter,
        stages,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cloud(pts: &[[f64; 2]]) -> PointCloud {
        PointCloud {
            dim: 2,
            coords: pts.iter().flatten().copied().collect(),
        }
    }

    /// Entropic primal `<pi, c> + eps KL(pi | a b^T)` on the 2x2 polytope with
    /// uniform marginals, parametrized by `t = pi_00`.
    fn primal_2x2(c: [[f64; 2]; 2], eps: f64, t: f64) -> f64 {
        let pi = [[t, 0.5 - t], [0.5 - t, t]];
        let mut v = 0.0;
        for k in 0..2 {
            for j in 0..2 {
                let p = pi[k][j];
                v += p * c[k][j];
                if p > 0.0 {
                    v += eps * p * (p / 0.25).ln();
                }
            }
        }
        v
    }

    #[test]
    fn two_by_two_matches_brute_force() {
        let xs = [[-0.5, 0.0], [0.5, 0.0]];
        let ys = [[-1.0, 0.2], [1.0, -0.2]];
        let mut c = [[0.0; 2]; 2];
        for k in 0..2 {
            for j in 0..2 {
                c[k][j] = half_sq_dist(&xs[k], &ys[j]);
            }
        }
        for eps in [0.5, 0.1, 0.02] {
            let opts = SinkhornOptions::single(eps, 1e-13, 10_000);
            let sol =
                solve_transport(&cloud(&xs), &[0.5; 2], &cloud(&ys), &[0.5; 2], &opts).unwrap();
            // Golden-section search on the convex primal.
            let (mut lo, mut hi) = (0.0f64, 0.5f64);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..200 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if primal_2x2(c, eps, m1) < primal_2x2(c, eps, m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let t = 0.5 * (lo + hi);
            assert_abs_diff_eq!(sol.entry(0, 0), t, epsilon = 1e-9);
            assert_abs_diff_eq!(sol.entry(0, 1), 0.5 - t, epsilon = 1e-9);
            // Strong duality.
            assert_abs_diff_eq!(sol.dual_objective(), primal_2x2(c, eps, t), epsilon = 1e-9);
        }
        // Small eps: the monotone assignment x_0 -> y_0, x_1 -> y_1.
        let opts = SinkhornOptions::single(0.01, 1e-12, 10_000);
        let sol = solve_transport(&cloud(&xs), &[0.5; 2], &cloud(&ys), &[0.5; 2], &opts).unwrap();
        assert!(sol.entry(0, 0) > 0.5 - 1e-12 && sol.entry(0, 1) < 1e-12);
    }

    #[test]
    fn marginals_and_monotone_objective() {
        let g = crate::measures::builtin_density("gaussian", &serde_json::json!({})).unwrap();
        let src = super::super::grid::build_ball_grid(2, 12, 24).unwrap();
        let tgt = super::super::grid::TargetGrid::sample(&g, 300, 3).unwrap();
        let opts = SinkhornOptions {
            epsilons: vec![0.1, 0.03, 0.01],
            tol: 1e-9,
            max_iter: 50_000,
            record_objective: true,
        };
        let sol = solve_transport(&src.nodes, &src.masses, &tgt.nodes, &tgt.masses, &opts).unwrap();
        assert!(sol.marginal_err <= 1e-9);
        let plan = sol.dense(1 << 20).unwrap();
        let row_err = plan
            .iter()
            .zip(&src.masses)
            .map(|(r, a)| (r.iter().sum::<f64>() - a).abs())
            .fold(0.0, f64::max);
        let col_err = (0..tgt.len())
            .map(|j| (plan.iter().map(|r| r[j]).sum::<f64>() - tgt.masses[j]).abs())
            .fold(0.0, f64::max);
        assert!(row_err <= 1e-9 + 1e-12, "{row_err}");
        assert!(col_err <= 1e-12, "{col_err}");
        assert!(plan.iter().flatten().all(|&p| p >= 0.0));
        assert!(!sol.objective.is_empty());
        for w in sol.objective.windows(2) {
            if w[0].0 == w[1].0 {
                assert!(w[1].1 >= w[0].1 - 1e-12, "{:?}", w);
            }
        }
        assert_abs_diff_eq!(
            sol.objective.last().unwrap().1,
            sol.dual_objective(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn max_iter_exhaustion_is_a_convergence_error() {
        let src = super::super::grid::build_ball_grid(2, 6, 8).unwrap();
        let g = crate::measures::builtin_density("gaussian", &serde_json::json!({})).unwrap();
        let tgt = super::super::grid::TargetGrid::sample(&g, 50, 1).unwrap();
        let opts = SinkhornOptions::single(0.01, 1e-9, 1);
        let err =
            solve_transport(&src.nodes, &src.masses, &tgt.nodes, &tgt.masses, &opts).unwrap_err();
        assert!(
            matches!(err, Error::Convergence { iterations: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = cloud(&[[0.0, 0.0]]);
        assert!(solve_transport(
            &p,
            &[1.0],
            &p,
            &[1.0],
            &SinkhornOptions::single(-1.0, 1e-6, 10)
        )
        .is_err());
        assert!(solve_transport(&p, &[0.5], &p, &[1.0], &SinkhornOptions::default()).is_err());
    }
}
