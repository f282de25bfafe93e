//! Nonnegative steering of a window subproblem.
//!
//! The control is expanded in a tensor basis over `window × (t0, t1)`:
//! spatial hat functions on an interior lattice (kept a margin of cells
//! away from the window edges) times piecewise-constant time slabs. Each
//! basis response is a forward solve of the zero-data window subproblem
//! with homogeneous Dirichlet edges; the coefficients solve
//! `min ‖A c - target‖²  s.t.  c ≥ 0` by projected gradient with
//! Barzilai-Borwein steps.

use super::SynthesisConfig;
use crate::control::{ControlSchedule, ControlStage, StagePayload, Window};
use crate::error::{Error, Result};
use crate::field::{Field, FieldTable};
use crate::grid::SpatialGrid;
use crate::law::{DiffusionLaw, FrozenLaw};
use crate::solver::{solve_on_grid, BoundaryTraces, SolverConfig};
use crate::state::State;

/// Dense row-major matrix, just big enough for the control-to-state maps.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            out[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn tr_matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let xr = x[r];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xr;
            }
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Result of a nonnegative least-squares solve.
#[derive(Debug, Clone)]
pub struct NnlsOutcome {
    pub coefficients: Vec<f64>,
    /// Euclidean residual `‖A c - b‖₂` (unweighted).
    pub residual: f64,
    pub iterations: usize,
}

/// Projected gradient with Barzilai-Borwein steps for
/// `min ‖A c - b‖²  s.t.  c ≥ 0`. Keeps the best iterate seen.
pub fn nnls_projected_bb(
    a: &DenseMatrix,
    b: &[f64],
    max_iters: usize,
    warm: Option<&[f64]>,
) -> NnlsOutcome {
    let n = a.cols;
    let lipschitz = a.frobenius_sq().max(1e-300);
    let alpha0 = 1.0 / lipschitz;
    let mut c: Vec<f64> = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    c.iter_mut().for_each(|v| *v = v.max(0.0));

    let mut ax = vec![0.0; a.rows];
    let mut grad = vec![0.0; n];
    let mut grad_new = vec![0.0; n];
    let residual_of = |ax: &[f64]| -> f64 {
        ax.iter()
            .zip(b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    };

    a.matvec(&c, &mut ax);
    let mut res: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    a.tr_matvec(&res, &mut grad);
    let mut best_c = c.clone();
    let mut best_res = residual_of(&ax);
    let mut alpha = alpha0;
    let mut iterations = 0;

    for k in 0..max_iters {
        iterations = k + 1;
        let c_new: Vec<f64> = c
            .iter()
            .zip(&grad)
            .map(|(ci, gi)| (ci - alpha * gi).max(0.0))
            .collect();
        let step_sq: f64 = c_new
            .iter()
            .zip(&c)
            .map(|(p, q)| (p - q) * (p - q))
            .sum();
        if step_sq <= 1e-28 * (1.0 + c.iter().map(|v| v * v).sum::<f64>()) {
            break;
        }
        a.matvec(&c_new, &mut ax);
        let r_now = residual_of(&ax);
        if r_now < best_res {
            best_res = r_now;
            best_c.copy_from_slice(&c_new);
        }
        res.iter_mut()
            .zip(ax.iter().zip(b))
            .for_each(|(r, (p, q))| *r = p - q);
        a.tr_matvec(&res, &mut grad_new);

        // BB1 step from the last displacement
        let mut sy = 0.0;
        for i in 0..n {
            sy += (c_new[i] - c[i]) * (grad_new[i] - grad[i]);
        }
        alpha = if sy > 1e-300 {
            (step_sq / sy).clamp(alpha0 * 1e-6, alpha0 * 1e12)
        } else {
            alpha0
        };
        c = c_new;
        std::mem::swap(&mut grad, &mut grad_new);
    }

    // least-squares polish on the identified support: the projected
    // gradient finds the active set quickly but creeps on the free part,
    // so solve the free part exactly (dropping entries that go negative)
    let cmax = best_c.iter().cloned().fold(0.0_f64, f64::max);
    if cmax > 0.0 {
        let mut support: Vec<usize> = (0..n).filter(|&i| best_c[i] > 1e-12 * cmax).collect();
        for _ in 0..6 {
            if support.is_empty() {
                break;
            }
            let Some(x) = solve_lsq_mgs(a, b, &support) else { break };
            if let Some(worst) = x
                .iter()
                .enumerate()
                .filter(|(_, v)| **v < 0.0)
                .min_by(|p, q| p.1.partial_cmp(q.1).unwrap())
                .map(|(i, _)| i)
            {
                support.remove(worst);
                continue;
            }
            let mut candidate = vec![0.0; n];
            for (p, &i) in support.iter().enumerate() {
                candidate[i] = x[p];
            }
            a.matvec(&candidate, &mut ax);
            let r = residual_of(&ax);
            if r < best_res {
                best_res = r;
                best_c = candidate;
            }
            break;
        }
    }
    NnlsOutcome { coefficients: best_c, residual: best_res, iterations }
}

/// Solve `min ‖A_S x - b‖` on the column subset `S` by thin QR
/// (Gram-Schmidt with reorthogonalization). The basis responses are smooth
/// and nearly collinear, so columns that fall into the span of earlier
/// ones are dropped (their coefficient is 0); `None` only if nothing
/// independent remains.
fn solve_lsq_mgs(a: &DenseMatrix, b: &[f64], support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let m = a.rows;
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    // r[qi] holds row qi of R over the kept columns, indexed by kept order
    let mut r_rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut kept: Vec<usize> = Vec::with_capacity(k);
    let mut max_col_norm = 0.0_f64;
    for (p, &j) in support.iter().enumerate() {
        let mut v: Vec<f64> = (0..m).map(|row| a.at(row, j)).collect();
        let orig = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        max_col_norm = max_col_norm.max(orig);
        let mut proj = vec![0.0; q.len()];
        for _ in 0..2 {
            for (qi, qv) in q.iter().enumerate() {
                let d: f64 = v.iter().zip(qv).map(|(x, y)| x * y).sum();
                proj[qi] += d;
                for (vi, yi) in v.iter_mut().zip(qv) {
                    *vi -= d * yi;
                }
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv <= 1e-12 * max_col_norm.max(1e-300) {
            continue; // dependent column: coefficient stays 0
        }
        for (qi, d) in proj.iter().enumerate() {
            r_rows[qi].push(*d);
        }
        r_rows.push(vec![nv]);
        q.push(v.iter().map(|x| x / nv).collect());
        kept.push(p);
    }
    if kept.is_empty() {
        return None;
    }
    let kk = kept.len();
    // back substitution: R x = Qᵀ b (r_rows[i] starts at column i)
    let mut rhs: Vec<f64> = q
        .iter()
        .map(|qv| qv.iter().zip(b).map(|(x, y)| x * y).sum())
        .collect();
    for row in (0..kk).rev() {
        for c in row + 1..kk {
            rhs[row] -= r_rows[row][c - row] * rhs[c];
        }
        rhs[row] /= r_rows[row][0];
    }
    let mut x = vec![0.0; k];
    for (pos, &p) in kept.iter().enumerate() {
        x[p] = rhs[pos];
    }
    Some(x)
}

/// The tensor basis on a window and its assembled control-to-state map.
#[derive(Debug)]
pub struct WindowBasis {
    pub window: Window,
    pub subgrid: SpatialGrid,
    pub span: (f64, f64),
    /// Time-slab edges, `basis_nt + 1` of them.
    pub slab_edges: Vec<f64>,
    /// Hat-center node indices into the subgrid.
    pub centers: Vec<usize>,
    /// `tents[k][i]`: spatial hat `k` sampled at subgrid node `i`.
    pub tents: Vec<Vec<f64>>,
    /// Response matrix: rows = subgrid nodes, cols = (slab, hat) pairs.
    pub matrix: DenseMatrix,
}

/// Subgrid resolution matched to the full grid's spacing.
pub fn subgrid_for_window(grid: &SpatialGrid, window: Window) -> Result<SpatialGrid> {
    let n_sub = ((window.l / grid.h).round() as usize).saturating_sub(1).max(8);
    SpatialGrid::on_interval(window.r, window.end(), n_sub)
}

impl WindowBasis {
    /// Assemble the basis responses by forward subproblem solves.
    pub fn build(
        grid: &SpatialGrid,
        window: Window,
        span: (f64, f64),
        law: &FrozenLaw,
        scfg: &SynthesisConfig,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        let (t0, t1) = span;
        if !(t1 > t0) {
            return Err(Error::invalid("window basis needs a positive horizon"));
        }
        let subgrid = subgrid_for_window(grid, window)?;
        let n_sub = subgrid.n;
        let margin = scfg.margin_cells.max(2);
        if n_sub <= 2 * margin + 4 {
            return Err(Error::invalid("window too narrow for the basis margin"));
        }
        // hat centers on an interior lattice, margin cells clear of edges
        let lo = margin + 1;
        let hi = n_sub - margin - 2;
        let nx = scfg.basis_nx.max(2).min(hi - lo + 1);
        let mut centers = Vec::with_capacity(nx);
        for k in 0..nx {
            let c = lo + k * (hi - lo) / (nx - 1).max(1);
            if centers.last() != Some(&c) {
                centers.push(c);
            }
        }
        let spacing = ((hi - lo) as f64 / (nx - 1).max(1) as f64).max(1.0);
        let mut tents = Vec::with_capacity(centers.len());
        for &c in &centers {
            let mut tent = vec![0.0; n_sub];
            for (i, v) in tent.iter_mut().enumerate() {
                let d = (i as f64 - c as f64).abs() / spacing;
                if d < 1.0 {
                    *v = 1.0 - d;
                }
            }
            tents.push(tent);
        }
        // time slabs geometrically refined toward t1: late injections are
        // barely smoothed by the flow, which is what lets a nonnegative
        // control reproduce sharp target features
        let nt = scfg.basis_nt.max(1);
        let mut slab_edges: Vec<f64> = Vec::with_capacity(nt + 1);
        slab_edges.push(t0);
        for q in 1..nt {
            slab_edges.push(t1 - (t1 - t0) * 0.5_f64.powi(q as i32));
        }
        slab_edges.push(t1);

        let dlaw = DiffusionLaw::Frozen(law.clone());
        let cols = centers.len() * nt;
        let mut matrix = DenseMatrix::zeros(n_sub, cols);
        let zero_state = State::zeros(n_sub, t0);
        for q in 0..nt {
            for (k, tent) in tents.iter().enumerate() {
                let col = q * centers.len() + k;
                let table = FieldTable::new(
                    vec![slab_edges[q], slab_edges[q + 1]],
                    subgrid.nodes(),
                    (window.r, window.end()),
                    vec![tent.clone()],
                )?;
                let mut stages = Vec::new();
                if slab_edges[q] > t0 + 1e-14 {
                    stages.push(ControlStage::new(t0, slab_edges[q], window, StagePayload::Idle)?);
                }
                stages.push(ControlStage::new(
                    slab_edges[q],
                    slab_edges[q + 1],
                    window,
                    StagePayload::FieldAdditive { v: Field::table(table) },
                )?);
                if slab_edges[q + 1] < t1 - 1e-14 {
                    stages.push(ControlStage::new(slab_edges[q + 1], t1, window, StagePayload::Idle)?);
                }
                let schedule = ControlSchedule::new(stages)?;
                let traj = solve_on_grid(
                    &subgrid,
                    &zero_state,
                    span,
                    &dlaw,
                    &schedule,
                    &BoundaryTraces::zero(),
                    cfg,
                )?;
                for (i, v) in traj.final_state().values.iter().enumerate() {
                    matrix.set(i, col, *v);
                }
            }
        }
        Ok(WindowBasis {
            window,
            subgrid,
            span,
            slab_edges,
            centers,
            tents,
            matrix,
        })
    }

    /// NNLS solve against a subgrid target; `warm` restarts from previous
    /// coefficients.
    pub fn solve(
        &self,
        target_sub: &[f64],
        warm: Option<&[f64]>,
        max_iters: usize,
    ) -> Result<NnlsOutcome> {
        if target_sub.len() != self.subgrid.n {
            return Err(Error::invalid("target length must match the subgrid"));
        }
        Ok(nnls_projected_bb(&self.matrix, target_sub, max_iters, warm))
    }

    /// Assemble the control field `v = Σ c_{q,k}·tent_k(x)·χ_slab_q(t)`.
    pub fn field(&self, coefficients: &[f64]) -> Result<Field> {
        let nt = self.slab_edges.len() - 1;
        let nk = self.centers.len();
        if coefficients.len() != nt * nk {
            return Err(Error::invalid("coefficient count must match the basis"));
        }
        let mut values = Vec::with_capacity(nt);
        for q in 0..nt {
            let mut row = vec![0.0; self.subgrid.n];
            for (k, tent) in self.tents.iter().enumerate() {
                let c = coefficients[q * nk + k];
                if c == 0.0 {
                    continue;
                }
                for (i, t) in tent.iter().enumerate() {
                    row[i] += c * t;
                }
            }
            values.push(row);
        }
        let table = FieldTable::new(
            self.slab_edges.clone(),
            self.subgrid.nodes(),
            (self.window.r, self.window.end()),
            values,
        )?;
        Ok(Field::table(table))
    }

    /// Residual in the subgrid L² norm for the report.
    pub fn l2_residual(&self, euclidean: f64) -> f64 {
        self.subgrid.h.sqrt() * euclidean
    }
}

/// Outcome of the constructive nonnegative steering of one window piece.
#[derive(Debug, Clone)]
pub struct AdditiveControlOutcome {
    pub field: Field,
    pub coefficients: Vec<f64>,
    /// Subproblem residual in the L² norm of the window.
    pub residual: f64,
    pub iterations: usize,
}

/// Steer the zero-data window subproblem to `y_target_piece` (given on the
/// full grid, supported strictly inside the window) with a nonnegative
/// space-time control over `horizon`.
pub fn nonneg_additive_control(
    grid: &SpatialGrid,
    window: Window,
    y_target_piece: &State,
    horizon: (f64, f64),
    law: &FrozenLaw,
    scfg: &SynthesisConfig,
    cfg: &SolverConfig,
) -> Result<AdditiveControlOutcome> {
    let basis = WindowBasis::build(grid, window, horizon, law, scfg, cfg)?;
    let target_sub: Vec<f64> = (0..basis.subgrid.n)
        .map(|i| y_target_piece.sample_at(grid, basis.subgrid.x(i), (0.0, 0.0)))
        .collect();
    let outcome = basis.solve(&target_sub, None, scfg.nnls_max_iters)?;
    let field = basis.field(&outcome.coefficients)?;
    Ok(AdditiveControlOutcome {
        field,
        coefficients: outcome.coefficients,
        residual: basis.l2_residual(outcome.residual),
        iterations: outcome.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn toy_matrix() -> (DenseMatrix, Vec<f64>) {
        // 6x4 well-conditioned nonnegative-ish system
        let rows = 6;
        let cols = 4;
        let mut a = DenseMatrix::zeros(rows, cols);
        let vals = [
            [1.0, 0.2, 0.0, 0.1],
            [0.3, 1.1, 0.2, 0.0],
            [0.0, 0.4, 0.9, 0.3],
            [0.2, 0.0, 0.5, 1.2],
            [0.1, 0.3, 0.2, 0.4],
            [0.5, 0.1, 0.0, 0.2],
        ];
        for r in 0..rows {
            for c in 0..cols {
                a.set(r, c, vals[r][c]);
            }
        }
        let c_true = vec![0.7, 0.0, 1.3, 0.4];
        let mut b = vec![0.0; rows];
        a.matvec(&c_true, &mut b);
        (a, b)
    }

    #[test]
    fn nnls_recovers_a_feasible_solution() {
        let (a, b) = toy_matrix();
        let out = nnls_projected_bb(&a, &b, 5000, None);
        assert!(out.residual < 1e-8, "residual = {:.3e}", out.residual);
        assert!(out.coefficients.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn nnls_zero_target_returns_zero() {
        let (a, _) = toy_matrix();
        let b = vec![0.0; 6];
        let out = nnls_projected_bb(&a, &b, 100, None);
        assert_eq!(out.residual, 0.0);
        assert!(out.coefficients.iter().all(|&c| c == 0.0));
    }

    /// Exhaustive active-set oracle: minimize over every support subset by
    /// solving the normal equations on the subset, keeping feasible
    /// candidates. The NNLS optimum's active set appears among them, so the
    /// smallest feasible residual equals the true optimum.
    fn brute_force_nnls(a: &DenseMatrix, b: &[f64]) -> f64 {
        let n = a.cols;
        let mut best = {
            // empty support: c = 0
            b.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        for mask in 1u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let k = support.len();
            // normal equations on the support
            let mut gram = vec![0.0; k * k];
            let mut rhs = vec![0.0; k];
            for (p, &i) in support.iter().enumerate() {
                for (q, &j) in support.iter().enumerate() {
                    let mut acc = 0.0;
                    for r in 0..a.rows {
                        acc += a.at(r, i) * a.at(r, j);
                    }
                    gram[p * k + q] = acc;
                }
                let mut acc = 0.0;
                for r in 0..a.rows {
                    acc += a.at(r, i) * b[r];
                }
                rhs[p] = acc;
            }
            // Gaussian elimination with partial pivoting
            let mut ok = true;
            for col in 0..k {
                let mut piv = col;
                for r in col + 1..k {
                    if gram[r * k + col].abs() > gram[piv * k + col].abs() {
                        piv = r;
                    }
                }
                if gram[piv * k + col].abs() < 1e-12 {
                    ok = false;
                    break;
                }
                if piv != col {
                    for c in 0..k {
                        gram.swap(col * k + c, piv * k + c);
                    }
                    rhs.swap(col, piv);
                }
                for r in col + 1..k {
                    let f = gram[r * k + col] / gram[col * k + col];
                    for c in col..k {
                        gram[r * k + c] -= f * gram[col * k + c];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
            if !ok {
                continue;
            }
            let mut x = vec![0.0; k];
            for row in (0..k).rev() {
                let mut acc = rhs[row];
                for c in row + 1..k {
                    acc -= gram[row * k + c] * x[c];
                }
                x[row] = acc / gram[row * k + row];
            }
            if x.iter().any(|&v| v < -1e-12) {
                continue;
            }
            let mut full = vec![0.0; n];
            for (p, &i) in support.iter().enumerate() {
                full[i] = x[p].max(0.0);
            }
            let mut ax = vec![0.0; a.rows];
            a.matvec(&full, &mut ax);
            let r = ax
                .iter()
                .zip(b)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            best = best.min(r);
        }
        best
    }

    #[test]
    fn projected_gradient_matches_the_enumeration_oracle() {
        // 10-basis instance with a target whose negative-looking part is
        // unreachable: residual equals the omitted orthogonal energy.
        let rows = 12;
        let cols = 10;
        let mut a = DenseMatrix::zeros(rows, cols);
        // deterministic pseudo-random entries (xorshift)
        let mut s = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for r in 0..rows {
            for c in 0..cols {
                a.set(r, c, next());
            }
        }
        let c_star: Vec<f64> = (0..cols).map(|i| if i % 3 == 0 { 1.0 + i as f64 * 0.1 } else { 0.0 }).collect();
        let mut reachable = vec![0.0; rows];
        a.matvec(&c_star, &mut reachable);

        // z: a vector orthogonal to the column space of A (project against
        // an orthonormal basis built by modified Gram-Schmidt)
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for c in 0..cols {
            let mut col: Vec<f64> = (0..rows).map(|r| a.at(r, c)).collect();
            for _ in 0..2 {
                for q in &basis {
                    let dot: f64 = col.iter().zip(q).map(|(p, s)| p * s).sum();
                    for (ci, qi) in col.iter_mut().zip(q) {
                        *ci -= dot * qi;
                    }
                }
            }
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-10 {
                basis.push(col.iter().map(|v| v / norm).collect());
            }
        }
        let mut z: Vec<f64> = (0..rows).map(|_| next() - 0.3).collect();
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = z.iter().zip(q).map(|(p, s)| p * s).sum();
                for (zi, qi) in z.iter_mut().zip(q) {
                    *zi -= dot * qi;
                }
            }
        }
        let z_norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let b: Vec<f64> = reachable.iter().zip(&z).map(|(p, q)| p - q).collect();

        let pg = nnls_projected_bb(&a, &b, 20000, None);
        let oracle = brute_force_nnls(&a, &b);
        assert!(
            (pg.residual - oracle).abs() <= 1e-6 * (1.0 + oracle),
            "pg = {:.9e}, oracle = {:.9e}",
            pg.residual,
            oracle
        );
        // removed energy shows up as the residual floor
        assert!(
            (oracle - z_norm).abs() <= 1e-6 * (1.0 + z_norm),
            "oracle = {oracle:.9e}, omitted = {z_norm:.9e}"
        );
    }

    #[test]
    fn single_basis_forward_inverse_round_trip() {
        let grid = build_grid(100).unwrap();
        let law = FrozenLaw::constant(1.0).unwrap();
        let mut scfg = SynthesisConfig::default();
        scfg.basis_nx = 6;
        scfg.basis_nt = 3;
        let cfg = SolverConfig::with_dt(5e-4).unwrap();
        let window = Window::new(0.25, 0.5).unwrap();
        let basis = WindowBasis::build(&grid, window, (0.0, 0.05), &law, &scfg, &cfg).unwrap();
        // target = A c* for a known nonnegative c*
        let cols = basis.matrix.cols;
        let c_star: Vec<f64> = (0..cols).map(|i| 0.2 + 0.05 * (i % 4) as f64).collect();
        let mut target = vec![0.0; basis.subgrid.n];
        basis.matrix.matvec(&c_star, &mut target);
        let target_norm = basis.subgrid.l2_norm(&target);
        let out = basis.solve(&target, None, 20000).unwrap();
        let rel = basis.l2_residual(out.residual) / target_norm;
        assert!(rel <= 1e-6, "relative residual = {rel:.3e}");
    }

    #[test]
    fn zero_piece_yields_zero_control() {
        let grid = build_grid(100).unwrap();
        let law = FrozenLaw::constant(1.0).unwrap();
        let scfg = SynthesisConfig::default();
        let cfg = SolverConfig::with_dt(1e-3).unwrap();
        let window = Window::new(0.0, 0.5).unwrap();
        let out = nonneg_additive_control(
            &grid,
            window,
            &State::zeros(grid.n, 0.0),
            (0.0, 0.1),
            &law,
            &scfg,
            &cfg,
        )
        .unwrap();
        assert_eq!(out.residual, 0.0);
        assert!(out.coefficients.iter().all(|&c| c == 0.0));
    }
}
