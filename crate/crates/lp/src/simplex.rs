//! Bounded primal revised simplex.
//!
//! Every row `i` gets a logical variable `y_i = a_i x` whose bounds encode the
//! row sense, so the working system is `[A | -I] (x, y) = 0` with simple
//! bounds on all columns. The initial basis is the all-logical one. Phase I
//! minimizes the sum of bound violations of the basic variables with costs
//! recomputed every iteration; Phase II minimizes the true objective.
//!
//! Pricing is Dantzig's rule with a Harris two-pass ratio test. When the
//! objective stalls for `stall_window` consecutive degenerate pivots the
//! solver switches to Bland's rule until a nondegenerate step is taken.
//!
//! The basis inverse is kept as a sparse LU factorization plus an eta file,
//! refactorized every `refactor_interval` updates.

use crate::error::LpError;
use crate::lu::LuFactor;
use crate::program::{LinearProgram, Sense};
use crate::solution::{Basis, LpSolution, LpStatus, VarStatus};

/// Primal feasibility tolerance used by the solver and its post-checks.
pub const FEAS_TOL: f64 = 1e-7;
/// Optimality tolerance for strong-duality and complementary-slackness checks.
pub const OPT_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub feas_tol: f64,
    /// Reduced-cost tolerance used for pricing.
    pub dual_tol: f64,
    pub pivot_tol: f64,
    pub max_iterations: usize,
    pub refactor_interval: usize,
    pub stall_window: usize,
    pub scaling: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: 500_000,
            refactor_interval: 100,
            stall_window: 50,
            scaling: true,
        }
    }
}

struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

enum Pricing {
    Optimal,
    Enter { var: usize, dir: f64, d: f64 },
}

enum Ratio {
    Unbounded,
    Flip(f64),
    Pivot {
        pos: usize,
        theta: f64,
        to_upper: bool,
    },
}

struct Simplex<'o> {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    lu: LuFactor,
    etas: Vec<Eta>,
    opts: &'o SolverOptions,
    tol_feas: f64,
    iterations: usize,
    // workspaces
    w_rows: Vec<f64>,
    w_pos: Vec<f64>,
    pi: Vec<f64>,
    alpha: Vec<f64>,
}

const NOT_BASIC: usize = usize::MAX;

impl<'o> Simplex<'o> {
    fn column(&self, k: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        if k < self.n {
            for e in self.col_start[k]..self.col_start[k + 1] {
                out.push((self.col_row[e], self.col_val[e]));
            }
        } else {
            out.push((k - self.n, -1.0));
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let mut attempts = 0;
        loop {
            let mut cols = Vec::with_capacity(self.m);
            let mut buf = Vec::new();
            for &k in &self.basis {
                self.column(k, &mut buf);
                cols.push(buf.clone());
            }
            match LuFactor::factorize(self.m, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    self.etas.clear();
                    return Ok(());
                }
                Err(singular) => {
                    attempts += 1;
                    if attempts > 3 {
                        return Err(LpError::Numerical(format!(
                            "basis remains singular after {attempts} repairs ({} deficient columns)",
                            singular.cols.len()
                        )));
                    }
                    // Swap deficient columns for the logicals of unpivoted rows.
                    for (&p, &row) in singular.cols.iter().zip(&singular.rows) {
                        let out = self.basis[p];
                        let logical = self.n + row;
                        self.pos_of[out] = NOT_BASIC;
                        self.status[out] = self.nonbasic_status_near(out, self.x[out]);
                        self.x[out] = self.nonbasic_value(out);
                        self.basis[p] = logical;
                        self.pos_of[logical] = p;
                        self.status[logical] = VarStatus::Basic;
                    }
                }
            }
        }
    }

    fn nonbasic_status_near(&self, k: usize, value: f64) -> VarStatus {
        let (l, u) = (self.lb[k], self.ub[k]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if (value - l).abs() <= (u - value).abs() {
                    VarStatus::AtLower
                } else {
                    VarStatus::AtUpper
                }
            }
            (true, false) => VarStatus::AtLower,
            (false, true) => VarStatus::AtUpper,
            (false, false) => VarStatus::Free,
        }
    }

    fn nonbasic_value(&self, k: usize) -> f64 {
        match self.status[k] {
            VarStatus::AtLower => self.lb[k],
            VarStatus::AtUpper => self.ub[k],
            VarStatus::Free => 0.0,
            VarStatus::Basic => self.x[k],
        }
    }

    fn ftran(&mut self, rhs_rows: &mut [f64], out: &mut [f64]) {
        self.lu.ftran(rhs_rows, out);
        for eta in &self.etas {
            let xr = out[eta.pos] / eta.pivot;
            out[eta.pos] = xr;
            if xr != 0.0 {
                for &(i, a) in &eta.entries {
                    out[i] -= a * xr;
                }
            }
        }
    }

    fn btran(&mut self, c_pos: &mut [f64], out_rows: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut acc = c_pos[eta.pos];
            for &(i, a) in &eta.entries {
                acc -= a * c_pos[i];
            }
            c_pos[eta.pos] = acc / eta.pivot;
        }
        self.lu.btran(c_pos, out_rows);
    }

    fn compute_basic_values(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for k in 0..self.n + self.m {
            if self.status[k] == VarStatus::Basic {
                continue;
            }
            let v = self.x[k];
            if v == 0.0 {
                continue;
            }
            if k < self.n {
                for e in self.col_start[k]..self.col_start[k + 1] {
                    rhs[self.col_row[e]] -= self.col_val[e] * v;
                }
            } else {
                rhs[k - self.n] += v;
            }
        }
        let mut xb = vec![0.0; self.m];
        self.ftran(&mut rhs, &mut xb);
        for (p, &k) in self.basis.iter().enumerate() {
            self.x[k] = xb[p];
        }
    }

    fn max_basic_violation(&self) -> f64 {
        self.basis
            .iter()
            .map(|&k| {
                (self.lb[k] - self.x[k])
                    .max(self.x[k] - self.ub[k])
                    .max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Sum of basic bound violations beyond the feasibility tolerance.
    fn infeasibility(&self) -> f64 {
        let tol = self.tol_feas;
        self.basis
            .iter()
            .map(|&k| {
                let v = self.x[k];
                if v < self.lb[k] - tol {
                    self.lb[k] - v
                } else if v > self.ub[k] + tol {
                    v - self.ub[k]
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn compute_duals(&mut self, phase1: bool) {
        let tol = self.tol_feas;
        let mut cb = std::mem::take(&mut self.w_pos);
        cb.clear();
        cb.resize(self.m, 0.0);
        for (p, &k) in self.basis.iter().enumerate() {
            cb[p] = if phase1 {
                let v = self.x[k];
                if v < self.lb[k] - tol {
                    -1.0
                } else if v > self.ub[k] + tol {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.cost[k]
            };
        }
        let mut pi = std::mem::take(&mut self.pi);
        pi.clear();
        pi.resize(self.m, 0.0);
        self.btran(&mut cb, &mut pi);
        self.pi = pi;
        self.w_pos = cb;
    }

    fn reduced_cost(&self, k: usize, phase1: bool) -> f64 {
        if k < self.n {
            let mut d = if phase1 { 0.0 } else { self.cost[k] };
            for e in self.col_start[k]..self.col_start[k + 1] {
                d -= self.pi[self.col_row[e]] * self.col_val[e];
            }
            d
        } else {
            self.pi[k - self.n]
        }
    }

    fn price(&self, phase1: bool, bland: bool) -> Pricing {
        let tol = self.opts.dual_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut best_score = 0.0;
        for k in 0..self.n + self.m {
            let st = self.status[k];
            if st == VarStatus::Basic || self.lb[k] == self.ub[k] {
                continue;
            }
            let d = self.reduced_cost(k, phase1);
            let dir = match st {
                VarStatus::AtLower if d < -tol => 1.0,
                VarStatus::AtUpper if d > tol => -1.0,
                VarStatus::Free if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Pricing::Enter { var: k, dir, d };
            }
            let score = d.abs();
            if score > best_score {
                best_score = score;
                best = Some((k, dir, d));
            }
        }
        match best {
            Some((var, dir, d)) => Pricing::Enter { var, dir, d },
            None => Pricing::Optimal,
        }
    }

    fn ratio_test(&self, q: usize, dir: f64, phase1: bool, bland: bool) -> Ratio {
        let tol = self.tol_feas;
        let piv_tol = self.opts.pivot_tol;
        let range = self.ub[q] - self.lb[q];

        // Target bound per basic row: (exact distance, relaxed distance, |rate|, to_upper)
        let mut theta_max = f64::INFINITY;
        let candidate = |p: usize| -> Option<(f64, f64, f64, bool)> {
            let a = self.alpha[p];
            if a.abs() <= piv_tol {
                return None;
            }
            let k = self.basis[p];
            let v = self.x[k];
            let rate = -dir * a;
            if rate < 0.0 {
                let target = if phase1 && v > self.ub[k] + tol {
                    self.ub[k]
                } else if v < self.lb[k] - tol {
                    return None;
                } else {
                    self.lb[k]
                };
                if !target.is_finite() {
                    return None;
                }
                let dist = v - target;
                Some((
                    dist.max(0.0),
                    dist + tol,
                    -rate,
                    target == self.ub[k] && target != self.lb[k],
                ))
            } else {
                let target = if phase1 && v < self.lb[k] - tol {
                    self.lb[k]
                } else if v > self.ub[k] + tol {
                    return None;
                } else {
                    self.ub[k]
                };
                if !target.is_finite() {
                    return None;
                }
                let dist = target - v;
                Some((dist.max(0.0), dist + tol, rate, target == self.ub[k]))
            }
        };

        if bland {
            let mut best: Option<(f64, usize, usize, bool)> = None;
            for p in 0..self.m {
                if let Some((dist, _, rate, up)) = candidate(p) {
                    let t = dist / rate;
                    let k = self.basis[p];
                    let better = match best {
                        None => true,
                        Some((bt, bk, _, _)) => {
                            t < bt - 1e-12 || ((t - bt).abs() <= 1e-12 && k < bk)
                        }
                    };
                    if better {
                        best = Some((t, k, p, up));
                    }
                }
            }
            return match best {
                Some((t, _, p, up)) if !(range.is_finite() && range <= t) => Ratio::Pivot {
                    pos: p,
                    theta: t,
                    to_upper: up,
                },
                _ if range.is_finite() => Ratio::Flip(range),
                _ => Ratio::Unbounded,
            };
        }

        for p in 0..self.m {
            if let Some((_, relaxed, rate, _)) = candidate(p) {
                theta_max = theta_max.min(relaxed / rate);
            }
        }
        if range.is_finite() && range <= theta_max {
            return Ratio::Flip(range);
        }
        if theta_max == f64::INFINITY {
            return Ratio::Unbounded;
        }
        let mut best: Option<(f64, usize, f64, bool)> = None;
        for p in 0..self.m {
            if let Some((dist, _, rate, up)) = candidate(p) {
                let t = dist / rate;
                if t <= theta_max {
                    let mag = self.alpha[p].abs();
                    if best.is_none_or(|(bm, _, _, _)| mag > bm) {
                        best = Some((mag, p, t, up));
                    }
                }
            }
        }
        match best {
            Some((_, p, t, up)) => Ratio::Pivot {
                pos: p,
                theta: t,
                to_upper: up,
            },
            None => Ratio::Unbounded,
        }
    }

    fn load_column_alpha(&mut self, q: usize) {
        let mut rhs = std::mem::take(&mut self.w_rows);
        rhs.clear();
        rhs.resize(self.m, 0.0);
        if q < self.n {
            for e in self.col_start[q]..self.col_start[q + 1] {
                rhs[self.col_row[e]] = self.col_val[e];
            }
        } else {
            rhs[q - self.n] = -1.0;
        }
        let mut alpha = std::mem::take(&mut self.alpha);
        alpha.clear();
        alpha.resize(self.m, 0.0);
        self.ftran(&mut rhs, &mut alpha);
        self.alpha = alpha;
        self.w_rows = rhs;
    }

    fn run(&mut self) -> Result<(LpStatus, Option<Vec<f64>>), LpError> {
        self.refactor()?;
        self.compute_basic_values();
        let mut fresh = true;
        let mut degenerate_run = 0usize;
        let mut bland = false;

        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(LpError::IterationLimit(self.opts.max_iterations));
            }
            let infeas = self.infeasibility();
            let phase1 = infeas > 0.0;
            self.compute_duals(phase1);
            let (q, dir, d) = match self.price(phase1, bland) {
                Pricing::Enter { var, dir, d } => (var, dir, d),
                Pricing::Optimal => {
                    if !fresh {
                        self.refactor()?;
                        self.compute_basic_values();
                        fresh = true;
                        continue;
                    }
                    if phase1 && self.tol_feas < FEAS_TOL && self.max_basic_violation() <= FEAS_TOL
                    {
                        // Residual violations are within the reporting tolerance.
                        self.tol_feas = FEAS_TOL;
                        continue;
                    }
                    return Ok((
                        if phase1 {
                            LpStatus::Infeasible
                        } else {
                            LpStatus::Optimal
                        },
                        None,
                    ));
                }
            };

            self.load_column_alpha(q);
            let ratio = self.ratio_test(q, dir, phase1, bland);
            self.iterations += 1;
            fresh = false;

            let theta = match ratio {
                Ratio::Unbounded => {
                    if phase1 {
                        return Err(LpError::Numerical(
                            "phase I direction without blocking variable".into(),
                        ));
                    }
                    let mut ray = vec![0.0; self.n];
                    if q < self.n {
                        ray[q] = dir;
                    }
                    for (p, &k) in self.basis.iter().enumerate() {
                        if k < self.n {
                            ray[k] = -dir * self.alpha[p];
                        }
                    }
                    return Ok((LpStatus::Unbounded, Some(ray)));
                }
                Ratio::Flip(range) => {
                    self.apply_step(q, dir, range);
                    self.status[q] = if dir > 0.0 {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.x[q] = self.nonbasic_value(q);
                    range
                }
                Ratio::Pivot {
                    pos,
                    theta,
                    to_upper,
                } => {
                    self.apply_step(q, dir, theta);
                    let leaving = self.basis[pos];
                    self.status[leaving] = if self.lb[leaving] == self.ub[leaving] {
                        VarStatus::AtLower
                    } else if to_upper {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.x[leaving] = self.nonbasic_value(leaving);
                    self.pos_of[leaving] = NOT_BASIC;
                    self.basis[pos] = q;
                    self.pos_of[q] = pos;
                    self.status[q] = VarStatus::Basic;

                    let pivot = self.alpha[pos];
                    let entries: Vec<(usize, f64)> = self
                        .alpha
                        .iter()
                        .enumerate()
                        .filter(|&(i, &a)| i != pos && a != 0.0)
                        .map(|(i, &a)| (i, a))
                        .collect();
                    self.etas.push(Eta {
                        pos,
                        pivot,
                        entries,
                    });
                    if self.etas.len() >= self.opts.refactor_interval {
                        self.refactor()?;
                        self.compute_basic_values();
                    }
                    theta
                }
            };

            if theta * d.abs() <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > self.opts.stall_window {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    fn apply_step(&mut self, q: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for p in 0..self.m {
            let a = self.alpha[p];
            if a != 0.0 {
                let k = self.basis[p];
                self.x[k] -= dir * theta * a;
            }
        }
    }
}

fn power_of_two(v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        1.0
    } else {
        2f64.powi(v.log2().round() as i32)
    }
}

/// Geometric row/column scaling factors, rounded to powers of two.
fn scaling_factors(m: usize, n: usize, rows: &[Vec<(usize, f64)>]) -> (Vec<f64>, Vec<f64>) {
    let mut r = vec![1.0; m];
    let mut c = vec![1.0; n];
    for _ in 0..6 {
        for (i, row) in rows.iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &(j, a) in row {
                let v = (a * c[j]).abs();
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > 0.0 {
                r[i] = power_of_two(1.0 / (lo * hi).sqrt());
            }
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                let v = (a * r[i]).abs();
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        for j in 0..n {
            if hi[j] > 0.0 {
                c[j] = power_of_two(1.0 / (lo[j] * hi[j]).sqrt());
            }
        }
    }
    (r, c)
}

pub(crate) fn solve(
    program: &LinearProgram,
    options: &SolverOptions,
    warm: Option<&Basis>,
) -> Result<LpSolution, LpError> {
    let n = program.num_variables();
    let all_rows = program.constraints();

    // Empty rows are checked directly and kept out of the working system.
    let mut kept: Vec<usize> = Vec::with_capacity(all_rows.len());
    let mut empty_infeasible = false;
    for (i, c) in all_rows.iter().enumerate() {
        if c.terms.iter().all(|&(_, a)| a == 0.0) {
            let ok = match c.sense {
                Sense::Le => 0.0 <= c.rhs + options.feas_tol,
                Sense::Ge => 0.0 >= c.rhs - options.feas_tol,
                Sense::Eq => c.rhs.abs() <= options.feas_tol,
            };
            empty_infeasible |= !ok;
        } else {
            kept.push(i);
        }
    }
    let m = kept.len();

    let rows: Vec<Vec<(usize, f64)>> = kept
        .iter()
        .map(|&i| {
            all_rows[i]
                .terms
                .iter()
                .filter(|&&(_, a)| a != 0.0)
                .map(|&(v, a)| (v.0, a))
                .collect()
        })
        .collect();
    let (rs, cs) = if options.scaling {
        scaling_factors(m, n, &rows)
    } else {
        (vec![1.0; m], vec![1.0; n])
    };

    // Column-major scaled matrix.
    let mut counts = vec![0usize; n + 1];
    for row in &rows {
        for &(j, _) in row {
            counts[j + 1] += 1;
        }
    }
    for j in 0..n {
        counts[j + 1] += counts[j];
    }
    let col_start = counts.clone();
    let mut fill = counts;
    let nnz = col_start[n];
    let mut col_row = vec![0usize; nnz];
    let mut col_val = vec![0.0f64; nnz];
    for (i, row) in rows.iter().enumerate() {
        for &(j, a) in row {
            let e = fill[j];
            col_row[e] = i;
            col_val[e] = a * rs[i] * cs[j];
            fill[j] += 1;
        }
    }

    let mut lb = Vec::with_capacity(n + m);
    let mut ub = Vec::with_capacity(n + m);
    let mut cost = Vec::with_capacity(n + m);
    for (j, v) in program.variables().iter().enumerate() {
        lb.push(v.lower / cs[j]);
        ub.push(v.upper / cs[j]);
        cost.push(program.objective()[j] * cs[j]);
    }
    for (k, &i) in kept.iter().enumerate() {
        let c = &all_rows[i];
        let b = c.rhs * rs[k];
        let (l, u) = match c.sense {
            Sense::Le => (f64::NEG_INFINITY, b),
            Sense::Ge => (b, f64::INFINITY),
            Sense::Eq => (b, b),
        };
        lb.push(l);
        ub.push(u);
        cost.push(0.0);
    }

    let mut s = Simplex {
        m,
        n,
        col_start,
        col_row,
        col_val,
        lb,
        ub,
        cost,
        x: vec![0.0; n + m],
        status: vec![VarStatus::AtLower; n + m],
        basis: Vec::with_capacity(m),
        pos_of: vec![NOT_BASIC; n + m],
        lu: LuFactor::default(),
        etas: Vec::new(),
        opts: options,
        tol_feas: options.feas_tol,
        iterations: 0,
        w_rows: Vec::new(),
        w_pos: Vec::new(),
        pi: vec![0.0; m],
        alpha: vec![0.0; m],
    };

    // Warm statuses restricted to structurals and the kept rows' logicals.
    let warm_statuses: Option<Vec<VarStatus>> = warm
        .filter(|b| b.statuses.len() == n + all_rows.len())
        .map(|b| {
            let mut v = b.statuses[..n].to_vec();
            v.extend(kept.iter().map(|&i| b.statuses[n + i]));
            v
        })
        .filter(|v| v.iter().filter(|&&st| st == VarStatus::Basic).count() == m);
    if let Some(ws) = warm_statuses {
        for k in 0..n + m {
            let st = ws[k];
            s.status[k] = match st {
                VarStatus::Basic => VarStatus::Basic,
                _ => {
                    // Re-derive a valid nonbasic position under the current bounds.
                    let (l, u) = (s.lb[k], s.ub[k]);
                    match st {
                        VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
                        VarStatus::AtLower if l.is_finite() => VarStatus::AtLower,
                        _ => s.nonbasic_status_near(k, 0.0),
                    }
                }
            };
            if s.status[k] == VarStatus::Basic {
                s.pos_of[k] = s.basis.len();
                s.basis.push(k);
            }
        }
    } else {
        for k in 0..n {
            s.status[k] = if s.lb[k].is_finite() {
                VarStatus::AtLower
            } else if s.ub[k].is_finite() {
                VarStatus::AtUpper
            } else {
                VarStatus::Free
            };
        }
        for i in 0..m {
            s.status[n + i] = VarStatus::Basic;
            s.pos_of[n + i] = i;
            s.basis.push(n + i);
        }
    }
    for k in 0..n + m {
        if s.status[k] != VarStatus::Basic {
            s.x[k] = s.nonbasic_value(k);
        }
    }

    let (mut status, ray) = s.run()?;
    if empty_infeasible {
        status = LpStatus::Infeasible;
    }

    // Unscale.
    let primal: Vec<f64> = (0..n).map(|j| s.x[j] * cs[j]).collect();
    let mut duals = vec![0.0; all_rows.len()];
    let mut reduced_costs = vec![0.0; n];
    if status == LpStatus::Optimal {
        s.compute_duals(false);
        for (k, &i) in kept.iter().enumerate() {
            duals[i] = s.pi[k] * rs[k];
        }
        for j in 0..n {
            if s.status[j] != VarStatus::Basic {
                reduced_costs[j] = s.reduced_cost(j, false) / cs[j];
            }
        }
    }
    let ray = ray.map(|r| r.iter().zip(&cs).map(|(v, c)| v * c).collect());

    // Logicals of empty rows are reported basic so the basis size matches
    // the row count of the program.
    let mut statuses: Vec<VarStatus> = s.status[..n].to_vec();
    statuses.resize(n + all_rows.len(), VarStatus::Basic);
    for (k, &i) in kept.iter().enumerate() {
        statuses[n + i] = s.status[n + k];
    }
    let basis = Some(Basis { statuses });

    let objective = if status == LpStatus::Optimal {
        program.evaluate_objective(&primal)
    } else {
        f64::NAN
    };
    Ok(LpSolution {
        status,
        objective,
        primal,
        duals,
        reduced_costs,
        ray,
        iterations: s.iterations,
        basis,
    })
}
