//! Self-contained dense two-phase simplex.
//!
//! Solves `min c·v  s.t.  A v {<=,=} b, v >= 0`. Small and deterministic:
//! Dantzig pricing with lowest-index tie-breaks, switching to Bland's rule
//! when the objective stalls. Sized for the master LPs of the cutting-plane
//! engine (a few hundred rows/columns), not for anything bigger.

/// Relation of one LP row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
}

/// One constraint row with sparse coefficients.
#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    /// Minimized objective, dense over the structural variables.
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { objective: f64, solution: Vec<f64> },
    Infeasible,
    Unbounded,
    PivotLimit,
}

const PIVOT_EPS: f64 = 1e-10;
const COST_EPS: f64 = 1e-9;
const STALL_LIMIT: usize = 64;
const MAX_PIVOTS: usize = 200_000;

struct Tableau {
    rows: usize,
    cols: usize, // structural + slack + artificial + rhs
    a: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>, // reduced-cost row, length cols
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.cols + c]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.cols;
        let piv = self.a[r * cols + c];
        let inv = 1.0 / piv;
        for j in 0..cols {
            self.a[r * cols + j] *= inv;
        }
        self.a[r * cols + c] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let factor = self.a[i * cols + c];
            if factor != 0.0 {
                for j in 0..cols {
                    self.a[i * cols + j] -= factor * self.a[r * cols + j];
                }
                self.a[i * cols + c] = 0.0;
            }
        }
        let factor = self.cost[c];
        if factor != 0.0 {
            for j in 0..cols {
                self.cost[j] -= factor * self.a[r * cols + j];
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Rebuilds the reduced-cost row from the original costs and the current
    /// basis, flushing the drift the incremental updates accumulate.
    fn rebuild_cost(&mut self, orig: &[f64]) {
        self.cost.copy_from_slice(orig);
        for r in 0..self.rows {
            let b = self.basis[r];
            let cb = orig[b];
            if cb != 0.0 {
                for j in 0..self.cols {
                    self.cost[j] -= cb * self.a[r * self.cols + j];
                }
                self.cost[b] = 0.0;
            }
        }
    }

    /// Minimizes over columns `0..limit`, re-verifying claimed optima
    /// against a freshly rebuilt cost row. Returns false on unboundedness,
    /// None on numerical failure.
    fn run(
        &mut self,
        limit: usize,
        pivots: &mut usize,
        bland: bool,
        orig_cost: &[f64],
    ) -> Option<bool> {
        for _repair in 0..25 {
            match self.run_inner(limit, pivots, bland)? {
                false => return Some(false),
                true => {
                    self.rebuild_cost(orig_cost);
                    let improving = (0..limit).any(|j| self.cost[j] < -COST_EPS);
                    if !improving {
                        return Some(true);
                    }
                }
            }
        }
        None
    }

    /// Minimizes the current cost row over columns `0..limit`.
    /// Returns false on unboundedness.
    fn run_inner(&mut self, limit: usize, pivots: &mut usize, mut bland: bool) -> Option<bool> {
        let mut stall = 0usize;
        let mut last_obj = self.cost[self.cols - 1];
        loop {
            // Entering column.
            let mut enter = None;
            if bland {
                for j in 0..limit {
                    if self.cost[j] < -COST_EPS {
                        enter = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = -COST_EPS;
                for j in 0..limit {
                    if self.cost[j] < best {
                        best = self.cost[j];
                        enter = Some(j);
                    }
                }
            }
            let Some(e) = enter else { return Some(true) };

            // Two-pass ratio test: find the minimal ratio, then among
            // near-ties pick the numerically largest pivot (fast mode) or
            // the smallest basis variable (Bland mode, which needs the tie
            // window to be essentially exact). Pivoting on tiny elements
            // wrecks the tableau, so near-minimal ratios with solid pivots
            // win over exact minima with degenerate ones.
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.rows {
                let coef = self.at(r, e);
                if coef > PIVOT_EPS {
                    let ratio = (self.at(r, self.cols - 1) / coef).max(0.0);
                    if ratio < best_ratio {
                        best_ratio = ratio;
                    }
                }
            }
            if best_ratio.is_infinite() {
                return Some(false);
            }
            let ratio_tol =
                if bland { 1e-12 * (1.0 + best_ratio) } else { 1e-9 * (1.0 + best_ratio) };
            let mut leave: Option<usize> = None;
            let mut best_piv = 0.0f64;
            for r in 0..self.rows {
                let coef = self.at(r, e);
                if coef > PIVOT_EPS {
                    let ratio = (self.at(r, self.cols - 1) / coef).max(0.0);
                    if ratio <= best_ratio + ratio_tol {
                        let take = if bland {
                            leave.is_none_or(|l| self.basis[r] < self.basis[l])
                        } else {
                            coef > best_piv
                        };
                        if take {
                            leave = Some(r);
                            best_piv = coef;
                        }
                    }
                }
            }
            let r = leave.expect("a minimal-ratio row exists");

            self.pivot(r, e);
            // Clamp accumulated drift: basic values live in the rhs column
            // and must stay non-negative.
            for rr in 0..self.rows {
                let v = self.a[rr * self.cols + self.cols - 1];
                if v < 0.0 && v > -1e-11 {
                    self.a[rr * self.cols + self.cols - 1] = 0.0;
                }
            }
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return None;
            }

            let obj = self.cost[self.cols - 1];
            if (last_obj - obj).abs() <= 1e-13 * (1.0 + obj.abs()) {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            } else {
                stall = 0;
            }
            last_obj = obj;
        }
    }
}

/// Checks a candidate solution against every row (relative 1e-6).
fn solution_feasible(lp: &LinearProgram, v: &[f64]) -> bool {
    for row in &lp.rows {
        let lhs: f64 = row.coeffs.iter().map(|&(i, c)| c * v[i]).sum();
        let scale = 1.0f64.max(row.rhs.abs()).max(lhs.abs());
        let ok = match row.rel {
            Rel::Eq => (lhs - row.rhs).abs() <= 1e-6 * scale,
            Rel::Le => lhs <= row.rhs + 1e-6 * scale,
        };
        if !ok {
            return false;
        }
    }
    v.iter().all(|&x| x >= -1e-7)
}

/// Solves the program. All variables are implicitly bounded below by zero.
///
/// Runs the fast Dantzig-style pass first and validates the result against
/// the rows; on any sign of numerical trouble the whole solve is repeated with
/// Bland's rule from the start, which is slower but far more robust on the
/// degenerate masters the cutting-plane loop produces.
pub fn solve(lp: &LinearProgram) -> LpOutcome {
    let fast = solve_mode(lp, false);
    match &fast {
        LpOutcome::Optimal { solution, .. } if solution_feasible(lp, solution) => fast,
        LpOutcome::Unbounded => fast,
        _ => {
            let careful = solve_mode(lp, true);
            match &careful {
                LpOutcome::Optimal { solution, .. } if solution_feasible(lp, solution) => careful,
                LpOutcome::Optimal { .. } => LpOutcome::PivotLimit,
                _ => careful,
            }
        }
    }
}

fn solve_mode(lp: &LinearProgram, bland: bool) -> LpOutcome {
    let n = lp.num_vars;
    let m = lp.rows.len();

    // Careful mode breaks degenerate ties with a deterministic Charnes-style
    // perturbation. Only inequality rows are relaxed (rhs increased), so the
    // feasible region can only grow and any reported minimum remains a valid
    // lower bound for the unperturbed program.
    let perturb = |idx: usize, row: &LpRow| -> f64 {
        if bland && row.rel == Rel::Le {
            row.rhs + (idx as f64 + 1.0) * 1e-10 * (1.0 + row.rhs.abs())
        } else {
            row.rhs
        }
    };

    // Normalize rows to non-negative rhs and count slack/artificial columns.
    // After negation every row is `a·v <= b`, `a·v >= b` or `a·v = b` with
    // b >= 0; `<=` rows start basic on their slack, others on an artificial.
    #[derive(Clone, Copy, PartialEq)]
    enum Kind {
        Le,
        Ge,
        Eq,
    }
    let mut norm: Vec<(Vec<(usize, f64)>, Kind, f64)> = Vec::with_capacity(m);
    for (ri, row) in lp.rows.iter().enumerate() {
        let mut coeffs = row.coeffs.clone();
        let mut rhs = perturb(ri, row);
        let mut kind = match row.rel {
            Rel::Le => Kind::Le,
            Rel::Eq => Kind::Eq,
        };
        if rhs < 0.0 {
            for (_, v) in coeffs.iter_mut() {
                *v = -*v;
            }
            rhs = -rhs;
            kind = match kind {
                Kind::Le => Kind::Ge,
                Kind::Ge => Kind::Le,
                Kind::Eq => Kind::Eq,
            };
        }
        norm.push((coeffs, kind, rhs));
    }

    let n_slack = norm.iter().filter(|(_, k, _)| *k != Kind::Eq).count();
    let n_art = norm.iter().filter(|(_, k, _)| *k != Kind::Le).count();
    let cols = n + n_slack + n_art + 1;

    let mut t = Tableau {
        rows: m,
        cols,
        a: vec![0.0; m * cols],
        basis: vec![0; m],
        cost: vec![0.0; cols],
    };

    let mut slack_at = n;
    let mut art_at = n + n_slack;
    let mut artificials = Vec::new();
    for (r, (coeffs, kind, rhs)) in norm.iter().enumerate() {
        for &(j, v) in coeffs {
            t.a[r * cols + j] += v;
        }
        t.a[r * cols + (cols - 1)] = *rhs;
        match kind {
            Kind::Le => {
                t.a[r * cols + slack_at] = 1.0;
                t.basis[r] = slack_at;
                slack_at += 1;
            }
            Kind::Ge => {
                t.a[r * cols + slack_at] = -1.0;
                slack_at += 1;
                t.a[r * cols + art_at] = 1.0;
                t.basis[r] = art_at;
                artificials.push(art_at);
                art_at += 1;
            }
            Kind::Eq => {
                t.a[r * cols + art_at] = 1.0;
                t.basis[r] = art_at;
                artificials.push(art_at);
                art_at += 1;
            }
        }
    }

    let mut pivots = 0usize;

    // Phase 1: minimize the sum of artificials.
    if !artificials.is_empty() {
        let mut phase1_cost = vec![0.0; cols];
        for &j in &artificials {
            phase1_cost[j] = 1.0;
        }
        t.rebuild_cost(&phase1_cost);
        match t.run(n + n_slack + n_art, &mut pivots, bland, &phase1_cost) {
            None => return LpOutcome::PivotLimit,
            Some(false) => return LpOutcome::Infeasible, // phase 1 is never unbounded
            Some(true) => {}
        }
        let phase1 = -t.cost[cols - 1];
        if phase1 > 1e-7 {
            return LpOutcome::Infeasible;
        }
        // Drive remaining artificials out of the basis where possible.
        for r in 0..m {
            if artificials.contains(&t.basis[r]) {
                let mut pivoted = false;
                for j in 0..(n + n_slack) {
                    if t.at(r, j).abs() > 1e-8 {
                        t.pivot(r, j);
                        pivoted = true;
                        break;
                    }
                }
                // A row that cannot be pivoted is redundant; its artificial
                // stays basic at value ~0, which is harmless in phase 2
                // because the column is priced out below.
                let _ = pivoted;
            }
        }
    }

    // Phase 2: the true objective.
    let mut phase2_cost = vec![0.0; cols];
    phase2_cost[..n].copy_from_slice(&lp.objective);
    t.rebuild_cost(&phase2_cost);

    match t.run(n + n_slack, &mut pivots, bland, &phase2_cost) {
        None => LpOutcome::PivotLimit,
        Some(false) => LpOutcome::Unbounded,
        Some(true) => {
            let mut v = vec![0.0; n];
            for r in 0..m {
                let b = t.basis[r];
                if b < n {
                    v[b] = t.at(r, cols - 1).max(0.0);
                }
            }
            let objective = lp.objective.iter().zip(&v).map(|(c, x)| c * x).sum();
            LpOutcome::Optimal { objective, solution: v }
        }
    }
}
