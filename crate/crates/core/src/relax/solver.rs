//! Cutting-plane engine for both relaxations and the round-or-cut loop.
//!
//! The master problem is a linear program over `(x, z)`: the clustering
//! polytope rows plus supporting hyperplanes of the convex cost constraints
//! accumulated at previous iterates. Each iteration solves the master,
//! evaluates the true constraint values at the LP optimum and either stops
//! (violation below tolerance) or adds the violated supports.
//!
//! `round_or_cut` wraps the p ≤ q solve: the exponential cluster-family
//! constraints are only instantiated when the reduction's Voronoi partition
//! exposes a violated one.

use super::simplex::{self, LinearProgram, LpOutcome, LpRow, Rel};
use super::{
    constraint_values, make_cut, ConstraintKind, ConstraintPool, Cut, FractionalSolution, Regime,
};
use crate::error::Error;
use crate::instance::{ClusterFamily, Instance};
use crate::reduction::{build_reduction, ReducedInstance};
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-6, max_iters: 5000 }
    }
}

/// How many consecutive iterations of relative objective change below tol
/// trigger the stall stop.
const STALL_STOP: usize = 5;
/// Cut cull thresholds: prune stale cuts only when the pool is large.
const CUT_SOFT_CAP: usize = 900;
const CUT_KEEP: usize = 700;

fn polytope_rows(inst: &Instance) -> Vec<LpRow> {
    let m = inst.m();
    let idx = |j: usize, l: usize| j * m + l;
    let mut rows = Vec::new();
    for j in 0..m {
        rows.push(LpRow {
            coeffs: (0..m).map(|l| (idx(j, l), 1.0)).collect(),
            rel: Rel::Eq,
            rhs: 1.0,
        });
    }
    for j in 0..m {
        for l in 0..m {
            if j != l {
                rows.push(LpRow {
                    coeffs: vec![(idx(j, l), 1.0), (idx(l, l), -1.0)],
                    rel: Rel::Le,
                    rhs: 0.0,
                });
            }
        }
    }
    rows.push(LpRow {
        coeffs: (0..m).map(|l| (idx(l, l), 1.0)).collect(),
        rel: Rel::Le,
        rhs: inst.k() as f64,
    });
    for l in 0..m {
        rows.push(LpRow { coeffs: vec![(idx(l, l), 1.0)], rel: Rel::Le, rhs: 1.0 });
    }
    rows
}

fn cut_row(m: usize, n_x: usize, cut: &Cut) -> LpRow {
    // z_g ≥ rhs + Σ c·x  ⇔  Σ c·x - z_g ≤ -rhs, scaled to unit magnitude.
    let _ = m;
    let scale = cut
        .coeffs
        .iter()
        .map(|&(_, c)| c.abs())
        .fold(cut.rhs.abs().max(1.0), f64::max);
    let mut coeffs: Vec<(usize, f64)> =
        cut.coeffs.iter().map(|&(i, c)| (i, c / scale)).collect();
    coeffs.push((n_x + cut.group, -1.0 / scale));
    LpRow { coeffs, rel: Rel::Le, rhs: -cut.rhs / scale }
}

/// Kelley loop shared by both regimes. `pool.families` is consulted only in
/// the p ≤ q regime; `pool.cuts` is used and extended in both.
fn kelley(
    inst: &Instance,
    regime: Regime,
    pool: &mut ConstraintPool,
    opts: &SolverOptions,
) -> Result<FractionalSolution> {
    let m = inst.m();
    let n = inst.n();
    let n_x = m * m;
    let num_vars = n_x + n;
    let mut objective = vec![0.0; num_vars];
    for i in 0..n {
        objective[n_x + i] = 1.0;
    }
    let base = polytope_rows(inst);

    let mut best_lower = 0.0f64;
    let mut prev_obj = f64::NAN;
    let mut stall = 0usize;
    let mut best_gap = f64::INFINITY;
    let mut best_sol: Option<FractionalSolution> = None;

    for _iter in 0..opts.max_iters {
        let mut rows = base.clone();
        rows.extend(pool.cuts.iter().map(|c| cut_row(m, n_x, c)));
        let lp = LinearProgram { num_vars, objective: objective.clone(), rows: rows.clone() };
        let (obj, v1) = match simplex::solve(&lp) {
            LpOutcome::Optimal { objective, solution } => (objective, solution),
            LpOutcome::Infeasible | LpOutcome::Unbounded => return Err(Error::Infeasible),
            LpOutcome::PivotLimit => {
                return Err(Error::IterationLimit { cap: opts.max_iters })
            }
        };
        best_lower = best_lower.max(obj);

        // Second stage: among (near-)optimal master solutions pick the most
        // balanced one, minimizing the largest per-point closing mass
        // 1 - x_{jj}. This makes the returned vertex deterministic in a
        // useful way (ties otherwise depend on pivot order) and keeps the
        // iterates inside the region where the reduction behaves smoothly.
        let v = {
            let mut rows2 = rows;
            rows2.push(LpRow {
                coeffs: (0..n).map(|i| (n_x + i, 1.0)).collect(),
                rel: Rel::Le,
                rhs: obj + 1e-7 * obj.abs().max(1.0),
            });
            let u = num_vars;
            for j in 0..m {
                rows2.push(LpRow {
                    coeffs: vec![(j * m + j, -1.0), (u, -1.0)],
                    rel: Rel::Le,
                    rhs: -1.0,
                });
            }
            let mut obj2 = vec![0.0; num_vars + 1];
            obj2[u] = 1.0;
            let lp2 = LinearProgram { num_vars: num_vars + 1, objective: obj2, rows: rows2 };
            match simplex::solve(&lp2) {
                LpOutcome::Optimal { solution, .. } => solution[..num_vars].to_vec(),
                _ => v1,
            }
        };
        let x = &v[..n_x];
        let y: Vec<f64> = (0..m).map(|j| v[j * m + j]).collect();

        // Evaluate every constraint at the LP optimum; collect violations.
        let mut true_z = vec![0.0f64; n];
        let mut violated = Vec::new();
        for i in 0..n {
            let z_lp = v[n_x + i];
            for (source, value) in constraint_values(inst, regime, pool, x, &y, i) {
                true_z[i] = true_z[i].max(value);
                if value - z_lp > opts.tol * value.abs().max(1.0) {
                    violated.push((i, source));
                }
            }
        }

        // Age out cuts that have been slack for a long time.
        for cut in pool.cuts.iter_mut() {
            let lhs: f64 = cut.coeffs.iter().map(|&(i, c)| c * v[i]).sum::<f64>();
            let z_lp = v[n_x + cut.group];
            let slack = z_lp - (cut.rhs + lhs);
            if slack > 1e-7 * z_lp.abs().max(1.0) {
                cut.stale += 1;
            } else {
                cut.stale = 0;
            }
        }
        if pool.cuts.len() > CUT_SOFT_CAP {
            let mut order: Vec<usize> = (0..pool.cuts.len()).collect();
            order.sort_by_key(|&i| std::cmp::Reverse(pool.cuts[i].stale));
            let drop: std::collections::BTreeSet<usize> =
                order.into_iter().take(pool.cuts.len() - CUT_KEEP).collect();
            let mut kept = Vec::with_capacity(CUT_KEEP);
            for (i, c) in pool.cuts.drain(..).enumerate() {
                if !drop.contains(&i) || c.stale == 0 {
                    kept.push(c);
                }
            }
            pool.cuts = kept;
        }

        let b_lower_now = best_lower.max(0.0).powf(1.0 / inst.q());
        let make_solution = |true_z: Vec<f64>| {
            let b = true_z.iter().sum::<f64>().max(0.0).powf(1.0 / inst.q());
            FractionalSolution {
                regime,
                x: x.to_vec(),
                y: y.clone(),
                z: true_z,
                b,
                b_lower: b_lower_now,
                tol: opts.tol,
            }
        };

        let candidate = make_solution(true_z);
        let gap = candidate.b - candidate.b_lower;

        if violated.is_empty() || gap <= opts.tol * candidate.b.abs().max(1.0) {
            // Feasible at the LP optimum, or the feasible value matches the
            // LP lower bound: optimal within tolerance either way.
            return Ok(candidate);
        }
        if gap < best_gap {
            if gap < best_gap - 1e-3 * best_gap.min(1.0) {
                stall = 0; // real progress on the gap
            }
            best_gap = gap;
            best_sol = Some(candidate.clone());
        }

        // Stall stop: neither the LP objective nor the gap is moving.
        if !prev_obj.is_nan() && (obj - prev_obj).abs() <= opts.tol * obj.abs().max(1.0) {
            stall += 1;
            if stall >= STALL_STOP {
                let mut out = best_sol.unwrap_or(candidate);
                out.b_lower = out.b_lower.max(b_lower_now);
                return Ok(out);
            }
        } else {
            stall = 0;
        }
        prev_obj = obj;

        let mut added = 0;
        for (i, source) in violated {
            if let Some(cut) = make_cut(inst, pool, &source, x, &y, i) {
                pool.cuts.push(cut);
                added += 1;
            }
        }
        if added == 0 {
            // Violated constraints produced only vacuous supports; nothing
            // further can be learned at this iterate.
            return Ok(candidate);
        }
    }
    Err(Error::IterationLimit { cap: opts.max_iters })
}

/// Solves the p ≥ q relaxation.
pub fn solve_pgeq(inst: &Instance, opts: &SolverOptions) -> Result<FractionalSolution> {
    if inst.p() < inst.q() {
        return Err(Error::RegimeMismatch { expected: Regime::PGeQ, actual: Regime::PLeQ });
    }
    let mut pool = ConstraintPool::new();
    kelley(inst, Regime::PGeQ, &mut pool, opts)
}

/// Solves the p ≤ q relaxation subject to the natural constraint and every
/// family constraint currently in `pool`. Hyperplanes accumulate in the pool
/// so later rounds restart warm.
pub fn solve_pleq(
    inst: &Instance,
    pool: &mut ConstraintPool,
    opts: &SolverOptions,
) -> Result<FractionalSolution> {
    if inst.p() > inst.q() {
        return Err(Error::RegimeMismatch { expected: Regime::PLeQ, actual: Regime::PGeQ });
    }
    kelley(inst, Regime::PLeQ, pool, opts)
}

/// Rounding separation oracle: restricted to the Voronoi partition of the
/// reduction, with `Λ = {ℓ ∈ K : Σ_{j∈V_ℓ} y_j < 1}`, checks both constraint
/// kinds for every group and reports the violated ones.
pub fn separation_oracle(
    inst: &Instance,
    sol: &FractionalSolution,
    voronoi: &ClusterFamily,
    tol: f64,
) -> Result<Vec<(usize, ClusterFamily, ConstraintKind)>> {
    let mut restricted = Vec::new();
    for (label, cell) in voronoi.members() {
        let open: f64 = cell.iter().map(|&j| sol.y[j]).sum();
        if open < 1.0 - 1e-12 {
            restricted.push((*label, cell.clone()));
        }
    }
    if restricted.is_empty() {
        return Ok(Vec::new());
    }
    let family = ClusterFamily::new(restricted)?;
    let mut out = Vec::new();
    for i in 0..inst.n() {
        for kind in [ConstraintKind::PowerOfSum, ConstraintKind::SumOfPowers] {
            let value = super::eval_family_constraint(inst, sol, i, &family, kind)?;
            if value - sol.z[i] > tol * value.abs().max(1.0) {
                out.push((i, family.clone(), kind));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct RoundOrCutOptions {
    pub solver: SolverOptions,
    pub max_rounds: usize,
    pub gamma: f64,
    /// Seed the pool with all singleton families before round 1.
    pub singleton_warm_start: bool,
}

impl Default for RoundOrCutOptions {
    fn default() -> Self {
        RoundOrCutOptions {
            solver: SolverOptions::default(),
            max_rounds: 50,
            gamma: 0.2,
            singleton_warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RoundInfo {
    pub b: f64,
    pub b_lower: f64,
    pub families_added: usize,
}

#[derive(Debug)]
pub struct RoundOrCutResult {
    pub solution: FractionalSolution,
    pub reduced: ReducedInstance,
    /// `rounds[0]` is the bare natural relaxation; later entries carry the
    /// objective after each re-solve.
    pub rounds: Vec<RoundInfo>,
    /// False when the round limit was hit (best-so-far is returned).
    pub converged: bool,
    pub pool: ConstraintPool,
}

/// Alternates solve → reduce → separation oracle until the oracle is silent.
pub fn round_or_cut(inst: &Instance, opts: &RoundOrCutOptions) -> Result<RoundOrCutResult> {
    let mut pool = ConstraintPool::new();
    let mut rounds = Vec::new();

    // Round 0: the natural relaxation with no family constraints.
    let mut sol = solve_pleq(inst, &mut pool, &opts.solver)?;
    rounds.push(RoundInfo { b: sol.b, b_lower: sol.b_lower, families_added: 0 });

    let mut pending = 0usize;
    if opts.singleton_warm_start {
        pending += pool.seed_singletons(inst)?;
    }

    let mut converged = false;
    let mut reduced: Option<ReducedInstance> = None;
    for _round in 1..=opts.max_rounds {
        if pending > 0 {
            sol = solve_pleq(inst, &mut pool, &opts.solver)?;
        }
        let red = build_reduction(inst, &sol, opts.gamma)?;
        let violations = separation_oracle(inst, &sol, &red.voronoi_family(), opts.solver.tol)?;
        let was_silent = violations.is_empty();
        let mut added = 0;
        for (i, fam, kind) in violations {
            if pool.add_family(inst, i, fam, kind)? {
                added += 1;
            }
        }
        rounds.push(RoundInfo { b: sol.b, b_lower: sol.b_lower, families_added: added });
        reduced = Some(red);
        if was_silent {
            converged = true;
            break;
        }
        if added == 0 {
            // The oracle keeps flagging constraints already in the pool;
            // tolerance ping-pong, stop with the best-so-far.
            break;
        }
        pending = added;
    }

    let reduced = match reduced {
        Some(r) => r,
        // max_rounds = 0: still produce the reduction of the round-0 solve.
        None => build_reduction(inst, &sol, opts.gamma)?,
    };
    Ok(RoundOrCutResult { solution: sol, reduced, rounds, converged, pool })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CenterSet, MetricSpace};
    use crate::oracle;

    fn line4(p: f64, q: f64, k: usize) -> Instance {
        let metric = MetricSpace::from_line(&[0.0, 1.0, 3.0, 7.0]).unwrap();
        Instance::new(
            metric,
            vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]],
            k,
            p,
            q,
        )
        .unwrap()
    }

    #[test]
    fn pgeq_opens_everything_when_k_equals_m() {
        let inst = line4(2.0, 1.0, 4);
        let sol = solve_pgeq(&inst, &SolverOptions::default()).unwrap();
        assert!(sol.b.abs() < 1e-6, "B = {}", sol.b);
        sol.verify_polytope(&inst, 1e-7).unwrap();
    }

    #[test]
    fn pgeq_lower_bounds_brute_force() {
        let inst = line4(2.0, 1.0, 2);
        let sol = solve_pgeq(&inst, &SolverOptions::default()).unwrap();
        let opt = oracle::brute_force_opt(&inst, 1_000_000).unwrap();
        assert!(
            sol.b_lower <= opt.optimum * (1.0 + 1e-6),
            "b_lower = {} > OPT = {}",
            sol.b_lower,
            opt.optimum
        );
        sol.verify_polytope(&inst, 1e-7).unwrap();
    }

    #[test]
    fn pgeq_symmetric_uniform_value() {
        // Uniform metric, m = n = 5, k = 4, group i = all-but-i. The CP value
        // is at most the symmetric solution's (n-1)^{1/p} <= n^{1/p}.
        let n = 5;
        let (p, q) = (3.0, 1.0);
        let metric = MetricSpace::uniform(n, 1.0).unwrap();
        let weights: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let inst = Instance::new(metric, weights, n - 1, p, q).unwrap();
        let sol = solve_pgeq(&inst, &SolverOptions::default()).unwrap();
        assert!(
            sol.b <= (n as f64).powf(1.0 / p) * (1.0 + 1e-6),
            "B = {} too large",
            sol.b
        );
        // And it is still a lower bound for the integral optimum n^{1/q}.
        let opt = oracle::brute_force_opt(&inst, 1_000_000).unwrap();
        assert!(sol.b_lower <= opt.optimum * (1.0 + 1e-6));
    }

    #[test]
    fn pleq_empty_pool_interval_instance() {
        let inst = line4(1.0, 2.0, 4);
        let mut pool = ConstraintPool::new();
        let sol = solve_pleq(&inst, &mut pool, &SolverOptions::default()).unwrap();
        assert!(sol.b.abs() < 1e-6);
    }

    #[test]
    fn pleq_lower_bounds_brute_force() {
        let inst = line4(1.0, 2.0, 2);
        let mut pool = ConstraintPool::new();
        let sol = solve_pleq(&inst, &mut pool, &SolverOptions::default()).unwrap();
        let opt = oracle::brute_force_opt(&inst, 1_000_000).unwrap();
        assert!(
            sol.b_lower <= opt.optimum * (1.0 + 1e-6),
            "b_lower = {} > OPT = {}",
            sol.b_lower,
            opt.optimum
        );
    }

    #[test]
    fn pleq_respects_preloaded_family() {
        // Force a singleton family constraint that the unconstrained optimum
        // violates; the returned solution must satisfy it.
        let inst = line4(1.0, 2.0, 2);
        let mut pool = ConstraintPool::new();
        pool.seed_singletons(&inst).unwrap();
        let sol = solve_pleq(&inst, &mut pool, &SolverOptions::default()).unwrap();
        for fam in &pool.families {
            let value = super::super::family_value(&inst, &sol.y, fam);
            assert!(
                sol.z[fam.group] >= value - 1e-5 * value.max(1.0),
                "family constraint violated: z = {}, rhs = {}",
                sol.z[fam.group],
                value
            );
        }
    }

    #[test]
    fn oracle_silent_on_integral_solution() {
        let inst = line4(1.0, 2.0, 2);
        let sol = FractionalSolution::integral(&inst, &[1, 3], Regime::PLeQ);
        let red = build_reduction(&inst, &sol, 0.2).unwrap();
        let viol = separation_oracle(&inst, &sol, &red.voronoi_family(), 1e-6).unwrap();
        assert!(viol.is_empty());
    }

    #[test]
    fn round_or_cut_trivial_instance_terminates_fast() {
        let inst = line4(1.0, 2.0, 4);
        let res = round_or_cut(&inst, &RoundOrCutOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.solution.b.abs() < 1e-6);
    }

    #[test]
    fn round_or_cut_b_is_monotone_and_sound() {
        let inst = line4(1.0, 3.0, 2);
        let res = round_or_cut(&inst, &RoundOrCutOptions::default()).unwrap();
        assert!(res.converged);
        for w in res.rounds.windows(2) {
            assert!(w[1].b >= w[0].b - 1e-6 * w[0].b.max(1.0));
        }
        let opt = oracle::brute_force_opt(&inst, 1_000_000).unwrap();
        assert!(res.solution.b_lower <= opt.optimum * (1.0 + 1e-6));
        // Every center set of size k certifies the lower bound.
        use itertools::Itertools;
        for subset in (0..inst.m()).combinations(inst.k()) {
            let c = CenterSet::new(subset).unwrap();
            assert!(res.solution.b_lower <= inst.gencost(&c).unwrap() * (1.0 + 1e-6));
        }
    }
}
