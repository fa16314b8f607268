//! End-to-end approximation pipelines.
//!
//! * p ≥ q: solve the relaxation, sparsify, then either randomized rounding
//!   (large surplus `|K|-k > √k`) or the ℓ_q reweighting path (small
//!   surplus).
//! * p ≤ q: round-or-cut, sparsify, randomized rounding with per-trial
//!   certificates.
//! * the norm-swap baseline: collapse groups into one weight function and
//!   solve the resulting ℓ_p clustering, for an `O(n^{|1/p-1/q|})` reference.

use crate::error::Error;
use crate::instance::{CenterSet, Instance, MetricSpace};
use crate::reduction::{bipartition, build_reduction, ReducedInstance};
use crate::relax::{self, FractionalSolution, RoundOrCutOptions, SolverOptions};
use crate::rounding::{
    claim41_bound, closure_pattern_count, enumerate_closures, randomized_round, select_kprime,
};
use crate::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rounding,
    Reweight,
    Enumeration,
    Baseline,
}

/// A certified integral solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub centers: CenterSet,
    pub cost: f64,
    /// Lower bound on the optimum certified by the relaxation's master LP.
    pub relaxation_b: f64,
    /// cost / relaxation_b (1 when both are zero).
    pub certified_ratio: f64,
    pub method: Method,
    pub seed: u64,
}

impl Solution {
    fn build(
        inst: &Instance,
        centers: CenterSet,
        relaxation_b: f64,
        method: Method,
        seed: u64,
    ) -> Result<Solution> {
        let cost = inst.gencost(&centers)?;
        let certified_ratio = if cost == 0.0 && relaxation_b <= 0.0 {
            1.0
        } else {
            cost / relaxation_b
        };
        Ok(Solution { centers, cost, relaxation_b, certified_ratio, method, seed })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub solver: SolverOptions,
    pub round_or_cut: RoundOrCutOptions,
    pub gamma: f64,
    /// Best-of-T sampling budget when enumeration is out of reach.
    pub trials: usize,
    /// Enumerate all closure patterns when their count is at most this.
    pub enum_cap: u128,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            solver: SolverOptions::default(),
            round_or_cut: RoundOrCutOptions::default(),
            gamma: 0.2,
            trials: 50,
            enum_cap: 100_000,
        }
    }
}

/// Tops a base set up to exactly k centers with the lowest-index unused
/// points (opening more centers never increases the cost).
fn pad_to_k(inst: &Instance, mut base: Vec<usize>) -> Result<CenterSet> {
    base.sort_unstable();
    base.dedup();
    let mut next = 0usize;
    while base.len() < inst.k() {
        while base.binary_search(&next).is_ok() {
            next += 1;
        }
        base.push(next);
        base.sort_unstable();
    }
    base.truncate(inst.k());
    CenterSet::new(base)
}

/// Shared rounding stage: exhaustive over closure patterns when small,
/// otherwise the best of `trials` seeded Bernoulli roundings. Every
/// realization is checked against its cost certificate.
fn rounding_stage(
    inst: &Instance,
    sol: &FractionalSolution,
    red: &ReducedInstance,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<(CenterSet, Method)> {
    let bip = bipartition(red)?;
    let kprime = select_kprime(inst, red, &bip)?;
    let surplus = red.size() - inst.k();
    if closure_pattern_count(kprime.len(), surplus) <= opts.enum_cap {
        let trace = enumerate_closures(inst, red, &kprime)?;
        let cost = inst.gencost(&trace.centers)?;
        let bound = claim41_bound(inst, &trace, sol.b);
        debug_assert!(cost <= bound * (1.0 + 1e-9), "certificate broken: {cost} > {bound}");
        return Ok((trace.centers, Method::Enumeration));
    }
    let mut best: Option<(f64, CenterSet)> = None;
    for t in 0..opts.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let trace = randomized_round(inst, red, &kprime, &mut rng, seed, t as u64)?;
        let cost = inst.gencost(&trace.centers)?;
        let bound = claim41_bound(inst, &trace, sol.b);
        if cost > bound * (1.0 + 1e-9) {
            return Err(Error::Internal(format!(
                "per-realization certificate violated: {cost} > {bound}"
            )));
        }
        if best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
            best = Some((cost, trace.centers));
        }
    }
    Ok((best.expect("at least one trial").1, Method::Rounding))
}

/// `ŵ(ℓ) = Σ_i w'_i(ℓ)^{q/p}`, the reweighting for the small-surplus path.
pub fn reweight_hat(inst: &Instance, red: &ReducedInstance) -> Vec<f64> {
    let e = inst.q() / inst.p();
    (0..red.size())
        .map(|pos| {
            red.wprime
                .iter()
                .map(|row| if row[pos] > 0.0 { row[pos].powf(e) } else { 0.0 })
                .sum()
        })
        .collect()
}

/// Weighted k-clustering with ℓ_exponent cost by greedy seeding plus
/// single-swap local search (best improving swap, stopping below 1e-4
/// relative gain).
pub fn kcluster_lq_local_search(
    metric: &MetricSpace,
    points: &[usize],
    weights: &[f64],
    k: usize,
    exponent: f64,
) -> Result<CenterSet> {
    if points.len() < k {
        return Err(Error::TooFewPoints { points: points.len(), k });
    }
    if points.len() == k {
        return CenterSet::new(points.to_vec());
    }
    let cost_sum = |centers: &[usize]| -> f64 {
        points
            .iter()
            .zip(weights)
            .map(|(&l, &w)| {
                if w > 0.0 {
                    let d = metric.d_to(l, centers);
                    if d > 0.0 {
                        w * d.powf(exponent)
                    } else {
                        0.0
                    }
                } else {
                    0.0
                }
            })
            .sum()
    };

    // Greedy seeding.
    let mut centers: Vec<usize> = Vec::with_capacity(k);
    while centers.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for &cand in points {
            if centers.contains(&cand) {
                continue;
            }
            let mut trial = centers.clone();
            trial.push(cand);
            let c = cost_sum(&trial);
            if best.is_none_or(|(bc, _)| c < bc) {
                best = Some((c, cand));
            }
        }
        centers.push(best.expect("points remain").1);
    }

    // Single-swap descent.
    let mut current = cost_sum(&centers);
    for _ in 0..10_000 {
        if current == 0.0 {
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for out_idx in 0..centers.len() {
            for &inp in points {
                if centers.contains(&inp) {
                    continue;
                }
                let mut trial = centers.clone();
                trial[out_idx] = inp;
                let c = cost_sum(&trial);
                if best.is_none_or(|(bc, _, _)| c < bc) {
                    best = Some((c, out_idx, inp));
                }
            }
        }
        match best {
            Some((c, out_idx, inp))
                if c.powf(1.0 / exponent)
                    < current.powf(1.0 / exponent) * (1.0 - 1e-4) =>
            {
                centers[out_idx] = inp;
                current = c;
            }
            _ => break,
        }
    }
    CenterSet::new(centers)
}

/// Small-surplus path: local search on (K, ŵ) under the ℓ_q objective.
pub fn solve_reweight_path(
    inst: &Instance,
    red: &ReducedInstance,
    relaxation_b: f64,
    seed: u64,
) -> Result<Solution> {
    let hat = reweight_hat(inst, red);
    let centers =
        kcluster_lq_local_search(inst.metric(), &red.points, &hat, inst.k(), inst.q())?;
    Solution::build(inst, centers, relaxation_b, Method::Reweight, seed)
}

/// Post-relaxation part of the p ≥ q pipeline: pad when the reduction fits
/// the budget, otherwise round (large surplus) or reweight (small surplus).
pub fn pgeq_stage(
    inst: &Instance,
    sol: &FractionalSolution,
    red: &ReducedInstance,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<Solution> {
    if red.size() <= inst.k() {
        let centers = pad_to_k(inst, red.points.clone())?;
        return Solution::build(inst, centers, sol.b_lower, Method::Rounding, seed);
    }
    let surplus = (red.size() - inst.k()) as f64;
    if surplus > (inst.k() as f64).sqrt() {
        let (centers, method) = rounding_stage(inst, sol, red, seed, opts)?;
        Solution::build(inst, centers, sol.b_lower, method, seed)
    } else {
        solve_reweight_path(inst, red, sol.b_lower, seed)
    }
}

/// Full p ≥ q pipeline with the √k case split.
pub fn solve_pgeq_full(inst: &Instance, seed: u64, opts: &PipelineOptions) -> Result<Solution> {
    let sol = relax::solve_pgeq(inst, &opts.solver)?;
    let red = build_reduction(inst, &sol, opts.gamma)?;
    pgeq_stage(inst, &sol, &red, seed, opts)
}

/// Post-relaxation part of the p ≤ q pipeline.
pub fn pleq_stage(
    inst: &Instance,
    sol: &FractionalSolution,
    red: &ReducedInstance,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<Solution> {
    if red.size() <= inst.k() {
        let centers = pad_to_k(inst, red.points.clone())?;
        return Solution::build(inst, centers, sol.b_lower, Method::Rounding, seed);
    }
    let (centers, method) = rounding_stage(inst, sol, red, seed, opts)?;
    Solution::build(inst, centers, sol.b_lower, method, seed)
}

/// Full p ≤ q pipeline: round-or-cut then rounding.
pub fn solve_pleq_full(inst: &Instance, seed: u64, opts: &PipelineOptions) -> Result<Solution> {
    let mut rc = opts.round_or_cut;
    rc.solver = opts.solver;
    rc.gamma = opts.gamma;
    let res = relax::round_or_cut(inst, &rc)?;
    pleq_stage(inst, &res.solution, &res.reduced, seed, opts)
}

/// Regime dispatch; at p = q both pipelines apply and the p ≥ q one is used.
pub fn solve_auto(inst: &Instance, seed: u64, opts: &PipelineOptions) -> Result<Solution> {
    if inst.p() >= inst.q() {
        solve_pgeq_full(inst, seed, opts)
    } else {
        solve_pleq_full(inst, seed, opts)
    }
}

/// Norm-swap baseline: replace the outer ℓ_q by ℓ_p by merging all groups
/// into `w(j) = Σ_i w_i(j)`, solve the (p,p) problem with local search and
/// evaluate under the true objective. The relaxation is still solved to
/// attach a certificate.
pub fn baseline_norm_swap(inst: &Instance, opts: &PipelineOptions) -> Result<Solution> {
    let flat: Vec<f64> =
        (0..inst.m()).map(|j| (0..inst.n()).map(|i| inst.weight(i, j)).sum()).collect();
    let all: Vec<usize> = (0..inst.m()).collect();
    let centers = kcluster_lq_local_search(inst.metric(), &all, &flat, inst.k(), inst.p())?;
    let relaxation_b = if inst.p() >= inst.q() {
        relax::solve_pgeq(inst, &opts.solver)?.b_lower
    } else {
        let mut pool = relax::ConstraintPool::new();
        relax::solve_pleq(inst, &mut pool, &opts.solver)?.b_lower
    };
    Solution::build(inst, centers, relaxation_b, Method::Baseline, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::oracle;

    #[test]
    fn reweight_hat_examples() {
        // Single group: ŵ = w'^{q/p}. Two groups with rows (1,4),(9,16),
        // p = 2, q = 1: ŵ = (1+3, 2+4).
        let inst = corpus::line4_instance(2.0, 1.0, 2);
        let sol = crate::relax::FractionalSolution::integral(&inst, &[0, 2], crate::Regime::PGeQ);
        let mut red = build_reduction(&inst, &sol, 0.2).unwrap();
        red.wprime = vec![vec![1.0, 4.0], vec![9.0, 16.0]];
        let hat = reweight_hat(&inst, &red);
        assert_eq!(hat, vec![4.0, 6.0]);

        // p = q: plain row sums.
        let inst_eq = corpus::line4_instance(2.0, 2.0, 2);
        let sol = crate::relax::FractionalSolution::integral(&inst_eq, &[0, 2], crate::Regime::PGeQ);
        let mut red = build_reduction(&inst_eq, &sol, 0.2).unwrap();
        red.wprime = vec![vec![1.0, 4.0], vec![9.0, 16.0]];
        assert_eq!(reweight_hat(&inst_eq, &red), vec![10.0, 20.0]);
    }

    #[test]
    fn local_search_trivial_cases() {
        let inst = corpus::line4_instance(2.0, 1.0, 2);
        let all: Vec<usize> = (0..4).collect();
        let w = vec![1.0; 4];
        // k = |points|: zero cost.
        let c = kcluster_lq_local_search(inst.metric(), &all, &w, 4, 2.0).unwrap();
        assert_eq!(c.points(), &[0, 1, 2, 3]);
        // Too few points.
        assert!(matches!(
            kcluster_lq_local_search(inst.metric(), &all[..1], &w[..1], 2, 2.0),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn local_search_uniform_metric_symmetry() {
        let metric = MetricSpace::uniform(6, 1.0).unwrap();
        let all: Vec<usize> = (0..6).collect();
        let w = vec![1.0; 6];
        for k in 1..6 {
            let c = kcluster_lq_local_search(&metric, &all, &w, k, 2.0).unwrap();
            let sum: f64 = all
                .iter()
                .map(|&l| {
                    let d = metric.d_to(l, c.points());
                    if d > 0.0 {
                        d.powf(2.0)
                    } else {
                        0.0
                    }
                })
                .sum();
            assert!((sum - (6 - k) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn local_search_near_optimal_on_desk_instances() {
        // Within factor 10 of the exact single-group optimum.
        for seed in 0..5u64 {
            let inst = corpus::random_instance(seed, 7, 1, 3, 2.0, 2.0);
            let all: Vec<usize> = (0..inst.m()).collect();
            let w: Vec<f64> = (0..inst.m()).map(|j| inst.weight(0, j)).collect();
            let ls =
                kcluster_lq_local_search(inst.metric(), &all, &w, inst.k(), inst.q()).unwrap();
            let ls_cost = inst.gencost(&ls).unwrap();
            let opt = oracle::brute_force_opt(&inst, 1_000_000).unwrap().optimum;
            assert!(
                ls_cost <= 10.0 * opt + 1e-9,
                "seed {seed}: local search {ls_cost} vs opt {opt}"
            );
        }
    }

    #[test]
    fn pgeq_pipeline_k_equals_m_costs_zero() {
        let inst = corpus::line4_instance(2.0, 1.0, 4);
        let sol = solve_pgeq_full(&inst, 1, &PipelineOptions::default()).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.centers.len(), 4);
    }

    #[test]
    fn pipelines_respect_sandwich_on_line4() {
        let opts = PipelineOptions::default();
        let pgeq_inst = corpus::line4_instance(3.0, 1.0, 2);
        let s = solve_pgeq_full(&pgeq_inst, 7, &opts).unwrap();
        let opt = oracle::brute_force_opt(&pgeq_inst, 1_000_000).unwrap().optimum;
        assert!(s.relaxation_b <= opt * (1.0 + 1e-6));
        assert!(s.cost >= opt - 1e-9);
        assert!(s.certified_ratio >= 1.0 - 1e-9);

        let pleq_inst = corpus::line4_instance(1.0, 3.0, 2);
        let s = solve_pleq_full(&pleq_inst, 7, &opts).unwrap();
        let opt = oracle::brute_force_opt(&pleq_inst, 1_000_000).unwrap().optimum;
        assert!(s.relaxation_b <= opt * (1.0 + 1e-6));
        assert!(s.cost >= opt - 1e-9);
    }

    #[test]
    fn baseline_handles_single_group_and_equal_norms() {
        let opts = PipelineOptions::default();
        for seed in [3u64, 4] {
            let inst = corpus::random_instance(seed, 6, 1, 2, 2.0, 2.0);
            let b = baseline_norm_swap(&inst, &opts).unwrap();
            let opt = oracle::brute_force_opt(&inst, 1_000_000).unwrap().optimum;
            assert!(b.cost <= 10.0 * opt + 1e-9, "baseline {} vs opt {opt}", b.cost);
        }
    }

    #[test]
    fn auto_dispatch_matches_regimes() {
        let opts = PipelineOptions::default();
        let inst = corpus::line4_instance(2.0, 1.0, 2);
        let a = solve_auto(&inst, 5, &opts).unwrap();
        let b = solve_pgeq_full(&inst, 5, &opts).unwrap();
        assert_eq!(a.centers, b.centers);
    }

    #[test]
    fn deterministic_given_seed_full_pipeline() {
        let opts = PipelineOptions::default();
        let inst = corpus::random_instance(11, 7, 3, 3, 1.0, 2.0);
        let a = solve_pleq_full(&inst, 123, &opts).unwrap();
        let b = solve_pleq_full(&inst, 123, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
