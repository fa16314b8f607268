//! Randomized rounding of a sparsified solution.
//!
//! Every center `ℓ` in the eligible set `K' ⊆ K1` is closed independently
//! with probability `5·x'_{ℓσ(ℓ)}`; the surviving centers are topped up to
//! exactly `k` by greedy reopening. The realized cost variables
//!
//! ```text
//!   Z_i  = Σ_{ℓ closed} vol_i(V_ℓ)
//!   Z'_i = Σ_{ℓ closed} w'_i(ℓ) · d(ℓ, σ(ℓ))^p
//! ```
//!
//! certify, per realization, that the returned centers cost at most
//! `min(30B + 2(Σ_i Z_i^{q/p})^{1/q}, 10B + (Σ_i Z'_i^{q/p})^{1/q})`.

use crate::error::Error;
use crate::instance::{CenterSet, Instance};
use crate::reduction::{Bipartition, ReducedInstance};
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Realized outcome of one rounding trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundingTrace {
    pub kprime: Vec<usize>,
    pub closed: Vec<usize>,
    pub reopened: Vec<usize>,
    /// Final center set, exactly k centers.
    pub centers: CenterSet,
    /// Realized `Z_i` per group.
    pub z_real: Vec<f64>,
    /// Realized `Z'_i` per group.
    pub zprime_real: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    /// Set when sampling never closed enough centers and the deterministic
    /// fallback closed the largest-x' ones instead.
    pub fallback: bool,
}

/// Eligible centers: `K' = {ℓ ∈ K1 | x'_{ℓσ(ℓ)} ≥ (|K|-k)/(4|K1|)}`.
/// Their total x' mass is at least `(|K|-k)/4`.
pub fn select_kprime(
    inst: &Instance,
    red: &ReducedInstance,
    bip: &Bipartition,
) -> Result<Vec<usize>> {
    let surplus = red.size() as f64 - inst.k() as f64;
    if surplus <= 0.0 {
        return Err(Error::NoSurplus { ksize: red.size(), k: inst.k() });
    }
    let threshold = surplus / (4.0 * bip.k1.len() as f64);
    let kprime: Vec<usize> = bip
        .k1
        .iter()
        .copied()
        .filter(|&l| red.xprime_sigma(red.position(l).unwrap()) >= threshold)
        .collect();
    let mass: f64 =
        kprime.iter().map(|&l| red.xprime_sigma(red.position(l).unwrap())).sum();
    debug_assert!(
        mass >= surplus / 4.0 - 1e-9,
        "pruned x' mass {mass} below surplus/4"
    );
    Ok(kprime)
}

/// One Bernoulli pass: closes each eligible center independently with
/// probability `5·x'_{ℓσ(ℓ)}`. This is the raw law the frequency tests
/// check; no retry logic.
pub fn sample_closures(
    red: &ReducedInstance,
    kprime: &[usize],
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let mut closed = Vec::new();
    for &l in kprime {
        let x = red.xprime_sigma(red.position(l).unwrap());
        let prob = 5.0 * x;
        if prob > 1.0 + 1e-9 {
            return Err(Error::ProbabilityOverflow { center: l, value: prob });
        }
        if rng.random::<f64>() < prob.min(1.0) {
            closed.push(l);
        }
    }
    Ok(closed)
}

fn realized_costs(
    inst: &Instance,
    red: &ReducedInstance,
    closed: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let n = inst.n();
    let mut z = vec![0.0; n];
    let mut zp = vec![0.0; n];
    for &l in closed {
        let pos = red.position(l).unwrap();
        let sigma = red.sigma[pos].expect("closable center has a σ-partner");
        let d = inst.metric().d(l, sigma);
        for i in 0..n {
            z[i] += red.vols[i][pos];
            if d > 0.0 {
                zp[i] += red.wprime[i][pos] * d.powf(inst.p());
            }
        }
    }
    (z, zp)
}

/// Greedy top-up: add centers one at a time, each time the point whose
/// opening lowers the objective most (lowest index on ties), until |L| = k.
fn reopen_to_budget(
    inst: &Instance,
    mut open: Vec<usize>,
) -> Result<(CenterSet, Vec<usize>)> {
    let mut reopened = Vec::new();
    while open.len() < inst.k() {
        let current = CenterSet::new(open.clone())?;
        let mut best: Option<(f64, usize)> = None;
        for cand in 0..inst.m() {
            if current.contains(cand) {
                continue;
            }
            let mut trial = open.clone();
            trial.push(cand);
            let cost = inst.gencost(&CenterSet::new(trial)?)?;
            if best.is_none_or(|(bc, _)| cost < bc) {
                best = Some((cost, cand));
            }
        }
        let (_, chosen) = best.expect("k <= m leaves a candidate");
        open.push(chosen);
        reopened.push(chosen);
    }
    Ok((CenterSet::new(open)?, reopened))
}

fn finish_trace(
    inst: &Instance,
    red: &ReducedInstance,
    kprime: &[usize],
    closed: Vec<usize>,
    seed: u64,
    stream: u64,
    fallback: bool,
) -> Result<RoundingTrace> {
    let closed_set: std::collections::BTreeSet<usize> = closed.iter().copied().collect();
    let open: Vec<usize> =
        red.points.iter().copied().filter(|l| !closed_set.contains(l)).collect();
    let (z_real, zprime_real) = realized_costs(inst, red, &closed);
    let (centers, reopened) = reopen_to_budget(inst, open)?;
    Ok(RoundingTrace {
        kprime: kprime.to_vec(),
        closed,
        reopened,
        centers,
        z_real,
        zprime_real,
        seed,
        stream,
        fallback,
    })
}

/// Full rounding step: sample closures until at least `|K|-k` centers are
/// closed (re-sampling up to 100 times), falling back to deterministically
/// closing the largest-x' centers, then top back up to exactly k.
pub fn randomized_round(
    inst: &Instance,
    red: &ReducedInstance,
    kprime: &[usize],
    rng: &mut impl Rng,
    seed: u64,
    stream: u64,
) -> Result<RoundingTrace> {
    let surplus = red.size().saturating_sub(inst.k());
    if surplus == 0 {
        return Err(Error::NoSurplus { ksize: red.size(), k: inst.k() });
    }
    for _attempt in 0..=100 {
        let closed = sample_closures(red, kprime, rng)?;
        if closed.len() >= surplus {
            return finish_trace(inst, red, kprime, closed, seed, stream, false);
        }
    }
    // Deterministic fallback: close the surplus-many largest x' centers.
    let mut order: Vec<usize> = kprime.to_vec();
    order.sort_by(|&a, &b| {
        let xa = red.xprime_sigma(red.position(a).unwrap());
        let xb = red.xprime_sigma(red.position(b).unwrap());
        xb.partial_cmp(&xa).unwrap().then(a.cmp(&b))
    });
    order.truncate(surplus);
    order.sort_unstable();
    finish_trace(inst, red, kprime, order, seed, stream, true)
}

/// Number of exact-surplus closure patterns, saturating.
pub fn closure_pattern_count(kprime_len: usize, surplus: usize) -> u128 {
    crate::oracle::binomial(kprime_len, surplus)
}

/// Exhaustive alternative to sampling: tries every way of closing exactly
/// `|K|-k` centers of K' and returns the cheapest realization.
pub fn enumerate_closures(
    inst: &Instance,
    red: &ReducedInstance,
    kprime: &[usize],
) -> Result<RoundingTrace> {
    use itertools::Itertools;
    let surplus = red.size().saturating_sub(inst.k());
    if surplus == 0 {
        return Err(Error::NoSurplus { ksize: red.size(), k: inst.k() });
    }
    if kprime.len() < surplus {
        return Err(Error::TooFewPoints { points: kprime.len(), k: surplus });
    }
    let mut best: Option<(f64, RoundingTrace)> = None;
    for closed in kprime.iter().copied().combinations(surplus) {
        let trace = finish_trace(inst, red, kprime, closed, 0, 0, false)?;
        let cost = inst.gencost(&trace.centers)?;
        if best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
            best = Some((cost, trace));
        }
    }
    Ok(best.expect("at least one pattern").1)
}

/// The per-realization cost certificate:
/// `min(30B + 2(Σ_i Z_i^{q/p})^{1/q}, 10B + (Σ_i Z'_i^{q/p})^{1/q})`.
pub fn claim41_bound(inst: &Instance, trace: &RoundingTrace, b: f64) -> f64 {
    let (p, q) = (inst.p(), inst.q());
    let znorm = trace
        .z_real
        .iter()
        .map(|&z| if z > 0.0 { z.powf(q / p) } else { 0.0 })
        .sum::<f64>()
        .powf(1.0 / q);
    let zpnorm = trace
        .zprime_real
        .iter()
        .map(|&z| if z > 0.0 { z.powf(q / p) } else { 0.0 })
        .sum::<f64>()
        .powf(1.0 / q);
    (30.0 * b + 2.0 * znorm).min(10.0 * b + zpnorm)
}
