//! Min s-Union instances and their reduction to (p,q)-fair clustering.
//!
//! The reduction identifies the m sets with m points at mutual distance 1,
//! one indicator group per universe element and a center budget of `m - s`.
//! Leaving the sets `J` uncovered then costs exactly
//! `(Σ_i |{j ∈ J : i ∈ S_j}|^{q/p})^{1/q}`, which ties the clustering
//! objective to the union structure. The generators build the random and
//! dense-vs-random families behind the conditional hardness.

use crate::error::Error;
use crate::instance::{Instance, MetricSpace};
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinSUnionInstance {
    /// Universe size n̂; elements are 0..universe.
    pub universe: usize,
    /// Non-empty subsets of the universe, sorted and deduplicated.
    pub sets: Vec<Vec<usize>>,
    /// How many sets must be selected.
    pub s: usize,
}

impl MinSUnionInstance {
    pub fn new(universe: usize, sets: Vec<Vec<usize>>, s: usize) -> Result<MinSUnionInstance> {
        if s == 0 || s > sets.len() {
            return Err(Error::BadMinSUnion {
                reason: format!("s = {s} outside 1..={}", sets.len()),
            });
        }
        let mut cleaned = Vec::with_capacity(sets.len());
        for (idx, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::BadMinSUnion { reason: format!("set {idx} is empty") });
            }
            if set.iter().any(|&e| e >= universe) {
                return Err(Error::BadMinSUnion {
                    reason: format!("set {idx} exceeds universe {universe}"),
                });
            }
            cleaned.push(set);
        }
        Ok(MinSUnionInstance { universe, sets: cleaned, s })
    }

    pub fn m(&self) -> usize {
        self.sets.len()
    }

    /// `|∪_{j∈J} S_j|`.
    pub fn union_cost(&self, selection: &[usize]) -> usize {
        let mut seen = vec![false; self.universe];
        let mut count = 0usize;
        for &j in selection {
            for &e in &self.sets[j] {
                if !seen[e] {
                    seen[e] = true;
                    count += 1;
                }
            }
        }
        count
    }

    /// The closed-form clustering cost of leaving exactly the sets `J`
    /// uncovered: `(Σ_i |{j∈J : i∈S_j}|^{q/p})^{1/q}`.
    pub fn closed_form_cost(&self, selection: &[usize], p: f64, q: f64) -> f64 {
        let mut counts = vec![0usize; self.universe];
        for &j in selection {
            for &e in &self.sets[j] {
                counts[e] += 1;
            }
        }
        counts
            .iter()
            .map(|&c| if c > 0 { (c as f64).powf(q / p) } else { 0.0 })
            .sum::<f64>()
            .powf(1.0 / q)
    }
}

/// The dense case's planted structure, recorded for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensePlant {
    /// Indices of the planted sets (|J| = s).
    pub j_set: Vec<usize>,
    /// The containing element set I.
    pub i_set: Vec<usize>,
}

/// Transcribes a Min s-Union instance into a clustering instance: uniform
/// metric on the m sets, indicator weights per universe element, k = m - s.
/// Elements contained in no set would give all-zero weight rows and are
/// dropped (they contribute zero to every cost); the returned vector maps
/// group rows back to universe elements.
pub fn reduce_to_clustering(
    msu: &MinSUnionInstance,
    p: f64,
    q: f64,
) -> Result<(Instance, Vec<usize>)> {
    let m = msu.m();
    if m < 2 {
        return Err(Error::BadMinSUnion { reason: "need at least two sets".into() });
    }
    if msu.s >= m {
        return Err(Error::BadMinSUnion {
            reason: format!("s = {} leaves no center budget (m = {m})", msu.s),
        });
    }
    let metric = MetricSpace::uniform(m, 1.0)?;
    let mut kept = Vec::new();
    let mut weights = Vec::new();
    for element in 0..msu.universe {
        let row: Vec<f64> = (0..m)
            .map(|j| if msu.sets[j].binary_search(&element).is_ok() { 1.0 } else { 0.0 })
            .collect();
        if row.iter().any(|&w| w > 0.0) {
            kept.push(element);
            weights.push(row);
        }
    }
    let inst = Instance::new(metric, weights, m - msu.s, p, q)?;
    Ok((inst, kept))
}

/// Random case: universe `⌈m^ε⌉`, each set is `⌈10 ln m⌉` independent
/// uniform draws (deduplicated), `s = ⌈m^ε⌉`.
pub fn gen_random_case(m: usize, eps: f64, rng: &mut impl Rng) -> Result<MinSUnionInstance> {
    if m < 3 {
        return Err(Error::BadMinSUnion { reason: "random case needs m >= 3".into() });
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::BadMinSUnion { reason: format!("eps = {eps} outside (0, 1/2]") });
    }
    let universe = (m as f64).powf(eps).ceil() as usize;
    let draws = (10.0 * (m as f64).ln()).ceil() as usize;
    let sets: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let mut set: Vec<usize> =
                (0..draws).map(|_| rng.random_range(0..universe)).collect();
            set.sort_unstable();
            set.dedup();
            set
        })
        .collect();
    let s = universe; // ⌈m^ε⌉ for both
    MinSUnionInstance::new(universe, sets, s.min(m))
}

/// Dense case: universe `⌈10 m^ε ln m⌉`; a planted index set J of size
/// `s = ⌈m^ε⌉` whose sets are drawn inside a planted element set I of size
/// `⌈(10 s ln m)^δ⌉`; all other sets are drawn from the full universe.
pub fn gen_dense_case(
    m: usize,
    eps: f64,
    delta: f64,
    rng: &mut impl Rng,
) -> Result<(MinSUnionInstance, DensePlant)> {
    if !(eps < delta) {
        return Err(Error::ParameterOrder { eps, delta });
    }
    if m < 3 || !(eps > 0.0 && eps <= 0.5) || delta >= 1.0 {
        return Err(Error::BadMinSUnion {
            reason: format!("dense case needs m >= 3, 0 < eps <= 1/2, eps < delta < 1; got m={m}, eps={eps}, delta={delta}"),
        });
    }
    let lnm = (m as f64).ln();
    let universe = (10.0 * (m as f64).powf(eps) * lnm).ceil() as usize;
    let s = ((m as f64).powf(eps).ceil() as usize).min(m - 1);
    let i_size = ((10.0 * s as f64 * lnm).powf(delta).ceil() as usize).clamp(1, universe);
    let draws = (10.0 * lnm).ceil() as usize;

    // Planted structure.
    let mut elements: Vec<usize> = (0..universe).collect();
    partial_shuffle(&mut elements, i_size, rng);
    let mut i_set: Vec<usize> = elements[..i_size].to_vec();
    i_set.sort_unstable();
    let mut indices: Vec<usize> = (0..m).collect();
    partial_shuffle(&mut indices, s, rng);
    let mut j_set: Vec<usize> = indices[..s].to_vec();
    j_set.sort_unstable();

    let sets: Vec<Vec<usize>> = (0..m)
        .map(|j| {
            let planted = j_set.binary_search(&j).is_ok();
            let mut set: Vec<usize> = (0..draws)
                .map(|_| {
                    if planted {
                        i_set[rng.random_range(0..i_set.len())]
                    } else {
                        rng.random_range(0..universe)
                    }
                })
                .collect();
            set.sort_unstable();
            set.dedup();
            set
        })
        .collect();
    let msu = MinSUnionInstance::new(universe, sets, s)?;
    Ok((msu, DensePlant { j_set, i_set }))
}

/// The dense-case cost target `(10 s ln m)^{(δ(p-q)+q)/(pq)}` for p ≥ q,
/// with `s` the instance's actual (integer) selection count. Substituting
/// the real-valued `m^ε` for `s` only works asymptotically; at desk scale
/// the ceiling drives the construction above the real-valued form.
pub fn dense_upper_bound(s: usize, m: usize, delta: f64, p: f64, q: f64) -> f64 {
    let base = 10.0 * s as f64 * (m as f64).ln();
    base.powf((delta * (p - q) + q) / (p * q))
}

/// The instance-level Hölder chain bound behind [`dense_upper_bound`]:
/// `gencost([m]∖J) ≤ |I|^{(p-q)/(pq)} · (Σ_{j∈J} |S_j|)^{1/p}` with the
/// actual planted structure. Holds deterministically for every realization.
pub fn dense_chain_bound(msu: &MinSUnionInstance, plant: &DensePlant, p: f64, q: f64) -> f64 {
    let total: usize = plant.j_set.iter().map(|&j| msu.sets[j].len()).sum();
    (plant.i_set.len() as f64).powf((p - q) / (p * q)) * (total as f64).powf(1.0 / p)
}

fn partial_shuffle(items: &mut [usize], take: usize, rng: &mut impl Rng) {
    let n = items.len();
    for i in 0..take.min(n.saturating_sub(1)) {
        let j = rng.random_range(i..n);
        items.swap(i, j);
    }
}
