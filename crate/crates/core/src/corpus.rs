//! Deterministic desk-scale corpora: small instances where every claim can
//! be certified by brute force, plus the integrality-gap construction used
//! to exercise the round-or-cut machinery.

use crate::instance::{Instance, MetricSpace};
use crate::relax::{FractionalSolution, Regime};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub instance: Instance,
}

/// The canonical 4-point line {0,1,3,7} with one group on each half.
pub fn line4_instance(p: f64, q: f64, k: usize) -> Instance {
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

/// Uniform metric with m = n, group i = everything except point i, k = m-1.
pub fn uniform_allbut_instance(m: usize, p: f64, q: f64) -> Instance {
    let metric = MetricSpace::uniform(m, 1.0).unwrap();
    let weights: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect();
    Instance::new(metric, weights, m - 1, p, q).unwrap()
}

/// Two well-separated clusters of three points, one group per cluster.
pub fn two_cluster_instance(p: f64, q: f64, k: usize) -> Instance {
    let metric =
        MetricSpace::from_line(&[0.0, 0.5, 1.0, 10.0, 10.5, 11.0]).unwrap();
    Instance::new(
        metric,
        vec![
            vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        ],
        k,
        p,
        q,
    )
    .unwrap()
}

/// Seeded random instance: 2-D points and sparse random weights that keep
/// every group non-trivial.
pub fn random_instance(seed: u64, m: usize, n: usize, k: usize, p: f64, q: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
    let pts: Vec<(f64, f64)> = (0..m)
        .map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
        .collect();
    let raw: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    let dx = pts[a].0 - pts[b].0;
                    let dy = pts[a].1 - pts[b].1;
                    (dx * dx + dy * dy).sqrt()
                })
                .collect()
        })
        .collect();
    let metric = MetricSpace::validate(&raw).expect("euclidean distances form a metric");
    let weights: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..m)
                .map(|_| {
                    if rng.random::<f64>() < 0.4 {
                        0.0
                    } else {
                        rng.random_range(0.1..2.0)
                    }
                })
                .collect();
            // Guarantee a strictly positive entry per group.
            let anchor = i % m;
            if row[anchor] == 0.0 {
                row[anchor] = 1.0;
            }
            row
        })
        .collect();
    Instance::new(metric, weights, k, p, q).unwrap()
}

/// The six canonical handcrafted instances.
pub fn canonical() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry { name: "line4-p2q1".into(), instance: line4_instance(2.0, 1.0, 2) },
        CorpusEntry { name: "line4-p1q2".into(), instance: line4_instance(1.0, 2.0, 2) },
        CorpusEntry { name: "line4-p3q1".into(), instance: line4_instance(3.0, 1.0, 2) },
        CorpusEntry { name: "line4-p1q3".into(), instance: line4_instance(1.0, 3.0, 2) },
        CorpusEntry {
            name: "uniform5-allbut-p3q1".into(),
            instance: uniform_allbut_instance(5, 3.0, 1.0),
        },
        CorpusEntry {
            name: "twocluster-p2q2".into(),
            instance: two_cluster_instance(2.0, 2.0, 2),
        },
    ]
}

/// The fixed 30-instance desk corpus (m ≤ 8, n ≤ 5, k ≤ 4), mixing both
/// parameter regimes, handcrafted and seeded-random metrics.
pub fn desk_corpus() -> Vec<CorpusEntry> {
    let mut out = canonical();
    let params: [(usize, usize, usize, f64, f64); 24] = [
        (5, 2, 2, 1.0, 1.0),
        (5, 3, 2, 2.0, 1.0),
        (5, 2, 2, 1.0, 2.0),
        (6, 3, 3, 3.0, 2.0),
        (6, 3, 3, 2.0, 3.0),
        (6, 4, 2, 2.5, 1.5),
        (6, 2, 3, 1.5, 2.5),
        (7, 3, 3, 2.0, 2.0),
        (7, 4, 3, 3.0, 1.0),
        (7, 4, 3, 1.0, 3.0),
        (7, 5, 2, 2.0, 1.5),
        (7, 2, 4, 1.5, 2.0),
        (8, 3, 4, 2.0, 1.0),
        (8, 3, 4, 1.0, 2.0),
        (8, 4, 3, 3.0, 1.5),
        (8, 4, 3, 1.5, 3.0),
        (8, 5, 4, 2.5, 2.5),
        (8, 5, 2, 4.0, 1.0),
        (6, 5, 3, 1.0, 4.0),
        (7, 3, 2, 3.5, 2.5),
        (7, 3, 2, 2.5, 3.5),
        (8, 2, 4, 1.0, 1.5),
        (6, 4, 2, 1.5, 1.0),
        (8, 5, 3, 2.0, 2.0),
    ];
    for (idx, &(m, n, k, p, q)) in params.iter().enumerate() {
        let seed = idx as u64;
        out.push(CorpusEntry {
            name: format!("rand{seed:02}-m{m}n{n}k{k}-p{p}q{q}"),
            instance: random_instance(seed, m, n, k, p, q),
        });
    }
    out
}

/// An integrality-gap construction for the p ≤ q round-or-cut machinery.
#[derive(Debug, Clone)]
pub struct GapConstruction {
    pub instance: Instance,
    /// The hand-built fractional solution: every point keeps `1-eps` of
    /// itself and sends `eps` to its neighbour, with `z` at the natural
    /// constraint values.
    pub engineered: FractionalSolution,
    pub eps: f64,
    pub t: usize,
}

fn circulant_gap(m: usize, support: &[usize], eps: f64, copies: usize, k: usize) -> GapConstruction {
    let metric = MetricSpace::uniform(m, 1.0).unwrap();
    let mut weights = Vec::new();
    for _ in 0..copies {
        for i in 0..m {
            weights.push(
                (0..m)
                    .map(|j| {
                        let hit = support.iter().any(|&s| (i + s) % m == j);
                        if hit {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect::<Vec<f64>>(),
            );
        }
    }
    let instance = Instance::new(metric, weights, k, 1.0, 3.0).unwrap();

    let mut x = vec![0.0; m * m];
    for j in 0..m {
        x[j * m + j] = 1.0 - eps;
        x[j * m + (j + 1) % m] = eps;
    }
    let y: Vec<f64> = (0..m).map(|j| x[j * m + j]).collect();
    let mut engineered = FractionalSolution {
        regime: Regime::PLeQ,
        x,
        y,
        z: vec![0.0; instance.n()],
        b: 0.0,
        b_lower: 0.0,
        tol: 1e-9,
    };
    let z: Vec<f64> = (0..instance.n())
        .map(|i| crate::relax::natural_cost_value(&instance, &engineered.x, i))
        .collect();
    let b = z.iter().sum::<f64>().powf(1.0 / instance.q());
    engineered.z = z;
    engineered.b = b;
    engineered.b_lower = b;
    GapConstruction { instance, engineered, eps, t: support.len() }
}

/// The main gap construction: 20 points at mutual distance 1, 20 indicator
/// groups of size t = 5 on the circulant support {0,1,2,3,5} (full rank, so
/// the natural relaxation has a unique spread optimum), k = 19, p = 1,
/// q = 3, engineered closing mass eps = 0.1 per point.
pub fn gap_construction() -> GapConstruction {
    circulant_gap(20, &[0, 1, 2, 3, 5], 0.1, 1, 19)
}

/// A smaller companion (12 points, windows {0,1,3}, k = 11) used where a
/// second surplus-carrying reduction is wanted.
pub fn small_gap_construction() -> GapConstruction {
    circulant_gap(12, &[0, 1, 3], 0.1, 1, 11)
}
