//! Instance representation, metric validation and the cost/volume evaluators.
//!
//! An instance is a metric on `m` points, `n` group weight rows, a center
//! budget `k` and exponents `p, q ∈ [1, ∞)`. The evaluators here are the
//! ground truth every other module is checked against:
//!
//! * `cost_p(C, i)  = (Σ_j w_i(j) · d(j,C)^p)^{1/p}`
//! * `gencost(C)    = (Σ_i cost_p(C, i)^q)^{1/q}`
//! * `vol(i, U)     = Σ_{j∈U} w_i(j) · d(j, [m]∖U)^p`

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Relative tolerance for metric validation and inequality checks.
pub const REL_TOL: f64 = 1e-9;

/// Dense symmetric metric on `[m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpace {
    m: usize,
    /// Row-major m×m distances.
    dist: Vec<f64>,
}

impl MetricSpace {
    /// Validates a raw square matrix: symmetry, zero diagonal, non-negativity
    /// and the triangle inequality within relative tolerance [`REL_TOL`].
    /// The O(m³) triangle scan is mandatory; every downstream guarantee
    /// assumes a metric.
    pub fn validate(raw: &[Vec<f64>]) -> Result<MetricSpace> {
        let m = raw.len();
        for (row, r) in raw.iter().enumerate() {
            if r.len() != m {
                return Err(Error::NotSquare { rows: m, row, len: r.len() });
            }
        }
        let mut dist = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                let v = raw[a][b];
                if !v.is_finite() {
                    return Err(Error::NotFinite { a, b });
                }
                if v < 0.0 {
                    return Err(Error::NegativeDistance { a, b, value: v });
                }
                dist[a * m + b] = v;
            }
        }
        for j in 0..m {
            if dist[j * m + j] != 0.0 {
                return Err(Error::NonzeroDiagonal { j, value: dist[j * m + j] });
            }
        }
        for a in 0..m {
            for b in (a + 1)..m {
                let fwd = dist[a * m + b];
                let bwd = dist[b * m + a];
                if fwd != bwd {
                    return Err(Error::Asymmetric { a, b, forward: fwd, backward: bwd });
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let ac = dist[a * m + c];
                    let abc = dist[a * m + b] + dist[b * m + c];
                    if ac > abc * (1.0 + REL_TOL) {
                        return Err(Error::TriangleViolation { a, b, c, ac, abc });
                    }
                }
            }
        }
        Ok(MetricSpace { m, dist })
    }

    /// Builds the line metric `d(i,j) = |coords[i] - coords[j]|`.
    pub fn from_line(coords: &[f64]) -> Result<MetricSpace> {
        let m = coords.len();
        let raw: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| (coords[i] - coords[j]).abs()).collect())
            .collect();
        MetricSpace::validate(&raw)
    }

    /// Uniform metric: every pair of distinct points at distance `d`.
    pub fn uniform(m: usize, d: f64) -> Result<MetricSpace> {
        let raw: Vec<Vec<f64>> =
            (0..m).map(|i| (0..m).map(|j| if i == j { 0.0 } else { d }).collect()).collect();
        MetricSpace::validate(&raw)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.m + b]
    }

    /// Distance from `j` to the nearest point of `set` (which must be non-empty).
    pub fn d_to(&self, j: usize, set: &[usize]) -> f64 {
        set.iter().map(|&c| self.d(j, c)).fold(f64::INFINITY, f64::min)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|a| (0..self.m).map(|b| self.d(a, b)).collect()).collect()
    }

    /// Nearest point of `set` to `j`, lowest index winning ties.
    pub fn nearest_in(&self, j: usize, set: &[usize]) -> usize {
        let mut best = set[0];
        let mut best_d = self.d(j, best);
        for &c in &set[1..] {
            let dc = self.d(j, c);
            if dc < best_d {
                best = c;
                best_d = dc;
            } else if dc == best_d && c < best {
                best = c;
            }
        }
        best
    }
}

/// A non-empty set of centers, kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenterSet(Vec<usize>);

impl CenterSet {
    pub fn new(mut centers: Vec<usize>) -> Result<CenterSet> {
        if centers.is_empty() {
            return Err(Error::EmptyCenterSet);
        }
        centers.sort_unstable();
        centers.dedup();
        Ok(CenterSet(centers))
    }

    pub fn points(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }
}

/// A disjoint collection of point sets `V_ℓ` indexed by labels `ℓ ∈ Λ`.
///
/// The labels matter only when the family comes from Voronoi cells of a
/// center set (the label is the site); the constraint values depend on the
/// cells alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterFamily {
    /// Sorted by label; each cell is sorted.
    members: Vec<(usize, Vec<usize>)>,
}

impl ClusterFamily {
    pub fn new(mut members: Vec<(usize, Vec<usize>)>) -> Result<ClusterFamily> {
        members.sort_by_key(|(label, _)| *label);
        let mut seen = std::collections::BTreeSet::new();
        for (_, cell) in members.iter_mut() {
            cell.sort_unstable();
            cell.dedup();
            for &j in cell.iter() {
                if !seen.insert(j) {
                    return Err(Error::FamilyOverlap { point: j });
                }
            }
        }
        Ok(ClusterFamily { members })
    }

    /// Family of singleton cells `{j}` labelled by `j`, one per listed point.
    pub fn singletons(points: &[usize]) -> ClusterFamily {
        ClusterFamily::new(points.iter().map(|&j| (j, vec![j])).collect())
            .expect("singleton cells are disjoint")
    }

    pub fn members(&self) -> &[(usize, Vec<usize>)] {
        &self.members
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|(l, _)| *l)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }
}

/// A complete (p,q)-fair clustering instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    metric: MetricSpace,
    /// n×m weight rows, one per group.
    weights: Vec<Vec<f64>>,
    k: usize,
    p: f64,
    q: f64,
}

impl Instance {
    /// Validates weights (finite, non-negative, each row has a strictly
    /// positive entry), the budget `1 <= k <= m` and the exponents
    /// `p, q ∈ [1, ∞)`. All-zero groups are rejected rather than silently
    /// contributing zero cost.
    pub fn new(
        metric: MetricSpace,
        weights: Vec<Vec<f64>>,
        k: usize,
        p: f64,
        q: f64,
    ) -> Result<Instance> {
        let m = metric.len();
        if k == 0 || k > m {
            return Err(Error::InvalidK { k, m });
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::BadExponent { name: "p", value: p });
        }
        if !(q.is_finite() && q >= 1.0) {
            return Err(Error::BadExponent { name: "q", value: q });
        }
        for (row, w) in weights.iter().enumerate() {
            if w.len() != m {
                return Err(Error::WeightShape { row, len: w.len(), m });
            }
            let mut positive = false;
            for (point, &v) in w.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::BadWeight { group: row, point, value: v });
                }
                positive |= v > 0.0;
            }
            if !positive {
                return Err(Error::ZeroWeightGroup { group: row });
            }
        }
        Ok(Instance { metric, weights, k, p, q })
    }

    pub fn metric(&self) -> &MetricSpace {
        &self.metric
    }

    pub fn m(&self) -> usize {
        self.metric.len()
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn weight(&self, group: usize, point: usize) -> f64 {
        self.weights[group][point]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// `min(p, q)`, the exponent ν used by the reduction.
    pub fn nu(&self) -> f64 {
        self.p.min(self.q)
    }

    /// `d(j, C) = min_{c∈C} d(j, c)`.
    pub fn dist_to_set(&self, j: usize, centers: &CenterSet) -> Result<f64> {
        if j >= self.m() {
            return Err(Error::PointOutOfRange { index: j, m: self.m() });
        }
        Ok(self.metric.d_to(j, centers.points()))
    }

    /// ℓ_p cost of one group: `(Σ_j w_i(j) · d(j,C)^p)^{1/p}`.
    pub fn cost_p(&self, centers: &CenterSet, group: usize) -> Result<f64> {
        if group >= self.n() {
            return Err(Error::GroupOutOfRange { index: group, n: self.n() });
        }
        let mut sum = 0.0;
        for j in 0..self.m() {
            let w = self.weights[group][j];
            if w > 0.0 {
                let d = self.metric.d_to(j, centers.points());
                if d > 0.0 {
                    sum += w * d.powf(self.p);
                }
            }
        }
        Ok(sum.powf(1.0 / self.p))
    }

    /// The (ℓ_p, ℓ_q) objective: `(Σ_i cost_p(C, i)^q)^{1/q}`.
    pub fn gencost(&self, centers: &CenterSet) -> Result<f64> {
        let mut sum = 0.0;
        for i in 0..self.n() {
            let c = self.cost_p(centers, i)?;
            if c > 0.0 {
                sum += c.powf(self.q);
            }
        }
        Ok(sum.powf(1.0 / self.q))
    }

    /// Same objective evaluated from a precomputed nearest-center distance
    /// vector; used by the enumeration oracles.
    pub fn gencost_from_dists(&self, dmin: &[f64]) -> f64 {
        let mut sum = 0.0;
        for w in &self.weights {
            let mut inner = 0.0;
            for j in 0..self.m() {
                if w[j] > 0.0 && dmin[j] > 0.0 {
                    inner += w[j] * dmin[j].powf(self.p);
                }
            }
            if inner > 0.0 {
                sum += inner.powf(self.q / self.p);
            }
        }
        sum.powf(1.0 / self.q)
    }

    /// `vol_i(U) = Σ_{j∈U} w_i(j) · d(j, [m]∖U)^p`, the least cost points of
    /// `U` can charge group `i` when no center lies inside `U`.
    pub fn vol(&self, group: usize, u: &[usize]) -> Result<f64> {
        if group >= self.n() {
            return Err(Error::GroupOutOfRange { index: group, n: self.n() });
        }
        let inside: std::collections::BTreeSet<usize> = u.iter().copied().collect();
        let complement: Vec<usize> = (0..self.m()).filter(|j| !inside.contains(j)).collect();
        if complement.is_empty() {
            return Err(Error::FullSet);
        }
        let mut sum = 0.0;
        for &j in &inside {
            if j >= self.m() {
                return Err(Error::PointOutOfRange { index: j, m: self.m() });
            }
            let w = self.weights[group][j];
            if w > 0.0 {
                let d = self.metric.d_to(j, &complement);
                if d > 0.0 {
                    sum += w * d.powf(self.p);
                }
            }
        }
        Ok(sum)
    }

    /// Minimum slack over groups of the two cluster lower bounds for a center
    /// set and a disjoint family:
    ///
    /// * slack of `cost_p(C,w_i)^p ≥ Σ_{V_ℓ ∩ C = ∅} vol_i(V_ℓ)`,
    /// * slack of `cost_p(C,w_i)^q ≥ Σ_{V_ℓ ∩ C = ∅} vol_i(V_ℓ)^{q/p}` which
    ///   only applies when `p ≤ q` (infinite slack otherwise).
    pub fn cluster_bound_residuals(
        &self,
        centers: &CenterSet,
        family: &ClusterFamily,
    ) -> Result<(f64, f64)> {
        let mut min_p = f64::INFINITY;
        let mut min_q = f64::INFINITY;
        let check_q = self.p <= self.q;
        for i in 0..self.n() {
            let cost = self.cost_p(centers, i)?;
            let mut rhs_p = 0.0;
            let mut rhs_q = 0.0;
            for (_, cell) in family.members() {
                if cell.is_empty() || cell.iter().any(|&j| centers.contains(j)) {
                    continue;
                }
                let v = self.vol(i, cell)?;
                rhs_p += v;
                if check_q && v > 0.0 {
                    rhs_q += v.powf(self.q / self.p);
                }
            }
            min_p = min_p.min(cost.powf(self.p) - rhs_p);
            if check_q {
                min_q = min_q.min(cost.powf(self.q) - rhs_q);
            }
        }
        Ok((min_p, min_q))
    }

    /// The `max(0, 1-|C∩V_ℓ|)` rewrites of the same bounds; they must agree
    /// with the indicator form on every integral center set.
    pub fn cluster_bound_rhs_maxform(
        &self,
        centers: &CenterSet,
        family: &ClusterFamily,
        group: usize,
    ) -> Result<(f64, f64)> {
        let mut sum_vol = 0.0;
        let mut sum_pow = 0.0;
        for (_, cell) in family.members() {
            let hits = cell.iter().filter(|&&j| centers.contains(j)).count();
            let coeff = (1.0 - hits as f64).max(0.0);
            if coeff > 0.0 {
                let v = self.vol(group, cell)?;
                sum_vol += coeff * v;
                if v > 0.0 {
                    sum_pow += coeff * v.powf(self.q / self.p);
                }
            }
        }
        Ok((sum_vol.powf(self.q / self.p), sum_pow))
    }

    /// Rescale every distance by `lambda > 0` (test support for the scaling law).
    pub fn scale_distances(&self, lambda: f64) -> Instance {
        let raw: Vec<Vec<f64>> = self
            .metric
            .rows()
            .into_iter()
            .map(|r| r.into_iter().map(|d| d * lambda).collect())
            .collect();
        Instance {
            metric: MetricSpace::validate(&raw).expect("scaling preserves the metric"),
            weights: self.weights.clone(),
            k: self.k,
            p: self.p,
            q: self.q,
        }
    }
}

/// Relative comparison `lhs ≥ rhs` up to `tol` against the larger magnitude.
pub fn geq_rel(lhs: f64, rhs: f64, tol: f64) -> bool {
    lhs >= rhs - tol * lhs.abs().max(rhs.abs()).max(1.0)
}
