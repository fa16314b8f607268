//! Convex-programming relaxations for both parameter regimes.
//!
//! Both regimes share the assignment/opening polytope
//!
//! ```text
//!   Σ_ℓ x_{jℓ} = 1          ∀ j
//!   x_{jℓ} ≤ y_ℓ := x_{ℓℓ}  ∀ j ≠ ℓ
//!   Σ_j y_j ≤ k
//!   x ≥ 0
//! ```
//!
//! and differ in how the per-group cost variables `z_i` are tied to `x`:
//!
//! * `p ≥ q`: `z_i ≥ (Σ_j w_i(j) (Σ_{j'} d(j,j')^q x_{jj'})^{p/q})^{q/p}`,
//!   a weighted ℓ_{p/q}-norm of a non-negative linear map, hence convex.
//! * `p ≤ q`: the natural bound
//!   `z_i ≥ (Σ_j w_i(j) Σ_{j'} d(j,j')^p x_{jj'})^{q/p}` plus two families of
//!   cluster constraints indexed by disjoint set collections, discovered
//!   lazily by the round-or-cut loop ([`solver::round_or_cut`]).
//!
//! The objective `min B` with `Σ_i z_i ≤ B^q` is handled directly by
//! minimizing `(Σ_i z_i)^{1/q}`.

pub mod simplex;
pub mod solver;

use crate::error::Error;
use crate::instance::{ClusterFamily, Instance};
use crate::Result;
use serde::{Deserialize, Serialize};

pub use solver::{round_or_cut, separation_oracle, solve_pgeq, solve_pleq};
pub use solver::{RoundInfo, RoundOrCutOptions, RoundOrCutResult, SolverOptions};

/// Which relaxation a fractional solution satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    PGeQ,
    PLeQ,
}

/// Which of the two cluster-family constraint shapes is meant.
///
/// `PowerOfSum`:  `z_i ≥ (Σ_ℓ max(0, 1-Σ_{j∈V_ℓ} y_j) · vol_i(V_ℓ))^{q/p}`
/// `SumOfPowers`: `z_i ≥  Σ_ℓ max(0, 1-Σ_{j∈V_ℓ} y_j) · vol_i(V_ℓ)^{q/p}`
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintKind {
    PowerOfSum,
    SumOfPowers,
}

/// A point of the relaxation: assignment matrix, openings, per-group cost
/// variables and the objective value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub regime: Regime,
    /// m×m row-major assignment variables.
    pub x: Vec<f64>,
    /// `y_j = x_{jj}`.
    pub y: Vec<f64>,
    /// Per-group cost variables; always the true constraint values at `x`,
    /// so the solution is feasible by construction.
    pub z: Vec<f64>,
    /// `(Σ_i z_i)^{1/q}`.
    pub b: f64,
    /// Lower bound on the relaxation optimum certified by the master LP.
    pub b_lower: f64,
    /// Tolerance the solve was run at.
    pub tol: f64,
}

impl FractionalSolution {
    #[inline]
    pub fn x_at(&self, m: usize, j: usize, l: usize) -> f64 {
        self.x[j * m + l]
    }

    /// Checks the polytope constraints within `tol` (1e-7 in the contracts).
    pub fn verify_polytope(&self, inst: &Instance, tol: f64) -> Result<()> {
        let m = inst.m();
        for j in 0..m {
            let row: f64 = (0..m).map(|l| self.x_at(m, j, l)).sum();
            if (row - 1.0).abs() > tol {
                return Err(Error::Internal(format!("row {j} of x sums to {row}")));
            }
            for l in 0..m {
                let v = self.x_at(m, j, l);
                if v < -tol {
                    return Err(Error::Internal(format!("x[{j}][{l}] = {v} negative")));
                }
                if l != j && v > self.y[l] + tol {
                    return Err(Error::Internal(format!("x[{j}][{l}] = {v} above y[{l}]")));
                }
            }
        }
        let open: f64 = self.y.iter().sum();
        if open > inst.k() as f64 + tol {
            return Err(Error::Internal(format!("Σy = {open} exceeds k")));
        }
        let zsum: f64 = self.z.iter().sum();
        if zsum > self.b.powf(inst.q()) * (1.0 + 1e-7) + tol {
            return Err(Error::Internal(format!("Σz = {zsum} exceeds B^q")));
        }
        Ok(())
    }

    /// Builds the integral solution that opens exactly `centers` and assigns
    /// every point to its nearest center (test and gap-construction support).
    pub fn integral(inst: &Instance, centers: &[usize], regime: Regime) -> FractionalSolution {
        let m = inst.m();
        let mut x = vec![0.0; m * m];
        for j in 0..m {
            let c = inst.metric().nearest_in(j, centers);
            x[j * m + c] = 1.0;
        }
        let y: Vec<f64> = (0..m).map(|j| x[j * m + j]).collect();
        let mut sol = FractionalSolution {
            regime,
            x,
            y,
            z: vec![0.0; inst.n()],
            b: 0.0,
            b_lower: 0.0,
            tol: 0.0,
        };
        let z: Vec<f64> = (0..inst.n())
            .map(|i| match regime {
                Regime::PGeQ => pgeq_cost_value(inst, &sol.x, i),
                Regime::PLeQ => natural_cost_value(inst, &sol.x, i),
            })
            .collect();
        let b = z.iter().sum::<f64>().powf(1.0 / inst.q());
        sol.z = z;
        sol.b = b;
        sol.b_lower = b;
        sol
    }
}

/// One instantiated cluster-family constraint `(group, family, kind)` with
/// the cell volumes cached (they depend only on the instance).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyConstraint {
    pub group: usize,
    pub family: ClusterFamily,
    pub kind: ConstraintKind,
    vols: Vec<f64>,
}

impl FamilyConstraint {
    pub fn new(
        inst: &Instance,
        group: usize,
        family: ClusterFamily,
        kind: ConstraintKind,
    ) -> Result<FamilyConstraint> {
        let vols = family
            .members()
            .iter()
            .map(|(_, cell)| inst.vol(group, cell))
            .collect::<Result<Vec<f64>>>()?;
        Ok(FamilyConstraint { group, family, kind, vols })
    }

    pub fn vols(&self) -> &[f64] {
        &self.vols
    }
}

/// An affine underestimator `z_group ≥ rhs + Σ coeffs·x` accumulated by the
/// cutting-plane engine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cut {
    pub group: usize,
    /// Sparse coefficients over the x variables (row-major index).
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    #[serde(skip)]
    stale: usize,
}

impl Cut {
    fn new(group: usize, coeffs: Vec<(usize, f64)>, rhs: f64) -> Cut {
        Cut { group, coeffs, rhs, stale: 0 }
    }
}

/// The growing constraint state of the p ≤ q regime: instantiated family
/// constraints plus the supporting hyperplanes found so far. Cuts are kept
/// across round-or-cut rounds as a warm start.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConstraintPool {
    pub families: Vec<FamilyConstraint>,
    pub cuts: Vec<Cut>,
}

impl ConstraintPool {
    pub fn new() -> ConstraintPool {
        ConstraintPool::default()
    }

    /// Adds a family constraint unless an identical `(group, family, kind)`
    /// triple is already present. Returns whether it was new.
    pub fn add_family(
        &mut self,
        inst: &Instance,
        group: usize,
        family: ClusterFamily,
        kind: ConstraintKind,
    ) -> Result<bool> {
        if self
            .families
            .iter()
            .any(|f| f.group == group && f.kind == kind && f.family == family)
        {
            return Ok(false);
        }
        self.families.push(FamilyConstraint::new(inst, group, family, kind)?);
        Ok(true)
    }

    /// Seeds every `(group, {j}, SumOfPowers)` singleton family; the two
    /// kinds coincide when the family has a single cell.
    pub fn seed_singletons(&mut self, inst: &Instance) -> Result<usize> {
        let mut added = 0;
        for j in 0..inst.m() {
            let fam = ClusterFamily::singletons(&[j]);
            for i in 0..inst.n() {
                if self.add_family(inst, i, fam.clone(), ConstraintKind::SumOfPowers)? {
                    added += 1;
                }
            }
        }
        Ok(added)
    }
}

// ---------------------------------------------------------------------------
// Constraint evaluation. The `*_value` functions take the raw assignment
// matrix so they can be used on solver iterates; the public `eval_*` wrappers
// take a finished solution and enforce the regime.
// ---------------------------------------------------------------------------

const POW_CLAMP: f64 = 1e-15;

/// RHS of the p ≥ q cost constraint for one group.
pub(crate) fn pgeq_cost_value(inst: &Instance, x: &[f64], group: usize) -> f64 {
    let m = inst.m();
    let (p, q) = (inst.p(), inst.q());
    let mut sum = 0.0;
    for j in 0..m {
        let w = inst.weight(group, j);
        if w == 0.0 {
            continue;
        }
        let mut dj = 0.0;
        for l in 0..m {
            let xv = x[j * m + l];
            if xv != 0.0 {
                let d = inst.metric().d(j, l);
                if d != 0.0 {
                    dj += d.powf(q) * xv;
                }
            }
        }
        if dj > 0.0 {
            sum += w * dj.powf(p / q);
        }
    }
    if sum <= 0.0 {
        0.0
    } else {
        sum.powf(q / p)
    }
}

/// Value and subgradient (over x) of the p ≥ q cost constraint.
fn pgeq_cost_cut(inst: &Instance, x: &[f64], group: usize) -> (f64, Vec<(usize, f64)>) {
    let m = inst.m();
    let (p, q) = (inst.p(), inst.q());
    let mut dvals = vec![0.0; m];
    let mut sum = 0.0;
    for j in 0..m {
        let w = inst.weight(group, j);
        if w == 0.0 {
            continue;
        }
        let mut dj = 0.0;
        for l in 0..m {
            let xv = x[j * m + l];
            if xv != 0.0 {
                let d = inst.metric().d(j, l);
                if d != 0.0 {
                    dj += d.powf(q) * xv;
                }
            }
        }
        dvals[j] = dj;
        if dj > 0.0 {
            sum += w * dj.powf(p / q);
        }
    }
    if sum <= 0.0 {
        // The constraint function attains its minimum 0 here; the zero
        // subgradient is valid.
        return (0.0, Vec::new());
    }
    let value = sum.powf(q / p);
    // d value / d x_{jl} = S^{q/p-1} · w_j · D_j^{p/q-1} · d(j,l)^q, with the
    // clamp guarding the q/p-1 < 0 power at S → 0.
    let s_factor = sum.max(POW_CLAMP).powf(q / p - 1.0);
    let mut coeffs = Vec::new();
    for j in 0..m {
        let w = inst.weight(group, j);
        if w == 0.0 {
            continue;
        }
        let dfac = if (p - q).abs() < 1e-15 {
            1.0
        } else if dvals[j] == 0.0 {
            0.0
        } else {
            dvals[j].powf(p / q - 1.0)
        };
        if dfac == 0.0 {
            continue;
        }
        for l in 0..m {
            let d = inst.metric().d(j, l);
            if d != 0.0 {
                coeffs.push((j * m + l, s_factor * w * dfac * d.powf(q)));
            }
        }
    }
    (value, coeffs)
}

/// RHS of the natural p ≤ q cost constraint for one group.
pub(crate) fn natural_cost_value(inst: &Instance, x: &[f64], group: usize) -> f64 {
    let m = inst.m();
    let (p, q) = (inst.p(), inst.q());
    let mut total = 0.0;
    for j in 0..m {
        let w = inst.weight(group, j);
        if w == 0.0 {
            continue;
        }
        for l in 0..m {
            let xv = x[j * m + l];
            if xv != 0.0 {
                let d = inst.metric().d(j, l);
                if d != 0.0 {
                    total += w * d.powf(p) * xv;
                }
            }
        }
    }
    if total <= 0.0 {
        0.0
    } else {
        total.powf(q / p)
    }
}

fn natural_cost_cut(inst: &Instance, x: &[f64], group: usize) -> (f64, Vec<(usize, f64)>) {
    let m = inst.m();
    let (p, q) = (inst.p(), inst.q());
    let mut total = 0.0;
    for j in 0..m {
        let w = inst.weight(group, j);
        if w == 0.0 {
            continue;
        }
        for l in 0..m {
            let xv = x[j * m + l];
            if xv != 0.0 {
                let d = inst.metric().d(j, l);
                if d != 0.0 {
                    total += w * d.powf(p) * xv;
                }
            }
        }
    }
    let value = if total <= 0.0 { 0.0 } else { total.powf(q / p) };
    // (q/p)·T^{q/p-1}; exponent is >= 0 here so T = 0 is harmless unless
    // q = p where the constraint is linear and exact.
    let outer = if (q - p).abs() < 1e-15 {
        1.0
    } else if total <= 0.0 {
        0.0
    } else {
        (q / p) * total.powf(q / p - 1.0)
    };
    let mut coeffs = Vec::new();
    if outer > 0.0 {
        for j in 0..m {
            let w = inst.weight(group, j);
            if w == 0.0 {
                continue;
            }
            for l in 0..m {
                let d = inst.metric().d(j, l);
                if d != 0.0 {
                    coeffs.push((j * m + l, outer * w * d.powf(p)));
                }
            }
        }
    }
    (value, coeffs)
}

/// RHS of one cluster-family constraint given the opening vector.
pub(crate) fn family_value(inst: &Instance, y: &[f64], fam: &FamilyConstraint) -> f64 {
    let (p, q) = (inst.p(), inst.q());
    match fam.kind {
        ConstraintKind::PowerOfSum => {
            let mut h = 0.0;
            for ((_, cell), &vol) in fam.family.members().iter().zip(fam.vols()) {
                if vol == 0.0 {
                    continue;
                }
                let open: f64 = cell.iter().map(|&j| y[j]).sum();
                let slack = (1.0 - open).max(0.0);
                h += slack * vol;
            }
            if h <= 0.0 {
                0.0
            } else {
                h.powf(q / p)
            }
        }
        ConstraintKind::SumOfPowers => {
            let mut total = 0.0;
            for ((_, cell), &vol) in fam.family.members().iter().zip(fam.vols()) {
                if vol == 0.0 {
                    continue;
                }
                let open: f64 = cell.iter().map(|&j| y[j]).sum();
                let slack = (1.0 - open).max(0.0);
                if slack > 0.0 {
                    total += slack * vol.powf(q / p);
                }
            }
            total
        }
    }
}

/// Value and subgradient over the diagonal x entries of one family constraint.
fn family_cut(
    inst: &Instance,
    m: usize,
    y: &[f64],
    fam: &FamilyConstraint,
) -> (f64, Vec<(usize, f64)>) {
    let (p, q) = (inst.p(), inst.q());
    let mut coeffs = Vec::new();
    match fam.kind {
        ConstraintKind::PowerOfSum => {
            let mut h = 0.0;
            let mut active: Vec<(usize, f64)> = Vec::new();
            for ((_, cell), &vol) in fam.family.members().iter().zip(fam.vols()) {
                if vol == 0.0 {
                    continue;
                }
                let open: f64 = cell.iter().map(|&j| y[j]).sum();
                let slack = 1.0 - open;
                if slack > 0.0 {
                    h += slack * vol;
                    for &j in cell {
                        active.push((j, vol));
                    }
                }
            }
            if h <= 0.0 {
                return (0.0, coeffs);
            }
            let value = h.powf(q / p);
            let outer = if (q - p).abs() < 1e-15 {
                1.0
            } else {
                (q / p) * h.max(POW_CLAMP).powf(q / p - 1.0)
            };
            for (j, vol) in active {
                coeffs.push((j * m + j, -outer * vol));
            }
            (value, coeffs)
        }
        ConstraintKind::SumOfPowers => {
            let mut total = 0.0;
            for ((_, cell), &vol) in fam.family.members().iter().zip(fam.vols()) {
                if vol == 0.0 {
                    continue;
                }
                let open: f64 = cell.iter().map(|&j| y[j]).sum();
                let slack = 1.0 - open;
                if slack > 0.0 {
                    let vp = vol.powf(q / p);
                    total += slack * vp;
                    for &j in cell {
                        coeffs.push((j * m + j, -vp));
                    }
                }
            }
            (total, coeffs)
        }
    }
}

fn require_regime(sol: &FractionalSolution, expected: Regime) -> Result<()> {
    if sol.regime != expected {
        return Err(Error::RegimeMismatch { expected, actual: sol.regime });
    }
    Ok(())
}

/// RHS of constraint tying `z_i` to `x` in the p ≥ q relaxation.
pub fn eval_pgeq_cost(inst: &Instance, sol: &FractionalSolution, group: usize) -> Result<f64> {
    require_regime(sol, Regime::PGeQ)?;
    if group >= inst.n() {
        return Err(Error::GroupOutOfRange { index: group, n: inst.n() });
    }
    Ok(pgeq_cost_value(inst, &sol.x, group))
}

/// RHS of the natural cost constraint in the p ≤ q relaxation.
pub fn eval_natural_cost(inst: &Instance, sol: &FractionalSolution, group: usize) -> Result<f64> {
    require_regime(sol, Regime::PLeQ)?;
    if group >= inst.n() {
        return Err(Error::GroupOutOfRange { index: group, n: inst.n() });
    }
    Ok(natural_cost_value(inst, &sol.x, group))
}

/// RHS of a cluster-family constraint in the p ≤ q relaxation.
pub fn eval_family_constraint(
    inst: &Instance,
    sol: &FractionalSolution,
    group: usize,
    family: &ClusterFamily,
    kind: ConstraintKind,
) -> Result<f64> {
    require_regime(sol, Regime::PLeQ)?;
    let fam = FamilyConstraint::new(inst, group, family.clone(), kind)?;
    Ok(family_value(inst, &sol.y, &fam))
}

/// Test-support hooks exposing the raw constraint evaluators.
#[doc(hidden)]
pub mod raw {
    use super::*;

    pub fn pgeq_value(inst: &Instance, x: &[f64], group: usize) -> f64 {
        pgeq_cost_value(inst, x, group)
    }

    pub fn natural_value(inst: &Instance, x: &[f64], group: usize) -> f64 {
        natural_cost_value(inst, x, group)
    }

    /// (value, gradient, rhs) of the pgeq support at `x`.
    pub fn pgeq_cut(inst: &Instance, x: &[f64], group: usize) -> Option<(Vec<(usize, f64)>, f64)> {
        let pool = ConstraintPool::new();
        make_cut(inst, &pool, &ConstraintSource::PgeqCost, x, &[], group)
            .map(|c| (c.coeffs, c.rhs))
    }
}

pub(crate) enum ConstraintSource {
    PgeqCost,
    Natural,
    Family(usize), // index into pool.families
}

/// Every constraint applicable to `group` under `regime`, with its current
/// value and a cut generator.
pub(crate) fn constraint_values(
    inst: &Instance,
    regime: Regime,
    pool: &ConstraintPool,
    x: &[f64],
    y: &[f64],
    group: usize,
) -> Vec<(ConstraintSource, f64)> {
    let mut out = Vec::new();
    match regime {
        Regime::PGeQ => {
            out.push((ConstraintSource::PgeqCost, pgeq_cost_value(inst, x, group)));
        }
        Regime::PLeQ => {
            out.push((ConstraintSource::Natural, natural_cost_value(inst, x, group)));
            for (idx, fam) in pool.families.iter().enumerate() {
                if fam.group == group {
                    out.push((ConstraintSource::Family(idx), family_value(inst, y, fam)));
                }
            }
        }
    }
    out
}

/// Supporting hyperplane of one constraint at the current iterate, expressed
/// as a [`Cut`]. Returns `None` for a vacuous cut (value and gradient zero).
pub(crate) fn make_cut(
    inst: &Instance,
    pool: &ConstraintPool,
    source: &ConstraintSource,
    x: &[f64],
    y: &[f64],
    group: usize,
) -> Option<Cut> {
    let m = inst.m();
    let (value, coeffs) = match source {
        ConstraintSource::PgeqCost => pgeq_cost_cut(inst, x, group),
        ConstraintSource::Natural => natural_cost_cut(inst, x, group),
        ConstraintSource::Family(idx) => family_cut(inst, m, y, &pool.families[*idx]),
    };
    if value <= 0.0 && coeffs.is_empty() {
        return None;
    }
    // z ≥ value + Σ g·(x - x0)  ⇔  z ≥ (value - g·x0) + Σ g·x
    let gx0: f64 = coeffs.iter().map(|&(idx, g)| g * x[idx]).sum();
    Some(Cut::new(group, coeffs, value - gx0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::MetricSpace;

    fn uniform_gap_instance(n: usize, p: f64, q: f64) -> Instance {
        // m = n points at mutual distance 1, group i = everything except i,
        // k = m - 1.
        let metric = MetricSpace::uniform(n, 1.0).unwrap();
        let weights: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Instance::new(metric, weights, n - 1, p, q).unwrap()
    }

    /// The symmetric fractional solution with y ≡ (m-1)/m and the leftover
    /// mass assigned to the next point.
    fn symmetric_spread(inst: &Instance, regime: Regime) -> FractionalSolution {
        let m = inst.m();
        let eps = 1.0 / m as f64;
        let mut x = vec![0.0; m * m];
        for j in 0..m {
            x[j * m + j] = 1.0 - eps;
            x[j * m + (j + 1) % m] = eps;
        }
        let y: Vec<f64> = (0..m).map(|j| x[j * m + j]).collect();
        FractionalSolution {
            regime,
            x,
            y,
            z: vec![0.0; inst.n()],
            b: 0.0,
            b_lower: 0.0,
            tol: 1e-9,
        }
    }

    #[test]
    fn pgeq_cost_on_integral_solution_matches_costs() {
        let inst = uniform_gap_instance(4, 3.0, 1.0);
        let sol = FractionalSolution::integral(&inst, &[0, 1, 2], Regime::PGeQ);
        for i in 0..inst.n() {
            let v = eval_pgeq_cost(&inst, &sol, i).unwrap();
            let centers = crate::instance::CenterSet::new(vec![0, 1, 2]).unwrap();
            let expect = inst.cost_p(&centers, i).unwrap().powf(inst.p()).powf(
                inst.q() / inst.p(),
            );
            assert!((v - expect).abs() <= 1e-9 * expect.max(1.0), "{v} vs {expect}");
        }
    }

    #[test]
    fn pgeq_reduces_to_natural_when_p_equals_q() {
        let inst = uniform_gap_instance(5, 2.0, 2.0);
        let sol = symmetric_spread(&inst, Regime::PGeQ);
        for i in 0..inst.n() {
            let a = pgeq_cost_value(&inst, &sol.x, i);
            let b = natural_cost_value(&inst, &sol.x, i);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pgeq_symmetric_gap_value() {
        // Derived by direct evaluation of the constraint on the symmetric
        // solution: z_i = ((n-1) · (1/n)^{p/q})^{q/p} = (n-1)^{q/p} / n.
        let n = 6;
        let (p, q) = (3.0, 1.5);
        let inst = uniform_gap_instance(n, p, q);
        let sol = symmetric_spread(&inst, Regime::PGeQ);
        let expect = ((n - 1) as f64).powf(q / p) / n as f64;
        for i in 0..inst.n() {
            let v = eval_pgeq_cost(&inst, &sol, i).unwrap();
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
    }

    #[test]
    fn natural_cost_examples() {
        // Figure-style gap fragment: all distances 1, x_{jj'} = eps for the
        // t weighted points of the group gives (eps t)^{q/p}.
        let m = 6;
        let metric = MetricSpace::uniform(m, 1.0).unwrap();
        let t = 3;
        let weights = vec![(0..m).map(|j| if j < t { 1.0 } else { 0.0 }).collect()];
        let inst = Instance::new(metric, weights, m - 1, 1.0, 3.0).unwrap();
        let eps = 0.2;
        let mut x = vec![0.0; m * m];
        for j in 0..m {
            x[j * m + j] = 1.0 - eps;
            x[j * m + ((j + 1) % m)] = eps;
        }
        let y: Vec<f64> = (0..m).map(|j| x[j * m + j]).collect();
        let sol = FractionalSolution {
            regime: Regime::PLeQ,
            x,
            y,
            z: vec![0.0],
            b: 0.0,
            b_lower: 0.0,
            tol: 1e-9,
        };
        let v = eval_natural_cost(&inst, &sol, 0).unwrap();
        let expect = (eps * t as f64).powf(3.0);
        assert!((v - expect).abs() < 1e-12);

        // All mass on self: zero.
        let id = FractionalSolution::integral(&inst, &(0..m).collect::<Vec<_>>(), Regime::PLeQ);
        assert_eq!(eval_natural_cost(&inst, &id, 0).unwrap(), 0.0);
    }

    #[test]
    fn family_constraint_examples() {
        let m = 6;
        let metric = MetricSpace::uniform(m, 1.0).unwrap();
        let t = 3;
        let weights = vec![(0..m).map(|j| if j < t { 1.0 } else { 0.0 }).collect()];
        let inst = Instance::new(metric, weights, m - 1, 1.0, 3.0).unwrap();
        let eps = 0.2;
        let mut x = vec![0.0; m * m];
        for j in 0..m {
            x[j * m + j] = 1.0 - eps;
            x[j * m + ((j + 1) % m)] = eps;
        }
        let y: Vec<f64> = (0..m).map(|j| x[j * m + j]).collect();
        let sol = FractionalSolution {
            regime: Regime::PLeQ,
            x,
            y,
            z: vec![0.0],
            b: 0.0,
            b_lower: 0.0,
            tol: 1e-9,
        };

        // Fully opened cells contribute nothing.
        let closed_fam = ClusterFamily::new(vec![(0, vec![0, 1])]).unwrap();
        let all_open = FractionalSolution::integral(
            &inst,
            &(0..m).collect::<Vec<_>>(),
            Regime::PLeQ,
        );
        let v =
            eval_family_constraint(&inst, &all_open, 0, &closed_fam, ConstraintKind::PowerOfSum)
                .unwrap();
        assert_eq!(v, 0.0);

        // Single-cell families: SumOfPowers dominates PowerOfSum for
        // fractional openings (slack^{q/p} <= slack on [0,1]) and the two
        // coincide on integral ones.
        let single = ClusterFamily::new(vec![(0, vec![0])]).unwrap();
        let a =
            eval_family_constraint(&inst, &sol, 0, &single, ConstraintKind::PowerOfSum).unwrap();
        let b =
            eval_family_constraint(&inst, &sol, 0, &single, ConstraintKind::SumOfPowers).unwrap();
        assert!((a - (eps * 1.0f64).powf(3.0)).abs() < 1e-12);
        assert!((b - eps).abs() < 1e-12);
        assert!(b >= a);
        let closed_all = FractionalSolution::integral(&inst, &[5], Regime::PLeQ);
        let ai = eval_family_constraint(&inst, &closed_all, 0, &single, ConstraintKind::PowerOfSum)
            .unwrap();
        let bi =
            eval_family_constraint(&inst, &closed_all, 0, &single, ConstraintKind::SumOfPowers)
                .unwrap();
        assert!((ai - bi).abs() < 1e-12);

        // Gap construction: singleton cells over the weighted points give
        // eps·t under SumOfPowers, strictly above the natural (eps·t)^{q/p}
        // when eps·t < 1.
        let fam = ClusterFamily::singletons(&[0, 1, 2]);
        let v =
            eval_family_constraint(&inst, &sol, 0, &fam, ConstraintKind::SumOfPowers).unwrap();
        let expect = eps * t as f64;
        assert!((v - expect).abs() < 1e-12);
        let natural = eval_natural_cost(&inst, &sol, 0).unwrap();
        assert!(v > natural);
    }

    #[test]
    fn regime_mismatch_is_reported() {
        let inst = uniform_gap_instance(4, 2.0, 1.0);
        let sol = symmetric_spread(&inst, Regime::PGeQ);
        assert!(matches!(
            eval_natural_cost(&inst, &sol, 0),
            Err(Error::RegimeMismatch { .. })
        ));
    }

    #[test]
    fn constraint_convexity_smoke() {
        // Mixtures never exceed the mixed values: every constraint RHS is
        // convex in (x, y) within its own regime (the p >= q form for
        // constraint (7), the p <= q forms for the rest).
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let inst = uniform_gap_instance(5, 1.0, 2.5);
        let inst_pgeq = uniform_gap_instance(5, 2.5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = inst.m();
        let random_sol = |rng: &mut ChaCha8Rng| -> (Vec<f64>, Vec<f64>) {
            let mut x = vec![0.0; m * m];
            for j in 0..m {
                let mut row: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                let s: f64 = row.iter().sum();
                for v in row.iter_mut() {
                    *v /= s;
                }
                for l in 0..m {
                    x[j * m + l] = row[l];
                }
            }
            let y = (0..m).map(|j| x[j * m + j]).collect();
            (x, y)
        };
        let fam = FamilyConstraint::new(
            &inst,
            0,
            ClusterFamily::new(vec![(0, vec![0, 1]), (2, vec![2])]).unwrap(),
            ConstraintKind::PowerOfSum,
        )
        .unwrap();
        let fam2 = FamilyConstraint::new(
            &inst,
            0,
            ClusterFamily::new(vec![(0, vec![0, 1]), (2, vec![2])]).unwrap(),
            ConstraintKind::SumOfPowers,
        )
        .unwrap();
        for _ in 0..50 {
            let (x1, y1) = random_sol(&mut rng);
            let (x2, y2) = random_sol(&mut rng);
            let lambda: f64 = rng.random();
            let xm: Vec<f64> =
                x1.iter().zip(&x2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let ym: Vec<f64> =
                y1.iter().zip(&y2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            for i in 0..inst.n() {
                let f = |x: &[f64]| natural_cost_value(&inst, x, i);
                assert!(
                    f(&xm) <= lambda * f(&x1) + (1.0 - lambda) * f(&x2) + 1e-9,
                    "natural constraint not convex"
                );
                let g = |x: &[f64]| pgeq_cost_value(&inst_pgeq, x, i);
                assert!(
                    g(&xm) <= lambda * g(&x1) + (1.0 - lambda) * g(&x2) + 1e-9,
                    "pgeq constraint not convex"
                );
            }
            for f in [&fam, &fam2] {
                let v = |y: &[f64]| family_value(&inst, y, f);
                assert!(
                    v(&ym) <= lambda * v(&y1) + (1.0 - lambda) * v(&y2) + 1e-9,
                    "family constraint not convex"
                );
            }
        }
    }

    #[test]
    fn cuts_underestimate_their_constraints() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let inst = uniform_gap_instance(5, 2.0, 1.0);
        let pool = ConstraintPool::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = inst.m();
        for _ in 0..30 {
            let mut x = vec![0.0; m * m];
            for j in 0..m {
                let mut row: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                let s: f64 = row.iter().sum();
                for v in row.iter_mut() {
                    *v /= s;
                }
                for l in 0..m {
                    x[j * m + l] = row[l];
                }
            }
            let y: Vec<f64> = (0..m).map(|j| x[j * m + j]).collect();
            let cut = make_cut(&inst, &pool, &ConstraintSource::PgeqCost, &x, &y, 0).unwrap();
            // At a fresh random point the cut must not exceed the function.
            let mut x2 = vec![0.0; m * m];
            for j in 0..m {
                let mut row: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                let s: f64 = row.iter().sum();
                for v in row.iter_mut() {
                    *v /= s;
                }
                for l in 0..m {
                    x2[j * m + l] = row[l];
                }
            }
            let affine: f64 =
                cut.rhs + cut.coeffs.iter().map(|&(i, c)| c * x2[i]).sum::<f64>();
            let truth = pgeq_cost_value(&inst, &x2, 0);
            assert!(affine <= truth + 1e-9, "cut overestimates: {affine} > {truth}");
        }
    }
}
