//! Structured-text (JSON) documents and loaders. Every document carries a
//! `format_version`; loaders reject anything failing the type invariants.

use crate::algorithms::Solution;
use crate::error::Error;
use crate::instance::{Instance, MetricSpace};
use crate::Result;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

/// Instance file: either an explicit distance matrix or 1-D coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub format_version: u32,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub k: usize,
    pub p: f64,
    pub q: f64,
}

impl InstanceDoc {
    pub fn from_instance(inst: &Instance) -> InstanceDoc {
        InstanceDoc {
            format_version: FORMAT_VERSION,
            m: inst.m(),
            dist: Some(inst.metric().rows()),
            coords: None,
            weights: inst.weights().to_vec(),
            k: inst.k(),
            p: inst.p(),
            q: inst.q(),
        }
    }

    pub fn into_instance(self) -> Result<Instance> {
        let metric = match (&self.dist, &self.coords) {
            (Some(rows), None) => {
                if rows.len() != self.m {
                    return Err(Error::Parse(format!(
                        "m = {} but dist has {} rows",
                        self.m,
                        rows.len()
                    )));
                }
                MetricSpace::validate(rows)?
            }
            (None, Some(coords)) => {
                if coords.len() != self.m {
                    return Err(Error::Parse(format!(
                        "m = {} but coords has {} entries",
                        self.m,
                        coords.len()
                    )));
                }
                MetricSpace::from_line(coords)?
            }
            _ => {
                return Err(Error::Parse(
                    "exactly one of `dist` and `coords` must be present".into(),
                ))
            }
        };
        Instance::new(metric, self.weights, self.k, self.p, self.q)
    }
}

/// Fractional solution document emitted by `relax`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxDoc {
    pub format_version: u32,
    pub regime: crate::relax::Regime,
    /// m rows of m assignment values.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub b: f64,
    pub b_lower: f64,
    pub tol: f64,
    /// Per-round objective values (round 0 = natural relaxation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<RoundDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub pool_families: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundDoc {
    pub b: f64,
    pub b_lower: f64,
    pub families_added: usize,
}

impl RelaxDoc {
    pub fn from_solution(
        inst: &Instance,
        sol: &crate::relax::FractionalSolution,
        rounds: Option<Vec<RoundDoc>>,
        converged: Option<bool>,
        pool_families: usize,
    ) -> RelaxDoc {
        let m = inst.m();
        RelaxDoc {
            format_version: FORMAT_VERSION,
            regime: sol.regime,
            x: (0..m).map(|j| sol.x[j * m..(j + 1) * m].to_vec()).collect(),
            y: sol.y.clone(),
            z: sol.z.clone(),
            b: sol.b,
            b_lower: sol.b_lower,
            tol: sol.tol,
            rounds,
            converged,
            pool_families,
        }
    }

    pub fn into_solution(self) -> crate::relax::FractionalSolution {
        crate::relax::FractionalSolution {
            regime: self.regime,
            x: self.x.concat(),
            y: self.y,
            z: self.z,
            b: self.b,
            b_lower: self.b_lower,
            tol: self.tol,
        }
    }
}

/// Solution document emitted by `solve`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub format_version: u32,
    pub instance_hash: String,
    #[serde(flatten)]
    pub solution: Solution,
}

/// Reduction document emitted by `reduce`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReduceDoc {
    pub format_version: u32,
    pub instance_hash: String,
    pub reduced: crate::reduction::ReducedInstance,
    pub report: crate::reduction::PropertyReport,
}

/// Min s-Union document emitted by `gen-hardness`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MsuDoc {
    pub format_version: u32,
    pub msu: crate::hardness::MinSUnionInstance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<crate::hardness::DensePlant>,
}

/// Run metadata logged (to stderr) next to every emitted payload. The
/// payload files themselves are bit-reproducible; the wall time lives only
/// here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_hash: String,
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub wall_millis: u128,
    pub tool_version: String,
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)).map_err(|e| Error::Io(e.to_string()))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let doc: InstanceDoc = load_json(path)?;
    doc.into_instance()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_doc_roundtrip() {
        let inst = crate::corpus::line4_instance(2.0, 1.0, 2);
        let doc = InstanceDoc::from_instance(&inst);
        let text = to_json_string(&doc);
        let parsed: InstanceDoc = serde_json::from_str(&text).unwrap();
        let back = parsed.into_instance().unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn coords_form_is_accepted() {
        let doc = InstanceDoc {
            format_version: FORMAT_VERSION,
            m: 4,
            dist: None,
            coords: Some(vec![0.0, 1.0, 3.0, 7.0]),
            weights: vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]],
            k: 2,
            p: 2.0,
            q: 1.0,
        };
        let inst = doc.into_instance().unwrap();
        assert_eq!(inst.metric().d(0, 3), 7.0);
    }

    #[test]
    fn loader_rejects_invalid_documents() {
        // Both forms present.
        let doc = InstanceDoc {
            format_version: FORMAT_VERSION,
            m: 2,
            dist: Some(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            coords: Some(vec![0.0, 1.0]),
            weights: vec![vec![1.0, 1.0]],
            k: 1,
            p: 1.0,
            q: 1.0,
        };
        assert!(doc.into_instance().is_err());

        // Triangle violation inside the matrix.
        let doc = InstanceDoc {
            format_version: FORMAT_VERSION,
            m: 3,
            dist: Some(vec![
                vec![0.0, 1.0, 10.0],
                vec![1.0, 0.0, 1.0],
                vec![10.0, 1.0, 0.0],
            ]),
            coords: None,
            weights: vec![vec![1.0, 1.0, 1.0]],
            k: 1,
            p: 1.0,
            q: 1.0,
        };
        assert!(matches!(doc.into_instance(), Err(Error::TriangleViolation { .. })));

        // Zero-weight group.
        let doc = InstanceDoc {
            format_version: FORMAT_VERSION,
            m: 2,
            dist: Some(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            coords: None,
            weights: vec![vec![0.0, 0.0]],
            k: 1,
            p: 1.0,
            q: 1.0,
        };
        assert!(matches!(doc.into_instance(), Err(Error::ZeroWeightGroup { .. })));
    }
}
