//! Machine-readable report types. One schema serves `--emit deps`,
//! `--emit json`, and the DSE report.

use serde::Serialize;

use crate::depgraph::DepGraph;
use crate::perfmodel::{Estimate, ResourceVec};

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DepsJson {
    pub nodes: Vec<DepNodeJson>,
    pub edges: Vec<DepEdgeJson>,
    pub paths: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DepNodeJson {
    pub name: String,
    pub depth: usize,
    pub reduction_dims: Vec<usize>,
    pub self_deps: Vec<SelfDepJson>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SelfDepJson {
    pub distance: Vec<i64>,
    pub direction: Vec<String>,
    pub known: bool,
    pub accumulate: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DepEdgeJson {
    pub from: String,
    pub to: String,
    pub array: String,
}

pub fn deps_json(g: &DepGraph, paths: &[Vec<usize>]) -> DepsJson {
    DepsJson {
        nodes: g
            .nodes
            .iter()
            .map(|n| DepNodeJson {
                name: n.name.clone(),
                depth: n.depth,
                reduction_dims: n.attrs.reduction_dims.iter().copied().collect(),
                self_deps: n
                    .attrs
                    .self_deps
                    .iter()
                    .map(|d| SelfDepJson {
                        distance: d.distance.entries.clone(),
                        direction: d.direction.entries.iter().map(|e| e.to_string()).collect(),
                        known: d.distance.known,
                        accumulate: d.accumulate,
                    })
                    .collect(),
            })
            .collect(),
        edges: g
            .edges
            .iter()
            .map(|e| DepEdgeJson {
                from: g.nodes[e.producer].name.clone(),
                to: g.nodes[e.consumer].name.clone(),
                array: e.array.clone(),
            })
            .collect(),
        paths: paths
            .iter()
            .map(|p| p.iter().map(|&n| g.nodes[n].name.clone()).collect())
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct ResourcesJson {
    pub dsp: i64,
    pub lut: i64,
    pub ff: i64,
    pub bram: i64,
}

impl From<ResourceVec> for ResourcesJson {
    fn from(r: ResourceVec) -> Self {
        ResourcesJson {
            dsp: r.dsp,
            lut: r.lut,
            ff: r.ff,
            bram: r.bram,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimateJson {
    pub latency: i64,
    pub resources: ResourcesJson,
    pub achieved_ii: Vec<IiJson>,
    pub parallelism: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IiJson {
    #[serde(rename = "loop")]
    pub loop_name: String,
    pub ii: i64,
}

impl From<&Estimate> for EstimateJson {
    fn from(e: &Estimate) -> Self {
        EstimateJson {
            latency: e.latency,
            resources: e.resources.into(),
            achieved_ii: e
                .achieved_ii
                .iter()
                .map(|(l, ii)| IiJson {
                    loop_name: l.clone(),
                    ii: *ii,
                })
                .collect(),
            parallelism: e.parallelism.to_f64(),
        }
    }
}

/// One stage-1 action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum TraceEntry {
    /// A fused node was distributed into per-statement nodes.
    Split { node: String },
    /// Loop levels `a` and `b` of `stmt` were interchanged.
    Interchange { stmt: String, a: String, b: String },
    /// Two adjacent nodes were fused, `second` inside `first`'s loops.
    Fuse { first: String, second: String },
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub node: String,
    pub directives: Vec<String>,
    /// Modeled latency of the targeted node under this step.
    pub node_latency: i64,
    pub estimate: EstimateJson,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeResultJson {
    pub node: String,
    pub tiles: Vec<i64>,
    pub ii: i64,
    pub parallelism: f64,
    pub latency: i64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FinalJson {
    pub latency: i64,
    pub resources: ResourcesJson,
    pub parallelism: f64,
    pub tiles: Vec<Vec<i64>>,
    pub ii: Vec<i64>,
    pub nodes: Vec<NodeResultJson>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DseReport {
    pub stage1_trace: Vec<TraceEntry>,
    pub steps: Vec<StepRecord>,
    #[serde(rename = "final")]
    pub final_: FinalJson,
}

/// Top-level `--emit json` document.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportJson {
    pub function: String,
    pub seed: u64,
    pub deps: Option<DepsJson>,
    pub estimates: Option<FunctionEstimatesJson>,
    pub dse: Option<DseReport>,
    pub hints: Vec<String>,
    pub diagnostics: Vec<String>,
    pub output: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionEstimatesJson {
    pub nodes: Vec<NodeEstimateJson>,
    pub function: EstimateJson,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeEstimateJson {
    pub node: String,
    pub estimate: EstimateJson,
}
