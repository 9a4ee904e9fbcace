//! Machine-readable run reports.
//!
//! Reports serialize deterministically: object keys are sorted, floats are
//! printed in scientific notation with 17 significant digits (round-trip
//! exact for `f64`), and no map iteration order leaks through. Two runs with
//! the same flags and seed produce byte-identical reports except for the
//! `wall_time_s` field. The shape is pinned by `schema/report.schema.json`
//! at the repository root.

use serde::Serialize;

use crate::solver::{DetectionResult, SolverConfig, SolverEvent};

/// Everything a `detect` run reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Configuration echo, including the input path and format.
    pub config: ConfigEcho,
    /// Dataset summary after ingestion.
    pub dataset: DatasetSummary,
    /// Original node labels in internal id order (the remap table).
    pub nodes: Vec<String>,
    /// Community of each node, aligned with `nodes`.
    pub communities: Vec<u32>,
    pub num_communities: usize,
    pub modularity: f64,
    /// NMI against the reference labels, when provided.
    pub nmi: Option<f64>,
    /// AMI against the reference labels, when provided.
    pub ami: Option<f64>,
    pub lambda_path: Vec<f64>,
    pub round_objectives: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub events: Vec<SolverEvent>,
    pub row_dominance_min: f64,
    pub row_dominance_mean: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub input: String,
    pub truth: Option<String>,
    pub q: usize,
    pub lambda0: f64,
    pub lambda_growth: f64,
    pub mu_scale: f64,
    pub sigma: f64,
    pub beta: f64,
    pub safeguard_period: usize,
    pub max_outer_iter: usize,
    pub grad_tol: Option<f64>,
    pub seed: u64,
    pub restarts: usize,
    pub format: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub nodes: usize,
    pub edges: usize,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

impl RunReport {
    pub fn new(
        config: ConfigEcho,
        dataset: DatasetSummary,
        node_labels: Vec<String>,
        result: &DetectionResult,
        nmi: Option<f64>,
        ami: Option<f64>,
    ) -> Self {
        let norm = result.partition.normalized();
        let dominance = &result.row_dominance;
        let mean = if dominance.is_empty() {
            0.0
        } else {
            dominance.iter().sum::<f64>() / dominance.len() as f64
        };
        RunReport {
            config,
            dataset,
            nodes: node_labels,
            communities: norm.labels().to_vec(),
            num_communities: norm.num_communities(),
            modularity: result.modularity,
            nmi,
            ami,
            lambda_path: result.lambda_path.clone(),
            round_objectives: result.round_objectives.clone(),
            objective_trace: result.objective_trace.clone(),
            iterations: result.iterations,
            events: result.events.clone(),
            row_dominance_min: dominance.iter().cloned().fold(f64::INFINITY, f64::min),
            row_dominance_mean: mean,
            wall_time_s: result.wall_time.as_secs_f64(),
        }
    }

    /// Canonical JSON: sorted keys, fixed float format, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }

    /// The `(node, community)` pairs as tab-separated lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (node, community) in self.nodes.iter().zip(&self.communities) {
            out.push_str(node);
            out.push('\t');
            out.push_str(&community.to_string());
            out.push('\n');
        }
        out
    }
}

impl ConfigEcho {
    pub fn from_solver_config(
        config: &SolverConfig,
        input: String,
        truth: Option<String>,
        format: String,
    ) -> Self {
        ConfigEcho {
            input,
            truth,
            q: config.q,
            lambda0: config.lambda0,
            lambda_growth: config.lambda_growth,
            mu_scale: config.mu_scale,
            sigma: config.sigma,
            beta: config.beta,
            safeguard_period: config.safeguard_period,
            max_outer_iter: config.max_outer_iter,
            grad_tol: config.grad_tol,
            seed: config.seed,
            restarts: config.restarts,
            format,
        }
    }
}

/// Serializes any value to canonical JSON: keys sorted (via the
/// `serde_json::Value` detour, whose object map is a `BTreeMap`), floats in
/// `{:.16e}` form, two-space indentation, one trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("report types serialize infallibly");
    let mut out = String::new();
    write_value(&value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(value: &serde_json::Value, indent: usize, out: &mut String) {
    match value {
        serde_json::Value::Null => out.push_str("null"),
        serde_json::Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    out.push_str(&format!("{f:.16e}"));
                } else {
                    out.push_str(&n.to_string());
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        serde_json::Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings serialize"));
        }
        serde_json::Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                write_value(item, indent + 1, out);
            }
            out.push('\n');
            push_indent(indent, out);
            out.push(']');
        }
        serde_json::Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(key).expect("keys serialize"));
                out.push_str(": ");
                write_value(item, indent + 1, out);
            }
            out.push('\n');
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn push_indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}
