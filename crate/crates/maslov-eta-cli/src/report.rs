//! Report types and their JSON/CSV renderings.
//!
//! Reports are deterministic functions of the scenario and seed; wall-clock
//! timings are kept in a separate [`Timings`] record so that reports stay
//! byte-identical across runs and thread counts.

use maslov_eta::eta_engine::EtaMeta;
use maslov_eta::Complex64;
use serde::{Deserialize, Serialize};

use crate::scenario::{Scenario, SweepAxis};

/// Full result of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Schema version of the report layout.
    pub schema_version: u32,
    /// The scenario as run (after command-line overrides).
    pub scenario: Scenario,
    /// Per-instance results (one instance unless the family is a corpus).
    pub instances: Vec<InstanceReport>,
    /// Verified identities.
    pub identities: Vec<Identity>,
    /// Sweep table, for convergence runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepReport>,
    /// True when every identity met its tolerance.
    pub passed: bool,
}

/// Results for one family instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    /// Instance index.
    pub index: usize,
    /// Half-dimension `d`.
    pub d: usize,
    /// Number of grid nodes.
    pub nodes: usize,
    /// Maslov index (constant over the grid).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<i64>,
    /// Eta-forms of the cyclic pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairReport>,
    /// `∫ ch τ` in degree 2, when the base is two-dimensional.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ch_tau_deg2: Option<Complex64>,
    /// Circle-eta sum per node (gluing task).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circle_eta_sum: Option<Vec<f64>>,
}

/// Eta-form summary of one ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    /// `(i, j)` for `η(P_i, P_j)`.
    pub pair: [usize; 2],
    /// Degree-0 part per node.
    pub deg0: Vec<f64>,
    /// Degree-0 part by numerical heat-trace quadrature, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deg0_numeric: Option<Vec<f64>>,
    /// Integral of the degree-2 part over a two-dimensional base.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deg2_integral: Option<Complex64>,
    /// Truncation metadata.
    pub meta: EtaMeta,
}

/// How a discrepancy is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `|lhs − rhs|`.
    Absolute,
    /// `|lhs − rhs| / |lhs|`.
    Relative,
}

/// One verified identity `lhs = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identity {
    /// Identity name.
    pub name: String,
    /// Instance index.
    pub instance: usize,
    /// Grid node of the worst deviation, for pointwise identities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<Vec<usize>>,
    /// Left-hand side.
    pub lhs: Complex64,
    /// Right-hand side.
    pub rhs: Complex64,
    /// `|lhs − rhs|`.
    pub abs_discrepancy: f64,
    /// `|lhs − rhs| / |lhs|` (absent when `lhs` vanishes).
    pub rel_discrepancy: Option<f64>,
    /// Compared quantity.
    pub metric: Metric,
    /// Tolerance.
    pub tolerance: f64,
    /// Whether the tolerance was met.
    pub passed: bool,
}

impl Identity {
    /// Build an identity; the relative metric falls back to the absolute one
    /// when `|lhs| < 1e−8`.
    pub fn new(name: &str, instance: usize, node: Option<Vec<usize>>, lhs: Complex64, rhs: Complex64, metric: Metric, tolerance: f64) -> Self {
        let abs = (lhs - rhs).norm();
        let rel = if lhs.norm() > 1e-8 { Some(abs / lhs.norm()) } else { None };
        let (metric, value) = match (metric, rel) {
            (Metric::Relative, Some(r)) => (Metric::Relative, r),
            _ => (Metric::Absolute, abs),
        };
        Identity { name: name.into(), instance, node, lhs, rhs, abs_discrepancy: abs, rel_discrepancy: rel, metric, tolerance, passed: value < tolerance }
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Parameter value.
    pub value: f64,
    /// Reference side.
    pub lhs: Complex64,
    /// Computed side.
    pub rhs: Complex64,
    /// `|lhs − rhs|`.
    pub abs_discrepancy: f64,
    /// `|lhs − rhs| / |lhs|`.
    pub rel_discrepancy: Option<f64>,
}

/// Discrepancy-versus-parameter table with trend diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Swept parameter.
    pub axis: SweepAxis,
    /// What `lhs` and `rhs` are.
    pub quantity: String,
    /// Rows in sweep order.
    pub rows: Vec<SweepRow>,
    /// Whether the discrepancy is non-increasing along the sweep.
    pub monotone: bool,
    /// Empirical orders `ln(e_i/e_{i+1}) / |ln(v_{i+1}/v_i)|` of the discrepancy.
    pub orders: Vec<Option<f64>>,
    /// Empirical orders from successive differences of `rhs`
    /// (self-convergence, no reference value needed).
    pub self_orders: Vec<Option<f64>>,
}

/// Wall-clock timings of a run, kept apart from the report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// `(stage, seconds)` in execution order.
    pub stages: Vec<(String, f64)>,
    /// Total seconds.
    pub total: f64,
}

fn order(e0: f64, e1: f64, v0: f64, v1: f64) -> Option<f64> {
    let r = (v1 / v0).ln().abs();
    if e0 > 0.0 && e1 > 0.0 && r > 0.0 && e0.is_finite() && e1.is_finite() {
        Some((e0 / e1).ln() / r)
    } else {
        None
    }
}

impl SweepReport {
    /// Assemble a sweep table and its trend diagnostics.
    pub fn new(axis: SweepAxis, quantity: &str, rows: Vec<SweepRow>) -> Self {
        let e: Vec<f64> = rows.iter().map(|r| r.abs_discrepancy).collect();
        let v: Vec<f64> = rows.iter().map(|r| r.value).collect();
        let monotone = e.windows(2).all(|w| w[1] <= w[0]);
        let orders = (0..rows.len().saturating_sub(1)).map(|i| order(e[i], e[i + 1], v[i], v[i + 1])).collect();
        let diffs: Vec<f64> = rows.windows(2).map(|w| (w[1].rhs - w[0].rhs).norm()).collect();
        let self_orders = (0..diffs.len().saturating_sub(1)).map(|i| order(diffs[i], diffs[i + 1], v[i + 1], v[i + 2])).collect();
        SweepReport { axis, quantity: quantity.into(), rows, monotone, orders, self_orders }
    }
}

impl Report {
    /// Pretty JSON rendering (deterministic field order).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises to JSON");
        s.push('\n');
        s
    }

    /// CSV rendering of the identities table.
    pub fn identities_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "instance", "node", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_discrepancy", "rel_discrepancy", "metric", "tolerance", "passed"])
            .expect("in-memory CSV");
        for id in &self.identities {
            let node = id.node.as_ref().map(|n| n.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")).unwrap_or_default();
            w.write_record([
                id.name.clone(),
                id.instance.to_string(),
                node,
                fmt(id.lhs.re),
                fmt(id.lhs.im),
                fmt(id.rhs.re),
                fmt(id.rhs.im),
                fmt(id.abs_discrepancy),
                id.rel_discrepancy.map(fmt).unwrap_or_default(),
                format!("{:?}", id.metric).to_lowercase(),
                fmt(id.tolerance),
                id.passed.to_string(),
            ])
            .expect("in-memory CSV");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
    }

    /// CSV rendering of the sweep table, if any.
    pub fn sweep_csv(&self) -> Option<String> {
        let sw = self.sweep.as_ref()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["value", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_discrepancy", "rel_discrepancy", "order"]).expect("in-memory CSV");
        for (i, r) in sw.rows.iter().enumerate() {
            let ord = if i == 0 { String::new() } else { sw.orders[i - 1].map(fmt).unwrap_or_default() };
            w.write_record([
                fmt(r.value),
                fmt(r.lhs.re),
                fmt(r.lhs.im),
                fmt(r.rhs.re),
                fmt(r.rhs.im),
                fmt(r.abs_discrepancy),
                r.rel_discrepancy.map(fmt).unwrap_or_default(),
                ord,
            ])
            .expect("in-memory CSV");
        }
        Some(String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8"))
    }
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}
