//! Per-cycle metrics rows, run summaries and their CSV/JSON encodings.

use serde::Serialize;

/// One row per request opportunity.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: f64,
    pub est_throughput_bps: f64,
    /// Plan-weighted mean bandwidth of this cycle's requests; 0 when idle.
    pub selected_bandwidth_avg_bps: f64,
    pub occupancy_s: f64,
    pub stall_flag: bool,
    pub total_utility_visible: f64,
    pub per_object_utility: Vec<f64>,
    pub response_latency_s: Option<f64>,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(
        "t,est_throughput_bps,selected_bandwidth_avg_bps,occupancy_s,stall_flag,\
         total_utility_visible,per_object_utility,response_latency_s\n",
    );
    for r in rows {
        let per_obj = r
            .per_object_utility
            .iter()
            .map(|u| format!("{u:.4}"))
            .collect::<Vec<_>>()
            .join(";");
        let latency = r
            .response_latency_s
            .map(|l| format!("{l:.6}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{:.6},{:.1},{:.1},{:.6},{},{:.4},{},{}\n",
            r.t,
            r.est_throughput_bps,
            r.selected_bandwidth_avg_bps,
            r.occupancy_s,
            r.stall_flag as u8,
            r.total_utility_visible,
            per_obj,
            latency
        ));
    }
    out
}

/// One row per request opportunity in the request log.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestLogRow {
    pub i: u64,
    pub t: f64,
    pub c_bps: f64,
    pub budget_bits: f64,
    pub planned_bits: f64,
    pub index_bits: f64,
    pub num_tiles: usize,
    pub num_upgrades: usize,
    pub final_lambda: f64,
}

pub fn request_log_csv(rows: &[RequestLogRow]) -> String {
    let mut out = String::from(
        "i,t_i,c_bps,budget_bits,planned_bits,index_bits,num_tiles,num_upgrades,final_lambda\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.1},{:.1},{:.1},{:.1},{},{},{:.9e}\n",
            r.i,
            r.t,
            r.c_bps,
            r.budget_bits,
            r.planned_bits,
            r.index_bits,
            r.num_tiles,
            r.num_upgrades,
            r.final_lambda
        ));
    }
    out
}

/// One row per (opportunity, object) in the buffer trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferTraceRow {
    pub t: f64,
    pub object: usize,
    pub w_trail: f64,
    pub w_lead: f64,
    pub occupancy_s: f64,
    pub stall_flag: bool,
}

pub fn buffer_trace_csv(rows: &[BufferTraceRow]) -> String {
    let mut out = String::from("t,object,w_trail,w_lead,occupancy_s,stall_flag\n");
    for r in rows {
        out.push_str(&format!(
            "{:.6},{},{:.6},{:.6},{:.6},{}\n",
            r.t, r.object, r.w_trail, r.w_lead, r.occupancy_s, r.stall_flag as u8
        ));
    }
    out
}

/// Whole-run scalars.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub algorithm: String,
    pub duration_user_s: f64,
    pub seed: u64,
    pub cycles: u64,
    pub avg_selected_bandwidth_bps: f64,
    pub stall_count: u64,
    pub stall_seconds: f64,
    pub avg_played_representation_visible: f64,
    /// Split per loop pass when the scenario loops.
    pub per_pass_avg_played_representation_visible: Vec<f64>,
    pub total_delivered_utility: f64,
    pub total_requested_utility: f64,
    pub p95_response_latency_s: Option<f64>,
}

pub fn percentile(values: &mut Vec<f64>, p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let idx = ((values.len() as f64 - 1.0) * p).ceil() as usize;
    Some(values[idx.min(values.len() - 1)])
}
