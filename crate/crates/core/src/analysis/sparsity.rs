use serde::Serialize;

use crate::model::ControlSignal;

pub const DEFAULT_THRESHOLD: f64 = 1e-6;

/// Discrete support statistics of a piecewise-constant control.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    /// `h` times the number of slots where any channel exceeds the threshold.
    pub support_measure: f64,
    /// `(T - support_measure) / T`.
    pub hands_off_ratio: f64,
    /// `h` times the active-slot count of each channel (discrete `||u_i||_L0`).
    pub per_channel_measure: Vec<f64>,
    pub active_slots: usize,
    pub threshold: f64,
    pub horizon: f64,
}

pub fn sparsity(s: &ControlSignal, threshold: f64) -> SparsityReport {
    let m = s.inputs();
    let h = s.step();
    let mut per_channel = vec![0usize; m];
    let mut active_slots = 0;
    for k in 0..s.steps() {
        let mut any = false;
        for (i, v) in s.slot(k).iter().enumerate() {
            if v.abs() > threshold {
                per_channel[i] += 1;
                any = true;
            }
        }
        active_slots += usize::from(any);
    }
    let horizon = s.horizon();
    let support_measure = h * active_slots as f64;
    let off_slots = s.steps() - active_slots;
    SparsityReport {
        support_measure,
        hands_off_ratio: off_slots as f64 / s.steps() as f64,
        per_channel_measure: per_channel.iter().map(|&c| h * c as f64).collect(),
        active_slots,
        threshold,
        horizon,
    }
}

/// Weighted discrete `J0 = sum_i lambda_i * h * #{k : |u_i[k]| > threshold}`.
pub fn weighted_l0(s: &ControlSignal, weights: &[f64], threshold: f64) -> f64 {
    sparsity(s, threshold)
        .per_channel_measure
        .iter()
        .zip(weights)
        .map(|(mu, l)| mu * l)
        .sum()
}
