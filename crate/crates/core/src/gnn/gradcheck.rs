//! Central finite-difference verification of the analytic gradient.

use super::model::GnnModel;
use crate::error::{Error, Result};
use crate::graph::AnswerGraph;
use crate::matching::GoldAnswer;
use crate::sr::StructuredRepresentation;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub tensor: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Max over parameters of `|analytic - numeric| / max(1, |analytic|)`.
    pub max_rel_error: f64,
    pub checked: usize,
    pub groups: Vec<GroupError>,
}

/// Checks every parameter of `model` (or an evenly strided subset of at
/// most `max_per_tensor` entries per tensor) against central differences.
pub fn gradient_check(
    model: &GnnModel,
    graph: &AnswerGraph,
    sr: &StructuredRepresentation,
    golds: &[GoldAnswer],
    max_per_tensor: Option<usize>,
) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_gradients(graph, sr, golds)?.ok_or_else(|| {
        Error::Config("gradient check needs a gold answer inside the graph".into())
    })?;

    let mut probe = model.clone();
    let mut loss_at = |idx: usize, value: f64| -> Result<f64> {
        let orig = probe.params.as_slice()[idx];
        probe.params.as_mut_slice()[idx] = value;
        let fwd = probe.forward(graph, sr)?;
        let loss = probe
            .loss(&fwd.scores, graph, golds)
            .expect("gold present")
            .total;
        probe.params.as_mut_slice()[idx] = orig;
        Ok(loss)
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        groups: Vec::new(),
    };
    for spec in model.params.tensor_specs() {
        let n = spec.len();
        let stride = match max_per_tensor {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        let mut group = GroupError {
            tensor: spec.name.clone(),
            checked: 0,
            max_rel_error: 0.0,
        };
        for idx in (spec.offset..spec.offset + n).step_by(stride) {
            let x = model.params.as_slice()[idx];
            let numeric =
                (loss_at(idx, x + FD_STEP)? - loss_at(idx, x - FD_STEP)?) / (2.0 * FD_STEP);
            let a = analytic.as_slice()[idx];
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            group.max_rel_error = group.max_rel_error.max(rel);
            group.checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(group.max_rel_error);
        report.checked += group.checked;
        report.groups.push(group);
    }
    Ok(report)
}
