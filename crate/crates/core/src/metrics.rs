//! Segmentation quality metrics.
//!
//! Pixel counts come from binarizing the prediction at a threshold (strictly
//! greater is foreground) and the ground truth at 0.5. A ratio whose
//! denominator is zero is 0, except that an empty prediction against an
//! empty ground truth scores 1 on every metric.

use crate::error::Result;
use crate::image::GrayImage;
use crate::morph::{classic_skeleton, StructuringElement};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub f1: f64,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub cl_dice: f64,
    pub counts: Confusion,
}

pub fn confusion(pred: &GrayImage, gt: &GrayImage, threshold: f64) -> Result<Confusion> {
    pred.ensure_same_shape(gt)?;
    let mut c = Confusion::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p > threshold, g > 0.5) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64, both_empty: bool) -> f64 {
    if den > 0 {
        num as f64 / den as f64
    } else if both_empty {
        1.0
    } else {
        0.0
    }
}

/// F1, IoU, precision and recall from pixel counts. `cl_dice` is left at 0.
pub fn scores(c: Confusion) -> MetricsReport {
    let both_empty = c.tp + c.fp + c.fn_ == 0;
    MetricsReport {
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, both_empty),
        iou: ratio(c.tp, c.tp + c.fp + c.fn_, both_empty),
        precision: ratio(c.tp, c.tp + c.fp, both_empty),
        recall: ratio(c.tp, c.tp + c.fn_, both_empty),
        cl_dice: 0.0,
        counts: c,
    }
}

/// Harmonic mean of the topology precision `<gt, S(pred)> / |S(pred)|_1`
/// and sensitivity `<S(gt), pred> / |S(gt)|_1`, with classical skeletons.
pub fn cl_dice(pred: &GrayImage, gt: &GrayImage, b: &StructuringElement, levels: usize) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    let sp = classic_skeleton(pred, b, levels);
    let sg = classic_skeleton(gt, b, levels);
    let (np, ng) = (sp.sum(), sg.sum());
    if np == 0.0 && ng == 0.0 {
        return Ok(1.0);
    }
    let t_prec = if np > 0.0 { gt.dot(&sp)? / np } else { 0.0 };
    let t_sens = if ng > 0.0 { sg.dot(pred)? / ng } else { 0.0 };
    if t_prec + t_sens == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * t_prec * t_sens / (t_prec + t_sens))
}

/// All metrics for one prediction / ground-truth pair.
pub fn evaluate(
    pred: &GrayImage,
    gt: &GrayImage,
    threshold: f64,
    b: &StructuringElement,
    levels: usize,
) -> Result<MetricsReport> {
    let mut report = scores(confusion(pred, gt, threshold)?);
    report.cl_dice = cl_dice(pred, gt, b, levels)?;
    Ok(report)
}
