//! Forward values of the composite training loss.
//!
//! `L = L^p + L^r + L^t` with
//!
//! * `L^p = λ1·CCE + λ2·Dice(BD) + λ3·Dice(CB)` on the ternary head,
//! * `L^r = λ4·MAE + λ5·MSE(Sobel gradients)` on the distance maps, both
//!   weighted by the weight mask,
//! * `L^t = λ6·(mask-weighted CCE + pixel-wise Tversky)` on the type head.
//!
//! Sums are accumulated in `f64`. No gradients are computed.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::grid::Grid;
use crate::postprocess::{correlate5, SobelBank};
use crate::tensor::Tensor;

pub const PROB_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
    pub lambda6: f64,
    pub tversky_alpha: f64,
    pub epsilon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 2.0,
            lambda2: 1.0,
            lambda3: 2.0,
            lambda4: 2.0,
            lambda5: 2.0,
            lambda6: 5.0,
            tversky_alpha: 0.7,
            epsilon: 1e-6,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.tversky_alpha > 0.0 && self.tversky_alpha < 1.0) {
            return arg_err(format!("tversky alpha {} outside (0, 1)", self.tversky_alpha));
        }
        if !(self.epsilon > 0.0) {
            return arg_err("epsilon must be positive");
        }
        Ok(())
    }
}

fn check_pair(gt: &Tensor, pred: &Tensor) -> Result<()> {
    gt.ensure_same_shape(pred, "ground truth vs prediction")
}

fn check_mask(t: &Tensor, mask: &Grid<f32>) -> Result<f64> {
    if mask.shape() != (t.height(), t.width()) {
        return shape_err(format!(
            "weight mask {:?} vs tensor {:?}",
            mask.shape(),
            t.shape()
        ));
    }
    let sum: f64 = mask.as_slice().iter().map(|&m| m as f64).sum();
    if !(sum > 0.0) {
        return arg_err("weight mask sums to zero");
    }
    Ok(sum)
}

/// Categorical cross-entropy averaged over pixels; predictions are floored
/// at 1e-7 before the log.
pub fn cce(gt: &Tensor, pred: &Tensor) -> Result<f64> {
    check_pair(gt, pred)?;
    let total: f64 = gt
        .as_slice()
        .iter()
        .zip(pred.as_slice())
        .filter(|(&y, _)| y != 0.0)
        .map(|(&y, &p)| -(y as f64) * (p as f64).max(PROB_FLOOR).ln())
        .sum();
    Ok(total / gt.pixels() as f64)
}

/// Cross-entropy with each pixel weighted by `mask`, normalized by the mask
/// sum.
pub fn weighted_cce(gt: &Tensor, pred: &Tensor, mask: &Grid<f32>) -> Result<f64> {
    check_pair(gt, pred)?;
    let norm = check_mask(gt, mask)?;
    let mut total = 0.0;
    for (i, &m) in mask.as_slice().iter().enumerate() {
        let px: f64 = gt
            .pixel(i)
            .iter()
            .zip(pred.pixel(i))
            .filter(|(&y, _)| y != 0.0)
            .map(|(&y, &p)| -(y as f64) * (p as f64).max(PROB_FLOOR).ln())
            .sum();
        total += m as f64 * px;
    }
    Ok(total / norm)
}

/// `1 − (2·Σ y·ŷ + ε) / (Σ y + Σ ŷ + ε)` for channel `k`.
pub fn dice_loss_class(gt: &Tensor, pred: &Tensor, k: usize, epsilon: f64) -> Result<f64> {
    check_pair(gt, pred)?;
    if k >= gt.channels() {
        return arg_err(format!("channel {k} out of range for {} channels", gt.channels()));
    }
    let (mut inter, mut sum_gt, mut sum_pred) = (0.0, 0.0, 0.0);
    for i in 0..gt.pixels() {
        let y = gt.pixel(i)[k] as f64;
        let p = pred.pixel(i)[k] as f64;
        inter += y * p;
        sum_gt += y;
        sum_pred += p;
    }
    Ok(1.0 - (2.0 * inter + epsilon) / (sum_gt + sum_pred + epsilon))
}

/// Ternary-head loss; channels ordered (BD, CB, BG).
pub fn loss_p(gt: &Tensor, pred: &Tensor, w: &LossWeights) -> Result<f64> {
    if gt.channels() != 3 {
        return shape_err(format!("ternary loss needs 3 channels, got {}", gt.channels()));
    }
    Ok(w.lambda1 * cce(gt, pred)?
        + w.lambda2 * dice_loss_class(gt, pred, 0, w.epsilon)?
        + w.lambda3 * dice_loss_class(gt, pred, 1, w.epsilon)?)
}

/// `Σ |gt − pred|·mask / (R·Σ mask)`.
pub fn masked_mae(gt: &Tensor, pred: &Tensor, mask: &Grid<f32>) -> Result<f64> {
    check_pair(gt, pred)?;
    let norm = check_mask(gt, mask)? * gt.channels() as f64;
    let mut total = 0.0;
    for (i, &m) in mask.as_slice().iter().enumerate() {
        let px: f64 = gt
            .pixel(i)
            .iter()
            .zip(pred.pixel(i))
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .sum();
        total += m as f64 * px;
    }
    Ok(total / norm)
}

/// Squared difference of the oriented Sobel derivatives of each channel,
/// masked and normalized like [`masked_mae`].
pub fn masked_gradient_mse(gt: &Tensor, pred: &Tensor, mask: &Grid<f32>) -> Result<f64> {
    check_pair(gt, pred)?;
    if gt.channels() != 4 {
        return shape_err(format!("distance loss needs 4 channels, got {}", gt.channels()));
    }
    let norm = check_mask(gt, mask)? * 4.0;
    let bank = SobelBank::new();
    let mut total = 0.0;
    for k in 0..4 {
        let g = correlate5(&gt.channel(k).map(|&v| v as f64), bank.kernel(k));
        let p = correlate5(&pred.channel(k).map(|&v| v as f64), bank.kernel(k));
        for ((&a, &b), &m) in g.as_slice().iter().zip(p.as_slice()).zip(mask.as_slice()) {
            total += (a - b).powi(2) * m as f64;
        }
    }
    Ok(total / norm)
}

pub fn loss_r(gt: &Tensor, pred: &Tensor, mask: &Grid<f32>, w: &LossWeights) -> Result<f64> {
    Ok(w.lambda4 * masked_mae(gt, pred, mask)? + w.lambda5 * masked_gradient_mse(gt, pred, mask)?)
}

/// Pixel-wise Tversky loss averaged over pixels and channels.
pub fn tversky_pixelwise(gt: &Tensor, pred: &Tensor, alpha: f64, epsilon: f64) -> Result<f64> {
    check_pair(gt, pred)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return arg_err(format!("tversky alpha {alpha} outside (0, 1)"));
    }
    let total: f64 = gt
        .as_slice()
        .iter()
        .zip(pred.as_slice())
        .map(|(&y, &p)| {
            let (y, p) = (y as f64, p as f64);
            let tp = y * p;
            1.0 - (tp + epsilon)
                / (tp + alpha * y * (1.0 - p) + (1.0 - alpha) * (1.0 - y) * p + epsilon)
        })
        .sum();
    Ok(total / gt.as_slice().len() as f64)
}

/// Type-head loss.
pub fn loss_t(gt: &Tensor, pred: &Tensor, mask: &Grid<f32>, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    Ok(w.lambda6
        * (weighted_cce(gt, pred, mask)? + tversky_pixelwise(gt, pred, w.tversky_alpha, w.epsilon)?))
}

/// Ground truth and prediction for one image.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    pub gt_prob: &'a Tensor,
    pub pred_prob: &'a Tensor,
    pub gt_dist: &'a Tensor,
    pub pred_dist: &'a Tensor,
    pub mask: &'a Grid<f32>,
    /// `(gt, pred)` type tensors when the type head is present.
    pub types: Option<(&'a Tensor, &'a Tensor)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub loss_p: f64,
    pub loss_r: f64,
    pub loss_t: Option<f64>,
    pub total: f64,
}

pub fn total_loss(inputs: &LossInputs<'_>, w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    let lp = loss_p(inputs.gt_prob, inputs.pred_prob, w)?;
    let lr = loss_r(inputs.gt_dist, inputs.pred_dist, inputs.mask, w)?;
    let lt = inputs
        .types
        .map(|(g, p)| loss_t(g, p, inputs.mask, w))
        .transpose()?;
    Ok(LossBreakdown {
        loss_p: lp,
        loss_r: lr,
        loss_t: lt,
        total: lp + lr + lt.unwrap_or(0.0),
    })
}
