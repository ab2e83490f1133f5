//! Regression metrics (MSE, MAE, MRE) and held-out evaluation reports.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Target;
use crate::estimator::{EstimatorError, Model, Sample};

/// Targets smaller than this in magnitude are skipped by [`mre`].
pub const MRE_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no samples")]
    EmptyInput,
    #[error("{predicted} predictions vs {targets} targets")]
    LengthMismatch { predicted: usize, targets: usize },
}

fn check(predicted: &[f64], targets: &[f64]) -> Result<(), MetricsError> {
    if predicted.len() != targets.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predicted.len(),
            targets: targets.len(),
        });
    }
    if predicted.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

pub fn mse(predicted: &[f64], targets: &[f64]) -> Result<f64, MetricsError> {
    check(predicted, targets)?;
    let sum: f64 = predicted.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(sum / predicted.len() as f64)
}

pub fn mae(predicted: &[f64], targets: &[f64]) -> Result<f64, MetricsError> {
    check(predicted, targets)?;
    let sum: f64 = predicted.iter().zip(targets).map(|(p, y)| (p - y).abs()).sum();
    Ok(sum / predicted.len() as f64)
}

/// Mean relative error with the number of near-zero targets it skipped.
/// Returns `EmptyInput` when every target is skipped.
pub fn mre(predicted: &[f64], targets: &[f64]) -> Result<(f64, usize), MetricsError> {
    check(predicted, targets)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (p, y) in predicted.iter().zip(targets) {
        if y.abs() < MRE_EPSILON {
            continue;
        }
        sum += ((p - y) / y).abs();
        used += 1;
    }
    if used == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok((sum / used as f64, predicted.len() - used))
}

/// Metrics in the target's native unit (radians for angle) plus, for angle,
/// the same figures in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target: Target,
    pub n: usize,
    pub mse: f64,
    pub mae: f64,
    pub mre: f64,
    pub mre_skipped: usize,
    pub unit: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_deg2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae_deg: Option<f64>,
}

impl EvalReport {
    pub fn from_predictions(target: Target, predicted: &[f64], targets: &[f64]) -> Result<Self, MetricsError> {
        let mse = mse(predicted, targets)?;
        let mae = mae(predicted, targets)?;
        let (mre, mre_skipped) = mre(predicted, targets)?;
        let deg = 180.0 / std::f64::consts::PI;
        let angle = target == Target::Angle;
        Ok(Self {
            target,
            n: predicted.len(),
            mse,
            mae,
            mre,
            mre_skipped,
            unit: if angle { "rad" } else { "unit" }.to_string(),
            mse_deg2: angle.then_some(mse * deg * deg),
            mae_deg: angle.then_some(mae * deg),
        })
    }
}

/// One evaluated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub gt: f64,
    pub pred: f64,
    pub abs_err: f64,
}

/// Runs `model` over already preprocessed samples.
pub fn evaluate(model: &Model, samples: &[Sample]) -> Result<(EvalReport, Vec<PredictionRow>), EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::EmptyDataset(model.target));
    }
    let rows = samples
        .iter()
        .map(|s| {
            let pred = model.network.forward(&s.input)?;
            Ok(PredictionRow {
                id: s.id.clone(),
                gt: s.label,
                pred,
                abs_err: (pred - s.label).abs(),
            })
        })
        .collect::<Result<Vec<_>, EstimatorError>>()?;
    let preds: Vec<f64> = rows.iter().map(|r| r.pred).collect();
    let gts: Vec<f64> = rows.iter().map(|r| r.gt).collect();
    let report = EvalReport::from_predictions(model.target, &preds, &gts)
        .map_err(|_| EstimatorError::EmptyDataset(model.target))?;
    Ok((report, rows))
}

pub fn write_predictions_csv(rows: &[PredictionRow], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "id,gt,pred,abs_err")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.id, r.gt, r.pred, r.abs_err)?;
    }
    Ok(())
}

/// Qualitative one-liner, e.g. `GT: 90.720°, PR: 90.303°, |err| 0.417°`.
pub fn spot_format(target: Target, gt: f64, pred: f64) -> String {
    match target {
        Target::Angle => {
            let (g, p) = (gt.to_degrees(), pred.to_degrees());
            format!("GT: {g:.3}°, PR: {p:.3}°, |err| {:.3}°", (g - p).abs())
        }
        Target::Distance => format!("GT: {gt:.3}, PR: {pred:.3}, |err| {:.3}", (gt - pred).abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_element() {
        assert_eq!(mse(&[2.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[2.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(mre(&[2.0], &[1.0]).unwrap(), (1.0, 0));
        assert!((mre(&[1.1], &[1.0]).unwrap().0 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identity_is_zero() {
        let y = [0.3, 1.2, 2.5];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        assert_eq!(mre(&y, &y).unwrap().0, 0.0);
    }

    #[test]
    fn guarded_targets_are_counted() {
        let (v, skipped) = mre(&[1.0, 2.0, 0.5], &[0.0, 1.0, 1e-9]).unwrap();
        assert_eq!((v, skipped), (1.0, 2));
        assert_eq!(mre(&[1.0], &[0.0]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn input_errors() {
        assert_eq!(mse(&[], &[]), Err(MetricsError::EmptyInput));
        assert_eq!(
            mae(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch {
                predicted: 1,
                targets: 2
            })
        );
    }

    #[test]
    fn spot_format_matches_degrees() {
        let s = spot_format(Target::Angle, 90.720f64.to_radians(), 90.303f64.to_radians());
        assert_eq!(s, "GT: 90.720°, PR: 90.303°, |err| 0.417°");
    }

    #[test]
    fn angle_report_has_degrees() {
        let r = EvalReport::from_predictions(Target::Angle, &[1.0, 2.0], &[1.5, 2.0]).unwrap();
        assert!((r.mae_deg.unwrap() - 0.25f64.to_degrees()).abs() < 1e-12);
        let d = EvalReport::from_predictions(Target::Distance, &[0.5], &[0.4]).unwrap();
        assert!(d.mae_deg.is_none());
    }
}
