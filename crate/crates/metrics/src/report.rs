use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use shiftfield_core::{warp_mask, DisplacementField, LabelSet, LabelVolume};

use crate::{hd95, max_error, mse, pct_nonpositive_jacobian, JacobianCount, Result};

/// Per-case evaluation row: field errors over brain and edema, worst-case
/// error, warped-segmentation HD95, folding percentage and optional stage
/// timings (seconds). Timings are kept out of serialized reports unless a
/// caller fills them, so deterministic pipelines stay byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub mse_brain: f64,
    pub mse_edema: f64,
    pub max_error: f64,
    pub hd95: f64,
    pub pct_nonpos_jacobian: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub elapsed: BTreeMap<String, f64>,
}

/// Assembles the full evaluation row for one case.
///
/// MSE and max error run over the brain mask (CSF, parenchyma, edema, tumor
/// core), edema MSE over the edema label only; HD95 compares the brain
/// segmentation warped by the predicted field against the one warped by the
/// ground truth; folding statistics use the predicted field over the brain
/// mask with the non-positive counting mode.
pub fn evaluate_case(
    pred: &DisplacementField,
    gt: &DisplacementField,
    labels: &LabelVolume,
    elapsed: BTreeMap<String, f64>,
) -> Result<CaseReport> {
    let brain = labels.mask(LabelSet::BRAIN);
    let edema = labels.mask(LabelSet::EDEMA);

    let mse_brain = mse(pred, gt, &brain)?;
    let mse_edema = mse(pred, gt, &edema)?;
    let max_err = max_error(pred, gt, &brain)?;

    let warped_pred = warp_mask(labels, pred)?;
    let warped_gt = warp_mask(labels, gt)?;
    let hd = hd95(
        &warped_pred.mask(LabelSet::BRAIN),
        &warped_gt.mask(LabelSet::BRAIN),
        labels.grid(),
    )?;

    let pct = pct_nonpositive_jacobian(pred, &brain, JacobianCount::NonPositive)?;

    Ok(CaseReport {
        mse_brain,
        mse_edema,
        max_error: max_err,
        hd95: hd,
        pct_nonpos_jacobian: pct,
        elapsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use shiftfield_core::GridSpec;

    fn toy_labels() -> LabelVolume {
        let g = GridSpec::isotropic([10, 10, 10]).unwrap();
        let mut labels = vec![0u8; g.voxel_count()];
        for idx in 0..g.voxel_count() {
            let [i, j, k] = g.unravel(idx);
            let r = (((i as f64 - 4.5).powi(2) + (j as f64 - 4.5).powi(2)
                + (k as f64 - 4.5).powi(2)) as f64)
                .sqrt();
            labels[idx] = if r < 2.0 {
                5
            } else if r < 2.8 {
                4
            } else if r < 4.0 {
                3
            } else if r < 4.5 {
                2
            } else {
                0
            };
        }
        LabelVolume::new(g, labels).unwrap()
    }

    #[test]
    fn perfect_prediction_zeroes_every_metric() {
        let labels = toy_labels();
        let g = labels.grid().clone();
        let gt = DisplacementField::zeros(g);
        let report = evaluate_case(&gt, &gt, &labels, BTreeMap::new()).unwrap();
        assert_eq!(report.mse_brain, 0.0);
        assert_eq!(report.mse_edema, 0.0);
        assert_eq!(report.max_error, 0.0);
        assert_eq!(report.hd95, 0.0);
        assert_eq!(report.pct_nonpos_jacobian, 0.0);
    }

    #[test]
    fn constructed_fields_match_component_oracles() {
        let labels = toy_labels();
        let g = labels.grid().clone();
        let mut v = vec![[0.0; 3]; g.voxel_count()];
        for idx in 0..g.voxel_count() {
            let [i, _, _] = g.unravel(idx);
            v[idx] = [0.1 * i as f64, 0.0, 0.0];
        }
        let pred = DisplacementField::new(g.clone(), v).unwrap();
        let gt = DisplacementField::zeros(g);
        let report = evaluate_case(&pred, &gt, &labels, BTreeMap::new()).unwrap();

        let brain = labels.mask(LabelSet::BRAIN);
        assert_eq!(report.mse_brain, mse(&pred, &gt, &brain).unwrap());
        assert_eq!(report.max_error, max_error(&pred, &gt, &brain).unwrap());
        assert_eq!(
            report.pct_nonpos_jacobian,
            pct_nonpositive_jacobian(&pred, &brain, JacobianCount::NonPositive).unwrap()
        );
        // expanding field: no folding
        assert_eq!(report.pct_nonpos_jacobian, 0.0);
    }

    #[test]
    fn report_round_trips_through_json() {
        let labels = toy_labels();
        let g = labels.grid().clone();
        let gt = DisplacementField::zeros(g);
        let mut elapsed = BTreeMap::new();
        elapsed.insert("interpolate".to_string(), 0.125);
        let report = evaluate_case(&gt, &gt, &labels, elapsed).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: CaseReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }
}
