//! Saliency evaluation: MAE, max F-measure, weighted F-measure, S-measure,
//! E-measure, and sample-weighted aggregation across datasets.

mod emeasure;
mod fmeasure;
mod smeasure;
mod threshold;
mod weighted_f;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use emeasure::{e_measure, EMeasure};
pub use fmeasure::{mae, max_f, MaxF, PrCurve, BETA2};
pub use smeasure::s_measure;
pub use threshold::{threshold, THRESHOLDS};
pub use weighted_f::{nearest_foreground, weighted_f};

use crate::datakit::{list_stems, read_gray, Plane};
use crate::error::{Error, Result};

/// Guard added to every denominator.
pub const EPS: f64 = 1e-20;

pub(crate) fn check_pair(pred: &Plane, gt: &Plane) -> Result<()> {
    if pred.size() != gt.size() {
        return Err(Error::shape("prediction vs mask", [pred.height(), pred.width()], [gt.height(), gt.width()]));
    }
    Ok(())
}

pub(crate) fn is_degenerate(gt: &Plane) -> bool {
    let fg = gt.data().iter().filter(|&&v| v > 0.5).count();
    fg == 0 || fg == gt.len()
}

/// All scores of one prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageScores {
    pub f_curve: Vec<f64>,
    pub max_f: f64,
    pub weighted_f: f64,
    pub s_measure: f64,
    pub e_curve: Vec<f64>,
    pub e_measure: f64,
    pub mae: f64,
    pub degenerate: bool,
}

/// Scores `pred` against a binary mask, first resizing it bilinearly to the
/// mask resolution when the sizes differ.
pub fn score_image(pred: &Plane, gt: &Plane) -> Result<ImageScores> {
    let resized;
    let pred = if pred.size() == gt.size() {
        pred
    } else {
        resized = pred.resize_bilinear(gt.height(), gt.width());
        &resized
    };
    let f = max_f(pred, gt)?;
    let (wf, _) = weighted_f(pred, gt)?;
    let e = e_measure(pred, gt)?;
    Ok(ImageScores {
        max_f: f.value,
        f_curve: f.curve,
        weighted_f: wf,
        s_measure: s_measure(pred, gt)?,
        e_measure: e.value,
        e_curve: e.curve,
        mae: mae(pred, gt)?,
        degenerate: f.degenerate,
    })
}

/// Dataset-level scores; column names mirror the usual benchmark tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub count: usize,
    pub max_f: f64,
    pub weighted_f: f64,
    pub s_measure: f64,
    pub e_measure: f64,
    pub mae: f64,
}

/// Accumulates per-image scores in sample-id order.
#[derive(Default)]
pub struct DatasetScores {
    images: BTreeMap<String, ImageScores>,
}

impl DatasetScores {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, scores: ImageScores) {
        self.images.insert(id.into(), scores);
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Max-F and E-measure take the maximum of the mean curve over images;
    /// the other scores are plain means.
    pub fn report(&self, dataset: &str) -> Result<MetricReport> {
        if self.images.is_empty() {
            return Err(Error::Dataset(format!("`{dataset}` has no scored images")));
        }
        let n = self.images.len() as f64;
        let mut f_curve = vec![0.0; THRESHOLDS];
        let mut e_curve = vec![0.0; THRESHOLDS];
        let (mut wf, mut s, mut m) = (0.0, 0.0, 0.0);
        for sc in self.images.values() {
            for k in 0..THRESHOLDS {
                f_curve[k] += sc.f_curve[k];
                e_curve[k] += sc.e_curve[k];
            }
            wf += sc.weighted_f;
            s += sc.s_measure;
            m += sc.mae;
        }
        let peak = |c: &[f64]| c.iter().map(|v| v / n).fold(f64::NEG_INFINITY, f64::max);
        Ok(MetricReport {
            dataset: dataset.to_string(),
            count: self.images.len(),
            max_f: peak(&f_curve),
            weighted_f: wf / n,
            s_measure: s / n,
            e_measure: peak(&e_curve),
            mae: m / n,
        })
    }
}

/// Sample-count weighted mean of every score.
pub fn ave_metric(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::invalid("cannot average an empty list of reports"));
    }
    if let Some(r) = reports.iter().find(|r| r.count == 0) {
        return Err(Error::invalid(format!("report `{}` has zero samples", r.dataset)));
    }
    // canonical order so the floating-point sum ignores input order
    let mut sorted: Vec<&MetricReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.dataset.cmp(&b.dataset).then(a.count.cmp(&b.count)));
    let total: usize = sorted.iter().map(|r| r.count).sum();
    let avg = |f: fn(&MetricReport) -> f64| sorted.iter().map(|r| r.count as f64 * f(r)).sum::<f64>() / total as f64;
    Ok(MetricReport {
        dataset: "Ave-Metric".into(),
        count: total,
        max_f: avg(|r| r.max_f),
        weighted_f: avg(|r| r.weighted_f),
        s_measure: avg(|r| r.s_measure),
        e_measure: avg(|r| r.e_measure),
        mae: avg(|r| r.mae),
    })
}

/// Scores every `<stem>.png` prediction against the matching mask.
pub fn evaluate_dirs(dataset: &str, pred_dir: &Path, gt_dir: &Path) -> Result<MetricReport> {
    let preds = list_stems(pred_dir, &["png"])?;
    let gts = list_stems(gt_dir, &["png"])?;
    let unpaired: Vec<&str> = preds
        .keys()
        .filter(|k| !gts.contains_key(*k))
        .chain(gts.keys().filter(|k| !preds.contains_key(*k)))
        .map(String::as_str)
        .collect();
    if !unpaired.is_empty() {
        return Err(Error::Dataset(format!("`{dataset}` has unpaired stems: {}", unpaired.join(", "))));
    }
    let mut scores = DatasetScores::new();
    for (stem, p) in &preds {
        let pred = read_gray(p)?;
        let gt = read_gray(&gts[stem])?.map(|v| if v >= 0.5 { 1.0 } else { 0.0 });
        scores.insert(stem.clone(), score_image(&pred, &gt)?);
    }
    scores.report(dataset)
}

pub const CSV_HEADER: &str = "dataset,count,F_max,F_w,S,E_max,MAE";

/// Per-dataset rows followed by the aggregate row.
pub fn reports_csv(reports: &[MetricReport]) -> Result<String> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let ave = ave_metric(reports)?;
    for r in reports.iter().chain(std::iter::once(&ave)) {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.dataset, r.count, r.max_f, r.weighted_f, r.s_measure, r.e_measure, r.mae
        )
        .expect("write to string");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(name: &str, count: usize, v: f64) -> MetricReport {
        MetricReport { dataset: name.into(), count, max_f: v, weighted_f: v, s_measure: v, e_measure: v, mae: v }
    }

    #[test]
    fn ave_metric_weights_by_count() {
        let a = ave_metric(&[report("a", 100, 0.8), report("b", 300, 0.9)]).unwrap();
        assert_eq!(a.count, 400);
        assert_eq!(a.mae, (100.0 * 0.8 + 300.0 * 0.9) / 400.0);
        let b = ave_metric(&[report("b", 300, 0.9), report("a", 100, 0.8)]).unwrap();
        assert_eq!(a, b);
        assert!(ave_metric(&[]).is_err());
    }

    #[test]
    fn perfect_prediction_scores() {
        let gt = Plane::from_fn(12, 12, |y, x| ((3..9).contains(&y) && (2..7).contains(&x)) as u8 as f64);
        let s = score_image(&gt, &gt).unwrap();
        assert_eq!((s.max_f, s.mae), (1.0, 0.0));
        for v in [s.weighted_f, s.s_measure, s.e_measure] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn predictions_are_resized_to_the_mask() {
        let gt = Plane::from_fn(8, 8, |y, _| (y < 4) as u8 as f64);
        let small = Plane::from_fn(4, 4, |y, _| (y < 2) as u8 as f64);
        assert!(score_image(&small, &gt).is_ok());
    }

    #[test]
    fn csv_has_aggregate_row() {
        let csv = reports_csv(&[report("a", 1, 1.0), report("b", 1, 1.0)]).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().starts_with("Ave-Metric,2,"));
    }
}
