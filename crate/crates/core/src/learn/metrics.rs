use serde::Serialize;

use super::Label;

/// Confusion counts with failure as the positive class.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
    pub bac: f64,
    pub recall: f64,
    pub precision: f64,
    /// Some ratio had a zero denominator and was taken as 0.
    pub degenerate: bool,
    pub train_secs: f64,
    pub predict_secs: f64,
}

fn ratio(num: usize, den: usize, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fn_: usize, tn: usize, fp: usize) -> Metrics {
        let mut degenerate = false;
        let tpr = ratio(tp, tp + fn_, &mut degenerate);
        let tnr = ratio(tn, tn + fp, &mut degenerate);
        let precision = ratio(tp, tp + fp, &mut degenerate);
        Metrics {
            tp,
            fn_,
            tn,
            fp,
            bac: 0.5 * (tpr + tnr),
            recall: tpr,
            precision,
            degenerate,
            train_secs: 0.0,
            predict_secs: 0.0,
        }
    }

    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Metrics {
        assert_eq!(truth.len(), predicted.len());
        let (mut tp, mut fn_, mut tn, mut fp) = (0, 0, 0, 0);
        for (t, p) in truth.iter().zip(predicted) {
            match (t.is_failure(), p.is_failure()) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
                (false, true) => fp += 1,
            }
        }
        Metrics::from_counts(tp, fn_, tn, fp)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }
}

/// Arithmetic mean of the ratio fields; counts are summed.
pub fn mean_metrics(all: &[Metrics]) -> Metrics {
    let mut m = Metrics::default();
    if all.is_empty() {
        return m;
    }
    let n = all.len() as f64;
    for a in all {
        m.tp += a.tp;
        m.fn_ += a.fn_;
        m.tn += a.tn;
        m.fp += a.fp;
        m.bac += a.bac / n;
        m.recall += a.recall / n;
        m.precision += a.precision / n;
        m.degenerate |= a.degenerate;
        m.train_secs += a.train_secs / n;
        m.predict_secs += a.predict_secs / n;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bac_formula() {
        let m = Metrics::from_counts(80, 20, 90, 10);
        assert!((m.bac - 0.85).abs() < 1e-12);
        assert!((m.recall - 0.8).abs() < 1e-12);
        assert!((m.precision - 80.0 / 90.0).abs() < 1e-12);
        assert!(!m.degenerate);
    }

    #[test]
    fn bac_symmetric_in_positive_class() {
        let m = Metrics::from_counts(7, 3, 11, 5);
        let swapped = Metrics::from_counts(11, 5, 7, 3);
        assert!((m.bac - swapped.bac).abs() < 1e-12);
    }

    #[test]
    fn empty_class_is_degenerate() {
        let m = Metrics::from_counts(0, 0, 4, 1);
        assert!(m.degenerate);
        assert!((m.bac - 0.4).abs() < 1e-12);
    }
}
