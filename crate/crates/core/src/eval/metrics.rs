use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Zero when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Zero when there are no positive labels.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Result {
    pub f1: f64,
    pub confusion: Confusion,
    /// Precision or recall had a zero denominator, so F1 fell back to 0.
    pub degenerate: bool,
}

impl From<Confusion> for F1Result {
    fn from(c: Confusion) -> Self {
        Self {
            f1: c.f1(),
            confusion: c,
            degenerate: c.tp + c.fp == 0 || c.tp + c.fn_ == 0,
        }
    }
}

fn check_lengths(probs: &[f64], labels: &[bool]) -> Result<(), EvalError> {
    if probs.len() != labels.len() {
        return Err(EvalError::Shape(format!(
            "{} scores for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.iter().any(|p| p.is_nan()) {
        return Err(EvalError::Argument("scores contain NaN".into()));
    }
    Ok(())
}

/// Confusion counts and F1, predicting speech where `prob >= threshold`.
pub fn f1_score(probs: &[f64], labels: &[bool], threshold: f64) -> Result<F1Result, EvalError> {
    check_lengths(probs, labels)?;
    let mut c = Confusion::default();
    for (&p, &l) in probs.iter().zip(labels) {
        match (p >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c.into())
}

/// Area under the ROC curve via the Mann-Whitney statistic with midranks
/// for tied scores, which equals the trapezoidal area.
pub fn roc_auc(probs: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check_lengths(probs, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::Argument(format!(
            "AUC needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && probs[idx[j + 1]] == probs[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepResult {
    pub threshold: f64,
    pub f1: F1Result,
}

/// Threshold maximizing F1. Candidates sit below the smallest score and
/// midway between consecutive distinct scores, so each one splits the data
/// exactly like a threshold at the next score up. Ties go to the lowest
/// candidate.
pub fn threshold_sweep(probs: &[f64], labels: &[bool]) -> Result<SweepResult, EvalError> {
    check_lengths(probs, labels)?;
    if probs.is_empty() {
        return Err(EvalError::Argument("threshold sweep over no scores".into()));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let pos = labels.iter().filter(|&&l| l).count();
    // Everything predicted positive, then move one distinct value at a time.
    let mut c = Confusion {
        tp: pos,
        fp: labels.len() - pos,
        tn: 0,
        fn_: 0,
    };
    let lowest = probs[order[0]];
    let mut best = SweepResult {
        threshold: if lowest > 0.0 { lowest / 2.0 } else { lowest - 1e-6 },
        f1: c.into(),
    };
    let mut i = 0;
    while i < order.len() {
        let v = probs[order[i]];
        while i < order.len() && probs[order[i]] == v {
            if labels[order[i]] {
                c.tp -= 1;
                c.fn_ += 1;
            } else {
                c.fp -= 1;
                c.tn += 1;
            }
            i += 1;
        }
        if i == order.len() {
            break;
        }
        let cand: F1Result = c.into();
        if cand.f1 > best.f1.f1 {
            best = SweepResult {
                threshold: (v + probs[order[i]]) / 2.0,
                f1: cand,
            };
        }
    }
    Ok(best)
}
