//! Independent reference implementations of the evaluation metrics.

/// Textbook closed-form Pearson coefficient.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Accuracy and support-weighted F1 by enumerating the confusion matrix
/// one cell at a time.
pub fn confusion_oracle(truth: &[bool], pred: &[bool]) -> (f64, f64) {
    let n = truth.len();
    let count = |t: bool, p: bool| truth.iter().zip(pred).filter(|&(&a, &b)| a == t && b == p).count() as f64;
    let (tn, fp, fn_, tp) = (count(false, false), count(false, true), count(true, false), count(true, true));
    let acc = (tp + tn) / n as f64;
    let f1_pos = if tp + fp + fn_ > 0.0 { 2.0 * tp / (2.0 * tp + fp + fn_) } else { 0.0 };
    let f1_neg = if tn + fn_ + fp > 0.0 { 2.0 * tn / (2.0 * tn + fn_ + fp) } else { 0.0 };
    let (pos_support, neg_support) = (tp + fn_, tn + fp);
    (acc, (f1_pos * pos_support + f1_neg * neg_support) / n as f64)
}

pub fn metric_oracle(preds: &[f64], labels: &[f64]) -> [f64; 6] {
    let n = preds.len() as f64;
    let mae = preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / n;
    let t: Vec<bool> = labels.iter().map(|&y| y >= 0.0).collect();
    let p: Vec<bool> = preds.iter().map(|&v| v >= 0.0).collect();
    let (acc_nn, f1_nn) = confusion_oracle(&t, &p);
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 0.0).collect();
    let t: Vec<bool> = keep.iter().map(|&i| labels[i] > 0.0).collect();
    let p: Vec<bool> = keep.iter().map(|&i| preds[i] > 0.0).collect();
    let (acc_p, f1_p) = confusion_oracle(&t, &p);
    [mae, pearson_oracle(preds, labels), acc_nn, acc_p, f1_nn, f1_p]
}

/// Between-video variance computed separately from the report.
pub fn between_oracle(preds: &[f64], groups: &[&str]) -> f64 {
    let n = preds.len() as f64;
    let mean = preds.iter().sum::<f64>() / n;
    let mut ids: Vec<&str> = groups.to_vec();
    ids.sort();
    ids.dedup();
    ids.iter()
        .map(|g| {
            let members: Vec<f64> = preds.iter().zip(groups).filter(|(_, h)| *h == g).map(|(p, _)| *p).collect();
            let m = members.iter().sum::<f64>() / members.len() as f64;
            members.len() as f64 * (m - mean) * (m - mean)
        })
        .sum::<f64>()
        / n
}
