use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricError> {
    if a == 0 {
        return Err(MetricError::DegenerateInput("no samples"));
    }
    if a != b {
        return Err(MetricError::DegenerateInput("length mismatch"));
    }
    Ok(())
}

/// Ranks starting at 1 with tied values sharing their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve as the Mann–Whitney statistic; score ties
/// between a positive and a negative count one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    check_lengths(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricError::DegenerateInput("NaN score"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::DegenerateInput("ROC-AUC needs both classes"));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64, MetricError> {
    check_lengths(predictions.len(), truths.len())?;
    Ok(predictions.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / predictions.len() as f64)
}

pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64, MetricError> {
    mse(predictions, truths).map(f64::sqrt)
}

pub fn accuracy(predictions: &[usize], truths: &[usize]) -> Result<f64, MetricError> {
    check_lengths(predictions.len(), truths.len())?;
    let hits = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predictions.len() as f64)
}

struct Fenwick(Vec<u64>);

impl Fenwick {
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted indices `< i`.
    fn prefix(&self, mut i: usize) -> u64 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

fn dense_ranks(values: &[f64]) -> (Vec<usize>, usize) {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let ranks = values
        .iter()
        .map(|v| sorted.binary_search_by(|s| s.total_cmp(v)).expect("present"))
        .collect();
    (ranks, sorted.len())
}

/// Fraction of pairs with distinct truths whose predictions are ordered the
/// same way; prediction ties count one half. `O(n log n)`.
pub fn concordance_index(predictions: &[f64], truths: &[f64]) -> Result<f64, MetricError> {
    check_lengths(predictions.len(), truths.len())?;
    if predictions.iter().chain(truths).any(|v| v.is_nan()) {
        return Err(MetricError::DegenerateInput("NaN value"));
    }
    let (pred_rank, levels) = dense_ranks(predictions);
    let mut order: Vec<usize> = (0..truths.len()).collect();
    order.sort_by(|&a, &b| truths[a].total_cmp(&truths[b]));
    let mut tree = Fenwick(vec![0; levels + 1]);
    let (mut concordant, mut ties, mut pairs) = (0u64, 0u64, 0u64);
    let mut inserted = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && truths[order[j + 1]] == truths[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            let r = pred_rank[k];
            let below = tree.prefix(r);
            let equal = tree.prefix(r + 1) - below;
            concordant += below;
            ties += equal;
            pairs += inserted;
        }
        for &k in &order[i..=j] {
            tree.add(pred_rank[k]);
        }
        inserted += (j - i + 1) as u64;
        i = j + 1;
    }
    if pairs == 0 {
        return Err(MetricError::DegenerateInput("concordance needs two distinct truths"));
    }
    Ok((concordant as f64 + 0.5 * ties as f64) / pairs as f64)
}
