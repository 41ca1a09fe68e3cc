//! Scalar-loop reference implementations.

use rand::Rng;
use smigraph::nn::{ParamStore, Tensor};

pub fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Adds uniform noise to every parameter so that biases and norms matter.
pub fn jitter(store: &mut ParamStore, scale: f64, rng: &mut impl Rng) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for v in store.value_mut(id).data_mut() {
            *v += rng.random_range(-scale..scale);
        }
    }
}

pub fn affine(x: &[Vec<f64>], w: &Tensor, b: &Tensor) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            (0..w.cols())
                .map(|j| {
                    let mut s = b.get(0, j);
                    for (p, xv) in row.iter().enumerate() {
                        s += xv * w.get(p, j);
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn log_softmax_at(row: &[f64], k: usize) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in row {
        z += (v - max).exp();
    }
    row[k] - max - z.ln()
}

pub fn cross_entropy(rows: &[Vec<f64>], targets: &[usize]) -> f64 {
    let mut s = 0.0;
    for (row, &t) in rows.iter().zip(targets) {
        s -= log_softmax_at(row, t);
    }
    s / rows.len() as f64
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Both contrastive directions, each averaged over fragments.
pub fn fla(fs: &[Vec<f64>], fg: &[Vec<f64>], tau: f64) -> f64 {
    let k = fs.len();
    let mut ls = 0.0;
    let mut lg = 0.0;
    for i in 0..k {
        let pos = cos(&fs[i], &fg[i]) / tau;
        let mut den_s = 0.0;
        let mut den_g = 0.0;
        for j in 0..k {
            den_s += (cos(&fs[i], &fg[j]) / tau).exp();
            den_g += (cos(&fs[j], &fg[i]) / tau).exp();
        }
        ls -= pos - den_s.ln();
        lg -= pos - den_g.ln();
    }
    (ls + lg) / k as f64
}

/// Binary cross-entropy of two-logit rows, `p(match) = softmax[1]`.
pub fn sgm(logits: &[Vec<f64>], labels: &[bool]) -> f64 {
    let mut s = 0.0;
    for (row, &y) in logits.iter().zip(labels) {
        let p = 1.0 / (1.0 + (row[0] - row[1]).exp());
        s -= if y { p.ln() } else { (1.0 - p).ln() };
    }
    s / logits.len() as f64
}

pub fn mse(pred: &[Vec<f64>], target: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for (p, t) in pred.iter().zip(target) {
        for (a, b) in p.iter().zip(t) {
            s += (a - b) * (a - b);
            n += 1;
        }
    }
    s / n as f64
}

pub fn bce_logits(logits: &[Vec<f64>], target: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for (p, t) in logits.iter().zip(target) {
        for (&z, &y) in p.iter().zip(t) {
            let sig = 1.0 / (1.0 + (-z).exp());
            s -= y * sig.ln() + (1.0 - y) * (1.0 - sig).ln();
            n += 1;
        }
    }
    s / n as f64
}

/// Pair-counting ROC-AUC.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Pair-counting concordance index.
pub fn concordance(preds: &[f64], truths: &[f64]) -> f64 {
    let mut good = 0.0;
    let mut pairs = 0.0;
    for i in 0..preds.len() {
        for j in 0..preds.len() {
            if truths[i] < truths[j] {
                pairs += 1.0;
                if preds[i] < preds[j] {
                    good += 1.0;
                } else if preds[i] == preds[j] {
                    good += 0.5;
                }
            }
        }
    }
    good / pairs
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}
