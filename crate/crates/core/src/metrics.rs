//! Evaluation metrics: macro-averaged F1, accuracy and Kendall's tau-b.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Unweighted mean of per-class F1 over `n_classes` classes. Classes that
/// never occur in either list contribute an F1 of zero.
pub fn macro_avg_f1(gold: &[usize], pred: &[usize], n_classes: usize) -> Result<f64> {
    let per_class = per_class_f1(gold, pred, n_classes)?;
    Ok(per_class.iter().sum::<f64>() / n_classes as f64)
}

pub fn per_class_f1(gold: &[usize], pred: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    check_lengths(gold.len(), pred.len())?;
    if n_classes == 0 {
        return Err(Error::invalid("at least one class is required"));
    }
    let mut tp = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    let mut actual = vec![0usize; n_classes];
    for (&g, &p) in gold.iter().zip(pred) {
        if g >= n_classes || p >= n_classes {
            return Err(Error::invalid(format!(
                "class index {} out of range for {n_classes} classes",
                g.max(p)
            )));
        }
        actual[g] += 1;
        predicted[p] += 1;
        if g == p {
            tp[g] += 1;
        }
    }
    Ok((0..n_classes)
        .map(|k| {
            let precision = ratio(tp[k], predicted[k]);
            let recall = ratio(tp[k], actual[k]);
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect())
}

pub fn accuracy(gold: &[usize], pred: &[usize]) -> Result<f64> {
    check_lengths(gold.len(), pred.len())?;
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / gold.len() as f64)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    if a == 0 {
        return Err(Error::invalid("metrics need at least one item"));
    }
    Ok(())
}

/// Kendall's tau-b with tie correction, in O(n log n).
///
/// Pairs are sorted by `(x, y)`; ties in `x` and joint ties are counted on
/// the sorted run, then a merge sort over `y` counts the discordant pairs as
/// inversions.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("kendall tau needs at least two observations"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("kendall tau is undefined for NaN inputs"));
    }
    // +0.0 folds negative zero onto zero so equal values compare equal
    let mut pairs: Vec<(f64, f64)> = x.iter().zip(y).map(|(&a, &b)| (a + 0.0, b + 0.0)).collect();
    pairs.sort_by(|a, b| cmp(a.0, b.0).then(cmp(a.1, b.1)));

    let total = pairs_of(n as u64);
    let mut tied_x = 0u64;
    let mut tied_xy = 0u64;
    let mut run_x = 1u64;
    let mut run_xy = 1u64;
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            run_x += 1;
            if w[0].1 == w[1].1 {
                run_xy += 1;
            } else {
                tied_xy += pairs_of(run_xy);
                run_xy = 1;
            }
        } else {
            tied_x += pairs_of(run_x);
            tied_xy += pairs_of(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += pairs_of(run_x);
    tied_xy += pairs_of(run_xy);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut tied_y = 0u64;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            tied_y += pairs_of(run_y);
            run_y = 1;
        }
    }
    tied_y += pairs_of(run_y);

    let untied_x = total - tied_x;
    let untied_y = total - tied_y;
    if untied_x == 0 || untied_y == 0 {
        return Err(Error::Undefined(
            "kendall tau is undefined when either argument is constant".into(),
        ));
    }
    let concordant_minus_discordant =
        total as i128 - tied_x as i128 - tied_y as i128 + tied_xy as i128 - 2 * swaps as i128;
    let tau = concordant_minus_discordant as f64 / ((untied_x as f64) * (untied_y as f64)).sqrt();
    Ok(tau.clamp(-1.0, 1.0))
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("NaN filtered above")
}

fn pairs_of(n: u64) -> u64 {
    n * (n.saturating_sub(1)) / 2
}

/// Stable merge sort returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (lb, rb) = buf.split_at_mut(mid);
        merge_count(left, lb) + merge_count(right, rb)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}
