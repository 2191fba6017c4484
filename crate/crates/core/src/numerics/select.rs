//! Order-statistic selection without full sorting.
//!
//! [`select_quantile`] runs in expected linear time via quickselect with a
//! median-of-three pivot; if partitions keep degenerating it switches to
//! deterministic median-of-medians pivots, so the worst case stays linear.

use super::NumericsError;

/// Interpolated quantile of `values` at level `tau` in [0, 1].
///
/// Uses the continuous rank `h = tau * (len - 1)`: an integral `h` returns
/// that order statistic, otherwise the two bracketing order statistics are
/// linearly interpolated. In particular `tau = 1/2` yields the middle
/// element for odd counts and the average of the two middle elements for
/// even counts. Rejects empty input and NaN entries; infinite sentinel
/// values are allowed and ordered normally.
pub fn select_quantile(values: &[f64], tau: f64) -> Result<f64, NumericsError> {
    if values.is_empty() {
        return Err(NumericsError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(NumericsError::ProbabilityOutOfRange(tau));
    }
    if let Some(pos) = values.iter().position(|v| v.is_nan()) {
        return Err(NumericsError::NanInput(pos));
    }
    let mut scratch = values.to_vec();
    let h = tau * (values.len() - 1) as f64;
    let lo_rank = h.floor() as usize;
    let frac = h - h.floor();
    if frac == 0.0 {
        return Ok(kth_smallest(&mut scratch, lo_rank));
    }
    let hi = kth_smallest(&mut scratch, lo_rank + 1);
    // After selection every element left of the returned rank is <= it, so
    // the lower bracketing order statistic is the max of that prefix.
    let lo = scratch[..lo_rank + 1]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(lo + frac * (hi - lo))
}

/// Median shorthand: `select_quantile(values, 0.5)`.
pub fn median(values: &[f64]) -> Result<f64, NumericsError> {
    select_quantile(values, 0.5)
}

/// Selects the `k`-th smallest element (0-based), partially reordering
/// `data` so that `data[..k]` holds only smaller-or-equal elements.
///
/// Precondition (checked by callers): no NaN.
fn kth_smallest(data: &mut [f64], k: usize) -> f64 {
    debug_assert!(k < data.len());
    let mut lo = 0usize;
    let mut hi = data.len();
    // Generous depth budget; exhausting it flips to median-of-medians.
    let mut budget = 2 * (usize::BITS - data.len().leading_zeros()) as usize + 8;
    loop {
        let seg_len = hi - lo;
        if seg_len <= 16 {
            insertion_sort(&mut data[lo..hi]);
            return data[k];
        }
        let pivot = if budget == 0 {
            median_of_medians(&mut data[lo..hi])
        } else {
            budget -= 1;
            median_of_three(data[lo], data[lo + seg_len / 2], data[hi - 1])
        };
        let (lt, gt) = partition_three_way(&mut data[lo..hi], pivot);
        if k < lo + lt {
            hi = lo + lt;
        } else if k < lo + gt {
            return pivot; // k falls inside the run of elements equal to pivot
        } else {
            lo += gt;
        }
    }
}

/// Dutch-flag partition by pivot value; returns (start, end) of the equal
/// run relative to `seg`.
fn partition_three_way(seg: &mut [f64], pivot: f64) -> (usize, usize) {
    let mut lt = 0usize;
    let mut i = 0usize;
    let mut gt = seg.len();
    while i < gt {
        if seg[i] < pivot {
            seg.swap(i, lt);
            lt += 1;
            i += 1;
        } else if seg[i] > pivot {
            gt -= 1;
            seg.swap(i, gt);
        } else {
            i += 1;
        }
    }
    (lt, gt)
}

fn median_of_three(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

/// Deterministic pivot with a 30/70 worst-case split guarantee: groups of
/// five are sorted, their medians gathered at the front, and the median of
/// that prefix is selected recursively.
fn median_of_medians(seg: &mut [f64]) -> f64 {
    let mut n_medians = 0usize;
    let mut start = 0usize;
    while start < seg.len() {
        let end = (start + 5).min(seg.len());
        insertion_sort(&mut seg[start..end]);
        let mid = start + (end - start) / 2;
        seg.swap(n_medians, mid);
        n_medians += 1;
        start = end;
    }
    if n_medians == 1 {
        return seg[0];
    }
    // Work on a copy so the recursion does not disturb the caller's segment
    // mid-partition bookkeeping.
    let mut medians = seg[..n_medians].to_vec();
    kth_smallest(&mut medians, n_medians / 2)
}

fn insertion_sort(seg: &mut [f64]) {
    for i in 1..seg.len() {
        let mut j = i;
        while j > 0 && seg[j - 1] > seg[j] {
            seg.swap(j - 1, j);
            j -= 1;
        }
    }
}
