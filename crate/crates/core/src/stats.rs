//! Order statistics shared by the noise reference and distribution summaries.
//!
//! Every quantile in this crate uses the nearest-rank rule on sorted values:
//! the `q`-quantile of `n` values is the `ceil(q * n)`-th smallest (1-based),
//! clamped to at least the first element. No interpolation, so the result is
//! always one of the observed values.

/// Slack applied before `ceil` so that products like `0.1 * 30` which land a
/// hair above an integer in binary floating point do not skip a rank.
const RANK_SLACK: f64 = 1e-9;

/// 0-based index of the nearest-rank `q`-quantile in a sorted slice of `n`.
pub fn nearest_rank_index(n: usize, q: f64) -> usize {
    debug_assert!(n > 0);
    let rank = (q * n as f64 - RANK_SLACK).ceil();
    if rank <= 1.0 {
        0
    } else {
        (rank as usize).min(n) - 1
    }
}

/// Nearest-rank quantile of an already ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    Some(sorted[nearest_rank_index(sorted.len(), q)])
}

/// Nearest-rank quantile of an unsorted slice. Values must be finite.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

/// Checks that `q` is a usable quantile level in the open interval (0, 1).
pub(crate) fn check_open_fraction(name: &str, q: f64) -> crate::Result<()> {
    if q.is_finite() && q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(crate::Error::config(format!("{name} must lie in (0, 1), got {q}")))
    }
}
