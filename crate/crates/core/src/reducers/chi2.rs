/// Default number of equal-width bins used to discretize a feature column.
pub const DEFAULT_BINS: usize = 10;

/// Pearson chi-square statistic between a discretized feature and the class labels.
///
/// The column is cut into `bins` equal-width bins over its own `[min, max]`; the statistic
/// sums `(observed - expected)^2 / expected` over the non-empty cells of the bin x class
/// table with `expected = row_total * col_total / n`. Constant columns score 0.
pub fn chi2_scores(column: &[f64], labels: &[usize], bins: usize) -> f64 {
    assert_eq!(column.len(), labels.len(), "column and labels differ in length");
    let n = column.len();
    if n == 0 || bins == 0 {
        return 0.0;
    }
    let (lo, hi) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi <= lo {
        return 0.0;
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let width = hi - lo;
    let mut table = vec![0usize; bins * classes];
    for (&v, &y) in column.iter().zip(labels) {
        let b = (((v - lo) / width * bins as f64) as usize).min(bins - 1);
        table[b * classes + y] += 1;
    }
    let mut col_totals = vec![0usize; classes];
    let mut row_totals = vec![0usize; bins];
    for b in 0..bins {
        for c in 0..classes {
            let o = table[b * classes + c];
            row_totals[b] += o;
            col_totals[c] += o;
        }
    }
    let n = n as f64;
    let mut stat = 0.0;
    for b in 0..bins {
        if row_totals[b] == 0 {
            continue;
        }
        for c in 0..classes {
            if col_totals[c] == 0 {
                continue;
            }
            let expected = row_totals[b] as f64 * col_totals[c] as f64 / n;
            let diff = table[b * classes + c] as f64 - expected;
            stat += diff * diff / expected;
        }
    }
    stat
}

/// Ascending indices of the `keep` largest scores; ties go to the lower index.
pub fn chi2_select(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(keep.min(scores.len()));
    order.sort_unstable();
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_association_scores_n() {
        let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
        let column: Vec<f64> = labels.iter().map(|&y| y as f64).collect();
        assert_eq!(chi2_scores(&column, &labels, 10), 20.0);
    }

    #[test]
    fn constant_and_independent_columns_score_zero() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1];
        assert_eq!(chi2_scores(&[3.0; 8], &labels, 10), 0.0);
        let column = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        assert_eq!(chi2_scores(&column, &labels, 10), 0.0);
    }

    #[test]
    fn select_cases() {
        assert_eq!(chi2_select(&[3.0, 1.0, 2.0], 2), vec![0, 2]);
        assert_eq!(chi2_select(&[5.0, 5.0, 5.0], 2), vec![0, 1]);
        assert_eq!(chi2_select(&[1.0], 4), vec![0]);
    }
}
