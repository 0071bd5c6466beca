use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Set intersection over union; two empty sequences score 1.
pub fn action_iou<T: Ord>(gold: &[T], pred: &[T]) -> f64 {
    let g: BTreeSet<&T> = gold.iter().collect();
    let p: BTreeSet<&T> = pred.iter().collect();
    let union = g.union(&p).count();
    if union == 0 {
        return 1.0;
    }
    g.intersection(&p).count() as f64 / union as f64
}

/// Unit-cost edit distance, two-row dynamic programme.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance over the longer length; two empty sequences score 0.
pub fn norm_levenshtein<T: PartialEq>(gold: &[T], pred: &[T]) -> f64 {
    let longest = gold.len().max(pred.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(gold, pred) as f64 / longest as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub variant: String,
    pub fraction: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub iou: f64,
    pub levenshtein: f64,
    pub success_rate: f64,
    pub n: usize,
}

pub const REPORT_CSV_HEADER: &str = "variant,fraction,seed,acc,iou,leven,sr,n";

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            self.variant, self.fraction, self.seed, self.accuracy, self.iou, self.levenshtein, self.success_rate, self.n
        )
    }
}

pub fn reports_csv(reports: &[MetricsReport]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn iou_examples() {
        assert_eq!(action_iou(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert!((action_iou(&['a', 'b'], &['b', 'c']) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(action_iou(&[1, 2], &[3, 4]), 0.0);
        assert_eq!(action_iou::<u8>(&[], &[]), 1.0);
        assert_eq!(action_iou(&[1, 1, 2], &[2, 1]), 1.0);
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(norm_levenshtein(&[1, 2], &[1, 2]), 0.0);
        assert_eq!(norm_levenshtein(&['a'], &['a', 'b']), 0.5);
        assert_eq!(norm_levenshtein(&[1, 2, 3], &[4, 5, 6]), 1.0);
        assert_eq!(norm_levenshtein::<u8>(&[], &[]), 0.0);
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_one_iff_same_sets(
            a in proptest::collection::vec(0u8..8, 0..10),
            b in proptest::collection::vec(0u8..8, 0..10),
        ) {
            let x = action_iou(&a, &b);
            prop_assert_eq!(x, action_iou(&b, &a));
            let sa: BTreeSet<_> = a.iter().collect();
            let sb: BTreeSet<_> = b.iter().collect();
            prop_assert_eq!(x == 1.0, sa == sb);
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn normalized_distance_in_unit_range(
            a in proptest::collection::vec(0u8..5, 0..12),
            b in proptest::collection::vec(0u8..5, 0..12),
        ) {
            let d = norm_levenshtein(&a, &b);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, norm_levenshtein(&b, &a));
        }
    }
}
