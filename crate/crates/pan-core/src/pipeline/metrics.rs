//! Strict accuracy and the two loose F1 scores over predicted/gold type
//! sets.
//!
//! Loose macro averages precision and recall per mention first and takes the
//! F1 of the averages; loose micro pools intersection/predicted/gold counts
//! over all mentions before forming precision and recall. F1 is defined as 0
//! when precision and recall are both 0.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::hierarchy::TypeId;

/// Per-mention scoring detail behind the aggregate report.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionScore {
    pub precision: f64,
    pub recall: f64,
    pub exact: bool,
    pub intersection: usize,
    pub predicted: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub strict_acc: f64,
    pub loose_macro_f1: f64,
    pub loose_micro_f1: f64,
    pub mention_count: usize,
    pub per_mention: Vec<MentionScore>,
    pub pooled_intersection: usize,
    pub pooled_predicted: usize,
    pub pooled_gold: usize,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    /// Score `(gold, predicted)` set pairs, one per mention. An empty slice
    /// yields the all-zero report.
    pub fn from_pairs(pairs: &[(BTreeSet<TypeId>, BTreeSet<TypeId>)]) -> EvalReport {
        let mut per_mention = Vec::with_capacity(pairs.len());
        let mut exact = 0usize;
        let (mut pi, mut pp, mut pg) = (0usize, 0usize, 0usize);
        let (mut sum_p, mut sum_r) = (0.0, 0.0);
        for (gold, pred) in pairs {
            let intersection = gold.intersection(pred).count();
            let score = MentionScore {
                precision: ratio(intersection, pred.len()),
                recall: ratio(intersection, gold.len()),
                exact: gold == pred,
                intersection,
                predicted: pred.len(),
                gold: gold.len(),
            };
            exact += score.exact as usize;
            pi += intersection;
            pp += pred.len();
            pg += gold.len();
            sum_p += score.precision;
            sum_r += score.recall;
            per_mention.push(score);
        }
        let n = pairs.len();
        let macro_f1 = if n == 0 {
            0.0
        } else {
            f1(sum_p / n as f64, sum_r / n as f64)
        };
        EvalReport {
            strict_acc: ratio(exact, n),
            loose_macro_f1: macro_f1,
            loose_micro_f1: f1(ratio(pi, pp), ratio(pi, pg)),
            mention_count: n,
            per_mention,
            pooled_intersection: pi,
            pooled_predicted: pp,
            pooled_gold: pg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn set(ids: &[usize]) -> BTreeSet<TypeId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn exact_match_scores_one_everywhere() {
        let r = EvalReport::from_pairs(&[(set(&[0, 1]), set(&[0, 1]))]);
        assert_eq!(r.strict_acc, 1.0);
        assert_eq!(r.loose_macro_f1, 1.0);
        assert_eq!(r.loose_micro_f1, 1.0);
        assert_eq!(r.mention_count, 1);
        assert!(r.per_mention[0].exact);
    }

    #[test]
    fn half_overlap_scores_a_half() {
        // gold {person, politician} vs pred {person, artist}.
        let r = EvalReport::from_pairs(&[(set(&[0, 1]), set(&[0, 2]))]);
        assert_eq!(r.strict_acc, 0.0);
        assert!((r.per_mention[0].precision - 0.5).abs() < 1e-15);
        assert!((r.per_mention[0].recall - 0.5).abs() < 1e-15);
        assert!((r.loose_macro_f1 - 0.5).abs() < 1e-15);
        assert!((r.loose_micro_f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_mention_worked_example() {
        // (gold {a}, pred {a}) and (gold {a,b}, pred {a,b,c}):
        // strict 1/2; macro P̄ = (1 + 2/3)/2 = 5/6, R̄ = 1 → F1 = 10/11;
        // micro P = 3/4, R = 1 → F1 = 6/7.
        let pairs = [
            (set(&[0]), set(&[0])),
            (set(&[0, 1]), set(&[0, 1, 2])),
        ];
        let r = EvalReport::from_pairs(&pairs);
        assert!((r.strict_acc - 0.5).abs() < 1e-15);
        assert!((r.loose_macro_f1 - 10.0 / 11.0).abs() < 1e-15);
        assert!((r.loose_micro_f1 - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(r.pooled_intersection, 3);
        assert_eq!(r.pooled_predicted, 4);
        assert_eq!(r.pooled_gold, 3);
    }

    /// Rule-by-rule reimplementation used as the oracle: no shared helpers
    /// with the code under test.
    fn oracle(pairs: &[(BTreeSet<TypeId>, BTreeSet<TypeId>)]) -> (f64, f64, f64) {
        let n = pairs.len() as f64;
        let mut exact = 0.0;
        for (g, p) in pairs {
            if g.iter().eq(p.iter()) {
                exact += 1.0;
            }
        }
        let mut mp = 0.0;
        let mut mr = 0.0;
        for (g, p) in pairs {
            let i = p.iter().filter(|t| g.contains(t)).count() as f64;
            mp += if p.is_empty() { 0.0 } else { i / p.len() as f64 };
            mr += if g.is_empty() { 0.0 } else { i / g.len() as f64 };
        }
        mp /= n;
        mr /= n;
        let macro_f1 = if mp + mr > 0.0 {
            2.0 * mp * mr / (mp + mr)
        } else {
            0.0
        };
        let mut ti = 0.0;
        let mut tp = 0.0;
        let mut tg = 0.0;
        for (g, p) in pairs {
            ti += p.iter().filter(|t| g.contains(t)).count() as f64;
            tp += p.len() as f64;
            tg += g.len() as f64;
        }
        let micro_p = if tp > 0.0 { ti / tp } else { 0.0 };
        let micro_r = if tg > 0.0 { ti / tg } else { 0.0 };
        let micro_f1 = if micro_p + micro_r > 0.0 {
            2.0 * micro_p * micro_r / (micro_p + micro_r)
        } else {
            0.0
        };
        (exact / n, macro_f1, micro_f1)
    }

    #[test]
    fn random_set_pairs_match_the_hand_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for trial in 0..100 {
            let n = rng.random_range(1..=8);
            let pairs: Vec<(BTreeSet<TypeId>, BTreeSet<TypeId>)> = (0..n)
                .map(|_| {
                    let gold: BTreeSet<usize> = (0..10)
                        .filter(|_| rng.random_range(0..3) == 0)
                        .collect();
                    let gold = if gold.is_empty() { set(&[0]) } else { gold };
                    let pred: BTreeSet<usize> = (0..10)
                        .filter(|_| rng.random_range(0..3) == 0)
                        .collect();
                    (gold, pred)
                })
                .collect();
            let r = EvalReport::from_pairs(&pairs);
            let (s, ma, mi) = oracle(&pairs);
            assert!((r.strict_acc - s).abs() <= 1e-12, "trial {trial}");
            assert!((r.loose_macro_f1 - ma).abs() <= 1e-12, "trial {trial}");
            assert!((r.loose_micro_f1 - mi).abs() <= 1e-12, "trial {trial}");
            assert!((0.0..=1.0).contains(&r.strict_acc));
            assert!((0.0..=1.0).contains(&r.loose_macro_f1));
            assert!((0.0..=1.0).contains(&r.loose_micro_f1));
            assert!(r.pooled_intersection <= r.pooled_predicted);
            assert!(r.pooled_intersection <= r.pooled_gold);
        }
    }

    #[test]
    fn micro_one_exactly_when_strict_one() {
        // Not a ≤ relation — just the two endpoints coinciding.
        let perfect = EvalReport::from_pairs(&[
            (set(&[0, 1]), set(&[0, 1])),
            (set(&[2]), set(&[2])),
        ]);
        assert_eq!(perfect.strict_acc, 1.0);
        assert_eq!(perfect.loose_micro_f1, 1.0);
        let off = EvalReport::from_pairs(&[
            (set(&[0, 1]), set(&[0, 1])),
            (set(&[2]), set(&[2, 3])),
        ]);
        assert!(off.strict_acc < 1.0);
        assert!(off.loose_micro_f1 < 1.0);
        // And strict can exceed micro-F1's complement ordering freely: a
        // corpus mixing exact hits with total misses shows strict > micro is
        // possible, so no inequality is asserted anywhere.
        let mixed = EvalReport::from_pairs(&[
            (set(&[0]), set(&[0])),
            (set(&[1]), set(&[2, 3, 4, 5, 6, 7])),
        ]);
        assert!(mixed.strict_acc > mixed.loose_micro_f1);
    }

    #[test]
    fn empty_prediction_scores_zero_precision() {
        let r = EvalReport::from_pairs(&[(set(&[0]), BTreeSet::new())]);
        assert_eq!(r.per_mention[0].precision, 0.0);
        assert_eq!(r.per_mention[0].recall, 0.0);
        assert_eq!(r.loose_micro_f1, 0.0);
        assert_eq!(r.strict_acc, 0.0);
    }

    #[test]
    fn empty_input_is_the_zero_report() {
        let r = EvalReport::from_pairs(&[]);
        assert_eq!(r.mention_count, 0);
        assert_eq!(r.strict_acc, 0.0);
        assert_eq!(r.loose_macro_f1, 0.0);
        assert_eq!(r.loose_micro_f1, 0.0);
    }
}
