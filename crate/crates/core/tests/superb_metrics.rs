//! SUPERB overall score.

use proptest::prelude::*;
use pseudolabel::metrics::round1;
use pseudolabel::{superb_score, SuperbRow};

#[test]
fn hubert_base_scores_80_7() {
    let r = SuperbRow::from_array([5.4, 6.4, 96.3, 7.4, 98.3, 88.5, 25.2, 5.1, 5.9, 64.9]);
    assert_eq!(round1(superb_score(&r).unwrap()), 80.7);
}

#[test]
fn gs16_base_iteration_one_scores_81_3() {
    let r = SuperbRow::from_array([5.3, 6.6, 96.3, 10.5, 99.0, 89.9, 22.1, 5.6, 6.2, 63.1]);
    assert_eq!(round1(superb_score(&r).unwrap()), 81.3);
}

const ERROR_FIELDS: [usize; 5] = [0, 1, 6, 7, 8];

proptest! {
    #[test]
    fn score_is_monotone(vals in proptest::array::uniform10(1.0f64..99.0), field in 0usize..10, step in 0.01f64..1.0) {
        let base = superb_score(&SuperbRow::from_array(vals)).unwrap();
        let mut v = vals;
        if ERROR_FIELDS.contains(&field) {
            v[field] -= step;
        } else {
            v[field] += step;
        }
        prop_assert!(superb_score(&SuperbRow::from_array(v)).unwrap() > base);
    }
}
