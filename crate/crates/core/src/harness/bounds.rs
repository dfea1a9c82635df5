//! Round bounds for the two termination variants.

use crate::gathering::floor_log2;

/// Non-simultaneous bound: `X + 3(2 floor(log lambda_good) + f + 7)(3X + 1)`.
pub fn theorem1_bound(x_n: u64, f: u64, lambda_good: u64) -> u64 {
    x_n + 3 * (2 * floor_log2(lambda_good) as u64 + f + 7) * (3 * x_n + 1)
}

/// Simultaneous bound: `3X + 3(2 floor(log lambda_all) + f + 7)(3X + 1) + 1`.
pub fn theorem2_bound(x_n: u64, f: u64, lambda_all: u64) -> u64 {
    3 * x_n + 3 * (2 * floor_log2(lambda_all) as u64 + f + 7) * (3 * x_n + 1) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_expanded_values() {
        assert_eq!(theorem1_bound(10, 1, 8), 1312);
        assert_eq!(theorem1_bound(1, 0, 1), 85);
        assert_eq!(theorem2_bound(10, 1, 8), 1333);
        assert_eq!(theorem2_bound(1, 0, 1), 88);
    }

    proptest! {
        #[test]
        fn monotone_in_every_argument(x in 0u64..500, f in 0u64..6, l in 1u64..5000) {
            let b = theorem1_bound(x, f, l);
            prop_assert!(theorem1_bound(x + 1, f, l) >= b);
            prop_assert!(theorem1_bound(x, f + 1, l) >= b);
            prop_assert!(theorem1_bound(x, f, l + 1) >= b);
            let c = theorem2_bound(x, f, l);
            prop_assert!(theorem2_bound(x + 1, f, l) >= c);
            prop_assert!(theorem2_bound(x, f + 1, l) >= c);
            prop_assert!(theorem2_bound(x, f, l + 1) >= c);
        }

        #[test]
        fn simultaneous_adds_two_explorations_and_one_round(x in 0u64..500, f in 0u64..6, l in 1u64..5000) {
            prop_assert_eq!(theorem2_bound(x, f, l), theorem1_bound(x, f, l) + 2 * x + 1);
        }
    }
}
