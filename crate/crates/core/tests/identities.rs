use bingnn::bitdense::{
    bit_dot_01, bit_dot_pm1, bit_dot_pm1_xnor, bit_dot_trinary, TrinaryStrategy,
};
use proptest::prelude::*;

/// Random `n`-bit vector packed MSB-first with zero padding.
fn vector(n: usize, seed: &[bool]) -> Vec<u32> {
    let mut lanes = vec![0u32; n.div_ceil(32)];
    for (j, &b) in seed.iter().take(n).enumerate() {
        if b {
            lanes[j / 32] |= 1 << (31 - j % 32);
        }
    }
    lanes
}

fn bit(v: &[u32], j: usize) -> bool {
    v[j / 32] >> (31 - j % 32) & 1 == 1
}

fn pm1(b: bool) -> i32 {
    if b {
        1
    } else {
        -1
    }
}

fn pair() -> impl Strategy<Value = (usize, Vec<u32>, Vec<u32>)> {
    (1usize..=512).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(n, a, b)| (n, vector(n, &a), vector(n, &b)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn xor_and_xnor_forms_equal_the_plain_loop((n, a, b) in pair()) {
        let naive: i32 = (0..n).map(|j| pm1(bit(&a, j)) * pm1(bit(&b, j))).sum();
        prop_assert_eq!(bit_dot_pm1(&a, &b, n), naive);
        prop_assert_eq!(bit_dot_pm1_xnor(&a, &b, n), naive);
    }

    #[test]
    fn trinary_strategies_equal_the_plain_loop((n, a, b) in pair()) {
        let naive: i32 = (0..n).filter(|&j| bit(&a, j)).map(|j| pm1(bit(&b, j))).sum();
        for s in TrinaryStrategy::ALL {
            prop_assert_eq!(bit_dot_trinary(&a, &b, n, s), naive, "{}", s);
        }
    }

    #[test]
    fn zero_one_dot_counts_common_ones((n, a, b) in pair()) {
        let naive = (0..n).filter(|&j| bit(&a, j) && bit(&b, j)).count() as i32;
        prop_assert_eq!(bit_dot_01(&a, &b, n), naive);
    }
}

#[test]
fn trinary_word_dot_handles_full_words() {
    for s in TrinaryStrategy::ALL {
        assert_eq!(s.word_dot(u64::MAX, u64::MAX), 64);
        assert_eq!(s.word_dot(u64::MAX, 0), -64);
        assert_eq!(s.word_dot(0, u64::MAX), 0);
    }
}
