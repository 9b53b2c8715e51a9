use std::fmt;
use std::str::FromStr;

use super::LANE_BITS;
use crate::error::Error;

/// Mask selecting the valid bits of the last lane of an `n`-bit vector.
pub fn lane_mask(n: usize) -> u32 {
    match n % LANE_BITS {
        0 => u32::MAX,
        rem => u32::MAX << (LANE_BITS - rem),
    }
}

fn spans<'a>(a: &'a [u32], b: &'a [u32], n: usize) -> (&'a [u32], &'a [u32]) {
    let lanes = n.div_ceil(LANE_BITS);
    (&a[..lanes], &b[..lanes])
}

/// 0/1 dot product: `sum popc(a & b)` over `n` bits.
pub fn bit_dot_01(a: &[u32], b: &[u32], n: usize) -> i32 {
    let (a, b) = spans(a, b, n);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x & y).count_ones())
        .sum::<u32>() as i32
}

/// ±1 dot product in XOR form: `n - 2 * popc(a ^ b)`. Zero padding cancels
/// under XOR, so no mask is needed.
pub fn bit_dot_pm1(a: &[u32], b: &[u32], n: usize) -> i32 {
    let (a, b) = spans(a, b, n);
    let diff: u32 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum();
    n as i32 - 2 * diff as i32
}

/// ±1 dot product in XNOR form: `2 * popc(!(a ^ b)) - n`, with the padding
/// of the last lane masked off before counting.
pub fn bit_dot_pm1_xnor(a: &[u32], b: &[u32], n: usize) -> i32 {
    let (a, b) = spans(a, b, n);
    let Some(last) = a.len().checked_sub(1) else {
        return 0;
    };
    let mut same: u32 = a[..last]
        .iter()
        .zip(&b[..last])
        .map(|(x, y)| (!(x ^ y)).count_ones())
        .sum();
    same += (!(a[last] ^ b[last]) & lane_mask(n)).count_ones();
    2 * same as i32 - n as i32
}

/// How a 0/1 vector is multiplied with a ±1 vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TrinaryStrategy {
    /// Walk the set bits of the 0/1 operand and add ±1 for each.
    IfElse,
    /// `popc(a & b) - popc(a & !b)`.
    AndAndNot,
    /// `2 * popc(a & b) - popc(a)`.
    #[default]
    TwoAndMinusPopc,
}

impl TrinaryStrategy {
    pub const ALL: [TrinaryStrategy; 3] = [
        TrinaryStrategy::IfElse,
        TrinaryStrategy::AndAndNot,
        TrinaryStrategy::TwoAndMinusPopc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrinaryStrategy::IfElse => "if-else",
            TrinaryStrategy::AndAndNot => "and-and-not",
            TrinaryStrategy::TwoAndMinusPopc => "two-and-minus-popc",
        }
    }

    /// Dot product of one 0/1 word with one ±1 word.
    #[inline(always)]
    pub fn word_dot(self, a: u64, b: u64) -> i32 {
        match self {
            TrinaryStrategy::IfElse => {
                let mut acc = 0;
                let mut bits = a;
                while bits != 0 {
                    let p = bits.trailing_zeros();
                    acc += if (b >> p) & 1 == 1 { 1 } else { -1 };
                    bits &= bits - 1;
                }
                acc
            }
            TrinaryStrategy::AndAndNot => {
                (a & b).count_ones() as i32 - (a & !b).count_ones() as i32
            }
            TrinaryStrategy::TwoAndMinusPopc => {
                2 * (a & b).count_ones() as i32 - a.count_ones() as i32
            }
        }
    }
}

impl fmt::Display for TrinaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrinaryStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TrinaryStrategy::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// Dot product of a 0/1 vector `a` with a ±1 vector `b` over `n` bits: the
/// sum over `j` with `a_j = 1` of `b_j ? +1 : -1`.
pub fn bit_dot_trinary(a: &[u32], b: &[u32], n: usize, strategy: TrinaryStrategy) -> i32 {
    let (a, b) = spans(a, b, n);
    let last = a.len().saturating_sub(1);
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(l, (&x, &y))| {
            // !b must not leak padding into the AND-NOT count.
            let mask = if l == last { lane_mask(n) } else { u32::MAX };
            strategy.word_dot(u64::from(x & mask), u64::from(y & mask))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nibble(bits: u32) -> [u32; 1] {
        [bits << 28]
    }

    fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u32> {
        let mut v: Vec<u32> = (0..n.div_ceil(32)).map(|_| rng.gen()).collect();
        if let Some(last) = v.last_mut() {
            *last &= lane_mask(n);
        }
        v
    }

    fn bit(v: &[u32], j: usize) -> bool {
        (v[j / 32] >> (31 - j % 32)) & 1 == 1
    }

    #[test]
    fn zero_one_dot_by_hand() {
        assert_eq!(bit_dot_01(&nibble(0b1011), &nibble(0b0110), 4), 1);
    }

    #[test]
    fn zero_one_dot_with_itself_is_popcount() {
        let a = [0xDEAD_BEEF, 0xF000_0000];
        assert_eq!(
            bit_dot_01(&a, &a, 36),
            (0xDEAD_BEEFu32.count_ones() + 4) as i32
        );
    }

    #[test]
    fn pm1_dot_by_hand() {
        assert_eq!(bit_dot_pm1(&nibble(0b1010), &nibble(0b1100), 4), 0);
        assert_eq!(bit_dot_pm1_xnor(&nibble(0b1010), &nibble(0b1100), 4), 0);
    }

    #[test]
    fn pm1_dot_with_itself_is_n() {
        let a = [0x1234_5678, 0x8000_0000];
        assert_eq!(bit_dot_pm1(&a, &a, 33), 33);
        assert_eq!(bit_dot_pm1_xnor(&a, &a, 33), 33);
    }

    #[test]
    fn random_dots_match_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 31, 32, 33, 100, 200] {
            let a = random_bits(&mut rng, n);
            let b = random_bits(&mut rng, n);
            let mut d01 = 0;
            let mut dpm = 0;
            for j in 0..n {
                d01 += i32::from(bit(&a, j) && bit(&b, j));
                dpm += if bit(&a, j) == bit(&b, j) { 1 } else { -1 };
            }
            assert_eq!(bit_dot_01(&a, &b, n), d01);
            assert_eq!(bit_dot_pm1(&a, &b, n), dpm);
            assert_eq!(bit_dot_pm1_xnor(&a, &b, n), dpm);
        }
    }

    #[test]
    fn trinary_dot_by_hand() {
        for s in TrinaryStrategy::ALL {
            assert_eq!(
                bit_dot_trinary(&nibble(0b1011), &nibble(0b0110), 4, s),
                -1,
                "{s}"
            );
            assert_eq!(bit_dot_trinary(&[0, 0], &[u32::MAX, 7], 40, s), 0, "{s}");
        }
    }

    #[test]
    fn trinary_strategies_match_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let n = rng.gen_range(1..=500);
            let a = random_bits(&mut rng, n);
            let b = random_bits(&mut rng, n);
            let naive: i32 = (0..n)
                .filter(|&j| bit(&a, j))
                .map(|j| if bit(&b, j) { 1 } else { -1 })
                .sum();
            for s in TrinaryStrategy::ALL {
                assert_eq!(bit_dot_trinary(&a, &b, n, s), naive, "{s} n={n}");
            }
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in TrinaryStrategy::ALL {
            assert_eq!(s.name().parse::<TrinaryStrategy>().unwrap(), s);
        }
        assert!("popcount".parse::<TrinaryStrategy>().is_err());
    }
}
