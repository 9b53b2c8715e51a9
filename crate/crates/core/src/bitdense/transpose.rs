use super::{BitDenseMatrix, LANE_BITS};

/// Transposes a 32x32 bit block in place. Word `i` is row `i`; bit `31 - j`
/// is column `j`.
///
/// Five rounds of masked block swaps, halving the block size each round.
#[inline]
pub(crate) fn transpose32_in_place(a: &mut [u32; 32]) {
    let mut width = 16;
    let mut mask: u32 = 0x0000_FFFF;
    while width != 0 {
        let mut base = 0;
        while base < 32 {
            for k in base..base + width {
                let t = (a[k] ^ (a[k + width] >> width)) & mask;
                a[k] ^= t;
                a[k + width] ^= t << width;
            }
            base += 2 * width;
        }
        width >>= 1;
        mask ^= mask << width;
    }
}

/// Returns the transpose of a 32x32 bit block: `out` bit `(i, j)` equals
/// `block` bit `(j, i)`.
pub fn bit_transpose_block(block: &[u32; 32]) -> [u32; 32] {
    let mut out = *block;
    transpose32_in_place(&mut out);
    out
}

/// Logical transpose, tiled over 32x32 blocks. 64-bit matrices are handled
/// as pairs of 32-bit lanes, so every word width goes through the same block
/// primitive.
pub fn transpose(m: &BitDenseMatrix) -> BitDenseMatrix {
    let mut out = BitDenseMatrix::zeros(m.cols(), m.rows(), m.word_bits(), m.semantics());
    let in_lanes = m.lanes_per_row();
    let out_lanes = out.lanes_per_row();
    let src = m.as_lanes();
    let dst = out.as_lanes_mut();
    let mut block = [0u32; 32];
    for row_block in 0..m.rows().div_ceil(LANE_BITS) {
        let r0 = row_block * LANE_BITS;
        let live_rows = (m.rows() - r0).min(LANE_BITS);
        for lane in 0..m.cols().div_ceil(LANE_BITS) {
            for (i, slot) in block.iter_mut().enumerate() {
                *slot = if i < live_rows {
                    src[(r0 + i) * in_lanes + lane]
                } else {
                    0
                };
            }
            transpose32_in_place(&mut block);
            let c0 = lane * LANE_BITS;
            let live_cols = (m.cols() - c0).min(LANE_BITS);
            for (k, &word) in block.iter().take(live_cols).enumerate() {
                dst[(c0 + k) * out_lanes + row_block] = word;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitdense::{Semantics, WordBits};
    use proptest::prelude::*;

    fn naive_transpose(block: &[u32; 32]) -> [u32; 32] {
        let mut out = [0u32; 32];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, word) in block.iter().enumerate() {
                if (word >> (31 - i)) & 1 == 1 {
                    *o |= 1 << (31 - j);
                }
            }
        }
        out
    }

    #[test]
    fn diagonal_is_fixed_point() {
        let diag: [u32; 32] = std::array::from_fn(|i| 1u32 << (31 - i));
        assert_eq!(bit_transpose_block(&diag), diag);
    }

    #[test]
    fn single_bit_moves_across_the_diagonal() {
        let mut block = [0u32; 32];
        block[3] = 1 << (31 - 17);
        let out = bit_transpose_block(&block);
        let mut expected = [0u32; 32];
        expected[17] = 1 << (31 - 3);
        assert_eq!(out, expected);
    }

    proptest! {
        #[test]
        fn block_transpose_matches_naive(block in any::<[u32; 32]>()) {
            let t = bit_transpose_block(&block);
            prop_assert_eq!(t, naive_transpose(&block));
            prop_assert_eq!(bit_transpose_block(&t), block);
        }

        #[test]
        fn matrix_transpose_is_involution(
            rows in 1usize..80,
            cols in 1usize..80,
            wide in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let wb = if wide { WordBits::W64 } else { WordBits::W32 };
            let mut state = seed | 1;
            let m = BitDenseMatrix::from_fn(rows, cols, wb, Semantics::ZeroOne, |_, _| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state & 1 == 1
            });
            let t = transpose(&m);
            prop_assert!(t.padding_is_zero());
            for i in 0..rows {
                for j in 0..cols {
                    prop_assert_eq!(t.get(j, i), m.get(i, j));
                }
            }
            prop_assert_eq!(transpose(&t), m);
        }
    }

    #[test]
    fn identity_and_row_vector() {
        let id = BitDenseMatrix::from_fn(45, 45, WordBits::W32, Semantics::ZeroOne, |i, j| i == j);
        assert_eq!(transpose(&id), id);
        let row = BitDenseMatrix::from_fn(1, 70, WordBits::W64, Semantics::PlusMinus, |_, j| {
            j % 3 == 0
        });
        let col = transpose(&row);
        assert_eq!((col.rows(), col.cols()), (70, 1));
        for j in 0..70 {
            assert_eq!(col.get(j, 0), j % 3 == 0);
        }
        assert_eq!(col.semantics(), Semantics::PlusMinus);
    }

    #[test]
    fn random_70x45_round_trip() {
        let mut x = 0x9E37_79B9u32;
        let m = BitDenseMatrix::from_fn(70, 45, WordBits::W32, Semantics::ZeroOne, |_, _| {
            x = x.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
            x >> 31 == 1
        });
        assert_eq!(transpose(&transpose(&m)), m);
    }
}
