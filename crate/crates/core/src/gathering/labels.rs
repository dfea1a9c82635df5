//! Identity arithmetic: extended labels, CollectID length and the Byzantine
//! count estimate.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("only {0} ids collected; estimating f needs at least 4")]
    TooFewIdsCollected(usize),
}

/// `floor(log2 v)` for `v >= 1`.
pub fn floor_log2(v: u64) -> u32 {
    assert!(v >= 1, "log of zero");
    63 - v.leading_zeros()
}

/// One period of the extended label: `1 0` followed by each binary digit of
/// `id` written twice.
pub fn extended_label_block(id: u64) -> Vec<u8> {
    assert!(id >= 1, "ids are positive");
    let bits = floor_log2(id) + 1;
    let mut block = Vec::with_capacity(2 + 2 * bits as usize);
    block.extend([1, 0]);
    for i in (0..bits).rev() {
        let b = ((id >> i) & 1) as u8;
        block.extend([b, b]);
    }
    block
}

/// The `x`-th bit (1-indexed) of the infinite periodic extended label.
pub fn extended_label_bit(id: u64, x: u64) -> u8 {
    assert!(x >= 1, "label positions are 1-indexed");
    let period = 2 + 2 * (floor_log2(id) as u64 + 1);
    let pos = (x - 1) % period;
    if pos < 2 {
        return if pos == 0 { 1 } else { 0 };
    }
    let digit = (pos - 2) / 2; // 0 = most significant
    let bits = floor_log2(id) as u64 + 1;
    ((id >> (bits - 1 - digit)) & 1) as u8
}

/// Number of CollectID phases: `2 floor(log2 id) + 6`.
pub fn cist_length(id: u64) -> u64 {
    2 * floor_log2(id) as u64 + 6
}

/// `max { y : (4y + 4)(y + 1) <= il_size }`.
pub fn estimate_f(il_size: usize) -> Result<u32, LabelError> {
    if il_size < 4 {
        return Err(LabelError::TooFewIdsCollected(il_size));
    }
    let fits = |y: u64| (4 * y + 4) * (y + 1) <= il_size as u64;
    let mut y = 0u64;
    while fits(y + 1) {
        y += 1;
    }
    Ok(y as u32)
}
