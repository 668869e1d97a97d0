//! Run-length encoding of binary masks: row-major run lengths that
//! alternate between unset and set pixels, starting with an unset run
//! (which may be zero).

use crate::geometry::PixelMask;

pub fn encode(mask: &PixelMask) -> Vec<u32> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for &b in mask.bits() {
        if b != current {
            counts.push(run);
            run = 0;
            current = b;
        }
        run += 1;
    }
    counts.push(run);
    counts
}

pub fn decode(width: u32, height: u32, counts: &[u32]) -> Result<PixelMask, String> {
    let total = width as u64 * height as u64;
    let sum: u64 = counts.iter().map(|&c| c as u64).sum();
    if sum != total {
        return Err(format!("run lengths cover {sum} pixels, mask has {total}"));
    }
    let mut bits = Vec::with_capacity(total as usize);
    for (i, &c) in counts.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, c as usize));
    }
    PixelMask::from_bits(width, height, bits).map_err(|e| e.to_string())
}
