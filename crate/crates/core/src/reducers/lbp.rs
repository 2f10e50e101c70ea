//! Uniform LBP(8, 1) histograms over single channel maps.

use crate::error::{Error, Result};

/// 58 uniform patterns plus one shared bin for all non-uniform patterns.
pub const LBP_BINS: usize = 59;

/// (row, col) offsets starting east and walking counter-clockwise; bit n is neighbor n.
/// Rows grow downward, so "north" is row - 1.
const NEIGHBORS: [(isize, isize); 8] = [
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Number of 0/1 transitions in the circular 8-bit string.
pub fn transitions(pattern: u8) -> u32 {
    (pattern ^ pattern.rotate_right(1)).count_ones()
}

/// Pattern value -> histogram bin. Uniform patterns (at most two transitions) get bins
/// 0..58 in ascending pattern order, everything else bin 58.
pub fn bin_table() -> [u8; 256] {
    let mut table = [(LBP_BINS - 1) as u8; 256];
    let mut next = 0u8;
    for p in 0..=255u8 {
        if transitions(p) <= 2 {
            table[p as usize] = next;
            next += 1;
        }
    }
    debug_assert_eq!(next as usize, LBP_BINS - 1);
    table
}

pub fn pattern_at(map: &[f64], width: usize, row: usize, col: usize) -> u8 {
    let center = map[row * width + col];
    let mut pattern = 0u8;
    for (bit, (dr, dc)) in NEIGHBORS.iter().enumerate() {
        let r = (row as isize + dr) as usize;
        let c = (col as isize + dc) as usize;
        if map[r * width + c] - center >= 0.0 {
            pattern |= 1 << bit;
        }
    }
    pattern
}

/// Normalized 59-bin uniform LBP histogram over the interior pixels of a map.
pub fn lbp_histogram(map: &[f64], height: usize, width: usize) -> Result<Vec<f64>> {
    if height < 3 || width < 3 {
        return Err(Error::argument(format!(
            "LBP needs a map of at least 3x3, got {height}x{width}"
        )));
    }
    if map.len() != height * width {
        return Err(Error::argument(format!(
            "map has {} values, expected {height}x{width}",
            map.len()
        )));
    }
    let table = bin_table();
    let mut hist = vec![0.0; LBP_BINS];
    for r in 1..height - 1 {
        for c in 1..width - 1 {
            hist[table[pattern_at(map, width, r, c) as usize] as usize] += 1.0;
        }
    }
    let interior = ((height - 2) * (width - 2)) as f64;
    hist.iter_mut().for_each(|h| *h /= interior);
    Ok(hist)
}
