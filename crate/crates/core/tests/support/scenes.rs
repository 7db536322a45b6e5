//! Hand-built slice sequences with known zigzag barcodes.

pub const COLS: usize = 13;

pub fn block(r0: usize, c0: usize, hollow: bool) -> Vec<u32> {
    let mut v = Vec::new();
    for r in r0..r0 + 3 {
        for c in c0..c0 + 3 {
            if !(hollow && r == r0 + 1 && c == c0 + 1) {
                v.push((r * COLS + c) as u32);
            }
        }
    }
    v
}

pub fn frame(parts: &[Vec<u32>]) -> Vec<u32> {
    let mut v: Vec<u32> = parts.concat();
    v.sort_unstable();
    v.dedup();
    v
}

/// Red loop at t2..t4; blue loop sharing red's right wall at t3 only and
/// filled solid at t4; purple loop, far away, at t3..t4.
pub fn three_loops() -> Vec<Vec<u32>> {
    let red = |h| block(1, 1, h);
    let blue = |h| block(1, 3, h);
    let purple = |h| block(1, 8, h);
    vec![
        frame(&[red(false), purple(false)]),
        frame(&[red(true), purple(false)]),
        frame(&[red(true), blue(true), purple(true)]),
        frame(&[red(true), blue(false), purple(true)]),
        frame(&[red(false), purple(false)]),
    ]
}

/// `(dim, birth, death)` of [`three_loops`], worked out by hand on the
/// interleaved index (slice `t` sits at `2t - 1`): two components for the
/// whole run; red from its first hollow slice to its last; blue from the
/// t2/t3 union, where it first appears, until the t3/t4 union fills it;
/// purple from t3, since the t2/t3 union still holds it solid, to t4.
pub const THREE_LOOP_BARS: [(usize, usize, usize); 5] =
    [(0, 1, 9), (0, 1, 9), (1, 3, 7), (1, 4, 5), (1, 5, 7)];
