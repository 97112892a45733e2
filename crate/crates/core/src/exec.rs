//! Order-preserving parallel map. Sequential without `std`.

use alloc::vec::Vec;

#[cfg(feature = "std")]
pub fn map_indexed<T, S, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .with_min_len(256)
        .map_init(init, f)
        .collect()
}

#[cfg(not(feature = "std"))]
pub fn map_indexed<T, S, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    I: Fn() -> S,
    F: Fn(&mut S, usize) -> T,
{
    let mut scratch = init();
    (0..n).map(|i| f(&mut scratch, i)).collect()
}

/// Fill `out` row by row, `width` values per row; `f(scratch, row, slot)`.
#[cfg(feature = "std")]
pub fn fill_rows<S, I, F>(out: &mut [f64], width: usize, init: I, f: F)
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    if width == 0 {
        return;
    }
    out.par_chunks_mut(width)
        .with_min_len(256)
        .enumerate()
        .for_each_init(init, |s, (row, slot)| f(s, row, slot));
}

#[cfg(not(feature = "std"))]
pub fn fill_rows<S, I, F>(out: &mut [f64], width: usize, init: I, f: F)
where
    I: Fn() -> S,
    F: Fn(&mut S, usize, &mut [f64]),
{
    if width == 0 {
        return;
    }
    let mut scratch = init();
    for (row, slot) in out.chunks_mut(width).enumerate() {
        f(&mut scratch, row, slot);
    }
}
