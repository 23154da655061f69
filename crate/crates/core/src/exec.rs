//! Execution helpers for the data-parallel inner loops (batch gradients,
//! window evaluation, sweep runs).
//!
//! With the `parallel` feature (default) `map_indexed` fans out over rayon;
//! without it the same closure runs on a plain iterator. Both variants
//! collect in index order, and every caller reduces the collected vector
//! sequentially, so the two modes produce bit-identical results.

#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Always-sequential variant, kept around as the benchmark baseline.
pub fn map_indexed_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let f = |i: usize| (i as f64 + 0.1).sin() * 1e3;
        let a = map_indexed(1000, f);
        let b = map_indexed_seq(1000, f);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
