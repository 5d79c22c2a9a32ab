//! Data-parallel loops with a sequential fallback.
//!
//! Replica sweeps and per-particle updates are embarrassingly parallel once
//! every task derives its randomness from its own [`crate::rng::NoiseStream`]
//! substream. The functions here fan such loops out to rayon when the
//! `parallel` feature is enabled and fall back to plain loops otherwise;
//! results are collected by index, so both paths produce identical output.

/// Maps `f` over `0..n`, in parallel when available.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential version of [`map_indexed`], kept callable under every feature
/// set so benchmarks can compare both code paths in one build.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Applies `f` to every slot of `out`, in parallel when available.
pub fn for_each_slot<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, slot)| f(i, slot));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slot) in out.iter_mut().enumerate() {
            f(i, slot);
        }
    }
}

/// Caps the rayon worker pool. Reads `MFLAB_THREADS` when `threads` is
/// `None`. Calling it more than once is harmless: only the first call can
/// size the global pool.
pub fn configure_workers(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    {
        let n = threads.or_else(|| {
            std::env::var("MFLAB_THREADS")
                .ok()
                .and_then(|v| v.parse::<usize>().ok())
        });
        if let Some(n) = n {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let par = map_indexed(100, |i| (i as f64).sin());
        let seq = map_indexed_seq(100, |i| (i as f64).sin());
        assert_eq!(par, seq);
    }
}
