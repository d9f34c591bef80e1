//! Order-preserving map over a slice, on the rayon pool when the `parallel`
//! feature is enabled and the caller asks for it, sequentially otherwise.
//! Results are identical either way; only the schedule differs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return items.par_iter().map(f).collect();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel;
    items.iter().map(f).collect()
}

/// Whether a parallel request is actually honored by this build.
pub const fn available() -> bool {
    cfg!(feature = "parallel")
}
