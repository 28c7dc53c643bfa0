//! Serial / data-parallel execution of independent per-item work.
//!
//! Every parallel path maps a pure function over an index range and collects
//! in index order, so results are bitwise identical to the serial path. With
//! the `parallel` feature disabled, [`Execution::Parallel`] runs serially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items `Auto` stays serial; thread handoff costs more than
/// the work.
pub const AUTO_PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
    /// Parallel for large inputs, serial otherwise.
    #[default]
    Auto,
}

impl Execution {
    /// Whether a workload of `len` items would actually run on the thread pool.
    pub fn is_parallel_for(self, len: usize) -> bool {
        cfg!(feature = "parallel")
            && match self {
                Execution::Serial => false,
                Execution::Parallel => true,
                Execution::Auto => len >= AUTO_PARALLEL_THRESHOLD,
            }
    }

    /// `(0..len).map(f).collect()`, possibly on the rayon pool.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel_for(len) {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Maps over a slice, possibly on the rayon pool.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel_for(items.len()) {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_serial_agree() {
        let f = |i: usize| ((i as f64).sqrt() * 1.1).sin();
        let a = Execution::Serial.map(10_000, f);
        let b = Execution::Parallel.map(10_000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn auto_threshold() {
        assert!(!Execution::Auto.is_parallel_for(10));
        assert!(!Execution::Serial.is_parallel_for(1 << 20));
        assert_eq!(
            Execution::Auto.is_parallel_for(AUTO_PARALLEL_THRESHOLD),
            cfg!(feature = "parallel")
        );
    }
}
