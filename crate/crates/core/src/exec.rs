//! Serial / rayon execution switch with deterministic reductions.
//!
//! Every reduction splits its index range into fixed-size chunks, sums each
//! chunk left to right and then combines the chunk totals pairwise. The chunk
//! layout does not depend on the thread count, so `Serial` and `Parallel`
//! produce bit-identical sums.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Indices per reduction chunk.
pub const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Serial,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this mode will actually fan out to rayon in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// `(0..n).map(f).collect()`, in parallel when enabled.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Map over a slice.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        self.map(items.len(), |i| f(&items[i]))
    }

    /// Deterministic `sum_{i<n} f(i)`.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunks = n.div_ceil(CHUNK);
        let partial = self.map(chunks, |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        });
        pairwise_sum(&partial)
    }

    /// Deterministic vector-valued sum: `f(i, acc)` adds the contribution of
    /// index `i` into `acc` (length `dim`).
    pub fn sum_into<F>(self, n: usize, dim: usize, f: F) -> Vec<f64>
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let chunks = n.div_ceil(CHUNK);
        let partial = self.map(chunks, |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = vec![0.0; dim];
            for i in lo..hi {
                f(i, &mut acc);
            }
            acc
        });
        pairwise_sum_vecs(partial, dim)
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn pairwise_sum_vecs(mut parts: Vec<Vec<f64>>, dim: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; dim];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Install a global rayon pool with `threads` workers. No-op without the
/// `parallel` feature or if a pool already exists.
pub fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_sums_are_identical() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        for n in [0, 1, 7, CHUNK, CHUNK + 1, 10 * CHUNK + 13] {
            let a = Exec::Serial.sum(n, f);
            let b = Exec::Parallel.sum(n, f);
            assert_eq!(a.to_bits(), b.to_bits(), "n = {n}");
        }
    }

    #[test]
    fn vector_sum_matches_scalar_sums() {
        let n = 3 * CHUNK + 5;
        let v = Exec::Parallel.sum_into(n, 2, |i, acc| {
            acc[0] += i as f64;
            acc[1] += 1.0;
        });
        assert_eq!(v[0], (n * (n - 1) / 2) as f64);
        assert_eq!(v[1], n as f64);
    }

    #[test]
    fn map_preserves_order() {
        let v = Exec::Parallel.map(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
