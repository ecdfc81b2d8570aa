//! Counter-derived random streams and schedule-independent parallel reduction.
//!
//! Work unit `i` always draws from stream `(seed, i)`, and work units are
//! grouped into fixed-size chunks whose partial results are merged in chunk
//! order. Together these make every reduction bit-identical for any rayon
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Work units per chunk. Fixed so that chunk boundaries never depend on the pool size.
const CHUNK: u64 = 256;

/// Stream index reserved for per-experiment setup draws (random `b`, `Sigma`, ...).
pub(crate) const SETUP_STREAM: u64 = u64::MAX;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Folds `count` work units into chunk accumulators in parallel, then merges
/// the chunk accumulators sequentially in chunk order.
pub(crate) fn chunked_reduce<A, I, F, M>(count: u64, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = count.div_ceil(CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            let end = ((c + 1) * CHUNK).min(count);
            for i in c * CHUNK..end {
                fold(&mut acc, i);
            }
            acc
        })
        .collect();
    let mut total = init();
    for part in partials {
        merge(&mut total, part);
    }
    total
}

/// Running sum and sum of squares with Neumaier compensation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct MomentSum {
    sum: f64,
    sum_comp: f64,
    sq: f64,
    sq_comp: f64,
    pub(crate) count: u64,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl MomentSum {
    pub(crate) fn push(&mut self, x: f64) {
        neumaier(&mut self.sum, &mut self.sum_comp, x);
        neumaier(&mut self.sq, &mut self.sq_comp, x * x);
        self.count += 1;
    }

    pub(crate) fn merge(&mut self, other: &MomentSum) {
        neumaier(&mut self.sum, &mut self.sum_comp, other.sum);
        neumaier(&mut self.sum, &mut self.sum_comp, other.sum_comp);
        neumaier(&mut self.sq, &mut self.sq_comp, other.sq);
        neumaier(&mut self.sq, &mut self.sq_comp, other.sq_comp);
        self.count += other.count;
    }

    pub(crate) fn mean(&self) -> f64 {
        (self.sum + self.sum_comp) / self.count as f64
    }

    /// Standard error of the mean from the sample variance.
    pub(crate) fn std_err(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let k = self.count as f64;
        let mean = self.mean();
        let var = ((self.sq + self.sq_comp) / k - mean * mean).max(0.0) * k / (k - 1.0);
        (var / k).sqrt()
    }
}
