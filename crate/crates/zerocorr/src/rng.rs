//! Reproducible chunked sampling.
//!
//! A run of `n_samples` draws is split into `chunk_count` chunks. Chunk `c`
//! draws from the ChaCha8 stream `c` keyed by the run seed, so results depend
//! on (seed, n_samples, chunk_count) only, never on the thread count. Chunk
//! moments are merged in chunk order.

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub const DEFAULT_CHUNK_COUNT: usize = 64;

pub fn substream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Sizes of the chunks; the first `total % chunks` get one extra draw.
pub fn chunk_sizes(total: u64, chunks: usize) -> Vec<u64> {
    let chunks = chunks.max(1) as u64;
    let base = total / chunks;
    let extra = total % chunks;
    (0..chunks).map(|c| base + u64::from(c < extra)).collect()
}

/// Running mean and centred second moment (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Sample standard deviation over √count.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// Result of a chunked run with `M` simultaneous observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkedRun<const M: usize> {
    pub moments: [Moments; M],
    /// Draws rejected because some observable was not finite.
    pub nonfinite: u64,
}

/// Run `sample` `n_samples` times over `chunk_count` substreams.
///
/// `init` builds per-chunk scratch space. A draw with any non-finite
/// observable is dropped and counted.
pub fn run_chunked<S, const M: usize>(
    n_samples: u64,
    seed: u64,
    chunk_count: usize,
    init: impl Fn() -> S + Sync,
    sample: impl Fn(&mut S, &mut ChaCha8Rng) -> [f64; M] + Sync,
) -> ChunkedRun<M> {
    let sizes = chunk_sizes(n_samples, chunk_count);
    let partial: Vec<([Moments; M], u64)> = sizes
        .par_iter()
        .enumerate()
        .map(|(c, &size)| {
            let mut rng = substream(seed, c as u64);
            let mut scratch = init();
            let mut m = [Moments::default(); M];
            let mut bad = 0;
            for _ in 0..size {
                let v = sample(&mut scratch, &mut rng);
                if v.iter().all(|x| x.is_finite()) {
                    for (mi, x) in m.iter_mut().zip(v) {
                        mi.push(x);
                    }
                } else {
                    bad += 1;
                }
            }
            (m, bad)
        })
        .collect();
    let mut moments = [Moments::default(); M];
    let mut nonfinite = 0;
    for (m, bad) in &partial {
        for (acc, x) in moments.iter_mut().zip(m) {
            acc.merge(x);
        }
        nonfinite += bad;
    }
    ChunkedRun { moments, nonfinite }
}

pub fn fill_normal(rng: &mut impl Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Uniform point on the unit sphere S^{m−1} ⊂ R^m, m = out.len().
pub fn fill_sphere(rng: &mut impl Rng, out: &mut [f64]) {
    loop {
        fill_normal(rng, out);
        let r2: f64 = out.iter().map(|v| v * v).sum();
        if r2 > 0.0 {
            let inv = r2.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}
