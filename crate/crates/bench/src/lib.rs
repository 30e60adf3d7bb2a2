//! Seeded input generators shared by the benchmarks.

use periomap_core::TrailCorpus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` labels drawn uniformly from `0..k`.
pub fn random_labels(n: usize, k: u32, seed: u64) -> Vec<u32> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(0..k)).collect()
}

/// `n` points around `k` well-separated centres in `dim` dimensions.
pub fn blobs(n: usize, k: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let centres: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| r.random_range(-20.0..20.0)).collect()).collect();
    (0..n).map(|i| centres[i % k].iter().map(|c| c + r.random_range(-1.0..1.0)).collect()).collect()
}

/// Abstract-like texts: each document draws `words` tokens from its
/// class vocabulary of `vocab` words.
pub fn documents(n: usize, classes: usize, vocab: usize, words: usize, seed: u64) -> (Vec<String>, Vec<usize>) {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let c = i % classes;
            let text: Vec<String> = (0..words).map(|_| format!("c{c}w{}", r.random_range(0..vocab))).collect();
            (text.join(" "), c)
        })
        .unzip()
}

/// Random-walk-like token sequences over `vocab` ids, mostly staying in
/// one of `groups` contiguous id blocks.
pub fn trails(n: usize, len: usize, vocab: u32, groups: u32, seed: u64) -> TrailCorpus {
    let mut r = rng(seed);
    let block = (vocab / groups).max(1);
    let trails =
        (0..n)
            .map(|_| {
                let g = r.random_range(0..groups);
                (0..len)
                    .map(|_| {
                        if r.random_bool(0.9) {
                            g * block + r.random_range(0..block)
                        } else {
                            r.random_range(0..vocab)
                        }
                    })
                    .collect()
            })
            .collect();
    TrailCorpus { trails }
}
