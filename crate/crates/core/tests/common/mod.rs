#![allow(dead_code)]

use localband::data::{Dataset, Schema};
use localband::seed;
use rand::Rng;

/// `y = x1 + noise·ε` with `z ~ U[0,1]^p`, conditioning on the first `q` coordinates.
pub fn regression_data(n: usize, p: usize, q: usize, noise: f64, s: u64) -> Dataset {
    let mut rng = seed::rng(s);
    let mut z = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = z.len();
        for _ in 0..p {
            z.push(rng.random::<f64>());
        }
        let e: f64 = rng.random::<f64>() - 0.5;
        y.push(z[start] + noise * e);
    }
    let cols = (1..=p).map(|k| format!("z{k}")).collect();
    let schema = Schema::new("y", None, cols, (0..q).collect()).unwrap();
    Dataset::new(schema, y, None, z).unwrap()
}

pub fn uniform_points(n: usize, dim: usize, s: u64) -> Vec<f64> {
    let mut rng = seed::rng(s);
    (0..n * dim).map(|_| rng.random::<f64>()).collect()
}

#[cfg(feature = "std")]
pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}
