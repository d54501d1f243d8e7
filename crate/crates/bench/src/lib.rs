//! Fixtures shared by the solver benchmarks.

use pliable::{generate, Dataset, SimName, SimSpec};

/// Training split of a simulated problem with the given shape.
pub fn fixture(name: SimName, n: usize, p: usize, seed: u64) -> Dataset {
    let spec = SimSpec::new(name, seed).with_dims(n, p);
    generate(&spec).expect("valid simulation spec").train.data
}
