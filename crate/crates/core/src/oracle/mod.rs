//! Ground truth for small models: the compatibility constraint system, exact
//! bounds by vertex enumeration, a compatible quantification, and random
//! chain benchmarks.

pub mod bench;
pub mod constraints;
pub mod exact;
mod linalg;
pub mod quantify;
pub mod vertex;

pub use bench::{
    generate_benchmark, rmse, run_instance, sample_dataset, BenchClass, BenchOptions, BenchRow,
    Baseline, Benchmark, BenchmarkSpec,
};
pub use constraints::{constraint_system, ComponentSystem, Constraint, ConstraintSystem};
pub use exact::{exact_bounds, ExactBounds};
pub use quantify::compatible_quantification;
pub use vertex::vertices;
