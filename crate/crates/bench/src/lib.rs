//! Benchmark-only crate. The measurements live in `benches/kernels.rs`;
//! nothing here is part of the library API.
