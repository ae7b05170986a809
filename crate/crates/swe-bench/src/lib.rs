//! Criterion benchmark crate for the solver kernels; see benches/.
