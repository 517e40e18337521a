//! Exact operator algebra for linear PDEs with linear involutions, and a
//! numeric Green's-function pipeline for the bent-plate heat model and a
//! biharmonic diffusion model on the disk.
//!
//! The symbolic side works over exact scalars (rationals and small cyclotomic
//! extensions), stores constant-coefficient differential operators as sparse
//! symbol polynomials, and composes operators with pullback terms through the
//! rule `D_v A* = A* D_{Av}`. The numeric side builds Dirichlet Green's
//! functions on the disk (log kernel, Bessel eigenfunction series and their
//! compositions) and verifies them with quadrature and finite differences.

pub mod scalars;
pub mod linalg;
pub mod symtensor;
pub mod involution;
pub mod opalgebra;
pub mod specfun;
pub mod quad;
pub mod greens;
pub mod numverify;
pub mod dsl;

mod parallel;

pub use parallel::configure_thread_pool_from_env;
