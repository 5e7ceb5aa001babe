//! Linear algebra, eigenvalues, finite differences and ODE integration.

mod banded;
mod dense;
mod eigen;
mod fd;
mod ode;

pub use banded::{solve_banded, BandedLu, BandedMatrix, BandedSystem, TripletAssembler};
pub use dense::{
    dot, norm2, norm_inf_vec, null_space, orthogonal_complement, rank, solve_dense, svd, symmetric_eigen,
    DenseMatrix, LuFactors, PIVOT_THRESHOLD,
};
pub use eigen::{eigen_residual, eigen_small, eigenvalues, EigenDecomposition};
pub use fd::{derivative_1d, fd_derivative};
pub use ode::{rk4_integrate, Trajectory};
