//! Joint eigenfunctions: 1D Sturm–Liouville solvers, the separated
//! surface-of-revolution and Liouville solvers, the harmonic oscillator and a
//! brute-force 2D oracle.

pub mod eigenfunction;
pub mod liouville;
pub mod oracle;
pub mod oscillator;
pub mod revolution;
pub mod sturm_liouville;
pub mod tridiag;

pub use eigenfunction::{sup_norm, JointEigenfunction, Layout, QuantumNumbers, Region, SupNorm};
pub use liouville::{liouville_joint_eigs, liouville_joint_map, LiouvilleOptions, LiouvilleSeparation, Separation};
pub use oscillator::ho_eigs;
pub use revolution::{sor_joint_eigs, sor_mode, SorOptions};
pub use sturm_liouville::{
    solve_sl_dirichlet, solve_sl_periodic, Boundary, EigenSolution1D, Grid1D, GridKind, SpectralWindow,
};
