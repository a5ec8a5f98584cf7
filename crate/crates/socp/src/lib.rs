//! A small conic solver for programs of the form
//!
//! ```text
//! maximize    cᵀx
//! subject to  Ex = f,  Gx ≤ h,
//!             ‖A_i x + b_i‖ ≤ c_iᵀx + d_i,
//!             x_vᵀ Q_j x_v + q_jᵀx ≤ r_j   (Q_j ⪰ 0)
//! ```
//!
//! Quadratic rows are rewritten as rotated second-order cones, the problem is
//! embedded in a homogeneous self-dual model and solved with a primal-dual
//! interior-point method.
//!
//! ```
//! use relayplan_socp::{solve, ConeProgram, SparseRow, Status};
//!
//! let mut p = ConeProgram::new(1);
//! p.objective[0] = 1.0;
//! p.add_le(SparseRow::from_pairs([(0, 1.0)]), 5.0);
//! let sol = solve(&p, 1e-8, 50).unwrap();
//! assert_eq!(sol.status, Status::Optimal);
//! assert!((sol.x[0] - 5.0).abs() < 1e-6);
//! ```

mod conic;
mod cones;
mod error;
mod ipm;
mod kkt;
mod ldl;
mod program;
mod verify;

pub use error::ProgramError;
pub use ipm::{solve, solve_with, Settings, Solution, Status};
pub use program::{Affine, ConeProgram, LinearConstraint, QuadConstraint, SocConstraint, SparseRow};
pub use verify::{verify, ViolationReport};
