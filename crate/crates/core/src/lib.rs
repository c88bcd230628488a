//! Higher-order portfolio optimization toolkit.
//!
//! Price series are turned into mean, covariance, coskewness and cokurtosis
//! estimates, which define a degree-4 integer program with a capital budget.
//! The program is compiled to a binary polynomial (logarithmic integer
//! encoding), then to a diagonal spin Hamiltonian that can be solved by exact
//! enumeration or by a QAOA statevector simulator. Continuous baselines with
//! integer discretization and the comparison metrics live alongside.

pub mod baseline;
pub mod error;
pub mod eval_report;
pub mod exact;
pub mod market_data;
pub mod moments;
pub mod optim;
pub mod pipeline;
pub mod polynomial;
pub mod problem;
pub mod qaoa;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
