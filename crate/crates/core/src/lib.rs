pub mod cli;
pub mod density;
pub mod error;
pub mod matcx;
pub mod models;
pub mod rmt_oracle;
pub mod subordination;

pub use error::{Error, Result};
pub use matcx::{ComplexMatrix, HermitianDecomposition};
pub use models::{CovarianceMap, DiscreteModel, OperatorModel, SemicircularModel};
