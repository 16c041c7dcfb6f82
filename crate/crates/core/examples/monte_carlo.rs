//! Pooled eigenvalues of X^{1/2} Y X^{1/2} for random matrix realizations.

use opfree::rmt_oracle::{product_spectrum, SimulationSpec};
use opfree::{ComplexMatrix, DiscreteModel, OperatorModel, SemicircularModel};

fn main() -> opfree::Result<()> {
    let x: OperatorModel = DiscreteModel::uniform_scalar(&[1.0, 4.0])?.into();
    let y: OperatorModel = SemicircularModel::from_family(vec![ComplexMatrix::identity(1)], 2.0)?.into();

    let mut spec = SimulationSpec::new(x, y);
    spec.matrix_size = 200;
    spec.trials = 10;
    let emp = product_spectrum(&spec)?;
    let (lo, hi) = (emp.edges[0], emp.edges[emp.edges.len() - 1]);
    println!("{} eigenvalues in [{lo:.3}, {hi:.3}]  histogram mass {:.6}", emp.eigenvalues.len(), emp.mass());
    Ok(())
}
