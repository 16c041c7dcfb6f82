//! Analytic density against a Monte Carlo histogram.

use opfree::density::{density_grid, GridSpec};
use opfree::rmt_oracle::{binned_l1_distance, binning_floor, l1_distance, product_spectrum, SimulationSpec};
use opfree::subordination::IterationConfig;
use opfree::{ComplexMatrix, DiscreteModel, OperatorModel, SemicircularModel};

fn main() -> opfree::Result<()> {
    let x: OperatorModel = DiscreteModel::uniform_scalar(&[1.0, 2.0, 3.0])?.into();
    let y: OperatorModel = SemicircularModel::from_family(vec![ComplexMatrix::identity(1)], 0.0)?.into();

    let mut spec = SimulationSpec::new(x.clone(), y.clone());
    spec.matrix_size = 300;
    spec.trials = 20;
    spec.bins = 100;
    let emp = product_spectrum(&spec)?;

    let grid = GridSpec::around_spectrum(&emp.eigenvalues, 2000)?;
    let curve = density_grid(&x, &y, &grid, &IterationConfig::default())?;
    println!("l1        {:.4}", l1_distance(&curve, &emp)?);
    println!("l1_binned {:.4}", binned_l1_distance(&curve, &emp)?);
    println!("l1_floor  {:.4}", binning_floor(&curve, &emp.edges)?);
    Ok(())
}
