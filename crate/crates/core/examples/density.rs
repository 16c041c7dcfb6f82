//! Density of a product on a grid, written to CSV with its sidecar.

use opfree::density::{csv_export, density_grid, GridSpec};
use opfree::subordination::IterationConfig;
use opfree::{ComplexMatrix, DiscreteModel, OperatorModel, SemicircularModel};

fn main() -> opfree::Result<()> {
    let x: OperatorModel = DiscreteModel::point_mass(ComplexMatrix::identity(1))?.into();
    let y: OperatorModel = SemicircularModel::from_family(vec![ComplexMatrix::identity(1)], 0.0)?.into();

    let spec = GridSpec::new(-2.5, 2.5, 501)?.with_epsilon(1e-4);
    let curve = density_grid(&x, &y, &spec, &IterationConfig::default())?;
    let (lo, mid, hi) = curve.iteration_stats();
    println!("mass {:.6}  peak {:.6}  iterations {lo}/{mid}/{hi}", curve.total_mass, curve.max_value());

    let path = std::env::temp_dir().join("semicircle_density.csv");
    csv_export(&curve, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
