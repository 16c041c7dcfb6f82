//! Density of a block-embedded product, with the zero atom of the embedding
//! removed.

use opfree::density::{density_grid, unwrap_embedding, GridSpec};
use opfree::models::Monomial;
use opfree::subordination::IterationConfig;
use opfree::{DiscreteModel, OperatorModel};

fn main() -> opfree::Result<()> {
    // y = [[d^2, d^3], [d^3, d^4]] has rank one, so the product carries a
    // structural zero eigenvalue of weight 1/2.
    use Monomial::{Power, Zero};
    let x: OperatorModel =
        DiscreteModel::scalar_block(&[0.5, 1.0, 1.5], &[1.0 / 3.0; 3], &[vec![Power(1), Zero], vec![Zero, Power(1)]])?.into();
    let y: OperatorModel =
        DiscreteModel::scalar_block(&[0.5, 1.0, 2.0], &[1.0 / 3.0; 3], &[vec![Power(2), Power(3)], vec![Power(3), Power(4)]])?.into();

    let spec = GridSpec::new(-0.5, 40.5, 8000)?;
    let raw = density_grid(&x, &y, &spec, &IterationConfig::default())?;
    let curve = unwrap_embedding(&raw, 2)?;
    println!("unwrapped mass {:.5}  m1 {:.5}  atom at zero {:?}", curve.total_mass, curve.moments.1, curve.atom_at_zero);
    Ok(())
}
