//! The subordination fixed point and the product Cauchy transform at one point.

use num_complex::Complex64;
use opfree::subordination::{cauchy_product_scalar_point, omega2, IterationConfig};
use opfree::{ComplexMatrix, DiscreteModel, OperatorModel};

fn main() -> opfree::Result<()> {
    let x: OperatorModel = DiscreteModel::uniform_scalar(&[1.0, 3.0])?.into();
    let y: OperatorModel = DiscreteModel::uniform_scalar(&[-1.0, 2.0])?.into();
    let cfg = IterationConfig::default();

    let z = Complex64::new(1.5, 0.1);
    let b = ComplexMatrix::scalar(1, z.conj().inv());
    let sol = omega2(&x, &y, &b, &cfg)?;
    println!(
        "omega2 = {:.8}  iterations {}  residual {:.1e}  bound {:?}",
        sol.omega2[(0, 0)],
        sol.iterations,
        sol.residual,
        sol.im_lower_bound_ok
    );

    let g = cauchy_product_scalar_point(&x, &y, z, &cfg)?;
    println!("G_xy({z}) = {:.8}", g.normalized_trace());
    Ok(())
}
