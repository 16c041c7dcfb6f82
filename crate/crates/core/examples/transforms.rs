//! Cauchy, reciprocal Cauchy and h transforms of a small discrete model.

use num_complex::Complex64;
use opfree::{ComplexMatrix, DiscreteModel, OperatorModel};

fn main() -> opfree::Result<()> {
    let a = ComplexMatrix::from_real_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]])?;
    let b = ComplexMatrix::from_real_rows(&[vec![0.3, 0.0], vec![0.0, 1.7]])?;
    let x: OperatorModel = DiscreteModel::new(vec![
        opfree::models::Atom { weight: 0.4, matrix: a },
        opfree::models::Atom { weight: 0.6, matrix: b },
    ])?
    .into();

    let w = ComplexMatrix::scalar(2, Complex64::new(0.5, 1.0));
    let g = x.cauchy(&w)?;
    let f = x.reciprocal_cauchy(&w)?;
    let h = x.h_transform(&w)?;
    println!("G(w)      = {g:?}");
    println!("F(w)      = {f:?}");
    println!("h(w)      = {h:?}");
    println!("max Im G  = {:.3e}", g.imag_part().hermitian_eigen()?.eigenvalues.last().unwrap());
    println!("min Im h  = {:.3e}", h.imag_part().min_eigenvalue()?);
    Ok(())
}
