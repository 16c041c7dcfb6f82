//! Operator-valued semicircular Cauchy transform from the averaged fixed point.

use num_complex::Complex64;
use opfree::{ComplexMatrix, SemicircularModel};

fn main() -> opfree::Result<()> {
    let one = ComplexMatrix::identity(2);
    let off = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])?;
    let s = SemicircularModel::from_family(vec![one, off], 0.0)?;

    for re in [-2.0, 0.0, 1.0] {
        let b = ComplexMatrix::scalar(2, Complex64::new(re, 0.05));
        let sol = s.semicircular_cauchy(&b, 1e-12, 20_000)?;
        let residual = ((&b - &s.covariance().apply(&sol.g)) * &sol.g - ComplexMatrix::identity(2)).frobenius_norm();
        println!(
            "b = {re:+.1} + 0.05i  -Im tr G / pi = {:.6}  residual {residual:.1e}",
            -sol.g.normalized_trace().im / std::f64::consts::PI
        );
    }
    Ok(())
}
