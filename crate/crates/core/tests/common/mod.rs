#![allow(dead_code)]

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use opfree::cli::{load_config, RunConfig};
use opfree::models::Monomial;
use opfree::{ComplexMatrix, DiscreteModel, OperatorModel, SemicircularModel};
use proptest::prelude::*;

pub const SHIPPED: [&str; 5] = ["s2_shift_s1", "s2p85_s1p40", "s2p85_s1p75", "dcd_discrete", "dcd_semicircle"];

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

pub fn shipped(name: &str) -> RunConfig {
    load_config(&config_path(name)).unwrap()
}

fn centered(model: &OperatorModel) -> SemicircularModel {
    match model {
        OperatorModel::Semicircular(m) => SemicircularModel::from_family(m.covariance().family().to_vec(), 0.0).unwrap(),
        _ => panic!("not semicircular"),
    }
}

pub fn s1() -> SemicircularModel {
    centered(&shipped("s2_shift_s1").y)
}

pub fn s2() -> SemicircularModel {
    centered(&shipped("s2_shift_s1").x)
}

pub fn s1_prime() -> SemicircularModel {
    centered(&shipped("s2p85_s1p40").y)
}

pub fn s2_prime() -> SemicircularModel {
    centered(&shipped("s2p85_s1p40").x)
}

pub fn atom(t: f64) -> OperatorModel {
    DiscreteModel::uniform_scalar(&[t]).unwrap().into()
}

pub fn scalar_block(support: &[f64], pattern: &[[i64; 2]; 2]) -> OperatorModel {
    let pattern: Vec<Vec<Monomial>> = pattern
        .iter()
        .map(|row| row.iter().map(|&p| if p < 0 { Monomial::Zero } else { Monomial::Power(p as u32) }).collect())
        .collect();
    let w = vec![1.0 / support.len() as f64; support.len()];
    DiscreteModel::scalar_block(support, &w, &pattern).unwrap().into()
}

pub fn min_im_eigenvalue(m: &ComplexMatrix) -> f64 {
    m.imag_part().min_eigenvalue().unwrap()
}

pub fn max_im_eigenvalue(m: &ComplexMatrix) -> f64 {
    *m.imag_part().hermitian_eigen().unwrap().eigenvalues.last().unwrap()
}

fn matrix(n: usize, entries: Vec<(f64, f64)>) -> ComplexMatrix {
    ComplexMatrix::from_vec(n, entries.into_iter().map(|(re, im)| c(re, im)).collect()).unwrap()
}

/// `Re + i (A A* + delta I)` with entries of size `scale`.
pub fn upper(n: usize, scale: f64, delta: f64) -> impl Strategy<Value = ComplexMatrix> {
    let entry = (-scale..scale, -scale..scale);
    (
        proptest::collection::vec(entry.clone(), n * n),
        proptest::collection::vec(entry, n * n),
    )
        .prop_map(move |(re, a)| {
            let re = matrix(n, re);
            let a = matrix(n, a);
            let im = &a * &a.adjoint() + ComplexMatrix::scalar(n, c(delta, 0.0));
            re.real_part() + im.scale(c(0.0, 1.0))
        })
}

pub fn hermitian(n: usize, scale: f64) -> impl Strategy<Value = ComplexMatrix> {
    proptest::collection::vec((-scale..scale, -scale..scale), n * n).prop_map(move |v| {
        let a = matrix(n, v);
        (&a + &a.adjoint()).scale_real(0.5)
    })
}

/// Discrete model with 1..5 Hermitian atoms of size `n`.
pub fn discrete(n: usize) -> impl Strategy<Value = OperatorModel> {
    proptest::collection::vec((0.1f64..1.0, hermitian(n, 2.0)), 1..5).prop_map(|raw| {
        let total: f64 = raw.iter().map(|r| r.0).sum();
        let mut atoms: Vec<opfree::models::Atom> = raw
            .into_iter()
            .map(|(p, m)| opfree::models::Atom { weight: p / total, matrix: m })
            .collect();
        // Absorb rounding in the last weight.
        let rest: f64 = atoms[..atoms.len() - 1].iter().map(|a| a.weight).sum();
        let last = atoms.len() - 1;
        atoms[last].weight = 1.0 - rest;
        DiscreteModel::new(atoms).unwrap().into()
    })
}

/// Discrete model with strictly positive atoms, eigenvalues in `[lo, hi]`.
pub fn positive_discrete(n: usize, lo: f64) -> impl Strategy<Value = OperatorModel> {
    proptest::collection::vec((0.1f64..1.0, hermitian(n, 1.0)), 1..5).prop_map(move |raw| {
        let total: f64 = raw.iter().map(|r| r.0).sum();
        let mut atoms: Vec<opfree::models::Atom> = raw
            .into_iter()
            .map(|(p, m)| {
                let shift = lo - m.min_eigenvalue().unwrap();
                opfree::models::Atom {
                    weight: p / total,
                    matrix: &m + &ComplexMatrix::scalar(n, c(shift.max(0.0), 0.0)),
                }
            })
            .collect();
        let rest: f64 = atoms[..atoms.len() - 1].iter().map(|a| a.weight).sum();
        let last = atoms.len() - 1;
        atoms[last].weight = 1.0 - rest;
        DiscreteModel::new(atoms).unwrap().into()
    })
}
