//! Real-weighted sums of Pauli strings and their matrix-free action.
//!
//! A string is stored as an `(x, z)` bit-mask pair: qubit `q` carries `X` when
//! bit `n-1-q` of `x` is set, `Z` when the same bit of `z` is set, and `Y`
//! when both are. With this encoding a string acts on a basis state as
//! `P|b> = i^{|x&z|} (-1)^{|b&z|} |b ^ x>`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::StateVector;

/// Hard limit from the `u64` masks.
pub const MAX_QUBITS: usize = 30;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn label(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

#[inline]
fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self { n_qubits, x: 0, z: 0 }
    }

    /// String acting as `ops[k].1` on qubit `ops[k].0` and as identity elsewhere.
    pub fn from_ops(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::Resource { n_qubits, cap: MAX_QUBITS });
        }
        let mut s = Self::identity(n_qubits);
        for &(q, p) in ops {
            if q >= n_qubits {
                return Err(Error::Validation(format!("qubit {q} out of range for {n_qubits} qubits")));
            }
            let bit = 1u64 << (n_qubits - 1 - q);
            if (s.x | s.z) & bit != 0 {
                return Err(Error::Validation(format!("qubit {q} listed twice")));
            }
            match p {
                Pauli::I => {}
                Pauli::X => s.x |= bit,
                Pauli::Z => s.z |= bit,
                Pauli::Y => {
                    s.x |= bit;
                    s.z |= bit;
                }
            }
        }
        Ok(s)
    }

    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Result<Self> {
        Self::from_ops(n_qubits, &[(qubit, p)])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        let bit = 1u64 << (self.n_qubits - 1 - qubit);
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// `self * other = phase * result`.
    pub fn multiply(&self, other: &PauliString) -> (Complex64, PauliString) {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let result = PauliString { n_qubits: self.n_qubits, x, z };
        // (i^a X^x1 Z^z1)(i^b X^x2 Z^z2) = i^{a+b} (-1)^{|z1&x2|} X^x Z^z
        let exp = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones();
        let exp = (exp + 4 * 64 - result.y_count()) % 4;
        (i_pow(exp), result)
    }

    /// Phase and target of `P|b>`.
    #[inline]
    pub fn act(&self, b: usize) -> (Complex64, usize) {
        let sign = if ((b as u64) & self.z).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        (i_pow(self.y_count()) * sign, b ^ self.x as usize)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            write!(f, "{}", self.get(q).label())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        let mut ops = Vec::with_capacity(n);
        for (q, c) in s.chars().enumerate() {
            let p = match c {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                _ => return Err(Error::Validation(format!("bad Pauli label {c:?}"))),
            };
            ops.push((q, p));
        }
        Self::from_ops(n, &ops)
    }
}

/// Hermitian operator `sum_k c_k P_k` with real coefficients.
///
/// Terms are kept sorted by string with duplicates merged and exact zeros
/// dropped, so two sums describing the same operator through the same
/// arithmetic compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, s) in terms {
            if s.n_qubits != n_qubits {
                return Err(Error::Validation(format!(
                    "string {s} has {} qubits, expected {n_qubits}",
                    s.n_qubits
                )));
            }
            if !c.is_finite() {
                return Err(Error::Validation(format!("non-finite coefficient on {s}")));
            }
            *merged.entry(s).or_insert(0.0) += c;
        }
        Ok(Self::from_merged(n_qubits, merged))
    }

    fn from_merged(n_qubits: usize, merged: BTreeMap<PauliString, f64>) -> Self {
        let terms = merged.into_iter().filter(|(_, c)| *c != 0.0).map(|(s, c)| (c, s)).collect();
        Self { n_qubits, terms }
    }

    /// Parse `[(coefficient, "XZI"), ...]`.
    pub fn from_labels(terms: &[(f64, &str)]) -> Result<Self> {
        let n = terms.first().map(|(_, s)| s.chars().count()).unwrap_or(0);
        let parsed = terms
            .iter()
            .map(|(c, s)| s.parse::<PauliString>().map(|p| (*c, p)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(n, parsed)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|(_, s)| s.is_diagonal())
    }

    /// Sum of absolute coefficients, an upper bound on the spectral norm.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn scaled(&self, factor: f64) -> PauliSum {
        let terms = self.terms.iter().map(|&(c, s)| (c * factor, s));
        Self::from_terms(self.n_qubits, terms).expect("scaling preserves validity")
    }

    /// `sum_k weights[k] * ops[k]`, merging equal strings.
    pub fn linear_combination(ops: &[&PauliSum], weights: &[f64]) -> Result<PauliSum> {
        let n = ops.first().map(|o| o.n_qubits).unwrap_or(0);
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (op, &w) in ops.iter().zip(weights) {
            if op.n_qubits != n {
                return Err(Error::Validation("operators act on different qubit counts".into()));
            }
            for &(c, s) in &op.terms {
                *merged.entry(s).or_insert(0.0) += w * c;
            }
        }
        Ok(Self::from_merged(n, merged))
    }

    /// The Hermitian operator `i [A, B]`.
    pub fn i_commutator(a: &PauliSum, b: &PauliSum) -> Result<PauliSum> {
        if a.n_qubits != b.n_qubits {
            return Err(Error::Validation("commutator of operators on different qubit counts".into()));
        }
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for &(ca, sa) in &a.terms {
            for &(cb, sb) in &b.terms {
                if sa.commutes_with(&sb) {
                    continue;
                }
                // [P, Q] = 2 P Q for anticommuting strings, and i * phase is real
                let (phase, r) = sa.multiply(&sb);
                let coeff = Complex64::new(0.0, 2.0) * phase * ca * cb;
                debug_assert!(coeff.im.abs() < 1e-12);
                *merged.entry(r).or_insert(0.0) += coeff.re;
            }
        }
        Ok(Self::from_merged(a.n_qubits, merged))
    }

    /// Diagonal of the operator in the computational basis (diagonal terms only).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for &(c, s) in self.terms.iter().filter(|(_, s)| s.is_diagonal()) {
            for (b, v) in d.iter_mut().enumerate() {
                let (phase, _) = s.act(b);
                *v += c * phase.re;
            }
        }
        d
    }

    /// `H|psi>` without forming the matrix.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::Validation(format!(
                "state has {} qubits, operator {}",
                psi.n_qubits(),
                self.n_qubits
            )));
        }
        let op = CompiledOperator::new(self);
        let mut out = vec![ZERO; self.dim()];
        op.apply_into(psi.amplitudes(), &mut out);
        StateVector::from_amplitudes(self.n_qubits, out)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for &(c, s) in &self.terms {
            for b in 0..dim {
                let (phase, target) = s.act(b);
                m[(target, b)] += phase * c;
            }
        }
        m
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (c, s)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum FlipCoefficients {
    /// Same amplitude factor for every basis state (pure X strings).
    Uniform(Complex64),
    PerState(Vec<Complex64>),
}

/// Pauli sum grouped by bit-flip mask for fast repeated application.
///
/// Diagonal strings collapse into one real vector; strings sharing an `x`
/// mask collapse into one coefficient table, so a matvec costs
/// `O(2^n * distinct masks)`.
#[derive(Debug, Clone)]
pub struct CompiledOperator {
    n_qubits: usize,
    diagonal: Option<Vec<f64>>,
    flips: Vec<(usize, FlipCoefficients)>,
}

impl CompiledOperator {
    pub fn new(op: &PauliSum) -> Self {
        let dim = op.dim();
        let diag_terms: Vec<_> = op.terms.iter().filter(|(_, s)| s.is_diagonal()).collect();
        let diagonal = if diag_terms.is_empty() { None } else { Some(op.diagonal()) };

        let mut groups: BTreeMap<u64, Vec<(f64, PauliString)>> = BTreeMap::new();
        for &(c, s) in op.terms.iter().filter(|(_, s)| !s.is_diagonal()) {
            groups.entry(s.x).or_default().push((c, s));
        }
        let flips = groups
            .into_iter()
            .map(|(x, terms)| {
                let coeffs = if terms.iter().all(|(_, s)| s.z == 0) {
                    FlipCoefficients::Uniform(Complex64::new(terms.iter().map(|(c, _)| c).sum(), 0.0))
                } else {
                    let mut table = vec![ZERO; dim];
                    for (c, s) in &terms {
                        for (b, t) in table.iter_mut().enumerate() {
                            *t += s.act(b).0 * *c;
                        }
                    }
                    FlipCoefficients::PerState(table)
                };
                (x as usize, coeffs)
            })
            .collect();
        Self { n_qubits: op.n_qubits, diagonal, flips }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn diagonal(&self) -> Option<&[f64]> {
        self.diagonal.as_deref()
    }

    pub fn is_diagonal(&self) -> bool {
        self.flips.is_empty()
    }

    /// `out = H psi`.
    pub fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        match &self.diagonal {
            Some(d) => out.iter_mut().zip(psi).zip(d).for_each(|((o, p), v)| *o = p * v),
            None => out.fill(ZERO),
        }
        self.add_flips(1.0, psi, out);
    }

    /// `out += weight * (off-diagonal part of H) psi`.
    #[inline]
    pub(crate) fn add_flips(&self, weight: f64, psi: &[Complex64], out: &mut [Complex64]) {
        if weight == 0.0 {
            return;
        }
        for (x, coeffs) in &self.flips {
            let x = *x;
            match coeffs {
                FlipCoefficients::Uniform(c) => {
                    let c = c * weight;
                    for (b, p) in psi.iter().enumerate() {
                        out[b ^ x] += c * p;
                    }
                }
                FlipCoefficients::PerState(table) => {
                    for (b, (p, c)) in psi.iter().zip(table).enumerate() {
                        out[b ^ x] += c * p * weight;
                    }
                }
            }
        }
    }

    /// `<psi|H|psi>` as a complex number (imaginary part is rounding).
    pub fn expectation(&self, psi: &[Complex64], scratch: &mut [Complex64]) -> Complex64 {
        self.apply_into(psi, scratch);
        crate::state::inner(psi, scratch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sum(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> PauliSum {
        let labels = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        let t = (0..terms).map(|_| {
            let ops: Vec<_> = (0..n).map(|q| (q, labels[rng.gen_range(0..4)])).collect();
            (rng.gen_range(-1.0..1.0), PauliString::from_ops(n, &ops).unwrap())
        });
        PauliSum::from_terms(n, t.collect::<Vec<_>>()).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
        let amps = (0..1 << n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut s = StateVector::from_amplitudes(n, amps.collect()).unwrap();
        s.normalize();
        s
    }

    #[test]
    fn single_qubit_matrices() {
        let y = PauliSum::from_labels(&[(1.0, "Y")]).unwrap().to_dense();
        assert_eq!(y[(0, 1)], Complex64::new(0.0, -1.0));
        assert_eq!(y[(1, 0)], Complex64::new(0.0, 1.0));
        let z = PauliSum::from_labels(&[(1.0, "Z")]).unwrap().to_dense();
        assert_eq!(z[(0, 0)].re, 1.0);
        assert_eq!(z[(1, 1)].re, -1.0);
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let s: PauliString = "XI".parse().unwrap();
        assert_eq!(s.act(0b00).1, 0b10);
        assert_eq!(s.to_string(), "XI");
    }

    #[test]
    fn products_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels = ["I", "X", "Y", "Z"];
        for _ in 0..200 {
            let a: String = (0..3).map(|_| labels[rng.gen_range(0..4)]).collect();
            let b: String = (0..3).map(|_| labels[rng.gen_range(0..4)]).collect();
            let pa: PauliString = a.parse().unwrap();
            let pb: PauliString = b.parse().unwrap();
            let (phase, r) = pa.multiply(&pb);
            let lhs = PauliSum::from_labels(&[(1.0, &a)]).unwrap().to_dense()
                * PauliSum::from_labels(&[(1.0, &b)]).unwrap().to_dense();
            let rhs = PauliSum::from_terms(3, [(1.0, r)]).unwrap().to_dense() * phase;
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }

    #[test]
    fn merges_duplicates_and_drops_zeros() {
        let s = PauliSum::from_labels(&[(0.5, "XZ"), (0.25, "XZ"), (1.0, "ZZ"), (-1.0, "ZZ")]).unwrap();
        assert_eq!(s.terms().len(), 1);
        assert_eq!(s.terms()[0].0, 0.75);
    }

    #[test]
    fn identity_sum_scales_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_state(&mut rng, 3);
        let h = PauliSum::from_labels(&[(2.5, "III")]).unwrap();
        let out = h.apply(&psi).unwrap();
        for (o, p) in out.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((o - p * 2.5).norm() < 1e-15);
        }
    }

    #[test]
    fn single_z_flips_sign_on_set_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = random_state(&mut rng, 3);
        let h = PauliSum::from_labels(&[(1.0, "IZI")]).unwrap();
        let out = h.apply(&psi).unwrap();
        for b in 0..8 {
            let sign = if b & 0b010 != 0 { -1.0 } else { 1.0 };
            assert_eq!(out.amplitudes()[b], psi.amplitudes()[b] * sign);
        }
    }

    #[test]
    fn apply_matches_dense_up_to_six_qubits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=6 {
            for _ in 0..5 {
                let h = random_sum(&mut rng, n, 12);
                let psi = random_state(&mut rng, n);
                let fast = h.apply(&psi).unwrap();
                let dense = h.to_dense() * nalgebra::DVector::from_column_slice(psi.amplitudes());
                for (a, b) in fast.amplitudes().iter().zip(dense.iter()) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dense_form_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=5 {
            let m = random_sum(&mut rng, n, 10).to_dense();
            assert!((m.adjoint() - &m).norm() < 1e-12);
        }
    }

    #[test]
    fn i_commutator_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=4 {
            let a = random_sum(&mut rng, n, 6);
            let b = random_sum(&mut rng, n, 6);
            let c = PauliSum::i_commutator(&a, &b).unwrap().to_dense();
            let (da, db) = (a.to_dense(), b.to_dense());
            let want = (&da * &db - &db * &da) * Complex64::new(0.0, 1.0);
            assert!((c - want).norm() < 1e-12);
        }
    }

    #[test]
    fn expectation_is_real_for_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = random_sum(&mut rng, 4, 15);
        let psi = random_state(&mut rng, 4);
        let op = CompiledOperator::new(&h);
        let mut scratch = vec![ZERO; 16];
        let e = op.expectation(psi.amplitudes(), &mut scratch);
        assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-14);
    }
}
