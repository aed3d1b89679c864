//! Weighted sums of Pauli strings.
//!
//! Every Hamiltonian and most observables in this crate are represented as a
//! [`PauliSum`]. A [`PauliString`] stores its non-identity factors in two bit
//! masks (`x_mask`, `z_mask`); a qubit with both bits set carries a Y factor.
//! Acting on a computational basis state `|b>` a string flips the bits in
//! `x_mask` and contributes the phase
//! `i^{|Y|} * (-1)^{popcount(b & z_mask)}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One of the three non-identity Pauli factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// A single weighted Pauli string on up to 64 qubits.
#[derive(Clone, Debug)]
pub struct PauliString {
    pub coefficient: Complex64,
    x_mask: u64,
    z_mask: u64,
}

impl PauliString {
    /// Identity string with the given coefficient.
    pub fn identity(coefficient: Complex64) -> Self {
        Self { coefficient, x_mask: 0, z_mask: 0 }
    }

    /// Build from explicit factors. Duplicate qubit entries are rejected.
    pub fn new(coefficient: Complex64, factors: &[(usize, PauliAxis)]) -> Result<Self> {
        let mut x_mask = 0u64;
        let mut z_mask = 0u64;
        for &(q, axis) in factors {
            if q >= 64 {
                return Err(Error::InvalidParams(format!("qubit index {q} exceeds 63")));
            }
            let bit = 1u64 << q;
            if (x_mask | z_mask) & bit != 0 {
                return Err(Error::InvalidParams(format!("duplicate factor on qubit {q}")));
            }
            match axis {
                PauliAxis::X => x_mask |= bit,
                PauliAxis::Y => {
                    x_mask |= bit;
                    z_mask |= bit;
                }
                PauliAxis::Z => z_mask |= bit,
            }
        }
        Ok(Self { coefficient, x_mask, z_mask })
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    /// Largest qubit index carrying a non-identity factor, if any.
    pub fn max_qubit(&self) -> Option<usize> {
        let m = self.x_mask | self.z_mask;
        if m == 0 {
            None
        } else {
            Some(63 - m.leading_zeros() as usize)
        }
    }

    /// Non-identity factors in ascending qubit order.
    pub fn factors(&self) -> Vec<(usize, PauliAxis)> {
        let mut out = Vec::new();
        let mut m = self.x_mask | self.z_mask;
        while m != 0 {
            let q = m.trailing_zeros() as usize;
            let bit = 1u64 << q;
            let axis = match (self.x_mask & bit != 0, self.z_mask & bit != 0) {
                (true, false) => PauliAxis::X,
                (true, true) => PauliAxis::Y,
                (false, true) => PauliAxis::Z,
                (false, false) => unreachable!(),
            };
            out.push((q, axis));
            m &= m - 1;
        }
        out
    }

    /// Phase factor `i^{|Y|}` common to every basis state.
    pub fn y_phase(&self) -> Complex64 {
        match (self.x_mask & self.z_mask).count_ones() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Product `self * other` (other acts first).
    pub fn product(&self, other: &Self) -> Self {
        // Write each string as i^{|Y|} X^x Z^z and commute Z^z past X^x'.
        let x = self.x_mask ^ other.x_mask;
        let z = self.z_mask ^ other.z_mask;
        let anticommutations = (self.z_mask & other.x_mask).count_ones();
        let y_before = (self.x_mask & self.z_mask).count_ones()
            + (other.x_mask & other.z_mask).count_ones();
        let y_after = (x & z).count_ones();
        // i^{y_before - y_after} with the sign from Z-X reordering.
        let mut power = (y_before as i64 - y_after as i64).rem_euclid(4) as u32;
        power = (power + 2 * (anticommutations % 2)) % 4;
        let phase = match power {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        Self {
            coefficient: self.coefficient * other.coefficient * phase,
            x_mask: x,
            z_mask: z,
        }
    }
}

/// A sum of Pauli strings on a fixed register.
#[derive(Clone, Debug)]
pub struct PauliSum {
    terms: Vec<PauliString>,
    n_qubits: usize,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        Self { terms: Vec::new(), n_qubits }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Add a term given as (coefficient, factors).
    pub fn push(&mut self, coefficient: Complex64, factors: &[(usize, PauliAxis)]) -> Result<()> {
        let term = PauliString::new(coefficient, factors)?;
        self.push_string(term)
    }

    pub fn push_string(&mut self, term: PauliString) -> Result<()> {
        if let Some(q) = term.max_qubit() {
            if q >= self.n_qubits {
                return Err(Error::SizeMismatch { expected: self.n_qubits, got: q + 1 });
            }
        }
        self.terms.push(term);
        Ok(())
    }

    /// Merge terms with identical factor maps and drop negligible ones.
    pub fn normalize(&mut self) {
        let mut merged: BTreeMap<(u64, u64), Complex64> = BTreeMap::new();
        for t in &self.terms {
            *merged.entry((t.x_mask, t.z_mask)).or_insert(Complex64::new(0.0, 0.0)) +=
                t.coefficient;
        }
        self.terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() > 1e-14)
            .map(|((x, z), c)| PauliString { coefficient: c, x_mask: x, z_mask: z })
            .collect();
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// True when every coefficient is real after canonicalization, which for
    /// Pauli strings is equivalent to Hermiticity.
    pub fn is_hermitian(&self) -> bool {
        let copy = self.clone().normalized();
        copy.terms.iter().all(|t| t.coefficient.im.abs() <= 1e-12 * (1.0 + t.coefficient.norm()))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coefficient *= factor;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::SizeMismatch { expected: self.n_qubits, got: other.n_qubits });
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out.normalize();
        Ok(out)
    }

    /// Symbolic operator product, canonicalized.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::SizeMismatch { expected: self.n_qubits, got: other.n_qubits });
        }
        let mut out = PauliSum::new(self.n_qubits);
        for a in &self.terms {
            for b in &other.terms {
                out.terms.push(a.product(b));
            }
        }
        out.normalize();
        Ok(out)
    }

    /// Commutator [self, other], canonicalized.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.product(other)?;
        let ba = other.product(self)?;
        ab.add(&ba.scaled(Complex64::new(-1.0, 0.0)))
    }

    /// Same operator on a wider register (identity on the new qubits).
    pub fn padded(&self, n_qubits: usize) -> Result<Self> {
        if n_qubits < self.n_qubits {
            return Err(Error::SizeMismatch { expected: self.n_qubits, got: n_qubits });
        }
        Ok(Self { terms: self.terms.clone(), n_qubits })
    }

    /// Dense matrix representation; intended for small registers in tests and
    /// oracles.
    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for t in &self.terms {
            let y_phase = t.y_phase();
            for b in 0..dim as u64 {
                let target = b ^ t.x_mask;
                let sign = if (b & t.z_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(target as usize, b as usize)] += t.coefficient * y_phase * sign;
            }
        }
        m
    }

    /// Text form: one term per line, "coeff_re coeff_im P0P1...P(n-1)".
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            let _ = write!(out, "{:.17e} {:.17e} ", t.coefficient.re, t.coefficient.im);
            for q in 0..self.n_qubits {
                let bit = 1u64 << q;
                let c = match (t.x_mask & bit != 0, t.z_mask & bit != 0) {
                    (false, false) => 'I',
                    (true, false) => 'X',
                    (true, true) => 'Y',
                    (false, true) => 'Z',
                };
                out.push(c);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n_qubits = 0;
        let mut terms = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let re: f64 = parts
                .next()
                .ok_or_else(|| Error::Parse("missing coefficient".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad coeff_re: {e}")))?;
            let im: f64 = parts
                .next()
                .ok_or_else(|| Error::Parse("missing imaginary part".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad coeff_im: {e}")))?;
            let word = parts.next().ok_or_else(|| Error::Parse("missing Pauli word".into()))?;
            if n_qubits == 0 {
                n_qubits = word.len();
            } else if word.len() != n_qubits {
                return Err(Error::Parse("inconsistent Pauli word lengths".into()));
            }
            let mut factors = Vec::new();
            for (q, c) in word.chars().enumerate() {
                match c {
                    'I' => {}
                    'X' => factors.push((q, PauliAxis::X)),
                    'Y' => factors.push((q, PauliAxis::Y)),
                    'Z' => factors.push((q, PauliAxis::Z)),
                    other => return Err(Error::Parse(format!("unknown factor '{other}'"))),
                }
            }
            terms.push(PauliString::new(Complex64::new(re, im), &factors)?);
        }
        if n_qubits == 0 {
            return Err(Error::Parse("empty Pauli sum text".into()));
        }
        let mut sum = PauliSum::new(n_qubits);
        for t in terms {
            sum.push_string(t)?;
        }
        Ok(sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_qubit_products_follow_the_algebra() {
        let x = PauliString::new(c(1.0), &[(0, PauliAxis::X)]).unwrap();
        let y = PauliString::new(c(1.0), &[(0, PauliAxis::Y)]).unwrap();
        let z = PauliString::new(c(1.0), &[(0, PauliAxis::Z)]).unwrap();

        // XY = iZ
        let xy = x.product(&y);
        assert_eq!(xy.factors(), vec![(0, PauliAxis::Z)]);
        assert_abs_diff_eq!(xy.coefficient.im, 1.0, epsilon = 1e-15);
        // YX = -iZ
        let yx = y.product(&x);
        assert_abs_diff_eq!(yx.coefficient.im, -1.0, epsilon = 1e-15);
        // ZX = iY
        let zx = z.product(&x);
        assert_eq!(zx.factors(), vec![(0, PauliAxis::Y)]);
        assert_abs_diff_eq!(zx.coefficient.im, 1.0, epsilon = 1e-15);
        // X^2 = I
        let xx = x.product(&x);
        assert!(xx.factors().is_empty());
        assert_abs_diff_eq!(xx.coefficient.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn normalization_merges_duplicate_factor_maps() {
        let mut sum = PauliSum::new(2);
        sum.push(c(0.5), &[(0, PauliAxis::Z), (1, PauliAxis::Z)]).unwrap();
        sum.push(c(0.25), &[(1, PauliAxis::Z), (0, PauliAxis::Z)]).unwrap();
        sum.push(c(-0.75), &[(0, PauliAxis::Z), (1, PauliAxis::Z)]).unwrap();
        sum.normalize();
        assert!(sum.is_empty());
    }

    #[test]
    fn text_round_trip_preserves_terms() {
        let mut sum = PauliSum::new(3);
        sum.push(c(1.25), &[(0, PauliAxis::X), (2, PauliAxis::Y)]).unwrap();
        sum.push(Complex64::new(0.0, -0.5), &[(1, PauliAxis::Z)]).unwrap();
        sum.normalize();
        let parsed = PauliSum::from_text(&sum.to_text()).unwrap();
        assert_eq!(parsed.n_qubits(), 3);
        let d1 = sum.to_dense();
        let d2 = parsed.to_dense();
        assert!((&d1 - &d2).norm() < 1e-14);
    }

    proptest! {
        /// Mask-based products agree with dense matrix products on 4 qubits.
        #[test]
        fn product_matches_dense_oracle(
            fa in proptest::collection::vec(0usize..4, 0..4),
            fb in proptest::collection::vec(0usize..4, 0..4),
            axes_a in proptest::collection::vec(0u8..3, 4),
            axes_b in proptest::collection::vec(0u8..3, 4),
        ) {
            let axis = |k: u8| match k { 0 => PauliAxis::X, 1 => PauliAxis::Y, _ => PauliAxis::Z };
            let mut seen = [false; 4];
            let a_factors: Vec<_> = fa.iter().enumerate()
                .filter_map(|(i, &q)| if seen[q] { None } else { seen[q] = true; Some((q, axis(axes_a[i]))) })
                .collect();
            let mut seen = [false; 4];
            let b_factors: Vec<_> = fb.iter().enumerate()
                .filter_map(|(i, &q)| if seen[q] { None } else { seen[q] = true; Some((q, axis(axes_b[i]))) })
                .collect();

            let mut a = PauliSum::new(4);
            a.push(Complex64::new(1.5, -0.25), &a_factors).unwrap();
            let mut b = PauliSum::new(4);
            b.push(Complex64::new(-0.5, 2.0), &b_factors).unwrap();

            let ab = a.product(&b).unwrap();
            let dense = a.to_dense() * b.to_dense();
            prop_assert!((ab.to_dense() - dense).norm() < 1e-12);
        }

        #[test]
        fn serialization_round_trips(
            coeffs in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..6),
            words in proptest::collection::vec(proptest::collection::vec(0u8..4, 5), 1..6),
        ) {
            let mut sum = PauliSum::new(5);
            for (c2, w) in coeffs.iter().zip(&words) {
                let factors: Vec<_> = w.iter().enumerate().filter_map(|(q, &k)| match k {
                    1 => Some((q, PauliAxis::X)),
                    2 => Some((q, PauliAxis::Y)),
                    3 => Some((q, PauliAxis::Z)),
                    _ => None,
                }).collect();
                sum.push(Complex64::new(c2.0, c2.1), &factors).unwrap();
            }
            sum.normalize();
            if !sum.is_empty() {
                let parsed = PauliSum::from_text(&sum.to_text()).unwrap();
                prop_assert!((sum.to_dense() - parsed.to_dense()).norm() < 1e-10);
            }
        }
    }
}
