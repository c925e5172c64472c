//! Invertible Boolean matrices: the functional semantics of CNOT/SWAP blocks.
//!
//! Row `i` holds the parity currently carried by qubit `i` as a bitmask over
//! the input qubits. A CNOT(control, target) adds row `control` into row
//! `target`, so a circuit acts by successive row operations in gate order and
//! `from_circuit(c1 ++ c2) == from_circuit(c2) * from_circuit(c1)`.

use std::fmt;

use crate::circuit::{Circuit, GateKind};
use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GF2Matrix {
    n: usize,
    rows: Vec<u64>,
}

impl GF2Matrix {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_DIM, "dimension {n} exceeds {MAX_DIM}");
        GF2Matrix { n, rows: (0..n).map(|i| 1u64 << i).collect() }
    }

    pub fn zero(n: usize) -> Self {
        GF2Matrix { n, rows: vec![0; n] }
    }

    pub fn from_rows(n: usize, rows: Vec<u64>) -> Result<Self> {
        if rows.len() != n || n > MAX_DIM {
            return Err(Error::Dimension(format!("{} rows for dimension {n}", rows.len())));
        }
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        if rows.iter().any(|r| r & !mask != 0) {
            return Err(Error::Dimension("row has bits beyond the dimension".into()));
        }
        Ok(GF2Matrix { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn get(&self, i: usize, k: usize) -> bool {
        self.rows[i] >> k & 1 == 1
    }

    pub fn set(&mut self, i: usize, k: usize, v: bool) {
        if v {
            self.rows[i] |= 1 << k;
        } else {
            self.rows[i] &= !(1 << k);
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, &r)| r == 1 << i)
    }

    pub fn apply_cnot(&self, control: usize, target: usize) -> Result<Self> {
        let mut m = self.clone();
        m.cnot_in_place(control, target)?;
        Ok(m)
    }

    pub fn cnot_in_place(&mut self, control: usize, target: usize) -> Result<()> {
        if control == target || control >= self.n || target >= self.n {
            return Err(Error::Dimension(format!(
                "CNOT({control},{target}) on a {n}x{n} matrix",
                n = self.n
            )));
        }
        self.rows[target] ^= self.rows[control];
        Ok(())
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        self.rows.swap(a, b);
    }

    /// Left-to-right fold of row operations over the SWAP-decomposed circuit.
    pub fn from_circuit(c: &Circuit) -> Result<Self> {
        let mut m = GF2Matrix::identity(c.num_qubits);
        for g in c.decompose_swaps().gates() {
            match (&g.kind, g.qubits()) {
                (GateKind::Cnot, [ctrl, tgt]) => m.cnot_in_place(*ctrl, *tgt)?,
                _ => return Err(Error::NonLinearGate(g.id)),
            }
        }
        Ok(m)
    }

    /// Matrix product `self * other`.
    pub fn multiply(&self, other: &GF2Matrix) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Dimension(format!("{} vs {}", self.n, other.n)));
        }
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                let mut acc = 0u64;
                let mut bits = r;
                while bits != 0 {
                    let k = bits.trailing_zeros() as usize;
                    acc ^= other.rows[k];
                    bits &= bits - 1;
                }
                acc
            })
            .collect();
        Ok(GF2Matrix { n: self.n, rows })
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        let mut rank = 0;
        for col in 0..self.n {
            let Some(p) = (rank..self.n).find(|&i| rows[i] >> col & 1 == 1) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank];
            for (i, r) in rows.iter_mut().enumerate() {
                if i != rank && *r >> col & 1 == 1 {
                    *r ^= pivot;
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn is_invertible(&self) -> bool {
        self.rank() == self.n
    }

    /// Gauss-Jordan inverse.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.rows.clone();
        let mut inv = GF2Matrix::identity(n).rows;
        for col in 0..n {
            let p = (col..n).find(|&i| a[i] >> col & 1 == 1).ok_or(Error::Singular)?;
            a.swap(col, p);
            inv.swap(col, p);
            for i in 0..n {
                if i != col && a[i] >> col & 1 == 1 {
                    a[i] ^= a[col];
                    inv[i] ^= inv[col];
                }
            }
        }
        Ok(GF2Matrix { n, rows: inv })
    }

    /// Conjugation by a qubit relabeling: entry (i,k) moves to
    /// (perm[i], perm[k]).
    pub fn relabeled(&self, perm: &[usize]) -> GF2Matrix {
        let mut out = GF2Matrix::zero(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                if self.get(i, k) {
                    out.set(perm[i], perm[k], true);
                }
            }
        }
        out
    }

    /// Embeds into the top-left corner of an `n`-dimensional identity.
    pub fn padded(&self, n: usize) -> GF2Matrix {
        let mut m = GF2Matrix::identity(n.max(self.n));
        m.rows[..self.n].copy_from_slice(&self.rows);
        m
    }

    /// Row-major packing into `n*n` bits (requires `n <= 8`).
    pub fn pack(&self) -> u64 {
        debug_assert!(self.n <= 8);
        self.rows.iter().enumerate().fold(0u64, |acc, (i, &r)| acc | r << (i * self.n))
    }

    pub fn unpack(n: usize, bits: u64) -> GF2Matrix {
        let mask = (1u64 << n) - 1;
        GF2Matrix { n, rows: (0..n).map(|i| bits >> (i * n) & mask).collect() }
    }

    /// Parses `n` lines of `n` characters in `{0,1}`.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let n = lines.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::Dimension(format!("{n} rows")));
        }
        let mut m = GF2Matrix::zero(n);
        for (i, line) in lines.iter().enumerate() {
            if line.chars().count() != n {
                return Err(Error::Dimension(format!("row {i} has {} entries, expected {n}", line.len())));
            }
            for (k, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(i, k, true),
                    _ => return Err(Error::Dimension(format!("invalid entry `{ch}` in row {i}"))),
                }
            }
        }
        Ok(m)
    }
}

impl fmt::Display for GF2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            for k in 0..self.n {
                f.write_str(if self.get(i, k) { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig5d() -> GF2Matrix {
        GF2Matrix::parse("100\n110\n111").unwrap()
    }

    #[test]
    fn row_operations_match_worked_matrices() {
        let b = GF2Matrix::identity(3).apply_cnot(0, 1).unwrap();
        assert_eq!(b, GF2Matrix::parse("100\n110\n001").unwrap());
        let d = b.apply_cnot(1, 2).unwrap();
        assert_eq!(d, fig5d());
        assert_eq!(d.apply_cnot(1, 2).unwrap(), b);
        assert!(GF2Matrix::identity(3).apply_cnot(1, 1).is_err());
        assert!(GF2Matrix::identity(3).apply_cnot(0, 3).is_err());
    }

    #[test]
    fn from_circuit_examples() {
        assert_eq!(GF2Matrix::from_circuit(&Circuit::new(3)).unwrap(), GF2Matrix::identity(3));
        assert_eq!(GF2Matrix::identity(1).to_string(), "1\n");
        let m = GF2Matrix::from_circuit(&Circuit::new(3).cx(0, 1).cx(1, 2)).unwrap();
        assert_eq!(m, fig5d());
        let s = GF2Matrix::from_circuit(&Circuit::new(3).swap(0, 1)).unwrap();
        assert_eq!(s, GF2Matrix::parse("010\n100\n001").unwrap());
        assert_eq!(
            GF2Matrix::from_circuit(&Circuit::new(2).h(0)),
            Err(Error::NonLinearGate(0))
        );
    }

    #[test]
    fn gl32_has_168_elements() {
        let count = (0u64..512).filter(|&bits| GF2Matrix::unpack(3, bits).is_invertible()).count();
        assert_eq!(count, 168);
    }

    #[test]
    fn inverse_and_identity_products() {
        let m = fig5d();
        let inv = m.inverse().unwrap();
        assert!(m.multiply(&inv).unwrap().is_identity());
        assert_eq!(GF2Matrix::identity(3).multiply(&m).unwrap(), m);
        assert_eq!(GF2Matrix::parse("11\n11").unwrap().inverse(), Err(Error::Singular));
    }

    #[test]
    fn relabel_and_pack() {
        let m = fig5d();
        assert_eq!(GF2Matrix::unpack(3, m.pack()), m);
        let ident: Vec<usize> = (0..3).collect();
        assert_eq!(m.relabeled(&ident), m);
        // relabeling commutes with the circuit relabeling
        let c = Circuit::new(3).cx(0, 1).cx(1, 2);
        let perm = [2, 0, 1];
        let rc = Circuit::new(3).cx(perm[0], perm[1]).cx(perm[1], perm[2]);
        assert_eq!(GF2Matrix::from_circuit(&rc).unwrap(), GF2Matrix::from_circuit(&c).unwrap().relabeled(&perm));
        assert_eq!(m.padded(5).to_string(), "10000\n11000\n11100\n00010\n00001\n");
    }
}
