//! Equivalence oracles: dense statevector simulation for small circuits and
//! GF(2) comparison for linear blocks.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::gf2::GF2Matrix;

pub const MAX_SIM_QUBITS: usize = 12;
pub const MAX_EQUIV_QUBITS: usize = 10;

type Mat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        StateVector { amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn apply_1q(&mut self, q: usize, m: &Mat2) {
        let bit = 1usize << q;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let (a, b) = (self.amplitudes[i], self.amplitudes[i | bit]);
                self.amplitudes[i] = m[0][0] * a + m[0][1] * b;
                self.amplitudes[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amplitudes.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amplitudes.swap(i, i | tb);
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let (ab, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amplitudes.len() {
            if i & ab != 0 && i & bb == 0 {
                self.amplitudes.swap(i, i ^ ab ^ bb);
            }
        }
    }

    pub fn apply(&mut self, g: &Gate) -> Result<()> {
        let q = g.qubits();
        match &g.kind {
            GateKind::Cnot => self.apply_cnot(q[0], q[1]),
            GateKind::Swap => self.apply_swap(q[0], q[1]),
            k => self.apply_1q(q[0], &single_qubit_matrix(k)?),
        }
        Ok(())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn diag(a: Complex64, b: Complex64) -> Mat2 {
    [[a, c(0.0, 0.0)], [c(0.0, 0.0), b]]
}

fn single_qubit_matrix(kind: &GateKind) -> Result<Mat2> {
    let one = c(1.0, 0.0);
    Ok(match kind {
        GateKind::H => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            [[h, h], [h, -h]]
        }
        GateKind::X => [[c(0.0, 0.0), one], [one, c(0.0, 0.0)]],
        GateKind::T => diag(one, Complex64::from_polar(1.0, PI / 4.0)),
        GateKind::Tdg => diag(one, Complex64::from_polar(1.0, -PI / 4.0)),
        GateKind::S => diag(one, c(0.0, 1.0)),
        GateKind::Sdg => diag(one, c(0.0, -1.0)),
        GateKind::Rz(angle) => {
            let theta = eval_angle(angle)?;
            diag(Complex64::from_polar(1.0, -theta / 2.0), Complex64::from_polar(1.0, theta / 2.0))
        }
        GateKind::U(label) => label_unitary(label),
        GateKind::Cnot | GateKind::Swap => unreachable!("two-qubit gate"),
    })
}

/// Deterministic pseudo-random unitary for an opaque gate label.
fn label_unitary(label: &str) -> Mat2 {
    // FNV-1a keeps the mapping fixed across builds and platforms
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    let (a, b, d, phase): (f64, f64, f64, f64) =
        (rng.gen::<f64>() * 2.0 * PI, rng.gen::<f64>() * PI, rng.gen::<f64>() * 2.0 * PI, rng.gen::<f64>() * 2.0 * PI);
    // e^{i phase} Rz(a) Ry(b) Rz(d)
    let (cb, sb) = ((b / 2.0).cos(), (b / 2.0).sin());
    let e = |x: f64| Complex64::from_polar(1.0, x);
    [
        [e(phase - (a + d) / 2.0) * cb, -e(phase - (a - d) / 2.0) * sb],
        [e(phase + (a - d) / 2.0) * sb, e(phase + (a + d) / 2.0) * cb],
    ]
}

/// Evaluates an angle expression over numbers, `pi`, `+ - * / ^` and parentheses.
pub fn eval_angle(text: &str) -> Result<f64> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut pos = 0;
    let v = expr(&chars, &mut pos)?;
    if pos != chars.len() {
        return Err(Error::InvalidGate(format!("cannot evaluate angle `{text}`")));
    }
    Ok(v)
}

fn expr(s: &[char], pos: &mut usize) -> Result<f64> {
    let mut v = term(s, pos)?;
    while let Some(&op) = s.get(*pos) {
        match op {
            '+' => {
                *pos += 1;
                v += term(s, pos)?;
            }
            '-' => {
                *pos += 1;
                v -= term(s, pos)?;
            }
            _ => break,
        }
    }
    Ok(v)
}

fn term(s: &[char], pos: &mut usize) -> Result<f64> {
    let mut v = power(s, pos)?;
    while let Some(&op) = s.get(*pos) {
        match op {
            '*' => {
                *pos += 1;
                v *= power(s, pos)?;
            }
            '/' => {
                *pos += 1;
                v /= power(s, pos)?;
            }
            _ => break,
        }
    }
    Ok(v)
}

fn power(s: &[char], pos: &mut usize) -> Result<f64> {
    let base = unary(s, pos)?;
    if s.get(*pos) == Some(&'^') {
        *pos += 1;
        return Ok(base.powf(power(s, pos)?));
    }
    Ok(base)
}

fn unary(s: &[char], pos: &mut usize) -> Result<f64> {
    let bad = || Error::InvalidGate(format!("cannot evaluate angle `{}`", s.iter().collect::<String>()));
    match s.get(*pos) {
        Some('-') => {
            *pos += 1;
            Ok(-unary(s, pos)?)
        }
        Some('+') => {
            *pos += 1;
            unary(s, pos)
        }
        Some('(') => {
            *pos += 1;
            let v = expr(s, pos)?;
            if s.get(*pos) != Some(&')') {
                return Err(bad());
            }
            *pos += 1;
            Ok(v)
        }
        Some(c) if c.is_ascii_alphabetic() => {
            let start = *pos;
            while s.get(*pos).is_some_and(|c| c.is_ascii_alphanumeric()) {
                *pos += 1;
            }
            match s[start..*pos].iter().collect::<String>().as_str() {
                "pi" => Ok(PI),
                _ => Err(bad()),
            }
        }
        Some(_) => {
            let start = *pos;
            while s.get(*pos).is_some_and(|c| c.is_ascii_digit() || *c == '.') {
                *pos += 1;
            }
            if matches!(s.get(*pos), Some('e' | 'E')) {
                *pos += 1;
                if matches!(s.get(*pos), Some('+' | '-')) {
                    *pos += 1;
                }
                while s.get(*pos).is_some_and(|c| c.is_ascii_digit()) {
                    *pos += 1;
                }
            }
            s[start..*pos].iter().collect::<String>().parse().map_err(|_| bad())
        }
        None => Err(bad()),
    }
}

/// Applies the circuit to computational basis state `input`.
pub fn simulate(c: &Circuit, input: usize) -> Result<StateVector> {
    if c.num_qubits > MAX_SIM_QUBITS {
        return Err(Error::Dimension(format!(
            "{} qubits exceeds the simulator limit of {MAX_SIM_QUBITS}",
            c.num_qubits
        )));
    }
    let mut sv = StateVector::basis(c.num_qubits, input);
    for g in c.gates() {
        sv.apply(g)?;
    }
    Ok(sv)
}

/// True iff the two circuits implement the same unitary up to one global phase.
pub fn equivalent(c1: &Circuit, c2: &Circuit, tol: f64) -> Result<bool> {
    if c1.num_qubits != c2.num_qubits {
        return Ok(false);
    }
    if c1.num_qubits > MAX_EQUIV_QUBITS {
        return Err(Error::Dimension(format!(
            "{} qubits exceeds the equivalence-check limit of {MAX_EQUIV_QUBITS}",
            c1.num_qubits
        )));
    }
    let mut phase: Option<Complex64> = None;
    for input in 0..1usize << c1.num_qubits {
        let a = simulate(c1, input)?;
        let b = simulate(c2, input)?;
        let ph = match phase {
            Some(p) => p,
            None => {
                let Some(i) = a.amplitudes.iter().position(|x| x.norm() > 1e-6) else {
                    return Ok(false);
                };
                let r = b.amplitudes[i] / a.amplitudes[i];
                if (r.norm() - 1.0).abs() > tol.max(1e-12) * 10.0 {
                    return Ok(false);
                }
                let p = r / r.norm();
                phase = Some(p);
                p
            }
        };
        if a.amplitudes.iter().zip(&b.amplitudes).any(|(x, y)| (x * ph - y).norm() > tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// GF(2) comparison of two CNOT/SWAP circuits on `n` qubits.
pub fn linear_equivalent(c1: &Circuit, c2: &Circuit, n: usize) -> Result<bool> {
    let widen = |c: &Circuit| -> Result<Circuit> {
        if c.num_qubits > n {
            return Err(Error::Dimension(format!("{} qubits exceeds {n}", c.num_qubits)));
        }
        Circuit::from_gates(n, c.gates().iter().cloned())
    };
    Ok(GF2Matrix::from_circuit(&widen(c1)?)? == GF2Matrix::from_circuit(&widen(c2)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_and_x() {
        let s = simulate(&Circuit::new(3), 5).unwrap();
        assert_eq!(s, StateVector::basis(3, 5));
        let s = simulate(&Circuit::new(3).x(0), 0).unwrap();
        assert_eq!(s, StateVector::basis(3, 1));
    }

    #[test]
    fn swap_matches_decomposition_on_basis_states() {
        let swap = Circuit::new(2).swap(0, 1);
        let dec = swap.decompose_swaps();
        for i in 0..4 {
            let a = simulate(&swap, i).unwrap();
            let b = simulate(&dec, i).unwrap();
            assert!(a.amplitudes.iter().zip(&b.amplitudes).all(|(x, y)| (x - y).norm() < 1e-12));
        }
        assert!(linear_equivalent(&swap, &dec, 2).unwrap());
    }

    #[test]
    fn equivalence_examples() {
        let fig6a = Circuit::new(3).h(2).cx(1, 0).cx(0, 1).swap(1, 2).x(1).cx(1, 2);
        let fig6b = Circuit::new(3).h(2).x(2).cx(1, 0).cx(0, 1).swap(1, 2).cx(1, 2);
        assert!(equivalent(&fig6a, &fig6a, 1e-9).unwrap());
        assert!(equivalent(&fig6a, &fig6b, 1e-9).unwrap());
        let bad = Circuit::new(3).h(1).cx(1, 0).cx(0, 1).swap(1, 2).x(1).cx(1, 2);
        assert!(!equivalent(&fig6a, &bad, 1e-9).unwrap());
        assert!(!linear_equivalent(&Circuit::new(2).cx(0, 1), &Circuit::new(2).cx(1, 0), 2).unwrap());
        assert!(matches!(linear_equivalent(&Circuit::new(1).h(0), &Circuit::new(1), 1), Err(Error::NonLinearGate(0))));
    }

    #[test]
    fn global_phase_is_ignored_but_relative_phase_is_not() {
        // Rz(θ) = e^{-iθ/2} diag(1, e^{iθ}); Rz(pi/2) and S differ by a global phase
        let rz = Circuit::from_gates(1, [Gate::single(0, GateKind::rz("pi/2"), 0)]).unwrap();
        let s = Circuit::from_gates(1, [Gate::single(0, GateKind::S, 0)]).unwrap();
        assert!(equivalent(&rz, &s, 1e-9).unwrap());
        let t = Circuit::new(1).t(0);
        assert!(!equivalent(&rz, &t, 1e-9).unwrap());
    }

    #[test]
    fn opaque_labels_are_stable_unitaries() {
        let u = |l: &str| Circuit::from_gates(1, [Gate::single(0, GateKind::u(l), 0)]).unwrap();
        assert!(equivalent(&u("foo"), &u("foo"), 1e-12).unwrap());
        assert!(!equivalent(&u("foo"), &u("bar"), 1e-9).unwrap());
        let sv = simulate(&u("foo"), 0).unwrap();
        assert!((sv.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angles() {
        assert!((eval_angle("pi/4").unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((eval_angle("-2*(pi-1)").unwrap() + 2.0 * (PI - 1.0)).abs() < 1e-15);
        assert!((eval_angle("1e-3").unwrap() - 1e-3).abs() < 1e-18);
        assert!(eval_angle("theta").is_err());
    }
}
