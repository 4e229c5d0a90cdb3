//! Brute-force reference simulator.
//!
//! Every gate is expanded to the full `2^n x 2^n` operator with Kronecker
//! products and applied as a dense matrix-vector product. This costs
//! `O(4^n)` per gate and is only meant for checking the streamed engine
//! and as the baseline in benchmarks.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Circuit, ComplexAmp, Gate2x2, GateOp, AMP_BYTES};

/// Largest qubit count the oracle accepts by default (256 MiB matrices).
pub const DEFAULT_ORACLE_LIMIT: usize = 12;

const ZERO: ComplexAmp = Complex64::new(0.0, 0.0);
const ONE: ComplexAmp = Complex64::new(1.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    entries: Vec<ComplexAmp>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_gate(g: &Gate2x2) -> Self {
        Self {
            dim: 2,
            entries: g.entries().to_vec(),
        }
    }

    pub fn from_entries(dim: usize, entries: Vec<ComplexAmp>) -> Result<Self> {
        if !dim.is_power_of_two() || entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[ComplexAmp] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> ComplexAmp {
        self.entries[row * self.dim + col]
    }

    /// `self ⊗ rhs`.
    pub fn kron(&self, rhs: &DenseMatrix) -> DenseMatrix {
        let (p, q) = (self.dim, rhs.dim);
        let dim = p * q;
        let mut out = Vec::with_capacity(dim * dim);
        for i in 0..p {
            for k in 0..q {
                for j in 0..p {
                    let a = self.get(i, j);
                    let rhs_row = &rhs.entries[k * q..(k + 1) * q];
                    out.extend(rhs_row.iter().map(|&b| a * b));
                }
            }
        }
        DenseMatrix { dim, entries: out }
    }

    fn add_assign(&mut self, rhs: &DenseMatrix) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.entries.iter_mut().zip(&rhs.entries) {
            *a += b;
        }
    }

    /// Max entrywise `|(M†M - I)_{ij}|`. Cubic; keep to small dimensions.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for r in 0..d {
                    acc += self.get(r, i).conj() * self.get(r, j);
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }
}

/// Full state vector held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    pub n_qubits: usize,
    pub amps: Vec<ComplexAmp>,
}

impl DenseState {
    /// `|0…0⟩`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1usize << n_qubits];
        amps[0] = ONE;
        Self { n_qubits, amps }
    }

    pub fn from_amps(n_qubits: usize, amps: Vec<ComplexAmp>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1usize << n_qubits,
                got: amps.len(),
            });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max `|a_i - b_i|` over all indices.
    pub fn max_deviation(&self, other: &[ComplexAmp]) -> f64 {
        assert_eq!(self.amps.len(), other.len(), "state lengths differ");
        self.amps
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Dense simulator with a configurable size guard and a multiply-add counter.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    pub limit: usize,
    multiply_adds: u64,
}

impl Default for DenseOracle {
    fn default() -> Self {
        Self::new(DEFAULT_ORACLE_LIMIT)
    }
}

impl DenseOracle {
    pub fn new(limit: usize) -> Self {
        Self {
            limit,
            multiply_adds: 0,
        }
    }

    /// Complex multiply-adds performed by [`DenseOracle::apply_dense`] so far.
    pub fn multiply_adds(&self) -> u64 {
        self.multiply_adds
    }

    fn guard(&self, n: usize) -> Result<()> {
        if n > self.limit {
            return Err(Error::OracleLimitExceeded {
                n,
                limit: self.limit,
            });
        }
        if n == 0 {
            return Err(Error::QubitCountOutOfRange(0));
        }
        Ok(())
    }

    /// Bytes a materialized operator would take for `n` qubits.
    pub fn matrix_bytes(n: usize) -> u64 {
        (1u64 << (2 * n)) * AMP_BYTES
    }

    /// `I_{2^(n-k-1)} ⊗ U ⊗ I_{2^k}`.
    pub fn expand_gate(&self, g: &Gate2x2, k: usize, n: usize) -> Result<DenseMatrix> {
        self.guard(n)?;
        if k >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: k,
            });
        }
        let high = DenseMatrix::identity(1 << (n - k - 1));
        let low = DenseMatrix::identity(1 << k);
        let u = DenseMatrix::from_gate(g);
        // a 1×1 identity factor would only copy the full matrix
        Ok(match (high.dim, low.dim) {
            (1, 1) => u,
            (1, _) => u.kron(&low),
            (_, 1) => high.kron(&u),
            _ => high.kron(&u).kron(&low),
        })
    }

    /// `|0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ U_t`, each term built as a Kronecker chain.
    pub fn expand_controlled(
        &self,
        c: usize,
        t: usize,
        g: &Gate2x2,
        n: usize,
    ) -> Result<DenseMatrix> {
        self.guard(n)?;
        if c == t {
            return Err(Error::ControlEqualsTarget(c));
        }
        if c >= n || t >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.max(t),
            });
        }
        let p0 = Gate2x2::new(ONE, ZERO, ZERO, ZERO);
        let p1 = Gate2x2::new(ZERO, ZERO, ZERO, ONE);
        let chain = |at_c: &Gate2x2, at_t: &Gate2x2| {
            // most-significant qubit first
            (0..n).rev().fold(DenseMatrix::identity(1), |acc, q| {
                let factor = if q == c {
                    at_c
                } else if q == t {
                    at_t
                } else {
                    &Gate2x2::IDENTITY
                };
                acc.kron(&DenseMatrix::from_gate(factor))
            })
        };
        let mut m = chain(&p0, &Gate2x2::IDENTITY);
        m.add_assign(&chain(&p1, g));
        Ok(m)
    }

    pub fn expand_op(&self, op: &GateOp, n: usize) -> Result<DenseMatrix> {
        match op.control {
            Some(c) => self.expand_controlled(c, op.target, &op.gate, n),
            None => self.expand_gate(&op.gate, op.target, n),
        }
    }

    /// `α'_i = Σ_j U_ij α_j`: `dim²` multiply-adds.
    pub fn apply_dense(&mut self, m: &DenseMatrix, s: &DenseState) -> Result<DenseState> {
        if m.dim != s.amps.len() {
            return Err(Error::DimensionMismatch {
                expected: s.amps.len(),
                got: m.dim,
            });
        }
        let amps = m
            .entries
            .chunks_exact(m.dim)
            .map(|row| {
                row.iter()
                    .zip(&s.amps)
                    .fold(ZERO, |acc, (u, a)| acc + u * a)
            })
            .collect();
        self.multiply_adds += (m.dim as u64) * (m.dim as u64);
        Ok(DenseState {
            n_qubits: s.n_qubits,
            amps,
        })
    }

    /// Applies every op of `c` to `state` in order.
    pub fn run(&mut self, c: &Circuit, mut state: DenseState) -> Result<DenseState> {
        c.validate()?;
        self.guard(c.n_qubits)?;
        if state.n_qubits != c.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: c.n_qubits,
                got: state.n_qubits,
            });
        }
        for op in &c.ops {
            let m = self.expand_op(op, c.n_qubits)?;
            state = self.apply_dense(&m, &state)?;
        }
        Ok(state)
    }

    /// Runs `c` from `|0…0⟩`.
    pub fn simulate(&mut self, c: &Circuit) -> Result<DenseState> {
        self.guard(c.n_qubits)?;
        self.run(c, DenseState::zero_state(c.n_qubits))
    }
}

pub fn expand_gate(g: &Gate2x2, k: usize, n: usize) -> Result<DenseMatrix> {
    DenseOracle::default().expand_gate(g, k, n)
}

pub fn expand_controlled(c: usize, t: usize, g: &Gate2x2, n: usize) -> Result<DenseMatrix> {
    DenseOracle::default().expand_controlled(c, t, g, n)
}

pub fn apply_dense(m: &DenseMatrix, s: &DenseState) -> Result<DenseState> {
    DenseOracle::default().apply_dense(m, s)
}

pub fn simulate_dense(c: &Circuit) -> Result<DenseState> {
    DenseOracle::default().simulate(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_circuit, GateLabel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn x() -> Gate2x2 {
        GateLabel::X.matrix().unwrap()
    }

    fn h() -> Gate2x2 {
        GateLabel::H.matrix().unwrap()
    }

    fn permutation(dim: usize, swaps: &[(usize, usize)]) -> DenseMatrix {
        let mut perm: Vec<usize> = (0..dim).collect();
        for &(a, b) in swaps {
            perm.swap(a, b);
        }
        let mut m = DenseMatrix::zeros(dim);
        for (row, &col) in perm.iter().enumerate() {
            m.entries[row * dim + col] = ONE;
        }
        m
    }

    #[test]
    fn expand_examples() {
        assert_eq!(expand_gate(&x(), 0, 1).unwrap(), permutation(2, &[(0, 1)]));
        assert_eq!(
            expand_gate(&x(), 0, 2).unwrap(),
            permutation(4, &[(0, 1), (2, 3)])
        );
        for n in 1..=4 {
            for k in 0..n {
                assert_eq!(
                    expand_gate(&Gate2x2::IDENTITY, k, n).unwrap(),
                    DenseMatrix::identity(1 << n)
                );
            }
        }
    }

    #[test]
    fn controlled_examples() {
        assert_eq!(
            expand_controlled(1, 0, &x(), 2).unwrap(),
            permutation(4, &[(2, 3)])
        );
        assert_eq!(
            expand_controlled(0, 1, &x(), 2).unwrap(),
            permutation(4, &[(1, 3)])
        );
        assert_eq!(
            expand_controlled(2, 0, &Gate2x2::IDENTITY, 3).unwrap(),
            DenseMatrix::identity(8)
        );
        assert!(matches!(
            expand_controlled(1, 1, &x(), 2),
            Err(Error::ControlEqualsTarget(1))
        ));
    }

    #[test]
    fn oracle_limit_guard() {
        assert!(matches!(
            expand_gate(&x(), 0, 13),
            Err(Error::OracleLimitExceeded { n: 13, limit: 12 })
        ));
        let c = crate::model::benchmark_circuit(20);
        assert!(matches!(
            simulate_dense(&c),
            Err(Error::OracleLimitExceeded { .. })
        ));
    }

    #[test]
    fn apply_examples() {
        let s = DenseState::from_amps(1, vec![ONE, ZERO]).unwrap();
        assert_eq!(apply_dense(&DenseMatrix::identity(2), &s).unwrap(), s);

        let hm = expand_gate(&h(), 0, 1).unwrap();
        let once = apply_dense(&hm, &s).unwrap();
        assert!((once.amps[0].re - H).abs() < 1e-16 && (once.amps[1].re - H).abs() < 1e-16);
        let twice = apply_dense(&hm, &once).unwrap();
        assert!(twice.max_deviation(&s.amps) <= 1e-15);

        assert!(matches!(
            apply_dense(&DenseMatrix::identity(4), &s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bell_state() {
        let c = Circuit::with_ops(2, vec![GateOp::single(GateLabel::H, 0), GateOp::cx(0, 1)]);
        let s = simulate_dense(&c).unwrap();
        let expected = [H, 0.0, 0.0, H];
        for (a, e) in s.amps.iter().zip(expected) {
            assert!((a.re - e).abs() < 1e-15 && a.im == 0.0);
        }
    }

    #[test]
    fn multiply_add_count_is_4_pow_n_per_gate() {
        let mut oracle = DenseOracle::default();
        let c = crate::model::benchmark_circuit(5);
        oracle.simulate(&c).unwrap();
        assert_eq!(oracle.multiply_adds(), 5 * (1u64 << 10));
    }

    #[test]
    fn expanded_gates_stay_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let op = crate::model::random_op(4, &mut rng);
            let m = DenseOracle::default().expand_op(&op, 4).unwrap();
            assert!(m.unitarity_deviation() <= 1e-10, "{op}");
        }
    }

    #[test]
    fn norm_preserved_on_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=8 {
            let c = random_circuit(n, 50, &mut rng);
            let s = simulate_dense(&c).unwrap();
            assert!((s.norm() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn self_inverse_gates_restore_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let base = simulate_dense(&random_circuit(4, 12, &mut rng)).unwrap();
        let ops = [
            GateOp::single(GateLabel::H, 2),
            GateOp::single(GateLabel::X, 0),
            GateOp::single(GateLabel::Y, 3),
            GateOp::single(GateLabel::Z, 1),
            GateOp::cx(3, 1),
            GateOp::cz(0, 2),
        ];
        let mut oracle = DenseOracle::default();
        for op in ops {
            let c = Circuit::with_ops(4, vec![op, op]);
            let after = oracle.run(&c, base.clone()).unwrap();
            assert!(after.max_deviation(&base.amps) <= 1e-12, "{op}");
        }
    }
}
