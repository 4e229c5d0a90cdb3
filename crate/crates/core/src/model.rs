//! Amplitudes, 2x2 gates, circuits and the index arithmetic of amplitude pairing.
//!
//! Qubit 0 is the least-significant bit of a basis-state index, so a gate on
//! qubit `k` couples amplitudes whose indices differ by `2^k`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// One amplitude of the state vector. Serialized as two little-endian `f64`s.
pub type ComplexAmp = Complex64;

/// Serialized width of one amplitude in bytes.
pub const AMP_BYTES: u64 = 16;

/// Unitarity tolerance applied to user-supplied matrices.
pub const DEFAULT_UNITARY_TOLERANCE: f64 = 1e-6;
/// Unitarity tolerance under `--strict`.
pub const STRICT_UNITARY_TOLERANCE: f64 = 1e-10;

const ZERO: ComplexAmp = Complex64::new(0.0, 0.0);
const ONE: ComplexAmp = Complex64::new(1.0, 0.0);

/// Partner of `i` for a gate on qubit `k`: `i XOR 2^k`.
#[inline]
pub fn pair_index(i: u64, k: usize) -> u64 {
    i ^ (1u64 << k)
}

/// True when bit `k` of `i` is clear, i.e. `i` is the lower member of its pair.
#[inline]
pub fn is_pair_base(i: u64, k: usize) -> bool {
    i & (1u64 << k) == 0
}

/// A 2x2 complex matrix `[[u00, u01], [u10, u11]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate2x2 {
    pub u00: ComplexAmp,
    pub u01: ComplexAmp,
    pub u10: ComplexAmp,
    pub u11: ComplexAmp,
}

impl Gate2x2 {
    pub const IDENTITY: Gate2x2 = Gate2x2::new(ONE, ZERO, ZERO, ONE);

    pub const fn new(u00: ComplexAmp, u01: ComplexAmp, u10: ComplexAmp, u11: ComplexAmp) -> Self {
        Self { u00, u01, u10, u11 }
    }

    /// Builds a matrix from eight reals `re00 im00 re01 im01 re10 im10 re11 im11`.
    pub fn from_reals(r: &[f64; 8]) -> Self {
        Self::new(
            Complex64::new(r[0], r[1]),
            Complex64::new(r[2], r[3]),
            Complex64::new(r[4], r[5]),
            Complex64::new(r[6], r[7]),
        )
    }

    pub fn to_reals(&self) -> [f64; 8] {
        [
            self.u00.re,
            self.u00.im,
            self.u01.re,
            self.u01.im,
            self.u10.re,
            self.u10.im,
            self.u11.re,
            self.u11.im,
        ]
    }

    pub fn entries(&self) -> [ComplexAmp; 4] {
        [self.u00, self.u01, self.u10, self.u11]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.is_finite())
    }

    /// Max entrywise `|(U†U - I)_{ij}|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let [a, b, c, d] = self.entries();
        // columns (a, c) and (b, d)
        let p00 = a.conj() * a + c.conj() * c - ONE;
        let p01 = a.conj() * b + c.conj() * d;
        let p10 = b.conj() * a + d.conj() * c;
        let p11 = b.conj() * b + d.conj() * d - ONE;
        [p00, p01, p10, p11]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn check_unitary(&self, tolerance: f64) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite("gate matrix"));
        }
        let deviation = self.unitarity_deviation();
        if deviation > tolerance {
            return Err(Error::NonUnitary {
                deviation,
                tolerance,
            });
        }
        Ok(())
    }

    /// `(u00·a + u01·b, u10·a + u11·b)` with a fixed operation order.
    #[inline(always)]
    pub fn apply(&self, a: ComplexAmp, b: ComplexAmp) -> (ComplexAmp, ComplexAmp) {
        (self.u00 * a + self.u01 * b, self.u10 * a + self.u11 * b)
    }
}

/// Which gate a [`GateOp`] carries; kept alongside the matrix so circuits
/// can be written back out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateLabel {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Rx(f64),
    Ry(f64),
    Rz(f64),
    Custom,
}

impl GateLabel {
    /// Lower-case mnemonic as used in circuit text.
    pub fn mnemonic(&self) -> &'static str {
        match self {
            GateLabel::H => "h",
            GateLabel::X => "x",
            GateLabel::Y => "y",
            GateLabel::Z => "z",
            GateLabel::S => "s",
            GateLabel::Sdg => "sdg",
            GateLabel::T => "t",
            GateLabel::Tdg => "tdg",
            GateLabel::Rx(_) => "rx",
            GateLabel::Ry(_) => "ry",
            GateLabel::Rz(_) => "rz",
            GateLabel::Custom => "u",
        }
    }

    /// Matrix for every label except `Custom`, which has none of its own.
    pub fn matrix(&self) -> Option<Gate2x2> {
        let c = |re, im| Complex64::new(re, im);
        let h = FRAC_1_SQRT_2;
        Some(match *self {
            GateLabel::H => Gate2x2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)),
            GateLabel::X => Gate2x2::new(ZERO, ONE, ONE, ZERO),
            GateLabel::Y => Gate2x2::new(ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO),
            GateLabel::Z => Gate2x2::new(ONE, ZERO, ZERO, c(-1.0, 0.0)),
            GateLabel::S => Gate2x2::new(ONE, ZERO, ZERO, c(0.0, 1.0)),
            GateLabel::Sdg => Gate2x2::new(ONE, ZERO, ZERO, c(0.0, -1.0)),
            GateLabel::T => Gate2x2::new(ONE, ZERO, ZERO, c(h, h)),
            GateLabel::Tdg => Gate2x2::new(ONE, ZERO, ZERO, c(h, -h)),
            GateLabel::Rx(theta) => {
                let (s, co) = (theta / 2.0).sin_cos();
                Gate2x2::new(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
            }
            GateLabel::Ry(theta) => {
                let (s, co) = (theta / 2.0).sin_cos();
                Gate2x2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
            }
            GateLabel::Rz(theta) => {
                let (s, co) = (theta / 2.0).sin_cos();
                Gate2x2::new(c(co, -s), ZERO, ZERO, c(co, s))
            }
            GateLabel::Custom => return None,
        })
    }
}

/// Builds a gate from its name and parameters, validating custom matrices
/// with [`DEFAULT_UNITARY_TOLERANCE`].
///
/// Fixed gates take no parameters, rotations one angle in radians, and `u`
/// eight reals (row-major, real then imaginary part of each entry).
pub fn make_gate(name: &str, params: &[f64]) -> Result<Gate2x2> {
    make_gate_checked(name, params, DEFAULT_UNITARY_TOLERANCE).map(|(g, _)| g)
}

/// Like [`make_gate`] with an explicit tolerance; also returns the label.
pub fn make_gate_checked(
    name: &str,
    params: &[f64],
    tolerance: f64,
) -> Result<(Gate2x2, GateLabel)> {
    let lname = name.to_ascii_lowercase();
    let arity = |expected: usize| {
        if params.len() == expected {
            Ok(())
        } else {
            Err(Error::WrongArity {
                gate: lname.clone(),
                expected,
                got: params.len(),
            })
        }
    };
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("gate parameters"));
    }
    let label = match lname.as_str() {
        "h" => GateLabel::H,
        "x" => GateLabel::X,
        "y" => GateLabel::Y,
        "z" => GateLabel::Z,
        "s" => GateLabel::S,
        "sdg" => GateLabel::Sdg,
        "t" => GateLabel::T,
        "tdg" => GateLabel::Tdg,
        "rx" | "ry" | "rz" => {
            arity(1)?;
            let theta = params[0];
            let label = match lname.as_str() {
                "rx" => GateLabel::Rx(theta),
                "ry" => GateLabel::Ry(theta),
                _ => GateLabel::Rz(theta),
            };
            return Ok((label.matrix().expect("rotation"), label));
        }
        "u" => {
            arity(8)?;
            let reals: [f64; 8] = params.try_into().expect("arity checked");
            let g = Gate2x2::from_reals(&reals);
            g.check_unitary(tolerance)?;
            return Ok((g, GateLabel::Custom));
        }
        _ => return Err(Error::UnknownGate(name.to_string())),
    };
    arity(0)?;
    Ok((label.matrix().expect("fixed gate"), label))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Single,
    Controlled,
}

/// A gate applied to `target`, optionally conditioned on `control` being 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOp {
    pub label: GateLabel,
    pub gate: Gate2x2,
    pub target: usize,
    pub control: Option<usize>,
}

impl GateOp {
    /// A built-in single-qubit gate. Panics for [`GateLabel::Custom`].
    pub fn single(label: GateLabel, target: usize) -> Self {
        let gate = label.matrix().expect("custom gates need GateOp::custom");
        Self {
            label,
            gate,
            target,
            control: None,
        }
    }

    pub fn custom(gate: Gate2x2, target: usize) -> Self {
        Self {
            label: GateLabel::Custom,
            gate,
            target,
            control: None,
        }
    }

    pub fn controlled(label: GateLabel, control: usize, target: usize) -> Self {
        Self {
            control: Some(control),
            ..Self::single(label, target)
        }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self::controlled(GateLabel::X, control, target)
    }

    pub fn cz(control: usize, target: usize) -> Self {
        Self::controlled(GateLabel::Z, control, target)
    }

    pub fn kind(&self) -> OpKind {
        match self.control {
            Some(_) => OpKind::Controlled,
            None => OpKind::Single,
        }
    }

    pub fn check(&self, n_qubits: usize) -> Option<ViolationKind> {
        if self.target >= n_qubits {
            return Some(ViolationKind::TargetOutOfRange {
                target: self.target,
                n_qubits,
            });
        }
        match self.control {
            Some(c) if c == self.target => Some(ViolationKind::ControlEqualsTarget(c)),
            Some(c) if c >= n_qubits => Some(ViolationKind::ControlOutOfRange {
                control: c,
                n_qubits,
            }),
            _ => None,
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.control {
            Some(c) => write!(f, "c{} {} {}", self.label.mnemonic(), c, self.target),
            None => write!(f, "{} {}", self.label.mnemonic(), self.target),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: Vec::new(),
        }
    }

    pub fn with_ops(n_qubits: usize, ops: Vec<GateOp>) -> Self {
        Self { n_qubits, ops }
    }

    pub fn push(&mut self, op: GateOp) -> &mut Self {
        self.ops.push(op);
        self
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Same as [`validate_circuit`] but folded into an [`Error`].
    pub fn validate(&self) -> Result<()> {
        validate_circuit(self).map_err(Error::InvalidCircuit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    TargetOutOfRange { target: usize, n_qubits: usize },
    ControlOutOfRange { control: usize, n_qubits: usize },
    ControlEqualsTarget(usize),
    NoQubits,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Position of the offending op, `None` for circuit-level problems.
    pub op_index: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(i) = self.op_index {
            write!(f, "op {i}: ")?;
        }
        match &self.kind {
            ViolationKind::TargetOutOfRange { target, n_qubits } => {
                write!(f, "target {target} >= n ({n_qubits})")
            }
            ViolationKind::ControlOutOfRange { control, n_qubits } => {
                write!(f, "control {control} >= n ({n_qubits})")
            }
            ViolationKind::ControlEqualsTarget(q) => write!(f, "control equals target ({q})"),
            ViolationKind::NoQubits => write!(f, "circuit has zero qubits"),
        }
    }
}

/// Collects every out-of-range index and control/target clash.
pub fn validate_circuit(c: &Circuit) -> std::result::Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if c.n_qubits == 0 {
        violations.push(Violation {
            op_index: None,
            kind: ViolationKind::NoQubits,
        });
    }
    for (i, op) in c.ops.iter().enumerate() {
        if let Some(kind) = op.check(c.n_qubits) {
            violations.push(Violation {
                op_index: Some(i),
                kind,
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Random unitary from Euler angles and a global phase.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> Gate2x2 {
    use std::f64::consts::TAU;
    let (alpha, beta, gamma, delta): (f64, f64, f64, f64) = (
        rng.random_range(0.0..TAU),
        rng.random_range(0.0..TAU),
        rng.random_range(0.0..TAU),
        rng.random_range(0.0..TAU),
    );
    let (s, c) = (gamma / 2.0).sin_cos();
    let e = |phi: f64| Complex64::from_polar(1.0, phi);
    Gate2x2::new(
        e(alpha - beta / 2.0 - delta / 2.0) * c,
        -e(alpha - beta / 2.0 + delta / 2.0) * s,
        e(alpha + beta / 2.0 - delta / 2.0) * s,
        e(alpha + beta / 2.0 + delta / 2.0) * c,
    )
}

/// Uniform over the full gate set (`h x y z s sdg t tdg rx ry rz u cx cz`),
/// angles in `[0, 2π)`, qubits uniform. Controlled gates need `n >= 2`.
pub fn random_op<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> GateOp {
    use std::f64::consts::TAU;
    let kinds = if n_qubits >= 2 { 14 } else { 12 };
    let target = rng.random_range(0..n_qubits);
    match rng.random_range(0..kinds) {
        0 => GateOp::single(GateLabel::H, target),
        1 => GateOp::single(GateLabel::X, target),
        2 => GateOp::single(GateLabel::Y, target),
        3 => GateOp::single(GateLabel::Z, target),
        4 => GateOp::single(GateLabel::S, target),
        5 => GateOp::single(GateLabel::Sdg, target),
        6 => GateOp::single(GateLabel::T, target),
        7 => GateOp::single(GateLabel::Tdg, target),
        8 => GateOp::single(GateLabel::Rx(rng.random_range(0.0..TAU)), target),
        9 => GateOp::single(GateLabel::Ry(rng.random_range(0.0..TAU)), target),
        10 => GateOp::single(GateLabel::Rz(rng.random_range(0.0..TAU)), target),
        11 => GateOp::custom(random_unitary(rng), target),
        k => {
            let mut control = rng.random_range(0..n_qubits - 1);
            if control >= target {
                control += 1;
            }
            if k == 12 {
                GateOp::cx(control, target)
            } else {
                GateOp::cz(control, target)
            }
        }
    }
}

pub fn random_circuit<R: Rng + ?Sized>(n_qubits: usize, depth: usize, rng: &mut R) -> Circuit {
    Circuit::with_ops(
        n_qubits,
        (0..depth).map(|_| random_op(n_qubits, rng)).collect(),
    )
}

/// One Hadamard per qubit, ascending. Exercises every stride class.
pub fn benchmark_circuit(n_qubits: usize) -> Circuit {
    Circuit::with_ops(
        n_qubits,
        (0..n_qubits)
            .map(|q| GateOp::single(GateLabel::H, q))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_gate_eq(g: &Gate2x2, expected: [[f64; 2]; 4]) {
        for (z, [re, im]) in g.entries().iter().zip(expected) {
            assert!(
                (z.re - re).abs() < 1e-15 && (z.im - im).abs() < 1e-15,
                "{g:?}"
            );
        }
    }

    #[test]
    fn standard_matrices() {
        assert_gate_eq(
            &make_gate("x", &[]).unwrap(),
            [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0]],
        );
        let h = make_gate("h", &[]).unwrap();
        assert_eq!(h.u00.re, FRAC_1_SQRT_2);
        assert_eq!(h.u11.re, -FRAC_1_SQRT_2);
        assert_eq!(make_gate("rz", &[0.0]).unwrap(), Gate2x2::IDENTITY);
        assert_eq!(make_gate("RX", &[0.0]).unwrap(), Gate2x2::IDENTITY);
    }

    #[test]
    fn make_gate_errors() {
        assert!(matches!(make_gate("foo", &[]), Err(Error::UnknownGate(_))));
        assert!(matches!(
            make_gate("h", &[1.0]),
            Err(Error::WrongArity {
                expected: 0,
                got: 1,
                ..
            })
        ));
        assert!(matches!(
            make_gate("rx", &[]),
            Err(Error::WrongArity { expected: 1, .. })
        ));
        assert!(matches!(
            make_gate("u", &[1.0; 8]),
            Err(Error::NonUnitary { .. })
        ));
        assert!(matches!(
            make_gate("rz", &[f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        // slightly off-unitary input passes the lenient check but not the strict one
        let almost = [1.0 + 1e-8, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert!(make_gate("u", &almost).is_ok());
        assert!(make_gate_checked("u", &almost, STRICT_UNITARY_TOLERANCE).is_err());
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(pair_index(5, 1), 7);
        assert_eq!(pair_index(7, 1), 5);
        assert_eq!(pair_index(0, 3), 8);
        assert!(is_pair_base(5, 1));
        assert!(!is_pair_base(7, 1));
        assert!((0..64).all(|k| is_pair_base(0, k)));
    }

    #[test]
    fn pairing_is_an_involution_with_one_base() {
        for n in 1..=12usize {
            let dim = 1u64 << n;
            for k in 0..n {
                let mut seen = vec![false; dim as usize];
                let mut pairs = 0u64;
                for i in 0..dim {
                    let j = pair_index(i, k);
                    assert_eq!(pair_index(j, k), i);
                    assert!(is_pair_base(i, k) ^ is_pair_base(j, k));
                    if is_pair_base(i, k) {
                        pairs += 1;
                        for idx in [i, j] {
                            assert!(!seen[idx as usize]);
                            seen[idx as usize] = true;
                        }
                    }
                }
                assert_eq!(pairs, dim / 2);
                assert!(seen.iter().all(|&s| s));
            }
        }
    }

    #[test]
    fn builtin_gates_are_unitary() {
        let labels = [
            GateLabel::H,
            GateLabel::X,
            GateLabel::Y,
            GateLabel::Z,
            GateLabel::S,
            GateLabel::Sdg,
            GateLabel::T,
            GateLabel::Tdg,
            GateLabel::Rx(0.3),
            GateLabel::Ry(2.1),
            GateLabel::Rz(5.9),
        ];
        for l in labels {
            let dev = l.matrix().unwrap().unitarity_deviation();
            assert!(dev <= 1e-12, "{l:?}: {dev}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(random_unitary(&mut rng).unitarity_deviation() <= 1e-12);
        }
    }

    #[test]
    fn validation() {
        let ok = Circuit::with_ops(2, vec![GateOp::single(GateLabel::H, 0), GateOp::cx(0, 1)]);
        assert_eq!(validate_circuit(&ok), Ok(()));

        let bad = Circuit::with_ops(2, vec![GateOp::single(GateLabel::H, 5)]);
        assert_eq!(
            validate_circuit(&bad),
            Err(vec![Violation {
                op_index: Some(0),
                kind: ViolationKind::TargetOutOfRange {
                    target: 5,
                    n_qubits: 2
                }
            }])
        );

        let same = Circuit::with_ops(3, vec![GateOp::cx(1, 1)]);
        let v = validate_circuit(&same).unwrap_err();
        assert_eq!(v[0].kind, ViolationKind::ControlEqualsTarget(1));
        assert_eq!(v[0].to_string(), "op 0: control equals target (1)");
    }

    #[test]
    fn random_circuits_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            let c = random_circuit(n, 50, &mut rng);
            assert!(c.validate().is_ok());
        }
    }
}
