//! Stabilizer codes in a symplectic GF(2) representation.
//!
//! Built-in registry plus user-supplied definitions loaded from JSON
//! documents. Validation checks commutation relations, generator counts and
//! (via brute force) the declared distance.

use crate::gf2::{BitMatrix, BitVec};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Per-qubit Pauli label. Y carries both the X and Z bit.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Z,
    Y,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    pub fn x_bit(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn z_bit(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    pub fn anticommutes(self, other: Pauli) -> bool {
        // symplectic form: x1*z2 + z1*x2
        (self.x_bit() & other.z_bit()) ^ (self.z_bit() & other.x_bit())
    }
}

/// An n-qubit Pauli operator as paired (x, z) support vectors.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    pub x: BitVec,
    pub z: BitVec,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { x: BitVec::zeros(n), z: BitVec::zeros(n) }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses strings like "XZZXI". Rejects other characters.
    pub fn parse(s: &str) -> Result<Self, CodeError> {
        let mut p = PauliString::identity(s.len());
        for (i, ch) in s.chars().enumerate() {
            match ch {
                'I' | '_' | '.' => {}
                'X' => p.x.set(i, true),
                'Z' => p.z.set(i, true),
                'Y' => {
                    p.x.set(i, true);
                    p.z.set(i, true);
                }
                other => return Err(CodeError::BadPauliChar(other)),
            }
        }
        Ok(p)
    }

    pub fn get(&self, i: usize) -> Pauli {
        Pauli::from_bits(self.x.get(i), self.z.get(i))
    }

    pub fn set(&mut self, i: usize, p: Pauli) {
        self.x.set(i, p.x_bit());
        self.z.set(i, p.z_bit());
    }

    pub fn weight(&self) -> usize {
        (0..self.len()).filter(|&i| self.get(i) != Pauli::I).count()
    }

    pub fn anticommutes(&self, other: &PauliString) -> bool {
        self.x.dot(&other.z) ^ self.z.dot(&other.x)
    }

    pub fn mul_in(&mut self, other: &PauliString) {
        self.x.xor_in(&other.x);
        self.z.xor_in(&other.z);
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    pub fn is_pure_x(&self) -> bool {
        self.z.is_zero() && !self.x.is_zero()
    }

    pub fn is_pure_z(&self) -> bool {
        self.x.is_zero() && !self.z.is_zero()
    }

    /// Concatenated (x | z) symplectic vector of length 2n.
    pub fn symplectic(&self) -> BitVec {
        let n = self.len();
        let mut v = BitVec::zeros(2 * n);
        for i in self.x.iter_ones() {
            v.set(i, true);
        }
        for i in self.z.iter_ones() {
            v.set(n + i, true);
        }
        v
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            let c = match self.get(i) {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Z => 'Z',
                Pauli::Y => 'Y',
            };
            write!(f, "{}", c)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CodeError {
    #[error("unknown code name: {0}")]
    UnknownCode(String),
    #[error("invalid Pauli character: {0}")]
    BadPauliChar(char),
    #[error("code validation failed: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("distance enumeration budget exceeded (n={0} > 25)")]
    DistanceBudget(usize),
    #[error("could not complete logical operators: {0}")]
    LogicalCompletion(String),
    #[error("malformed code document: {0}")]
    Document(String),
}

/// A reported validation violation; violations are data, not panics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    GeneratorCount { expected: usize, found: usize },
    GeneratorsAnticommute { a: usize, b: usize },
    GeneratorsDependent,
    LogicalPairCount { expected: usize, found: usize },
    LogicalVsStabilizer { logical: String, stabilizer: usize },
    LogicalPairing { a: String, b: String },
    LengthMismatch { what: String },
    DistanceMismatch { declared: usize, actual: usize },
}

/// An [n, k, d] stabilizer code with explicit logical representatives.
#[derive(Clone, Serialize, Deserialize)]
pub struct StabilizerCode {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub stabilizers: Vec<PauliString>,
    pub logicals_x: Vec<PauliString>,
    pub logicals_z: Vec<PauliString>,
    pub css: bool,
    pub self_dual: bool,
}

impl fmt::Debug for StabilizerCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [[{},{},{}]]", self.name, self.n, self.k, self.d)
    }
}

impl StabilizerCode {
    pub fn new(
        name: &str,
        n: usize,
        k: usize,
        d: usize,
        stabilizers: Vec<PauliString>,
        logicals_x: Vec<PauliString>,
        logicals_z: Vec<PauliString>,
    ) -> Self {
        let css = stabilizers.iter().all(|s| s.is_pure_x() || s.is_pure_z());
        let self_dual = css && Self::self_dual_check(&stabilizers, n);
        StabilizerCode { name: name.to_string(), n, k, d, stabilizers, logicals_x, logicals_z, css, self_dual }
    }

    fn self_dual_check(stabilizers: &[PauliString], n: usize) -> bool {
        let x_rows: Vec<BitVec> = stabilizers.iter().filter(|s| s.is_pure_x()).map(|s| s.x.clone()).collect();
        let z_rows: Vec<BitVec> = stabilizers.iter().filter(|s| s.is_pure_z()).map(|s| s.z.clone()).collect();
        if x_rows.is_empty() || z_rows.is_empty() || x_rows.len() != z_rows.len() {
            return false;
        }
        let mx = BitMatrix::from_rows(&x_rows);
        let mz = BitMatrix::from_rows(&z_rows);
        let _ = n;
        // equal row spaces over GF(2)
        let stacked = mx.vstack(&mz);
        stacked.rank() == mx.rank() && mx.rank() == mz.rank()
    }

    pub fn m_x(&self) -> usize {
        self.stabilizers.iter().filter(|s| s.is_pure_x()).count()
    }

    pub fn m_z(&self) -> usize {
        self.stabilizers.iter().filter(|s| s.is_pure_z()).count()
    }

    /// Z-stabilizer support matrix (rows of pure-Z generators).
    pub fn h_z(&self) -> BitMatrix {
        let rows: Vec<BitVec> =
            self.stabilizers.iter().filter(|s| s.is_pure_z()).map(|s| s.z.clone()).collect();
        if rows.is_empty() {
            BitMatrix::zeros(0, self.n)
        } else {
            BitMatrix::from_rows(&rows)
        }
    }

    pub fn h_x(&self) -> BitMatrix {
        let rows: Vec<BitVec> =
            self.stabilizers.iter().filter(|s| s.is_pure_x()).map(|s| s.x.clone()).collect();
        if rows.is_empty() {
            BitMatrix::zeros(0, self.n)
        } else {
            BitMatrix::from_rows(&rows)
        }
    }

    pub fn l_z(&self) -> BitMatrix {
        BitMatrix::from_rows(&self.logicals_z.iter().map(|l| l.z.clone()).collect::<Vec<_>>())
    }

    pub fn l_x(&self) -> BitMatrix {
        BitMatrix::from_rows(&self.logicals_x.iter().map(|l| l.x.clone()).collect::<Vec<_>>())
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let expected = self.n - self.k;
        if self.stabilizers.len() != expected {
            v.push(Violation::GeneratorCount { expected, found: self.stabilizers.len() });
        }
        for s in self.stabilizers.iter().chain(self.logicals_x.iter()).chain(self.logicals_z.iter()) {
            if s.len() != self.n {
                v.push(Violation::LengthMismatch { what: format!("{:?}", s) });
            }
        }
        if v.iter().any(|x| matches!(x, Violation::LengthMismatch { .. })) {
            return v;
        }
        for a in 0..self.stabilizers.len() {
            for b in (a + 1)..self.stabilizers.len() {
                if self.stabilizers[a].anticommutes(&self.stabilizers[b]) {
                    v.push(Violation::GeneratorsAnticommute { a, b });
                }
            }
        }
        let sym_rows: Vec<BitVec> = self.stabilizers.iter().map(|s| s.symplectic()).collect();
        if !sym_rows.is_empty() && BitMatrix::from_rows(&sym_rows).rank() != self.stabilizers.len() {
            v.push(Violation::GeneratorsDependent);
        }
        if self.logicals_x.len() != self.k || self.logicals_z.len() != self.k {
            v.push(Violation::LogicalPairCount {
                expected: self.k,
                found: self.logicals_x.len().min(self.logicals_z.len()),
            });
            return v;
        }
        for (li, l) in self.logicals_x.iter().chain(self.logicals_z.iter()).enumerate() {
            for (si, s) in self.stabilizers.iter().enumerate() {
                if l.anticommutes(s) {
                    let basis = if li < self.k { "X" } else { "Z" };
                    v.push(Violation::LogicalVsStabilizer {
                        logical: format!("{}{}", basis, li % self.k),
                        stabilizer: si,
                    });
                }
            }
        }
        for a in 0..self.k {
            for b in 0..self.k {
                let want = a == b;
                if self.logicals_x[a].anticommutes(&self.logicals_z[b]) != want {
                    v.push(Violation::LogicalPairing { a: format!("X{}", a), b: format!("Z{}", b) });
                }
                if a < b {
                    if self.logicals_x[a].anticommutes(&self.logicals_x[b]) {
                        v.push(Violation::LogicalPairing { a: format!("X{}", a), b: format!("X{}", b) });
                    }
                    if self.logicals_z[a].anticommutes(&self.logicals_z[b]) {
                        v.push(Violation::LogicalPairing { a: format!("Z{}", a), b: format!("Z{}", b) });
                    }
                }
            }
        }
        v
    }

    /// Minimum weight of a Pauli commuting with all stabilizers but outside
    /// the stabilizer group. Enumerates by weight; n <= 25.
    pub fn brute_force_distance(&self) -> Result<usize, CodeError> {
        if self.n > 25 {
            return Err(CodeError::DistanceBudget(self.n));
        }
        let stab_sym = BitMatrix::from_rows(
            &self.stabilizers.iter().map(|s| s.symplectic()).collect::<Vec<_>>(),
        );
        let stab_rank = stab_sym.rank();
        for w in 1..=self.n {
            let mut positions: Vec<usize> = (0..w).collect();
            loop {
                // all 3^w letter assignments on the chosen positions
                let mut letters = vec![0u8; w];
                loop {
                    let mut p = PauliString::identity(self.n);
                    for (slot, &pos) in positions.iter().enumerate() {
                        p.set(pos, [Pauli::X, Pauli::Z, Pauli::Y][letters[slot] as usize]);
                    }
                    let commutes = self.stabilizers.iter().all(|s| !p.anticommutes(s));
                    if commutes {
                        // outside the stabilizer group?
                        let mut aug = stab_sym.clone();
                        aug.push_row(&p.symplectic());
                        if aug.rank() > stab_rank {
                            return Ok(w);
                        }
                    }
                    // increment letters
                    let mut carry = true;
                    for l in letters.iter_mut() {
                        if carry {
                            *l += 1;
                            if *l == 3 {
                                *l = 0;
                            } else {
                                carry = false;
                            }
                        }
                    }
                    if carry {
                        break;
                    }
                }
                // next combination
                let mut i = w;
                loop {
                    if i == 0 {
                        positions.clear();
                        break;
                    }
                    i -= 1;
                    if positions[i] != i + self.n - w {
                        positions[i] += 1;
                        for j in (i + 1)..w {
                            positions[j] = positions[j - 1] + 1;
                        }
                        break;
                    }
                }
                if positions.is_empty() {
                    break;
                }
            }
        }
        Ok(0)
    }
}

/// Completes missing logical pairs by symplectic Gram-Schmidt over the
/// centralizer of the stabilizer group. Deterministic given generator order.
/// CSS codes get pure-X / pure-Z representatives.
pub fn complete_logicals(
    n: usize,
    k: usize,
    stabilizers: &[PauliString],
) -> Result<(Vec<PauliString>, Vec<PauliString>), CodeError> {
    if stabilizers.iter().all(|s| s.is_pure_x() || s.is_pure_z()) {
        return complete_logicals_css(n, k, stabilizers);
    }
    // Centralizer basis: kernel of the symplectic-form matrix of stabilizers.
    // Row s of the form matrix maps v -> <s, v> (with x/z swapped halves).
    let mut form_rows: Vec<BitVec> = Vec::new();
    for s in stabilizers {
        // <s, v> = s.x . v.z + s.z . v.x ; with v packed (x | z), the
        // functional is (s.z | s.x).
        let mut row = BitVec::zeros(2 * n);
        for i in s.z.iter_ones() {
            row.set(i, true);
        }
        for i in s.x.iter_ones() {
            row.set(n + i, true);
        }
        form_rows.push(row);
    }
    let form = BitMatrix::from_rows(&form_rows);
    let cent = form.kernel(); // rows: symplectic vectors commuting with all stabilizers
    let stab_sym =
        BitMatrix::from_rows(&stabilizers.iter().map(|s| s.symplectic()).collect::<Vec<_>>());

    let unpack = |v: &BitVec| -> PauliString {
        let mut p = PauliString::identity(n);
        for i in v.iter_ones() {
            if i < n {
                p.x.set(i, true);
            } else {
                p.z.set(i - n, true);
            }
        }
        p
    };

    // Candidates outside the stabilizer group, processed in deterministic order.
    let mut candidates: Vec<PauliString> = (0..cent.rows()).map(|r| unpack(&cent.row(r))).collect();
    // Prefer low weight representatives for readability of reports.
    candidates.sort_by_key(|p| (p.weight(), format!("{:?}", p)));

    let mut pairs_x: Vec<PauliString> = Vec::new();
    let mut pairs_z: Vec<PauliString> = Vec::new();
    let mut group = stab_sym.clone();

    while pairs_x.len() < k {
        // first candidate independent of (stabilizers + chosen logicals)
        let rank0 = group.rank();
        let mut a: Option<PauliString> = None;
        for c in &candidates {
            let mut aug = group.clone();
            aug.push_row(&c.symplectic());
            if aug.rank() > rank0 {
                a = Some(c.clone());
                break;
            }
        }
        let a = a.ok_or_else(|| CodeError::LogicalCompletion("centralizer exhausted".into()))?;
        // partner: anticommutes with a, commutes with all previously chosen pairs
        let mut b: Option<PauliString> = None;
        for c in &candidates {
            if !c.anticommutes(&a) {
                continue;
            }
            if pairs_x.iter().any(|p| c.anticommutes(p)) || pairs_z.iter().any(|p| c.anticommutes(p)) {
                continue;
            }
            b = Some(c.clone());
            break;
        }
        let mut b = b.ok_or_else(|| CodeError::LogicalCompletion("no symplectic partner".into()))?;
        // clean a against previous pairs (make it commute with them)
        let mut a = a;
        for i in 0..pairs_x.len() {
            if a.anticommutes(&pairs_x[i]) {
                let z = pairs_z[i].clone();
                a.mul_in(&z);
            }
            if a.anticommutes(&pairs_z[i]) {
                let x = pairs_x[i].clone();
                a.mul_in(&x);
            }
        }
        if !b.anticommutes(&a) {
            return Err(CodeError::LogicalCompletion("pairing lost during cleanup".into()));
        }
        for i in 0..pairs_x.len() {
            if b.anticommutes(&pairs_x[i]) {
                let z = pairs_z[i].clone();
                b.mul_in(&z);
            }
            if b.anticommutes(&pairs_z[i]) {
                let x = pairs_x[i].clone();
                b.mul_in(&x);
            }
        }
        // classify which is X-like: prefer pure types when available
        let (lx, lz) = if a.x.count_ones() >= a.z.count_ones() { (a, b) } else { (b, a) };
        group.push_row(&lx.symplectic());
        group.push_row(&lz.symplectic());
        pairs_x.push(lx);
        pairs_z.push(lz);
    }
    Ok((pairs_x, pairs_z))
}

/// Pure-basis completion for CSS codes: X logicals from ker(H_Z) outside
/// rowspace(H_X), Z logicals from ker(H_X), paired by Gaussian elimination
/// on the overlap-parity matrix.
fn complete_logicals_css(
    n: usize,
    k: usize,
    stabilizers: &[PauliString],
) -> Result<(Vec<PauliString>, Vec<PauliString>), CodeError> {
    let x_rows: Vec<BitVec> = stabilizers.iter().filter(|s| s.is_pure_x()).map(|s| s.x.clone()).collect();
    let z_rows: Vec<BitVec> = stabilizers.iter().filter(|s| s.is_pure_z()).map(|s| s.z.clone()).collect();
    let hx = if x_rows.is_empty() { BitMatrix::zeros(0, n) } else { BitMatrix::from_rows(&x_rows) };
    let hz = if z_rows.is_empty() { BitMatrix::zeros(0, n) } else { BitMatrix::from_rows(&z_rows) };

    // candidates in ker(H_other) not in rowspace(H_same)
    let pick = |kernel: &BitMatrix, same: &BitMatrix| -> Vec<BitVec> {
        let mut chosen: Vec<BitVec> = Vec::new();
        let mut span = same.clone();
        let mut rank = span.rank();
        let mut cands: Vec<BitVec> = (0..kernel.rows()).map(|r| kernel.row(r)).collect();
        cands.sort_by_key(|v| (v.count_ones(), v.ones()));
        for c in cands {
            if chosen.len() == k {
                break;
            }
            let mut aug = span.clone();
            aug.push_row(&c);
            let new_rank = aug.rank();
            if new_rank > rank {
                span = aug;
                rank = new_rank;
                chosen.push(c);
            }
        }
        chosen
    };
    let mut xs = pick(&hz.kernel(), &hx);
    let mut zs = pick(&hx.kernel(), &hz);
    if xs.len() != k || zs.len() != k {
        return Err(CodeError::LogicalCompletion(format!(
            "css completion found {} X and {} Z logicals, wanted {}",
            xs.len(),
            zs.len(),
            k
        )));
    }
    // pair so that xs[i] . zs[j] = delta_ij
    for i in 0..k {
        let j = (i..k)
            .find(|&j| xs[i].dot(&zs[j]))
            .ok_or_else(|| CodeError::LogicalCompletion("no anticommuting partner".into()))?;
        zs.swap(i, j);
        for j in 0..k {
            if j != i && xs[i].dot(&zs[j]) {
                let zi = zs[i].clone();
                zs[j].xor_in(&zi);
            }
        }
        for i2 in (i + 1)..k {
            if xs[i2].dot(&zs[i]) {
                let xi = xs[i].clone();
                xs[i2].xor_in(&xi);
            }
        }
    }
    let to_x = |v: &BitVec| {
        let mut p = PauliString::identity(n);
        for i in v.iter_ones() {
            p.set(i, Pauli::X);
        }
        p
    };
    let to_z = |v: &BitVec| {
        let mut p = PauliString::identity(n);
        for i in v.iter_ones() {
            p.set(i, Pauli::Z);
        }
        p
    };
    Ok((xs.iter().map(to_x).collect(), zs.iter().map(to_z).collect()))
}

fn code(
    name: &str,
    n: usize,
    k: usize,
    d: usize,
    stabs: &[&str],
    lx: &[&str],
    lz: &[&str],
) -> StabilizerCode {
    let stabilizers: Vec<PauliString> = stabs.iter().map(|s| PauliString::parse(s).unwrap()).collect();
    let (logicals_x, logicals_z) = if lx.is_empty() {
        complete_logicals(n, k, &stabilizers).expect("builtin logical completion")
    } else {
        (
            lx.iter().map(|s| PauliString::parse(s).unwrap()).collect(),
            lz.iter().map(|s| PauliString::parse(s).unwrap()).collect(),
        )
    };
    StabilizerCode::new(name, n, k, d, stabilizers, logicals_x, logicals_z)
}

/// Built-in code registry.
///
/// The [4,1,2] entry is the (2,2)-tree code written with weight-2 X
/// generators and one weight-4 Z generator, matching the encoded-web worked
/// examples and the asymmetric-threshold data (high XX, low ZZ tolerance).
pub fn builtin(name: &str) -> Result<StabilizerCode, CodeError> {
    let c = match name {
        "[4,1,2]" => code(
            "[4,1,2]",
            4,
            1,
            2,
            &["XXII", "IIXX", "ZZZZ"],
            &["XIXI"],
            &["ZZII"],
        ),
        "[4,2,2]" => code(
            "[4,2,2]",
            4,
            2,
            2,
            &["XXXX", "ZZZZ"],
            &["XXII", "XIXI"],
            &["ZIZI", "ZZII"],
        ),
        "[5,1,3]" => code(
            "[5,1,3]",
            5,
            1,
            3,
            &["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"],
            &["XXXXX"],
            &["ZZZZZ"],
        ),
        "[6,2,2]" => code("[6,2,2]", 6, 2, 2, &["XXIIII", "IIXXII", "IIIIXX", "ZZZZZZ"], &[], &[]),
        "[6,4,2]" => code("[6,4,2]", 6, 4, 2, &["XXXXXX", "ZZZZZZ"], &[], &[]),
        "[7,1,3]" => code(
            "[7,1,3]",
            7,
            1,
            3,
            &["XXXXIII", "IIXXXXI", "IXIXIXX", "ZZZZIII", "IIZZZZI", "IZIZIZZ"],
            &["XXIIIIX"],
            &["ZZIIIIZ"],
        ),
        "[9,1,3]" => code(
            "[9,1,3]",
            9,
            1,
            3,
            &[
                "XXIIIIIII",
                "IXXIIIIII",
                "IIIXXIIII",
                "IIIIXXIII",
                "IIIIIIXXI",
                "IIIIIIIXX",
                "ZZZZZZIII",
                "IIIZZZZZZ",
            ],
            &["XIIXIIXII"],
            &["ZZZIIIIII"],
        ),
        other => return Err(CodeError::UnknownCode(other.to_string())),
    };
    debug_assert!(c.validate().is_empty(), "builtin {} fails validation: {:?}", name, c.validate());
    Ok(c)
}

pub fn builtin_names() -> Vec<&'static str> {
    vec!["[4,1,2]", "[4,2,2]", "[5,1,3]", "[6,2,2]", "[6,4,2]", "[7,1,3]", "[9,1,3]"]
}

/// JSON code document: one record per code.
#[derive(Serialize, Deserialize)]
pub struct CodeDocument {
    pub format_version: u32,
    pub codes: Vec<CodeRecord>,
}

#[derive(Serialize, Deserialize)]
pub struct CodeRecord {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub stabilizers: Vec<String>,
    #[serde(default)]
    pub logicals_x: Vec<String>,
    #[serde(default)]
    pub logicals_z: Vec<String>,
}

/// Parses user codes from a JSON document; logicals are completed by
/// symplectic Gram-Schmidt when absent. Every code is validated.
pub fn load_codes(doc: &str) -> Result<Vec<StabilizerCode>, CodeError> {
    let parsed: CodeDocument =
        serde_json::from_str(doc).map_err(|e| CodeError::Document(e.to_string()))?;
    let mut out = Vec::new();
    for rec in parsed.codes {
        let stabilizers: Vec<PauliString> =
            rec.stabilizers.iter().map(|s| PauliString::parse(s)).collect::<Result<_, _>>()?;
        let (lx, lz) = if rec.logicals_x.is_empty() {
            complete_logicals(rec.n, rec.k, &stabilizers)?
        } else {
            (
                rec.logicals_x.iter().map(|s| PauliString::parse(s)).collect::<Result<_, _>>()?,
                rec.logicals_z.iter().map(|s| PauliString::parse(s)).collect::<Result<_, _>>()?,
            )
        };
        let c = StabilizerCode::new(&rec.name, rec.n, rec.k, rec.d, stabilizers, lx, lz);
        let violations = c.validate();
        if !violations.is_empty() {
            return Err(CodeError::Invalid(violations));
        }
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in builtin_names() {
            let c = builtin(name).unwrap();
            assert!(c.validate().is_empty(), "{} violations: {:?}", name, c.validate());
        }
    }

    #[test]
    fn builtin_distances_match_declared() {
        for name in builtin_names() {
            let c = builtin(name).unwrap();
            assert_eq!(c.brute_force_distance().unwrap(), c.d, "distance mismatch for {}", name);
        }
    }

    #[test]
    fn steane_matches_published_matrices() {
        let c = builtin("[7,1,3]").unwrap();
        let h = c.h_z();
        assert_eq!(h.row(0).ones(), vec![0, 1, 2, 3]);
        assert_eq!(h.row(1).ones(), vec![2, 3, 4, 5]);
        assert_eq!(h.row(2).ones(), vec![1, 3, 5, 6]);
        assert_eq!(c.logicals_z[0].z.ones(), vec![0, 1, 6]);
        assert!(c.css && c.self_dual);
    }

    #[test]
    fn five_one_three_cyclic() {
        let c = builtin("[5,1,3]").unwrap();
        assert_eq!(c.stabilizers.len(), 4);
        assert!(!c.css);
        assert_eq!(format!("{:?}", c.stabilizers[0]), "XZZXI");
        assert_eq!(format!("{:?}", c.stabilizers[1]), "IXZZX");
        assert_eq!(c.brute_force_distance().unwrap(), 3);
    }

    #[test]
    fn four_two_two_logicals() {
        let c = builtin("[4,2,2]").unwrap();
        assert_eq!(format!("{:?}", c.logicals_x[0]), "XXII");
        assert_eq!(format!("{:?}", c.logicals_z[0]), "ZIZI");
        assert_eq!(format!("{:?}", c.logicals_x[1]), "XIXI");
        assert_eq!(format!("{:?}", c.logicals_z[1]), "ZZII");
    }

    #[test]
    fn generator_count_violation() {
        let mut c = builtin("[4,2,2]").unwrap();
        c.stabilizers.push(PauliString::parse("ZZII").unwrap());
        let v = c.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::GeneratorCount { expected: 2, found: 3 })));
    }

    #[test]
    fn anticommuting_generators_violation() {
        let c = StabilizerCode::new(
            "bad",
            2,
            0,
            1,
            vec![PauliString::parse("XI").unwrap(), PauliString::parse("ZI").unwrap()],
            vec![],
            vec![],
        );
        let v = c.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::GeneratorsAnticommute { .. })));
    }

    #[test]
    fn completion_produces_valid_pairs() {
        for name in ["[6,2,2]", "[6,4,2]"] {
            let c = builtin(name).unwrap();
            assert!(c.validate().is_empty(), "{}: {:?}", name, c.validate());
        }
    }

    #[test]
    fn load_codes_roundtrip() {
        let doc = r#"{"format_version":1,"codes":[{"name":"rep3","n":3,"k":1,"d":1,
            "stabilizers":["ZZI","IZZ"]}]}"#;
        let codes = load_codes(doc).unwrap();
        assert_eq!(codes.len(), 1);
        assert_eq!(codes[0].k, 1);
        assert!(codes[0].validate().is_empty());
    }

    #[test]
    fn css_flags() {
        assert!(builtin("[7,1,3]").unwrap().css);
        assert!(builtin("[4,2,2]").unwrap().self_dual);
        assert!(!builtin("[5,1,3]").unwrap().css);
        assert!(!builtin("[4,1,2]").unwrap().self_dual);
    }
}
