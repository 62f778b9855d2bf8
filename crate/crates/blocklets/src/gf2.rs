//! Bit-packed GF(2) vectors and matrices.
//!
//! Everything downstream (check matrices, erasure decoding, closed-web
//! search, distance search) runs on these. Elimination uses deterministic
//! pivoting (lowest column index first) so reduced forms are reproducible.

use serde::{Deserialize, Serialize};

const WORD_BITS: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// A GF(2) vector with a fixed length; bits beyond `len` are kept zero.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec { len, words: vec![0u64; words_for(len)] }
    }

    pub fn from_ones(len: usize, ones: &[usize]) -> Self {
        let mut v = BitVec::zeros(len);
        for &i in ones {
            v.set(i, true);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let w = &mut self.words[i / WORD_BITS];
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    pub fn xor_in(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a ^= *b;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Parity of the AND with `other` (symplectic-style dot product term).
    pub fn dot(&self, other: &BitVec) -> bool {
        assert_eq!(self.len, other.len);
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(other.words.iter()) {
            acc ^= a & b;
        }
        acc.count_ones() % 2 == 1
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD_BITS + b)
                }
            })
        })
    }

    pub fn ones(&self) -> Vec<usize> {
        self.iter_ones().collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

impl std::fmt::Debug for BitVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", if self.get(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Row-major bit-packed GF(2) matrix with word-level row XOR.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    row_words: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let row_words = words_for(cols);
        BitMatrix { rows, cols, row_words, data: vec![0u64; rows * row_words] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BitMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(rows: &[BitVec]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = BitMatrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols);
            m.data[i * m.row_words..(i + 1) * m.row_words].copy_from_slice(r.words());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.row_words + c / WORD_BITS] >> (c % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.row_words + c / WORD_BITS];
        let mask = 1u64 << (c % WORD_BITS);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row(&self, r: usize) -> BitVec {
        BitVec { len: self.cols, words: self.data[r * self.row_words..(r + 1) * self.row_words].to_vec() }
    }

    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.row_words..(r + 1) * self.row_words]
    }

    pub fn push_row(&mut self, row: &BitVec) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row.words());
        self.rows += 1;
    }

    pub fn xor_row_into(&mut self, src: usize, dst: usize) {
        assert_ne!(src, dst);
        let rw = self.row_words;
        let (lo, hi) = if src < dst { (src, dst) } else { (dst, src) };
        let (a, b) = self.data.split_at_mut(hi * rw);
        let lo_slice = &a[lo * rw..lo * rw + rw];
        let hi_slice = &mut b[..rw];
        if src < dst {
            for (d, s) in hi_slice.iter_mut().zip(lo_slice.iter()) {
                *d ^= *s;
            }
        } else {
            // src is the hi slice; need the other direction
            let src_copy: Vec<u64> = hi_slice.to_vec();
            let a_dst = &mut a[lo * rw..lo * rw + rw];
            for (d, s) in a_dst.iter_mut().zip(src_copy.iter()) {
                *d ^= *s;
            }
        }
    }

    /// GF(2) row rank. The input is unchanged (works on a copy).
    pub fn rank(&self) -> usize {
        self.clone().rank_in_place()
    }

    fn rank_in_place(&mut self) -> usize {
        let mut rank = 0;
        for col in 0..self.cols {
            let mut pivot = None;
            for r in rank..self.rows {
                if self.get(r, col) {
                    pivot = Some(r);
                    break;
                }
            }
            let Some(p) = pivot else { continue };
            self.data.swap_chunks(rank, p, self.row_words);
            for r in 0..self.rows {
                if r != rank && self.get(r, col) {
                    self.xor_row_into(rank, r);
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }

    /// Coefficients `x` with `x^T * self == target`, if `target` lies in the
    /// row space.
    pub fn solve_in_span(&self, target: &BitVec) -> Option<BitVec> {
        assert_eq!(target.len(), self.cols, "dimension mismatch in solve_in_span");
        // Augment each row with an identity tag tracking row combinations.
        let n = self.rows;
        let mut work: Vec<(BitVec, BitVec)> = (0..n)
            .map(|i| {
                let mut tag = BitVec::zeros(n);
                tag.set(i, true);
                (self.row(i), tag)
            })
            .collect();
        let mut t = target.clone();
        let mut t_tag = BitVec::zeros(n);
        let mut rank = 0;
        for col in 0..self.cols {
            let Some(p) = (rank..n).find(|&r| work[r].0.get(col)) else { continue };
            work.swap(rank, p);
            for r in 0..n {
                if r != rank && work[r].0.get(col) {
                    let (pivot_row, pivot_tag) = (work[rank].0.clone(), work[rank].1.clone());
                    work[r].0.xor_in(&pivot_row);
                    work[r].1.xor_in(&pivot_tag);
                }
            }
            if t.get(col) {
                t.xor_in(&work[rank].0.clone());
                t_tag.xor_in(&work[rank].1.clone());
            }
            rank += 1;
            if rank == n {
                break;
            }
        }
        if t.is_zero() {
            Some(t_tag)
        } else {
            None
        }
    }

    /// Basis of the right kernel `{x : self * x = 0}`, one row per basis vector.
    pub fn kernel(&self) -> BitMatrix {
        // Reduce each column vector against pivots, tracking which original
        // columns combine into it; a column that reduces to zero yields a
        // kernel basis vector.
        let n = self.cols;
        let work = self.transpose();
        let mut pivots: Vec<(usize, BitVec, BitVec)> = Vec::new();
        let mut kernel_rows: Vec<BitVec> = Vec::new();
        for c in 0..n {
            let mut v = work.row(c);
            let mut tag = BitVec::zeros(n);
            tag.set(c, true);
            for (pb, pv, pt) in &pivots {
                if v.get(*pb) {
                    v.xor_in(pv);
                    tag.xor_in(pt);
                }
            }
            let first = v.iter_ones().next();
            match first {
                Some(b) => {
                    pivots.push((b, v, tag));
                    pivots.sort_by_key(|(pb, _, _)| *pb);
                }
                None => kernel_rows.push(tag),
            }
        }
        if kernel_rows.is_empty() {
            BitMatrix::zeros(0, n)
        } else {
            BitMatrix::from_rows(&kernel_rows)
        }
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in self.row(r).iter_ones() {
                t.set(c, r, true);
            }
        }
        t
    }

    /// Kronecker product; entry ((i*b.rows+p),(j*b.cols+q)) = a(i,j)*b(p,q).
    pub fn kron(&self, other: &BitMatrix) -> BitMatrix {
        let rows = self.rows.checked_mul(other.rows).expect("kron rows overflow");
        let cols = self.cols.checked_mul(other.cols).expect("kron cols overflow");
        let entries = (rows as u64).checked_mul(cols as u64).expect("kron entries overflow");
        assert!(entries <= (1u64 << 31), "kron result too large ({} entries)", entries);
        let mut m = BitMatrix::zeros(rows, cols);
        for i in 0..self.rows {
            for j in self.row(i).iter_ones() {
                for p in 0..other.rows {
                    for q in other.row(p).iter_ones() {
                        m.set(i * other.rows + p, j * other.cols + q, true);
                    }
                }
            }
        }
        m
    }

    /// Copies the selected columns into a fresh matrix, in the given order.
    pub fn restrict_columns(&self, cols: &[usize]) -> BitMatrix {
        let mut m = BitMatrix::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (k, &c) in cols.iter().enumerate() {
                if self.get(r, c) {
                    m.set(r, k, true);
                }
            }
        }
        m
    }

    pub fn vstack(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, other.cols);
        let mut m = self.clone();
        m.data.extend_from_slice(&other.data);
        m.rows += other.rows;
        m
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in 0..self.rows {
            writeln!(f, "{:?}", self.row(r))?;
        }
        Ok(())
    }
}

trait SwapChunks {
    fn swap_chunks(&mut self, a: usize, b: usize, chunk: usize);
}

impl SwapChunks for Vec<u64> {
    fn swap_chunks(&mut self, a: usize, b: usize, chunk: usize) {
        if a == b {
            return;
        }
        for k in 0..chunk {
            self.swap(a * chunk + k, b * chunk + k);
        }
    }
}

/// Incremental column-space eliminator over packed words of fixed width.
///
/// Feed column vectors one at a time; tracks rank via pivot bits. Used by the
/// erasure decoder where columns are gathered per erased bit.
pub struct ColumnEliminator {
    width_bits: usize,
    words: usize,
    /// pivot bit -> reduced basis vector
    pivots: Vec<(usize, Vec<u64>)>,
}

impl ColumnEliminator {
    pub fn new(width_bits: usize) -> Self {
        ColumnEliminator { width_bits, words: words_for(width_bits), pivots: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Reduces `v` in place against the current basis; returns the lowest set
    /// bit if a nonzero residue remains.
    pub fn reduce(&self, v: &mut [u64]) -> Option<usize> {
        debug_assert_eq!(v.len(), self.words);
        for (pb, pv) in &self.pivots {
            if (v[pb / WORD_BITS] >> (pb % WORD_BITS)) & 1 == 1 {
                for (d, s) in v.iter_mut().zip(pv.iter()) {
                    *d ^= *s;
                }
            }
        }
        lowest_bit(v)
    }

    /// Reduces and inserts if independent; returns true if rank grew.
    pub fn insert(&mut self, mut v: Vec<u64>) -> bool {
        match self.reduce(&mut v) {
            Some(b) => {
                // keep pivot list sorted by pivot bit for deterministic reduction
                let pos = self.pivots.partition_point(|(pb, _)| *pb < b);
                self.pivots.insert(pos, (b, v));
                true
            }
            None => false,
        }
    }

    pub fn width_bits(&self) -> usize {
        self.width_bits
    }
}

pub fn lowest_bit(v: &[u64]) -> Option<usize> {
    for (wi, &w) in v.iter().enumerate() {
        if w != 0 {
            return Some(wi * WORD_BITS + w.trailing_zeros() as usize);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h713() -> BitMatrix {
        BitMatrix::from_rows(&[
            BitVec::from_ones(7, &[0, 1, 2, 3]),
            BitVec::from_ones(7, &[2, 3, 4, 5]),
            BitVec::from_ones(7, &[1, 3, 5, 6]),
        ])
    }

    fn l713() -> BitVec {
        BitVec::from_ones(7, &[0, 1, 6])
    }

    #[test]
    fn rank_identity() {
        assert_eq!(BitMatrix::identity(3).rank(), 3);
    }

    #[test]
    fn rank_h713() {
        assert_eq!(h713().rank(), 3);
    }

    #[test]
    fn rank_zero() {
        assert_eq!(BitMatrix::zeros(4, 4).rank(), 0);
    }

    #[test]
    fn solve_identity() {
        let m = BitMatrix::identity(3);
        let t = BitVec::from_ones(3, &[0, 2]);
        let x = m.solve_in_span(&t).unwrap();
        assert_eq!(x.ones(), vec![0, 2]);
    }

    #[test]
    fn solve_logical_not_in_stabilizer_span() {
        // Exhaustive cross-check: all 8 row combinations of H_[7,1,3].
        let m = h713();
        let target = l713();
        for mask in 0u32..8 {
            let mut acc = BitVec::zeros(7);
            for r in 0..3 {
                if (mask >> r) & 1 == 1 {
                    acc.xor_in(&m.row(r));
                }
            }
            assert_ne!(acc, target, "logical unexpectedly in span");
        }
        assert!(m.solve_in_span(&target).is_none());
    }

    #[test]
    fn solve_zero() {
        let m = BitMatrix::zeros(2, 3);
        let x = m.solve_in_span(&BitVec::zeros(3)).unwrap();
        assert!(x.is_zero());
    }

    #[test]
    fn kernel_identity_empty() {
        assert_eq!(BitMatrix::identity(3).kernel().rows(), 0);
    }

    #[test]
    fn kernel_zero_full() {
        assert_eq!(BitMatrix::zeros(2, 4).kernel().rows(), 4);
    }

    #[test]
    fn kernel_h713() {
        let m = h713();
        let k = m.kernel();
        assert_eq!(k.rows(), 4);
        for r in 0..k.rows() {
            let x = k.row(r);
            for mr in 0..m.rows() {
                assert!(!m.row(mr).dot(&x), "kernel row not annihilated");
            }
        }
        assert_eq!(k.rank(), 4);
    }

    #[test]
    fn kron_dims() {
        let a = h713();
        let l = BitMatrix::from_rows(&[l713()]);
        let k = a.kron(&l);
        assert_eq!((k.rows(), k.cols()), (3, 49));
        let one = BitMatrix::identity(1);
        assert_eq!(one.kron(&a), a);
    }

    proptest! {
        #[test]
        fn kron_rank_multiplicative(a_bits in prop::collection::vec(any::<bool>(), 15),
                                    b_bits in prop::collection::vec(any::<bool>(), 15)) {
            let mk = |bits: &[bool]| {
                let mut m = BitMatrix::zeros(3, 5);
                for (i, &b) in bits.iter().enumerate() {
                    if b { m.set(i / 5, i % 5, true); }
                }
                m
            };
            let a = mk(&a_bits);
            let b = mk(&b_bits);
            prop_assert_eq!(a.kron(&b).rank(), a.rank() * b.rank());
        }

        #[test]
        fn kron_associative(a_bits in prop::collection::vec(any::<bool>(), 6),
                            b_bits in prop::collection::vec(any::<bool>(), 6),
                            c_bits in prop::collection::vec(any::<bool>(), 6)) {
            let mk = |bits: &[bool]| {
                let mut m = BitMatrix::zeros(2, 3);
                for (i, &b) in bits.iter().enumerate() {
                    if b { m.set(i / 3, i % 3, true); }
                }
                m
            };
            let (a, b, c) = (mk(&a_bits), mk(&b_bits), mk(&c_bits));
            prop_assert_eq!(a.kron(&b).kron(&c), a.kron(&b.kron(&c)));
        }

        #[test]
        fn rank_plus_kernel(bits in prop::collection::vec(any::<bool>(), 48)) {
            let mut m = BitMatrix::zeros(6, 8);
            for (i, &b) in bits.iter().enumerate() {
                if b { m.set(i / 8, i % 8, true); }
            }
            prop_assert_eq!(m.rank() + m.kernel().rows(), m.cols());
        }

        #[test]
        fn solve_membership(bits in prop::collection::vec(any::<bool>(), 42), mask in any::<u32>()) {
            let mut m = BitMatrix::zeros(6, 7);
            for (i, &b) in bits.iter().enumerate() {
                if b { m.set(i / 7, i % 7, true); }
            }
            let mut t = BitVec::zeros(7);
            for r in 0..6 {
                if (mask >> r) & 1 == 1 {
                    t.xor_in(&m.row(r));
                }
            }
            let x = m.solve_in_span(&t).expect("in-span target must solve");
            let mut check = BitVec::zeros(7);
            for r in x.iter_ones() {
                check.xor_in(&m.row(r));
            }
            prop_assert_eq!(check, t);
        }
    }
}
