//! Words over `{1..d}`, the truncated full Fock space `Γ_{≤N}(ℂ^d)`, creation
//! operators and constrained subspaces `Γ_J`.
//!
//! Basis order is graded lexicographic: all words of length 0, then length 1,
//! and so on, each level sorted lexicographically with `1 < 2 < … < d`. The
//! empty word has index 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};
use crate::numkit::{eye, largest_coinvariant_in, null_space, zeros, CMat, SubspaceBasis, C64, ONE};
use crate::tuples::OperatorTuple;

/// A word `α = α_1 α_2 … α_n` with letters in `1..=d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: &[u8]) -> Self {
        Word(letters.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    /// `iα`
    pub fn prepend(&self, i: u8) -> Word {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(i);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// `βα` (self first).
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// True when no two adjacent letters coincide.
    pub fn has_no_repeated_adjacent(&self) -> bool {
        self.0.windows(2).all(|w| w[0] != w[1])
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

impl FromStr for Word {
    type Err = FockError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "0" || s.is_empty() {
            return Ok(Word::empty());
        }
        let letters = s
            .split('.')
            .map(|p| match p.parse::<u8>() {
                Ok(l) if l >= 1 => Ok(l),
                _ => Err(FockError::Parse(format!("bad word letter {p:?} in {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Word(letters))
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of words of length at most `n` over `d` letters.
pub fn fock_dim(d: usize, n: usize) -> usize {
    (0..=n).map(|k| d.pow(k as u32)).sum()
}

/// Index bookkeeping for `Γ_{≤N}(ℂ^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFock {
    pub d: usize,
    pub n: usize,
    offsets: Vec<usize>,
}

impl TruncatedFock {
    pub fn new(d: usize, n: usize) -> Self {
        assert!(d >= 1, "need at least one letter");
        let mut offsets = Vec::with_capacity(n + 2);
        let mut acc = 0;
        for k in 0..=n + 1 {
            offsets.push(acc);
            acc += d.pow(k as u32);
        }
        TruncatedFock { d, n, offsets }
    }

    pub fn total_dim(&self) -> usize {
        self.offsets[self.n + 1]
    }

    /// Number of words of length exactly `k`.
    pub fn level_size(&self, k: usize) -> usize {
        self.d.pow(k as u32)
    }

    /// Index range of level `k`.
    pub fn level_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Number of basis words of length `< k`.
    pub fn dim_below(&self, k: usize) -> usize {
        self.offsets[k.min(self.n + 1)]
    }

    pub fn index(&self, w: &Word) -> usize {
        assert!(w.len() <= self.n, "word {w} longer than truncation {}", self.n);
        self.offsets[w.len()] + lex_index(w, self.d)
    }

    pub fn word(&self, idx: usize) -> Word {
        assert!(idx < self.total_dim());
        let k = self.offsets.partition_point(|&o| o <= idx) - 1;
        let mut rem = idx - self.offsets[k];
        let mut letters = vec![0u8; k];
        for pos in (0..k).rev() {
            letters[pos] = (rem % self.d) as u8 + 1;
            rem /= self.d;
        }
        Word(letters)
    }

    pub fn length_of(&self, idx: usize) -> usize {
        self.offsets.partition_point(|&o| o <= idx) - 1
    }

    /// Index of `iα` given the index of `α`, or `None` past the truncation.
    pub fn prepend_index(&self, i: usize, idx: usize) -> Option<usize> {
        let k = self.length_of(idx);
        if k >= self.n {
            return None;
        }
        let within = idx - self.offsets[k];
        Some(self.offsets[k + 1] + (i - 1) * self.d.pow(k as u32) + within)
    }

    /// Index of `α` given the index of `iα` (the first letter is dropped).
    /// Returns `(i, index of α)`; `None` for the empty word.
    pub fn split_first(&self, idx: usize) -> Option<(usize, usize)> {
        let k = self.length_of(idx);
        if k == 0 {
            return None;
        }
        let within = idx - self.offsets[k];
        let block = self.d.pow((k - 1) as u32);
        Some((within / block + 1, self.offsets[k - 1] + within % block))
    }

    pub fn words(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.total_dim()).map(|i| self.word(i))
    }

    /// Projection onto words of length `< k`, tensored with `1_r`.
    pub fn level_projector(&self, k: usize, r: usize) -> CMat {
        let n = self.total_dim() * r;
        let mut p = zeros(n, n);
        for i in 0..self.dim_below(k) * r {
            p[(i, i)] = ONE;
        }
        p
    }
}

/// Lexicographic position of `w` among words of its length.
pub fn lex_index(w: &Word, d: usize) -> usize {
    w.0.iter().fold(0, |acc, &l| acc * d + (l as usize - 1))
}

/// Creation operators `L_i e_α = e_{iα}`, with the top level sent to zero.
pub fn creation_ops(f: &TruncatedFock) -> OperatorTuple {
    let n = f.total_dim();
    let mats = (1..=f.d)
        .map(|i| {
            let mut m = zeros(n, n);
            for idx in 0..n {
                if let Some(to) = f.prepend_index(i, idx) {
                    m[(to, idx)] = ONE;
                }
            }
            m
        })
        .collect();
    OperatorTuple::new(mats).expect("creation operators are square")
}

/// A noncommutative polynomial `Σ c_w z_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(C64, Word)>,
}

impl Polynomial {
    pub fn new(terms: Vec<(C64, Word)>) -> Result<Self> {
        if terms.iter().all(|(c, _)| c.norm() == 0.0) {
            return Err(FockError::Parse("polynomial has no nonzero term".into()));
        }
        Ok(Polynomial { terms })
    }

    pub fn max_letter(&self) -> u8 {
        self.terms
            .iter()
            .flat_map(|(_, w)| w.0.iter().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(_, w)| w.len()).max().unwrap_or(0)
    }
}

/// A family `J` of polynomial constraints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    pub polynomials: Vec<Polynomial>,
}

impl ConstraintSet {
    pub fn empty() -> Self {
        ConstraintSet::default()
    }

    /// `z_i z_j − z_j z_i` for all `i < j`.
    pub fn commutators(d: usize) -> Self {
        let mut polynomials = Vec::new();
        for i in 1..=d as u8 {
            for j in i + 1..=d as u8 {
                polynomials.push(Polynomial {
                    terms: vec![(ONE, Word::new(&[i, j])), (-ONE, Word::new(&[j, i]))],
                });
            }
        }
        ConstraintSet { polynomials }
    }

    pub fn is_empty(&self) -> bool {
        self.polynomials.is_empty()
    }
}

/// `T_α = T_{α_1} ⋯ T_{α_n}`.
pub fn word_power(t: &OperatorTuple, w: &Word) -> CMat {
    let mut out = eye(t.dim());
    for &l in w.letters() {
        out *= &t.mats[l as usize - 1];
    }
    out
}

/// `p(T) = Σ c_w T_w` with `T_∅ = 1`.
pub fn eval_poly(p: &Polynomial, t: &OperatorTuple) -> Result<CMat> {
    if p.max_letter() as usize > t.d() {
        return Err(FockError::DimensionMismatch(format!(
            "polynomial uses letter {} but the tuple has {} operators",
            p.max_letter(),
            t.d()
        )));
    }
    let mut out = zeros(t.dim(), t.dim());
    for (coeff, w) in &p.terms {
        out += word_power(t, w) * *coeff;
    }
    Ok(out)
}

/// Largest worst-case operator residual `max_η ‖p_η(T)‖`.
pub fn constraint_residual(t: &OperatorTuple, j: &ConstraintSet) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in &j.polynomials {
        worst = worst.max(crate::numkit::op_norm(&eval_poly(p, t)?));
    }
    Ok(worst)
}

/// Largest subspace `M` with `T_i^* M ⊆ M` and `p_η(T)^* M = 0`.
pub fn maximal_constrained_piece(
    t: &OperatorTuple,
    j: &ConstraintSet,
    rank_tol: f64,
) -> Result<SubspaceBasis> {
    let n = t.dim();
    let start = if j.is_empty() {
        SubspaceBasis::full(n)
    } else {
        let blocks = j
            .polynomials
            .iter()
            .map(|p| eval_poly(p, t).map(|m| m.adjoint()))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&CMat> = blocks.iter().collect();
        let stacked = crate::numkit::vstack(&refs);
        SubspaceBasis::from_orthonormal(null_space(&stacked, rank_tol)?)
    };
    let adjoints: Vec<CMat> = t.mats.iter().map(|m| m.adjoint()).collect();
    largest_coinvariant_in(&start, &adjoints, rank_tol)
}

/// `Γ_J ∩ Γ_{≤N}`: the maximal constrained piece of the creation operators.
///
/// Homogeneous constraints give a graded piece, which is built level by
/// level; other constraint sets go through [`maximal_constrained_piece`].
pub fn constrained_fock(f: &TruncatedFock, j: &ConstraintSet, rank_tol: f64) -> Result<SubspaceBasis> {
    if j.polynomials.iter().all(is_homogeneous) {
        constrained_fock_graded(f, j, rank_tol)
    } else {
        maximal_constrained_piece(&creation_ops(f), j, rank_tol)
    }
}

fn is_homogeneous(p: &Polynomial) -> bool {
    let deg = p.degree();
    deg > 0 && p.terms.iter().all(|(c, w)| w.len() == deg || c.norm() == 0.0)
}

/// Level `k` of `Γ_J ∩ Γ_{≤N}` is the common kernel of the constraint
/// adjoints on `(ℂ^d)^{⊗k}` intersected with the vectors that every `L_i^*`
/// maps into level `k − 1` of the piece.
fn constrained_fock_graded(f: &TruncatedFock, j: &ConstraintSet, rank_tol: f64) -> Result<SubspaceBasis> {
    let d = f.d;
    let mut levels: Vec<CMat> = Vec::with_capacity(f.n + 1);
    for k in 0..=f.n {
        let size = f.level_size(k);
        let start = f.level_range(k).start;
        let mut rows: Vec<CMat> = Vec::new();
        if k > 0 {
            let prev = &levels[k - 1];
            let below = f.level_size(k - 1);
            let comp = eye(below) - prev * prev.adjoint();
            for i in 1..=d as u8 {
                let mut li = zeros(below, size);
                for col in 0..size {
                    let w = f.word(start + col);
                    if w.0[0] == i {
                        let rest = Word(w.0[1..].to_vec());
                        li[(f.index(&rest) - f.level_range(k - 1).start, col)] = ONE;
                    }
                }
                rows.push(&comp * li);
            }
        }
        for p in &j.polynomials {
            let deg = p.degree();
            if deg > k {
                continue;
            }
            let lower = f.level_range(k - deg).start;
            let mut m = zeros(f.level_size(k - deg), size);
            for col in 0..size {
                let w = f.word(start + col);
                for (c, u) in &p.terms {
                    if w.0.starts_with(&u.0) {
                        let rest = Word(w.0[deg..].to_vec());
                        m[(f.index(&rest) - lower, col)] += c.conj();
                    }
                }
            }
            rows.push(m);
        }
        let basis = if rows.is_empty() {
            eye(size)
        } else {
            let refs: Vec<&CMat> = rows.iter().collect();
            null_space(&crate::numkit::vstack(&refs), rank_tol)?
        };
        levels.push(basis);
    }
    let total: usize = levels.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(f.total_dim(), total);
    let mut col = 0;
    for (k, b) in levels.iter().enumerate() {
        out.view_mut((f.level_range(k).start, col), (b.nrows(), b.ncols()))
            .copy_from(b);
        col += b.ncols();
    }
    Ok(SubspaceBasis::from_orthonormal(out))
}

/// Dimension of a graded subspace on each Fock level, read off as the trace
/// of the projector's diagonal level blocks.
pub fn level_dims(f: &TruncatedFock, s: &SubspaceBasis) -> Vec<usize> {
    let p = s.projector();
    (0..=f.n)
        .map(|k| {
            let tr: f64 = f.level_range(k).map(|i| p[(i, i)].re).sum();
            tr.round() as usize
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{fro_norm, max_abs};

    #[test]
    fn word_roundtrip_and_order() {
        for d in 1..=4 {
            for n in 0..=(if d == 1 { 8 } else { 8 - d }) {
                let f = TruncatedFock::new(d, n);
                assert_eq!(f.total_dim(), fock_dim(d, n));
                let mut prev: Option<Word> = None;
                for i in 0..f.total_dim() {
                    let w = f.word(i);
                    assert_eq!(f.index(&w), i);
                    if let Some(p) = prev {
                        assert!(p.len() < w.len() || (p.len() == w.len() && p < w));
                    }
                    prev = Some(w);
                }
            }
        }
        assert_eq!(TruncatedFock::new(3, 2).index(&Word::empty()), 0);
    }

    #[test]
    fn word_text_format() {
        assert_eq!(Word::empty().to_string(), "0");
        assert_eq!(Word::new(&[1, 2, 1]).to_string(), "1.2.1");
        assert_eq!("1.2.1".parse::<Word>().unwrap(), Word::new(&[1, 2, 1]));
        assert_eq!("0".parse::<Word>().unwrap(), Word::empty());
        assert!("1.x".parse::<Word>().is_err());
    }

    #[test]
    fn prepend_and_split() {
        let f = TruncatedFock::new(3, 3);
        for idx in 0..f.total_dim() {
            let w = f.word(idx);
            for i in 1..=3u8 {
                match f.prepend_index(i as usize, idx) {
                    Some(to) => assert_eq!(f.word(to), w.prepend(i)),
                    None => assert_eq!(w.len(), 3),
                }
            }
            if let Some((i, rest)) = f.split_first(idx) {
                assert_eq!(f.word(rest).prepend(i as u8), w);
            }
        }
    }

    #[test]
    fn creation_ops_examples() {
        let l = creation_ops(&TruncatedFock::new(1, 2));
        let shift = crate::numkit::from_real_rows(3, 3, &[0., 0., 0., 1., 0., 0., 0., 1., 0.]);
        assert_eq!(l.mats[0], shift);

        let f = TruncatedFock::new(2, 1);
        let l = creation_ops(&f);
        assert_eq!(l.mats[0][(f.index(&Word::new(&[1])), 0)], ONE);
        let col = l.mats[0].column(f.index(&Word::new(&[2])));
        assert_eq!(col.iter().map(|z| z.norm()).sum::<f64>(), 0.0);

        for n in 0..5 {
            let f = TruncatedFock::new(2, n);
            let l = creation_ops(&f);
            let defect = eye(f.total_dim()) - l.row_gram();
            let mut vac = zeros(f.total_dim(), f.total_dim());
            vac[(0, 0)] = ONE;
            assert_eq!(defect, vac);
        }
    }

    #[test]
    fn creation_ops_are_isometric_below_top() {
        let f = TruncatedFock::new(3, 3);
        let l = creation_ops(&f);
        let low = f.dim_below(3);
        for i in 0..3 {
            for j in 0..3 {
                let g = l.mats[i].adjoint() * &l.mats[j];
                let expect = if i == j { eye(low) } else { zeros(low, low) };
                assert_eq!(g.view((0, 0), (low, low)).into_owned(), expect);
            }
        }
    }

    #[test]
    fn eval_poly_examples() {
        let f = TruncatedFock::new(2, 2);
        let l = creation_ops(&f);
        let comm = &ConstraintSet::commutators(2).polynomials[0];
        let v = eval_poly(comm, &l).unwrap();
        let e12 = f.index(&Word::new(&[1, 2]));
        let e21 = f.index(&Word::new(&[2, 1]));
        // L_1 L_2 e_0 = e_{12}, L_2 L_1 e_0 = e_{21}
        assert_eq!(v[(e12, 0)], ONE);
        assert_eq!(v[(e21, 0)], -ONE);
        assert_eq!(max_abs(&v), 1.0);

        let z1 = Polynomial::new(vec![(ONE, Word::new(&[1]))]).unwrap();
        assert_eq!(eval_poly(&z1, &l).unwrap(), l.mats[0]);

        let t = OperatorTuple::new(vec![eye(2) * C64::new(0.3, 0.0), eye(2) * C64::new(0.2, 0.0)]).unwrap();
        assert!(fro_norm(&eval_poly(comm, &t).unwrap()) < 1e-15);
    }

    #[test]
    fn symmetric_fock_level_dims() {
        for d in 1..=3 {
            let n = if d == 3 { 4 } else { 6 };
            let f = TruncatedFock::new(d, n);
            let s = constrained_fock(&f, &ConstraintSet::commutators(d), 1e-9).unwrap();
            let dims = level_dims(&f, &s);
            for (k, &dk) in dims.iter().enumerate() {
                assert_eq!(dk, binomial(k + d - 1, k), "d={d} level {k}");
            }
        }
        let f = TruncatedFock::new(2, 3);
        assert_eq!(constrained_fock(&f, &ConstraintSet::empty(), 1e-9).unwrap().dim(), 15);
    }

    #[test]
    fn graded_route_matches_generic() {
        for (d, n) in [(2, 4), (3, 3)] {
            let f = TruncatedFock::new(d, n);
            let j = ConstraintSet::commutators(d);
            let graded = constrained_fock(&f, &j, 1e-9).unwrap();
            let generic = maximal_constrained_piece(&creation_ops(&f), &j, 1e-9).unwrap();
            assert_eq!(graded.dim(), generic.dim());
            assert!(graded.containment_residual(&generic) < 1e-10);
        }
    }

    #[test]
    fn constrained_piece_is_constrained() {
        let f = TruncatedFock::new(2, 4);
        let l = creation_ops(&f);
        let j = ConstraintSet::commutators(2);
        let s = maximal_constrained_piece(&l, &j, 1e-9).unwrap();
        let comm = eval_poly(&j.polynomials[0], &l).unwrap();
        assert!(max_abs(&(comm.adjoint() * &s.basis)) < 1e-10);
        let comp = s.complement_projector();
        for m in &l.mats {
            assert!(max_abs(&(&comp * m.adjoint() * &s.basis)) < 1e-10);
        }
    }

    fn binomial(n: usize, k: usize) -> usize {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }
}
