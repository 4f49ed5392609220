//! Transition matrices, stationary vectors, inverse chains, and the
//! finite-depth splitting, separability and rigidity searches.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ifs::{advance, Ifs};
use crate::intervals::{fmt17, Interval};
use crate::symbolic::Word;

const ROW_TOL: f64 = 1e-12;

/// Row-stochastic `k × k` matrix, indexed from 0 internally.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidAlphabet(0));
        }
        if entries.len() != k * k {
            return Err(Error::Shape(format!(
                "{} entries for a {k}x{k} matrix",
                entries.len()
            )));
        }
        for (i, row) in entries.chunks(k).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::Structure(format!("row {} has a negative entry", i + 1)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::Structure(format!("row {} sums to {sum}", i + 1)));
            }
        }
        Ok(TransitionMatrix { k, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("matrix is not square".into()));
        }
        Self::new(k, rows.concat())
    }

    /// Rank-one matrix with every row equal to `weights`: independent
    /// symbols drawn with those probabilities.
    pub fn bernoulli(weights: &[f64]) -> Result<Self> {
        let k = weights.len();
        Self::new(k, weights.repeat(k))
    }

    pub fn identity(k: usize) -> Result<Self> {
        let mut e = vec![0.0; k * k];
        for i in 0..k {
            e[i * k + i] = 1.0;
        }
        Self::new(k, e)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// Entry `p_ij` with 0-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    pub fn transpose(&self) -> Vec<f64> {
        let k = self.k;
        (0..k * k).map(|n| self.get(n % k, n / k)).collect()
    }

    /// Row vector times matrix, `v P`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(self.row(i)) {
                *o += vi * p;
            }
        }
        out
    }

    fn positive_graph(&self) -> Vec<Vec<bool>> {
        (0..self.k)
            .map(|i| self.row(i).iter().map(|&p| p > 0.0).collect())
            .collect()
    }

    /// Strong connectivity of the digraph `i -> j` when `p_ij > 0`.
    pub fn is_irreducible(&self) -> bool {
        let g = self.positive_graph();
        let reach = |forward: bool| {
            let mut seen = vec![false; self.k];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..self.k {
                    let edge = if forward { g[i][j] } else { g[j][i] };
                    if edge && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Some power is strictly positive; by Wielandt's bound it suffices to
    /// look at `P^((k-1)^2 + 1)`.
    pub fn is_primitive(&self) -> bool {
        let k = self.k;
        let g = self.positive_graph();
        let exponent = (k - 1) * (k - 1) + 1;
        let mut power = g.clone();
        for _ in 1..exponent {
            power = bool_mul(&power, &g);
        }
        power.iter().all(|row| row.iter().all(|&b| b))
    }

    /// Power iteration of the uniform vector against the lazy chain
    /// `(P + I) / 2`, which has the same stationary vector and converges
    /// for periodic `P` as well.
    pub fn stationary_vector(&self, tol: f64, max_iter: usize) -> Result<StationaryVector> {
        if !self.is_irreducible() {
            return Err(Error::Structure("matrix is not irreducible".into()));
        }
        let k = self.k;
        let mut v = vec![1.0 / k as f64; k];
        let mut change = f64::INFINITY;
        for _ in 0..max_iter {
            let pv = self.left_mul(&v);
            let mut next: Vec<f64> = v.iter().zip(&pv).map(|(a, b)| 0.5 * (a + b)).collect();
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= total);
            change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = next;
            if change <= tol {
                return Ok(StationaryVector(v));
            }
        }
        Err(Error::Convergence {
            iterations: max_iter,
            last_change: change,
        })
    }

    /// Time reversal `q_ij = p_j p_ji / p_i` with respect to `pbar`.
    ///
    /// Rows are renormalized to absorb the residual of an approximate
    /// stationary vector.
    pub fn inverse(&self, pbar: &[f64]) -> Result<TransitionMatrix> {
        let k = self.k;
        if pbar.len() != k {
            return Err(Error::Shape(format!("pbar has {} entries, chain has {k}", pbar.len())));
        }
        if let Some(i) = pbar.iter().position(|&p| !(p > 0.0)) {
            return Err(Error::Degeneracy(format!(
                "stationary component {} is not positive",
                i + 1
            )));
        }
        let mut q = vec![0.0; k * k];
        for i in 0..k {
            let row = &mut q[i * k..(i + 1) * k];
            for (j, qij) in row.iter_mut().enumerate() {
                *qij = pbar[j] * self.get(j, i) / pbar[i];
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        TransitionMatrix::new(k, q)
    }

    /// One row per line, entries separated by commas.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.k {
            let row: Vec<String> = self.row(i).iter().map(|&p| fmt17(p)).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Parses rows of comma-separated numbers; entries may be fractions
    /// such as `1/3`. Blank lines and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| parse_ratio(f.trim()))
                .collect::<std::result::Result<Vec<f64>, String>>()
                .map_err(|msg| Error::Parse { line: n + 1, msg })?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

/// Parses `x` or `a/b`.
pub fn parse_ratio(s: &str) -> std::result::Result<f64, String> {
    let bad = |e: &dyn std::fmt::Display| format!("bad number `{s}`: {e}");
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| bad(&e))?;
            let b: f64 = b.trim().parse().map_err(|e| bad(&e))?;
            if b == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            Ok(a / b)
        }
        None => s.parse().map_err(|e| bad(&e)),
    }
}

fn bool_mul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let k = a.len();
    (0..k)
        .map(|i| (0..k).map(|j| (0..k).any(|m| a[i][m] && b[m][j])).collect())
        .collect()
}

/// Probability vector fixed by a transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryVector(pub Vec<f64>);

impl StationaryVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for StationaryVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Checks `T_i(J) ⊂ J` and injectivity of every `T_i` on `J`.
pub fn check_invariant_injective(ifs: &Ifs, j: Interval) -> Result<()> {
    let d = ifs.domain();
    if !(j.lo < j.hi) || !d.contains_interval(&j) {
        return Err(Error::Precondition(format!(
            "J = [{}, {}] must be a non-trivial subinterval of the domain",
            j.lo, j.hi
        )));
    }
    for (i, m) in ifs.maps().iter().enumerate() {
        let img = m.image(j);
        if img.lo < j.lo - 1e-12 || img.hi > j.hi + 1e-12 {
            return Err(Error::Precondition(format!(
                "T_{}(J) = [{}, {}] leaves J",
                i + 1,
                img.lo,
                img.hi
            )));
        }
        if !m.is_injective_on(j) {
            return Err(Error::Precondition(format!("T_{} is not injective on J", i + 1)));
        }
    }
    Ok(())
}

struct Candidate {
    symbols: Vec<usize>,
    image: Interval,
}

/// Words of length `1..=max_depth` in length-lexicographic order, with their
/// images, filtered by `keep`.
fn candidates<F>(ifs: &Ifs, max_depth: usize, mut keep: F) -> Vec<Vec<Candidate>>
where
    F: FnMut(&[usize], &Interval) -> bool,
{
    let k = ifs.k();
    let d = ifs.domain();
    let mut by_len = Vec::with_capacity(max_depth);
    for len in 1..=max_depth {
        let mut level = Vec::new();
        let mut digits = vec![1usize; len];
        loop {
            let image = digits
                .iter()
                .rev()
                .fold(d, |iv, &s| ifs.maps()[s - 1].image(iv));
            if keep(&digits, &image) {
                level.push(Candidate {
                    symbols: digits.clone(),
                    image,
                });
            }
            if !advance(&mut digits, k) {
                break;
            }
        }
        by_len.push(level);
    }
    by_len
}

/// Lexicographically first pair `(u, v)`, `u < v`, ordered by the length of
/// the longer word, then `u`, then `v`.
fn first_pair<P>(ifs: &Ifs, levels: &[Vec<Candidate>], accept: P) -> Result<Option<(Word, Word)>>
where
    P: Fn(&Candidate, &Candidate) -> bool,
{
    let k = ifs.k();
    for len in 0..levels.len() {
        let longest = &levels[len];
        for (ul, level) in levels[..=len].iter().enumerate() {
            for (ui, u) in level.iter().enumerate() {
                let start = if ul == len { ui + 1 } else { 0 };
                if let Some(v) = longest[start.min(longest.len())..].iter().find(|v| accept(u, v)) {
                    return Ok(Some((
                        Word::new(k, u.symbols.clone())?,
                        Word::new(k, v.symbols.clone())?,
                    )));
                }
            }
        }
    }
    Ok(None)
}

fn admissible(p: &TransitionMatrix, pbar: &[f64], symbols: &[usize]) -> bool {
    pbar[symbols[0] - 1] > 0.0 && symbols.windows(2).all(|w| p.get(w[0] - 1, w[1] - 1) > 0.0)
}

fn check_chain(ifs: &Ifs, p: &TransitionMatrix, pbar: &[f64]) -> Result<()> {
    if p.dim() != ifs.k() || pbar.len() != ifs.k() {
        return Err(Error::Shape(format!(
            "{}-state chain and {} entries of pbar for an IFS with {} maps",
            p.dim(),
            pbar.len(),
            ifs.k()
        )));
    }
    Ok(())
}

/// Searches admissible words with a common first symbol whose images are
/// disjoint and lie in `J`: a witness that the Markov measure splits the
/// IFS in `J`.
pub fn split_check(
    ifs: &Ifs,
    p: &TransitionMatrix,
    pbar: &[f64],
    j: Interval,
    max_depth: usize,
) -> Result<Option<(Word, Word)>> {
    check_chain(ifs, p, pbar)?;
    check_invariant_injective(ifs, j)?;
    let levels = candidates(ifs, max_depth, |w, img| {
        admissible(p, pbar, w) && j.contains_interval(img)
    });
    first_pair(ifs, &levels, |u, v| {
        u.symbols[0] == v.symbols[0] && u.image.is_disjoint(&v.image)
    })
}

/// Searches any two words with disjoint images inside `J`.
pub fn separability_check(ifs: &Ifs, j: Interval, max_depth: usize) -> Result<Option<(Word, Word)>> {
    check_invariant_injective(ifs, j)?;
    let levels = candidates(ifs, max_depth, |_, img| j.contains_interval(img));
    first_pair(ifs, &levels, |u, v| u.image.is_disjoint(&v.image))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RigidityVerdict {
    /// Two admissible words from the same symbol with disjoint images of
    /// diameter `<= tol`: the coding map takes two distinct values there.
    SplitOnSymbol(Word, Word),
    NoneFound,
}

pub fn rigidity_check(
    ifs: &Ifs,
    p: &TransitionMatrix,
    pbar: &[f64],
    j: Interval,
    symbol: usize,
    tol: f64,
    max_depth: usize,
) -> Result<RigidityVerdict> {
    check_chain(ifs, p, pbar)?;
    if symbol == 0 || symbol > ifs.k() {
        return Err(Error::SymbolOutOfRange {
            symbol,
            k: ifs.k(),
        });
    }
    check_invariant_injective(ifs, j)?;
    let levels = candidates(ifs, max_depth, |w, img| {
        w[0] == symbol && img.width() <= tol && admissible(p, pbar, w) && j.contains_interval(img)
    });
    Ok(match first_pair(ifs, &levels, |u, v| u.image.is_disjoint(&v.image))? {
        Some((u, v)) => RigidityVerdict::SplitOnSymbol(u, v),
        None => RigidityVerdict::NoneFound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn cyclic3() -> TransitionMatrix {
        TransitionMatrix::new(3, vec![0., 1., 0., 0., 0., 1., 1., 0., 0.]).unwrap()
    }

    fn w(k: usize, s: &[usize]) -> Word {
        Word::new(k, s.to_vec()).unwrap()
    }

    const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    #[test]
    fn validation() {
        assert!(TransitionMatrix::new(2, vec![0.5, 0.5, 0.2, 0.2]).is_err());
        assert!(TransitionMatrix::new(2, vec![1.5, -0.5, 0.5, 0.5]).is_err());
        assert!(TransitionMatrix::new(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn stationary_examples() {
        let pi = cyclic3().stationary_vector(1e-14, 100_000).unwrap();
        assert!(pi.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));

        let rows = TransitionMatrix::bernoulli(&[0.2, 0.3, 0.5]).unwrap();
        let pi = rows.stationary_vector(1e-14, 100_000).unwrap();
        for (a, b) in pi.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }

        let p = TransitionMatrix::new(2, vec![0.0, 1.0, 0.5, 0.5]).unwrap();
        let pi = p.stationary_vector(1e-14, 100_000).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-12 && (pi[1] - 2.0 / 3.0).abs() < 1e-12);

        assert!(matches!(
            TransitionMatrix::identity(2).unwrap().stationary_vector(1e-12, 10),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn structure_flags() {
        let id = TransitionMatrix::identity(3).unwrap();
        assert!(!id.is_irreducible());
        assert!(cyclic3().is_irreducible());
        assert!(!cyclic3().is_primitive());
        let pos = TransitionMatrix::new(2, vec![0.3, 0.7, 0.6, 0.4]).unwrap();
        assert!(pos.is_primitive());
        assert!(TransitionMatrix::identity(1).unwrap().is_primitive());
    }

    #[test]
    fn inverse_examples() {
        let third = [1.0 / 3.0; 3];
        let q = cyclic3().inverse(&third).unwrap();
        let t = cyclic3().transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((q.get(i, j) - t[i * 3 + j]).abs() < 1e-15);
            }
        }
        let sym = TransitionMatrix::new(2, vec![0.3, 0.7, 0.7, 0.3]).unwrap();
        assert_eq!(sym.inverse(&[0.5, 0.5]).unwrap(), sym);

        let p = TransitionMatrix::new(2, vec![0.0, 1.0, 0.5, 0.5]).unwrap();
        let q = p.inverse(&[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        for (a, b) in q.entries.iter().zip(&p.entries) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(p.inverse(&[0.0, 1.0]), Err(Error::Degeneracy(_))));
    }

    #[test]
    fn csv_with_fractions() {
        let p = TransitionMatrix::from_csv("# cyclic\n0,1,0\n0,0,1\n1,0,0\n").unwrap();
        assert_eq!(p, cyclic3());
        let q = TransitionMatrix::from_csv("1/3, 2/3\n1/2, 1/2\n").unwrap();
        assert!((q.get(0, 1) - 2.0 / 3.0).abs() < 1e-16);
        assert_eq!(TransitionMatrix::from_csv(&q.to_csv()).unwrap(), q);
        assert!(TransitionMatrix::from_csv("0.5,0.4\n0.5,0.5\n").is_err());
        assert!(matches!(
            TransitionMatrix::from_csv("a,b\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn split_examples() {
        let cantor = presets::cantor();
        let half = TransitionMatrix::bernoulli(&[0.5, 0.5]).unwrap();
        let wit = split_check(&cantor, &half, &[0.5, 0.5], UNIT, 4).unwrap();
        assert_eq!(wit, Some((w(2, &[1, 1]), w(2, &[1, 2]))));

        let flip = presets::flip();
        assert_eq!(split_check(&flip, &half, &[0.5, 0.5], UNIT, 8).unwrap(), None);

        let nonreg = presets::nonregular_6_1().unwrap();
        let (u, v) = split_check(&nonreg, &half, &[0.5, 0.5], UNIT, 8).unwrap().unwrap();
        assert_eq!(u.first(), v.first());
        let (iu, iv) = (nonreg.word_image(&u).unwrap(), nonreg.word_image(&v).unwrap());
        assert!(iu.is_disjoint(&iv));
    }

    #[test]
    fn split_precondition() {
        let fig2 = presets::figure_2();
        let half = TransitionMatrix::bernoulli(&[0.5, 0.5]).unwrap();
        assert!(matches!(
            split_check(&fig2, &half, &[0.5, 0.5], UNIT, 3),
            Err(Error::Precondition(_))
        ));
        let cantor = presets::cantor();
        let j = Interval { lo: 0.5, hi: 1.0 };
        assert!(matches!(
            separability_check(&cantor, j, 3),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn separability_examples() {
        let cantor = presets::cantor();
        assert_eq!(
            separability_check(&cantor, UNIT, 3).unwrap(),
            Some((w(2, &[1]), w(2, &[2])))
        );
        assert_eq!(separability_check(&presets::flip(), UNIT, 8).unwrap(), None);
        let porc = presets::porcupine_6_2();
        let (u, v) = separability_check(&porc, UNIT, 8).unwrap().unwrap();
        assert!(porc.word_image(&u).unwrap().is_disjoint(&porc.word_image(&v).unwrap()));
    }

    #[test]
    fn rigidity_examples() {
        let cantor = presets::cantor();
        let half = TransitionMatrix::bernoulli(&[0.5, 0.5]).unwrap();
        match rigidity_check(&cantor, &half, &[0.5, 0.5], UNIT, 1, 0.05, 6).unwrap() {
            RigidityVerdict::SplitOnSymbol(u, v) => {
                assert_eq!(u.first(), Some(1));
                assert_eq!(v.first(), Some(1));
                assert_eq!(u.len(), 3);
            }
            RigidityVerdict::NoneFound => panic!("cantor splits on symbol 1"),
        }

        let c = cantor.maps();
        let cantor3 = Ifs::new(vec![c[0].clone(), c[1].clone(), c[0].clone()]).unwrap();
        let third = [1.0 / 3.0; 3];
        assert_eq!(
            rigidity_check(&cantor3, &cyclic3(), &third, UNIT, 1, 0.05, 8).unwrap(),
            RigidityVerdict::NoneFound
        );
        assert_eq!(
            rigidity_check(&presets::flip(), &half, &[0.5, 0.5], UNIT, 1, 0.05, 8).unwrap(),
            RigidityVerdict::NoneFound
        );
    }
}
