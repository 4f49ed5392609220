//! Finite words and infinite symbol streams over the alphabet `{1, ..., k}`.
//!
//! Symbols are 1-based at every public interface. Streams are pure functions
//! of the index: asking twice for symbol `n` gives the same answer, and random
//! streams are driven by a ChaCha generator positioned at `n`, so they can be
//! queried from any thread in any order.

use std::cmp::Ordering;
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stochastic::TransitionMatrix;

/// A finite word `w_0 w_1 ... w_{n-1}` over `{1, ..., k}`.
///
/// Words order by length first, then lexicographically. The empty word is
/// allowed and stands for the identity composition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    k: usize,
    symbols: Vec<usize>,
}

impl Word {
    pub fn new(k: usize, symbols: Vec<usize>) -> Result<Self> {
        check_alphabet(k)?;
        if let Some(&bad) = symbols.iter().find(|&&s| s == 0 || s > k) {
            return Err(Error::SymbolOutOfRange { symbol: bad, k });
        }
        Ok(Word { k, symbols })
    }

    pub fn empty(k: usize) -> Result<Self> {
        Self::new(k, Vec::new())
    }

    /// The word `s s ... s` of length `len`.
    pub fn repeat(k: usize, symbol: usize, len: usize) -> Result<Self> {
        Self::new(k, vec![symbol; len])
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn first(&self) -> Option<usize> {
        self.symbols.first().copied()
    }

    /// `self` followed by `symbol`.
    pub fn extended(&self, symbol: usize) -> Result<Self> {
        if symbol == 0 || symbol > self.k {
            return Err(Error::SymbolOutOfRange { symbol, k: self.k });
        }
        let mut symbols = Vec::with_capacity(self.len() + 1);
        symbols.extend_from_slice(&self.symbols);
        symbols.push(symbol);
        Ok(Word { k: self.k, symbols })
    }

    pub fn reversed(&self) -> Self {
        let mut symbols = self.symbols.clone();
        symbols.reverse();
        Word { k: self.k, symbols }
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.symbols.starts_with(&self.symbols)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.symbols.cmp(&other.symbols))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("]")
    }
}

fn check_alphabet(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidAlphabet(k))
    } else {
        Ok(())
    }
}

/// All words of length exactly `len`, in lexicographic order.
pub fn words_of_len(k: usize, len: usize) -> Result<Vec<Word>> {
    check_alphabet(k)?;
    let count = k
        .checked_pow(len as u32)
        .ok_or_else(|| Error::Parameter(format!("{k}^{len} words do not fit in memory")))?;
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![1usize; len];
    for _ in 0..count {
        out.push(Word {
            k,
            symbols: digits.clone(),
        });
        odometer_step(&mut digits, k);
    }
    Ok(out)
}

/// All words of length `1..=max_len` in length-then-lexicographic order.
///
/// There are `k + k^2 + ... + k^max_len` of them.
pub fn enumerate_words(k: usize, max_len: usize) -> Result<Vec<Word>> {
    check_alphabet(k)?;
    let mut out = Vec::new();
    for len in 1..=max_len {
        out.extend(words_of_len(k, len)?);
    }
    Ok(out)
}

/// Advances 1-based base-`k` digits; returns false on wrap-around.
fn odometer_step(digits: &mut [usize], k: usize) -> bool {
    for d in digits.iter_mut().rev() {
        if *d < k {
            *d += 1;
            return true;
        }
        *d = 1;
    }
    false
}

/// Total length of all words of length `1..=max_len`: the prefix of the
/// disjunctive stream that contains every such word as a block.
pub fn disjunctive_prefix_len(k: usize, max_len: usize) -> u128 {
    (1..=max_len as u32)
        .map(|len| len as u128 * (k as u128).pow(len))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamKind {
    Constant(usize),
    Periodic(Word),
    /// Concatenation of all words in length-lexicographic order.
    Disjunctive,
    Bernoulli {
        weights: Vec<f64>,
        seed: u64,
        substream: u64,
    },
    Markov {
        matrix: TransitionMatrix,
        initial: Vec<f64>,
        seed: u64,
        substream: u64,
    },
}

/// A deterministic infinite sequence over `{1, ..., k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    k: usize,
    kind: StreamKind,
}

impl SymbolStream {
    pub fn constant(k: usize, symbol: usize) -> Result<Self> {
        Word::new(k, vec![symbol])?;
        Ok(SymbolStream {
            k,
            kind: StreamKind::Constant(symbol),
        })
    }

    pub fn periodic(word: Word) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::Parameter("periodic stream needs a nonempty word".into()));
        }
        Ok(SymbolStream {
            k: word.alphabet_size(),
            kind: StreamKind::Periodic(word),
        })
    }

    /// The canonical disjunctive sequence `1, 2, ..., k, 11, 12, ...`.
    pub fn disjunctive(k: usize) -> Result<Self> {
        check_alphabet(k)?;
        Ok(SymbolStream {
            k,
            kind: StreamKind::Disjunctive,
        })
    }

    /// Independent symbols drawn with the given probabilities.
    pub fn bernoulli(weights: &[f64], seed: u64) -> Result<Self> {
        check_probability_vector(weights)?;
        Ok(SymbolStream {
            k: weights.len(),
            kind: StreamKind::Bernoulli {
                weights: weights.to_vec(),
                seed,
                substream: 0,
            },
        })
    }

    /// A Markov chain with transition matrix `matrix` started from `initial`.
    pub fn markov(matrix: &TransitionMatrix, initial: &[f64], seed: u64) -> Result<Self> {
        check_probability_vector(initial)?;
        if initial.len() != matrix.dim() {
            return Err(Error::Shape(format!(
                "initial vector has {} entries for a {}-state chain",
                initial.len(),
                matrix.dim()
            )));
        }
        Ok(SymbolStream {
            k: matrix.dim(),
            kind: StreamKind::Markov {
                matrix: matrix.clone(),
                initial: initial.to_vec(),
                seed,
                substream: 0,
            },
        })
    }

    /// Same law, independent randomness: selects ChaCha stream `id`.
    /// Deterministic kinds are returned unchanged.
    pub fn with_substream(mut self, id: u64) -> Self {
        match &mut self.kind {
            StreamKind::Bernoulli { substream, .. } | StreamKind::Markov { substream, .. } => {
                *substream = id
            }
            _ => {}
        }
        self
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> &StreamKind {
        &self.kind
    }

    /// The `n`-th symbol (0-based index, 1-based symbol).
    ///
    /// Random-access for every kind except Markov, which replays the chain.
    pub fn symbol(&self, n: u64) -> usize {
        match &self.kind {
            StreamKind::Constant(s) => *s,
            StreamKind::Periodic(w) => w.symbols()[(n % w.len() as u64) as usize],
            StreamKind::Disjunctive => disjunctive_symbol(self.k, n),
            StreamKind::Bernoulli {
                weights,
                seed,
                substream,
            } => {
                let mut rng = chacha(*seed, *substream);
                rng.set_word_pos(2 * n as u128);
                pick(weights, unit(rng.next_u64()))
            }
            StreamKind::Markov { .. } => self.iter().nth(n as usize).expect("infinite stream"),
        }
    }

    pub fn iter(&self) -> StreamIter<'_> {
        let state = match &self.kind {
            StreamKind::Disjunctive => IterState::Disjunctive {
                digits: vec![1],
                pos: 0,
            },
            StreamKind::Bernoulli {
                seed, substream, ..
            }
            | StreamKind::Markov {
                seed, substream, ..
            } => IterState::Random {
                rng: Box::new(chacha(*seed, *substream)),
                prev: None,
            },
            _ => IterState::Indexed,
        };
        StreamIter {
            stream: self,
            index: 0,
            state,
        }
    }

    /// The first `len` symbols as a word.
    pub fn prefix(&self, len: usize) -> Word {
        Word {
            k: self.k,
            symbols: self.iter().take(len).collect(),
        }
    }
}

fn chacha(seed: u64, substream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(substream);
    rng
}

/// Uniform in `[0, 1)` from the top 53 bits.
fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i + 1;
        }
    }
    // u landed in the rounding slack above the last cumulative sum
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) + 1
}

fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidAlphabet(0));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Parameter("probabilities must be finite and >= 0".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn disjunctive_symbol(k: usize, n: u64) -> usize {
    let k = k as u128;
    let mut n128 = n as u128;
    let mut len: u32 = 1;
    let mut count = k;
    loop {
        let block = len as u128 * count;
        if n128 < block {
            break;
        }
        n128 -= block;
        len += 1;
        count *= k;
    }
    let word_index = n128 / len as u128;
    let pos = (n128 % len as u128) as u32;
    let digit = (word_index / k.pow(len - 1 - pos)) % k;
    digit as usize + 1
}

enum IterState {
    Indexed,
    Disjunctive {
        digits: Vec<usize>,
        pos: usize,
    },
    Random {
        rng: Box<ChaCha8Rng>,
        prev: Option<usize>,
    },
}

pub struct StreamIter<'a> {
    stream: &'a SymbolStream,
    index: u64,
    state: IterState,
}

impl Iterator for StreamIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let k = self.stream.k;
        let out = match &mut self.state {
            IterState::Indexed => self.stream.symbol(self.index),
            IterState::Disjunctive { digits, pos } => {
                let s = digits[*pos];
                *pos += 1;
                if *pos == digits.len() {
                    *pos = 0;
                    if !odometer_step(digits, k) {
                        digits.push(1);
                    }
                }
                s
            }
            IterState::Random { rng, prev } => {
                let u = unit(rng.next_u64());
                let s = match &self.stream.kind {
                    StreamKind::Bernoulli { weights, .. } => pick(weights, u),
                    StreamKind::Markov {
                        matrix, initial, ..
                    } => match prev {
                        None => pick(initial, u),
                        Some(i) => pick(matrix.row(*i - 1), u),
                    },
                    _ => unreachable!("random state on a deterministic stream"),
                };
                *prev = Some(s);
                s
            }
        };
        self.index += 1;
        Some(out)
    }
}

/// Markov cylinder measure `p_{w_0} p_{w_0 w_1} ... p_{w_{n-2} w_{n-1}}`.
///
/// Zero exactly when the cylinder is not admissible.
pub fn cylinder_measure(matrix: &TransitionMatrix, pbar: &[f64], word: &Word) -> Result<f64> {
    let k = matrix.dim();
    if pbar.len() != k {
        return Err(Error::Shape(format!("pbar has {} entries, chain has {k}", pbar.len())));
    }
    let symbols = word.symbols();
    let Some(&first) = symbols.first() else {
        return Err(Error::Parameter("cylinder of the empty word".into()));
    };
    if let Some(&bad) = symbols.iter().find(|&&s| s > k) {
        return Err(Error::SymbolOutOfRange { symbol: bad, k });
    }
    let mut p = pbar[first - 1];
    for pair in symbols.windows(2) {
        p *= matrix.get(pair[0] - 1, pair[1] - 1);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(k: usize, s: &[usize]) -> Word {
        Word::new(k, s.to_vec()).unwrap()
    }

    #[test]
    fn enumerate_small_alphabets() {
        assert_eq!(enumerate_words(2, 1).unwrap(), vec![w(2, &[1]), w(2, &[2])]);
        let two = enumerate_words(2, 2).unwrap();
        assert_eq!(two.len(), 6);
        assert_eq!(&two[4..], &[w(2, &[2, 1]), w(2, &[2, 2])]);
        assert_eq!(enumerate_words(3, 2).unwrap().len(), 12);
        assert!(matches!(enumerate_words(0, 2), Err(Error::InvalidAlphabet(0))));
    }

    #[test]
    fn enumeration_is_sorted() {
        let words = enumerate_words(3, 4).unwrap();
        assert!(words.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn word_rejects_bad_symbols() {
        assert!(matches!(
            Word::new(2, vec![1, 3]),
            Err(Error::SymbolOutOfRange { symbol: 3, k: 2 })
        ));
        assert!(Word::new(2, vec![0]).is_err());
        assert!(Word::empty(2).unwrap().is_empty());
    }

    #[test]
    fn disjunctive_prefix() {
        let s = SymbolStream::disjunctive(2).unwrap();
        let first: Vec<_> = s.iter().take(8).collect();
        assert_eq!(first, vec![1, 2, 1, 1, 1, 2, 2, 1]);
        let ones = SymbolStream::disjunctive(1).unwrap();
        assert!(ones.iter().take(100).all(|x| x == 1));
    }

    #[test]
    fn disjunctive_random_access_matches_iteration() {
        for k in 1..=4 {
            let s = SymbolStream::disjunctive(k).unwrap();
            for (n, sym) in s.iter().take(5000).enumerate() {
                assert_eq!(s.symbol(n as u64), sym, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn disjunctive_contains_every_short_word() {
        for k in 1..=3 {
            let s = SymbolStream::disjunctive(k).unwrap();
            for len in 1..=4 {
                let n = disjunctive_prefix_len(k, len) as usize;
                let prefix: Vec<usize> = s.iter().take(n).collect();
                for word in words_of_len(k, len).unwrap() {
                    assert!(
                        prefix.windows(len).any(|b| b == word.symbols()),
                        "{word} missing from first {n} symbols"
                    );
                }
            }
        }
        assert_eq!(disjunctive_prefix_len(2, 3), 34);
    }

    #[test]
    fn bernoulli_random_access_matches_iteration() {
        let s = SymbolStream::bernoulli(&[0.2, 0.3, 0.5], 17).unwrap();
        let seq: Vec<_> = s.iter().take(300).collect();
        for (n, &sym) in seq.iter().enumerate() {
            assert_eq!(s.symbol(n as u64), sym);
        }
        let other = s.clone().with_substream(1);
        let seq2: Vec<_> = other.iter().take(300).collect();
        assert_ne!(seq, seq2);
    }

    #[test]
    fn bernoulli_frequencies() {
        let s = SymbolStream::bernoulli(&[0.25, 0.75], 3).unwrap();
        let n = 40_000;
        let ones = s.iter().take(n).filter(|&x| x == 1).count() as f64 / n as f64;
        assert!((ones - 0.25).abs() < 0.01, "{ones}");
    }

    #[test]
    fn markov_stream_respects_zero_transitions() {
        let p = TransitionMatrix::new(3, vec![0., 1., 0., 0., 0., 1., 1., 0., 0.]).unwrap();
        let s = SymbolStream::markov(&p, &[1.0, 0.0, 0.0], 5).unwrap();
        let seq: Vec<_> = s.iter().take(9).collect();
        assert_eq!(seq, vec![1, 2, 3, 1, 2, 3, 1, 2, 3]);
        assert_eq!(s.symbol(4), 2);
    }

    #[test]
    fn periodic_and_constant() {
        let s = SymbolStream::periodic(w(2, &[1, 2])).unwrap();
        assert_eq!(s.prefix(5).symbols(), &[1, 2, 1, 2, 1]);
        assert!(SymbolStream::constant(2, 3).is_err());
    }

    #[test]
    fn cylinder_examples() {
        let half = TransitionMatrix::bernoulli(&[0.5, 0.5]).unwrap();
        let m = cylinder_measure(&half, &[0.5, 0.5], &w(2, &[1, 2])).unwrap();
        assert_eq!(m, 0.25);

        let cyc = TransitionMatrix::new(3, vec![0., 1., 0., 0., 0., 1., 1., 0., 0.]).unwrap();
        let third = [1.0 / 3.0; 3];
        let m = cylinder_measure(&cyc, &third, &w(3, &[1, 2, 3])).unwrap();
        assert!((m - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cylinder_measure(&cyc, &third, &w(3, &[1, 1])).unwrap(), 0.0);
        assert!(matches!(
            cylinder_measure(&half, &[0.5, 0.5], &w(3, &[3])),
            Err(Error::SymbolOutOfRange { symbol: 3, k: 2 })
        ));
    }

    #[test]
    fn display() {
        assert_eq!(w(3, &[1, 3, 2]).to_string(), "[1,3,2]");
    }
}
