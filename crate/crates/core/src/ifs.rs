//! Iterated function systems, the Barnsley-Hutchinson operator and
//! finite-depth probes of fibres, the target set and attractors.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet, SetLimits};
use crate::maps::PiecewiseMonotoneMap;
use crate::symbolic::{SymbolStream, Word};

/// Optional wall-clock limit shared by long-running refinements.
#[derive(Debug, Clone, Copy, Default)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn after(budget: Duration) -> Self {
        Deadline(Some(Instant::now() + budget))
    }

    pub fn expired(&self) -> bool {
        self.0.is_some_and(|t| Instant::now() >= t)
    }
}

/// `IFS(T_1, ..., T_k)`: `k >= 1` maps sharing one domain.
#[derive(Debug, Clone)]
pub struct Ifs {
    domain: Interval,
    maps: Vec<PiecewiseMonotoneMap>,
}

impl Ifs {
    pub fn new(maps: Vec<PiecewiseMonotoneMap>) -> Result<Self> {
        let Some(first) = maps.first() else {
            return Err(Error::InvalidAlphabet(0));
        };
        let domain = first.domain();
        for (i, m) in maps.iter().enumerate() {
            if m.domain() != domain {
                return Err(Error::Construction(format!(
                    "map {} has domain [{}, {}], expected [{}, {}]",
                    i + 1,
                    m.domain().lo,
                    m.domain().hi,
                    domain.lo,
                    domain.hi
                )));
            }
            let img = m.image(domain);
            let slack = SetLimits::default().merge_eps;
            if img.lo < domain.lo - slack || img.hi > domain.hi + slack {
                return Err(Error::Construction(format!(
                    "map {} sends the domain to [{}, {}], outside [{}, {}]",
                    i + 1,
                    img.lo,
                    img.hi,
                    domain.lo,
                    domain.hi
                )));
            }
        }
        Ok(Ifs { domain, maps })
    }

    pub fn k(&self) -> usize {
        self.maps.len()
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn maps(&self) -> &[PiecewiseMonotoneMap] {
        &self.maps
    }

    /// Map `T_symbol` (1-based).
    pub fn map(&self, symbol: usize) -> Result<&PiecewiseMonotoneMap> {
        symbol
            .checked_sub(1)
            .and_then(|i| self.maps.get(i))
            .ok_or(Error::SymbolOutOfRange {
                symbol,
                k: self.k(),
            })
    }

    pub fn full_set(&self) -> IntervalSet {
        IntervalSet::full(self.domain)
    }

    /// `B(A) = T_1(A) ∪ ... ∪ T_k(A)`.
    pub fn bh_apply(&self, set: &IntervalSet) -> Result<IntervalSet> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut raw = Vec::with_capacity(set.len() * self.k());
        for m in &self.maps {
            raw.extend(set.parts().iter().map(|p| m.image(*p)));
        }
        IntervalSet::normalize_with(raw, set.domain(), set.limits())
    }

    /// `B^n(A)`.
    pub fn bh_iterate(&self, set: &IntervalSet, n: usize) -> Result<IntervalSet> {
        let mut cur = set.clone();
        for _ in 0..n {
            cur = self.bh_apply(&cur)?;
        }
        Ok(cur)
    }

    /// Iterates `B` from a `B`-invariant set until successive iterates are
    /// within `tol`. The iterates decrease, so the result is an outer
    /// approximation of `A* = ∩ B^n(A)`.
    pub fn star_set(&self, set: &IntervalSet, tol: f64, max_iter: usize) -> Result<StarSet> {
        let first = self.bh_apply(set)?;
        if !first.subset_within(set, 1e-12)? {
            return Err(Error::Precondition(format!(
                "B(A) is not contained in A (excess {:e})",
                first.excess_over(set)?
            )));
        }
        let mut prev = set.clone();
        let mut cur = first;
        for it in 1..=max_iter {
            if cur.hausdorff(&prev)? <= tol {
                return Ok(StarSet {
                    set: cur,
                    iterations: it,
                    converged: true,
                });
            }
            if it == max_iter {
                break;
            }
            prev = cur;
            cur = self.bh_apply(&prev)?;
        }
        Ok(StarSet {
            set: cur,
            iterations: max_iter,
            converged: false,
        })
    }

    fn check_word(&self, word: &Word) -> Result<()> {
        if let Some(&bad) = word.symbols().iter().find(|&&s| s > self.k()) {
            return Err(Error::SymbolOutOfRange {
                symbol: bad,
                k: self.k(),
            });
        }
        Ok(())
    }

    fn compose_image(&self, symbols: &[usize], start: Interval) -> Interval {
        symbols
            .iter()
            .rev()
            .fold(start, |iv, &s| self.maps[s - 1].image(iv))
    }

    /// `T_{w_0} ∘ ... ∘ T_{w_{n-1}}(X)`.
    pub fn word_image(&self, word: &Word) -> Result<Interval> {
        self.check_word(word)?;
        Ok(self.compose_image(word.symbols(), self.domain))
    }

    /// `T_{w_0} ∘ ... ∘ T_{w_{n-1}}(iv)`.
    pub fn word_image_of(&self, word: &Word, iv: Interval) -> Result<Interval> {
        self.check_word(word)?;
        Ok(self.compose_image(word.symbols(), iv))
    }

    /// Depth-`depth` truncation of the fibre along `stream`. Its diameter
    /// tends to zero exactly for weakly hyperbolic sequences; this only
    /// reports the value.
    pub fn fibre_approx(&self, stream: &SymbolStream, depth: usize) -> Result<Interval> {
        if depth == 0 {
            return Err(Error::Parameter("fibre depth must be >= 1".into()));
        }
        if stream.alphabet_size() != self.k() {
            return Err(Error::Shape(format!(
                "stream over {} symbols for an IFS with {} maps",
                stream.alphabet_size(),
                self.k()
            )));
        }
        self.word_image(&stream.prefix(depth))
    }

    /// Breadth-first refinement of words towards the closure of the target
    /// set. Words whose image has diameter `<= tol` become atoms and stop;
    /// words still wider at `max_depth` are undecided.
    pub fn target_approx(&self, opts: &TargetOptions) -> Result<TargetApprox> {
        if !(opts.tol > 0.0) {
            return Err(Error::Parameter("target tolerance must be > 0".into()));
        }
        if opts.max_depth == 0 {
            return Err(Error::Parameter("max_depth must be >= 1".into()));
        }
        let k = self.k();
        let mut atoms = Vec::new();
        let mut undecided = Vec::new();
        let mut examined = 0usize;
        let mut frontier: Vec<Vec<usize>> = (1..=k).map(|s| vec![s]).collect();
        let mut depth = 1;
        loop {
            let mut next = Vec::new();
            for (idx, w) in frontier.iter().enumerate() {
                let img = self.compose_image(w, self.domain);
                examined += 1;
                if img.width() <= opts.tol {
                    atoms.push(img);
                } else if depth == opts.max_depth {
                    undecided.push(img);
                } else {
                    if next.len() + k > opts.max_pending
                        || (examined.is_multiple_of(4096) && opts.deadline.expired())
                    {
                        undecided.extend(
                            frontier[idx..].iter().map(|w| self.compose_image(w, self.domain)),
                        );
                        undecided.extend(next.iter().map(|w: &Vec<usize>| {
                            self.compose_image(w, self.domain)
                        }));
                        let partial = self.finish_target(atoms, undecided, depth, examined, opts)?;
                        return Err(Error::Budget(Box::new(partial)));
                    }
                    for s in 1..=k {
                        let mut child = Vec::with_capacity(w.len() + 1);
                        child.extend_from_slice(w);
                        child.push(s);
                        next.push(child);
                    }
                }
            }
            if next.is_empty() {
                return self.finish_target(atoms, undecided, depth, examined, opts);
            }
            frontier = next;
            depth += 1;
        }
    }

    fn finish_target(
        &self,
        atoms: Vec<Interval>,
        undecided: Vec<Interval>,
        depth: usize,
        examined: usize,
        opts: &TargetOptions,
    ) -> Result<TargetApprox> {
        let atom_words = atoms.len();
        let atoms = IntervalSet::normalize_with(atoms, self.domain, opts.limits)?;
        let undecided = IntervalSet::normalize_with(undecided, self.domain, opts.limits)?;
        Ok(TargetApprox {
            complete: undecided.is_empty(),
            atoms,
            undecided,
            depth_reached: depth,
            words_examined: examined,
            atom_words,
        })
    }

    /// First word (length-lexicographic) whose image has diameter `<= tol`:
    /// an ε-witness that some weakly hyperbolic sequence exists.
    pub fn weakly_hyperbolic_witness(&self, tol: f64, max_depth: usize) -> Result<Option<Word>> {
        if !(tol > 0.0) {
            return Err(Error::Parameter("witness tolerance must be > 0".into()));
        }
        let k = self.k();
        for len in 1..=max_depth {
            let mut digits = vec![1usize; len];
            loop {
                if self.compose_image(&digits, self.domain).width() <= tol {
                    return Word::new(k, digits).map(Some);
                }
                if !advance(&mut digits, k) {
                    break;
                }
            }
        }
        Ok(None)
    }

    /// Iterates `B` on the closed `eps`-neighbourhood of `set` and reports
    /// whether it is pulled back onto `set`.
    ///
    /// `Escapes` is only returned once the iterates themselves have
    /// stabilized away from `set`; slow convergence stays `Inconclusive`.
    pub fn conley_probe(
        &self,
        set: &IntervalSet,
        eps: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<ConleyVerdict> {
        if !(eps > 0.0) || !(tol > 0.0) {
            return Err(Error::Parameter("eps and tol must be > 0".into()));
        }
        let mut cur = set.fatten(eps)?;
        let mut dist = cur.hausdorff(set)?;
        if dist <= tol {
            return Ok(ConleyVerdict::Attracts {
                iterations: 0,
                distance: dist,
            });
        }
        for it in 1..=max_iter {
            let next = self.bh_apply(&cur)?;
            dist = next.hausdorff(set)?;
            if dist <= tol {
                return Ok(ConleyVerdict::Attracts {
                    iterations: it,
                    distance: dist,
                });
            }
            if next.hausdorff(&cur)? <= tol {
                let residual = next.difference(&set.fatten(tol)?)?;
                return Ok(ConleyVerdict::Escapes {
                    residual,
                    distance: dist,
                    iterations: it,
                });
            }
            cur = next;
        }
        Ok(ConleyVerdict::Inconclusive {
            iterations: max_iter,
            distance: dist,
        })
    }

    /// `true` iff `B^n(V_0) ⊂ V` for all `n <= n_iter`, with `V_0`, `V` the
    /// closed `v0_eps`- and `v_eps`-neighbourhoods of `set`.
    ///
    /// Stops early (and answers for every `n`) once an iterate falls inside
    /// the union of the previous ones: that union is then forward invariant.
    pub fn stability_probe(
        &self,
        set: &IntervalSet,
        v_eps: f64,
        v0_eps: f64,
        n_iter: usize,
    ) -> Result<bool> {
        if !(v0_eps > 0.0) || v0_eps > v_eps {
            return Err(Error::Parameter(format!(
                "need 0 < v0_eps <= v_eps, got {v0_eps} and {v_eps}"
            )));
        }
        let outer = set.fatten(v_eps)?;
        let mut cur = set.fatten(v0_eps)?;
        let mut visited = cur.clone();
        for _ in 0..n_iter {
            let next = self.bh_apply(&cur)?;
            if !next.subset_within(&outer, 1e-12)? {
                return Ok(false);
            }
            if next.subset_within(&visited, 1e-12)? {
                return Ok(true);
            }
            visited = visited.union(&next)?;
            cur = next;
        }
        Ok(true)
    }

    /// `h(B(A), A) <= tol`.
    pub fn invariance_check(&self, set: &IntervalSet, tol: f64) -> Result<bool> {
        self.bh_apply(set)?.subset_within(set, tol)
    }

    /// Grid cells that may contain a point with `max_i |T_i(x) - x| <= tol`.
    ///
    /// A cell is kept when the residual at its centre is within `tol` plus
    /// the Lipschitz slack over half a cell, so no solution is missed. The
    /// empty set means no common fixed point at this resolution.
    pub fn common_fixed_points(&self, tol: f64, grid_n: usize) -> Result<IntervalSet> {
        if grid_n < 2 {
            return Err(Error::Parameter("grid_n must be >= 2".into()));
        }
        let lip = 1.0
            + self
                .maps
                .iter()
                .map(PiecewiseMonotoneMap::lipschitz_bound)
                .fold(0.0, f64::max);
        let d = self.domain;
        let h = d.width() / grid_n as f64;
        let mut cells = Vec::new();
        for i in 0..grid_n {
            let lo = d.lo + h * i as f64;
            let hi = if i + 1 == grid_n { d.hi } else { d.lo + h * (i + 1) as f64 };
            let c = 0.5 * (lo + hi);
            let residual = self
                .maps
                .iter()
                .map(|m| (m.eval(c) - c).abs())
                .fold(0.0, f64::max);
            if residual <= tol + lip * 0.5 * (hi - lo) {
                cells.push(Interval { lo, hi });
            }
        }
        IntervalSet::normalize(cells, d)
    }

    /// Vertices of the piecewise-linear composition `T_{w_0} ∘ ... ∘ T_{w_{n-1}}`.
    pub fn compose_linear(&self, word: &Word) -> Result<Vec<(f64, f64)>> {
        self.check_word(word)?;
        let d = self.domain;
        let mut verts = vec![(d.lo, d.lo), (d.hi, d.hi)];
        for &s in word.symbols().iter().rev() {
            let m = &self.maps[s - 1];
            let breaks = m.vertices().ok_or_else(|| {
                Error::UnsupportedMap(format!("T_{s} is not piecewise linear"))
            })?;
            let inner: Vec<f64> = breaks[1..breaks.len() - 1].iter().map(|v| v.0).collect();
            let mut next = Vec::with_capacity(verts.len() * 2);
            for (i, &(x0, y0)) in verts.iter().enumerate() {
                next.push((x0, y0));
                if let Some(&(x1, y1)) = verts.get(i + 1) {
                    // breakpoints of T strictly between y0 and y1 split the piece
                    let (lo, hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
                    let mut cuts: Vec<f64> = inner.iter().copied().filter(|&b| lo < b && b < hi).collect();
                    if y1 < y0 {
                        cuts.reverse();
                    }
                    for b in cuts {
                        let t = (b - y0) / (y1 - y0);
                        next.push((x0 + t * (x1 - x0), b));
                    }
                }
            }
            verts = next.into_iter().map(|(x, y)| (x, m.eval(y))).collect();
        }
        Ok(verts)
    }

    /// Exact Lipschitz constant of a composition of piecewise-linear maps.
    pub fn lipschitz_exact(&self, word: &Word) -> Result<f64> {
        let verts = self.compose_linear(word)?;
        Ok(verts
            .windows(2)
            .filter(|w| w[1].0 > w[0].0)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max))
    }
}

/// 1-based base-`k` odometer; false once every word of this length was seen.
pub(crate) fn advance(digits: &mut [usize], k: usize) -> bool {
    for d in digits.iter_mut().rev() {
        if *d < k {
            *d += 1;
            return true;
        }
        *d = 1;
    }
    false
}

#[derive(Debug, Clone)]
pub struct StarSet {
    pub set: IntervalSet,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct TargetOptions {
    pub tol: f64,
    pub max_depth: usize,
    /// Largest number of words allowed in the next frontier.
    pub max_pending: usize,
    pub deadline: Deadline,
    pub limits: SetLimits,
}

impl TargetOptions {
    pub fn new(tol: f64, max_depth: usize) -> Self {
        TargetOptions {
            tol,
            max_depth,
            max_pending: 1 << 21,
            deadline: Deadline::none(),
            limits: SetLimits::default(),
        }
    }
}

/// Outer cover `atoms ∪ undecided` of the closure of the target set.
#[derive(Debug, Clone)]
pub struct TargetApprox {
    pub atoms: IntervalSet,
    pub undecided: IntervalSet,
    pub complete: bool,
    pub depth_reached: usize,
    pub words_examined: usize,
    /// Number of words that became atoms (before merging).
    pub atom_words: usize,
}

#[derive(Debug, Clone)]
pub enum ConleyVerdict {
    Attracts {
        iterations: usize,
        distance: f64,
    },
    Escapes {
        /// Part of the stabilized iterate farther than `tol` from the set.
        residual: IntervalSet,
        distance: f64,
        iterations: usize,
    },
    Inconclusive {
        iterations: usize,
        distance: f64,
    },
}

impl ConleyVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            ConleyVerdict::Attracts { .. } => "attracts",
            ConleyVerdict::Escapes { .. } => "escapes",
            ConleyVerdict::Inconclusive { .. } => "inconclusive",
        }
    }
}
