//! Probability measures discretized as piecewise-uniform densities on a
//! uniform bin grid, and the Markov operators acting on them.
//!
//! A [`GridMeasure`] stands for the measure whose density is constant inside
//! each bin. Pushforwards under monotone branches are computed exactly for
//! that representative (bin edges are pulled back through the branch
//! inverse) and then re-binned, so mass is conserved to rounding. The 1-
//! Wasserstein distance between two representatives is also exact.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::ifs::Ifs;
use crate::intervals::{fmt17, Interval, IntervalSet, SetLimits};
use crate::maps::{Direction, PiecewiseMonotoneMap};
use crate::stochastic::TransitionMatrix;
use crate::symbolic::SymbolStream;

const MASS_TOL: f64 = 1e-12;
/// Relative distance (in bins) below which a value is snapped onto an edge.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    domain: Interval,
    masses: Vec<f64>,
}

impl GridMeasure {
    pub fn new(domain: Interval, masses: Vec<f64>) -> Result<Self> {
        check_grid(domain, masses.len())?;
        if masses.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::Parameter("bin masses must be finite and >= 0".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Parameter(format!("bin masses sum to {total}, not 1")));
        }
        Ok(GridMeasure { domain, masses })
    }

    /// Rescales nonnegative weights to a probability measure.
    pub fn normalized(domain: Interval, mut masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degeneracy("zero total mass".into()));
        }
        masses.iter_mut().for_each(|m| *m /= total);
        check_grid(domain, masses.len())?;
        Ok(GridMeasure { domain, masses })
    }

    pub fn uniform(domain: Interval, n_bins: usize) -> Result<Self> {
        check_grid(domain, n_bins)?;
        Ok(GridMeasure {
            domain,
            masses: vec![1.0 / n_bins as f64; n_bins],
        })
    }

    /// All mass in the bin containing `x`.
    pub fn dirac(domain: Interval, n_bins: usize, x: f64) -> Result<Self> {
        check_grid(domain, n_bins)?;
        if !domain.contains(x) {
            return Err(Error::OutsideDomain {
                lo: x,
                hi: x,
                domain_lo: domain.lo,
                domain_hi: domain.hi,
            });
        }
        let mut masses = vec![0.0; n_bins];
        masses[bin_of(domain, n_bins, x)] = 1.0;
        Ok(GridMeasure { domain, masses })
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn bin_width(&self) -> f64 {
        self.domain.width() / self.n_bins() as f64
    }

    pub fn bin(&self, i: usize) -> Interval {
        bin_interval(self.domain, self.n_bins(), i)
    }

    pub fn bin_of(&self, x: f64) -> usize {
        bin_of(self.domain, self.n_bins(), x)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        (0..self.n_bins())
            .map(|i| self.masses[i] * self.bin(i).midpoint())
            .sum()
    }

    /// Variance of the piecewise-uniform representative.
    pub fn variance(&self) -> f64 {
        let h = self.bin_width();
        let mean = self.mean();
        let second: f64 = (0..self.n_bins())
            .map(|i| {
                let c = self.bin(i).midpoint();
                self.masses[i] * (c * c + h * h / 12.0)
            })
            .sum();
        second - mean * mean
    }

    /// Largest single-bin mass.
    pub fn max_atom(&self) -> f64 {
        self.masses.iter().copied().fold(0.0, f64::max)
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &GridMeasure, alpha: f64) -> Result<GridMeasure> {
        check_same_grid(self, other)?;
        Ok(GridMeasure {
            domain: self.domain,
            masses: self
                .masses
                .iter()
                .zip(&other.masses)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect(),
        })
    }

    /// CSV rows `bin_lo,bin_hi,mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,mass\n");
        for (i, m) in self.masses.iter().enumerate() {
            let b = self.bin(i);
            let _ = writeln!(out, "{},{},{}", fmt17(b.lo), fmt17(b.hi), fmt17(*m));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_rows(text, 3)?;
        let (domain, n) = grid_from_rows(rows.iter().map(|r| (r[0], r[1])))?;
        let masses = rows.iter().map(|r| r[2]).collect::<Vec<_>>();
        debug_assert_eq!(masses.len(), n);
        GridMeasure::new(domain, masses)
    }
}

/// A probability measure on `X × {1, ..., k}` given by its `k` sections.
#[derive(Debug, Clone, PartialEq)]
pub struct HatMeasure {
    domain: Interval,
    n_bins: usize,
    sections: Vec<Vec<f64>>,
}

impl HatMeasure {
    pub fn new(domain: Interval, sections: Vec<Vec<f64>>) -> Result<Self> {
        let n_bins = sections.first().map_or(0, Vec::len);
        check_grid(domain, n_bins)?;
        if sections.iter().any(|s| s.len() != n_bins) {
            return Err(Error::Shape("sections have different bin counts".into()));
        }
        if sections.iter().flatten().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::Parameter("bin masses must be finite and >= 0".into()));
        }
        let total: f64 = sections.iter().flatten().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Parameter(format!("sections carry total mass {total}, not 1")));
        }
        Ok(HatMeasure {
            domain,
            n_bins,
            sections,
        })
    }

    /// Section `i` is `weights[i] * mu`.
    pub fn product(mu: &GridMeasure, weights: &[f64]) -> Result<Self> {
        let sections = weights
            .iter()
            .map(|&w| mu.masses.iter().map(|m| w * m).collect())
            .collect();
        Self::new(mu.domain, sections)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn k(&self) -> usize {
        self.sections.len()
    }

    pub fn sections(&self) -> &[Vec<f64>] {
        &self.sections
    }

    pub fn bin_width(&self) -> f64 {
        self.domain.width() / self.n_bins as f64
    }

    /// `(μ_1(X), ..., μ_k(X))`.
    pub fn section_masses(&self) -> Vec<f64> {
        self.sections.iter().map(|s| s.iter().sum()).collect()
    }

    /// Projection onto `X`: the sum of all sections.
    pub fn marginal(&self) -> GridMeasure {
        let mut masses = vec![0.0; self.n_bins];
        for s in &self.sections {
            for (m, x) in masses.iter_mut().zip(s) {
                *m += x;
            }
        }
        GridMeasure {
            domain: self.domain,
            masses,
        }
    }

    /// CSV rows `section,bin_lo,bin_hi,mass` with 1-based sections.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,bin_lo,bin_hi,mass\n");
        for (s, sec) in self.sections.iter().enumerate() {
            for (i, m) in sec.iter().enumerate() {
                let b = bin_interval(self.domain, self.n_bins, i);
                let _ = writeln!(out, "{},{},{},{}", s + 1, fmt17(b.lo), fmt17(b.hi), fmt17(*m));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_rows(text, 4)?;
        let k = rows.iter().map(|r| r[0] as usize).max().unwrap_or(0);
        let mut by_section: Vec<Vec<&Vec<f64>>> = vec![Vec::new(); k];
        for r in &rows {
            let s = r[0] as usize;
            if s == 0 || r[0] != s as f64 {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("bad section index {}", r[0]),
                });
            }
            by_section[s - 1].push(r);
        }
        let (domain, _) = grid_from_rows(by_section[0].iter().map(|r| (r[1], r[2])))?;
        let sections = by_section
            .iter()
            .map(|rs| rs.iter().map(|r| r[3]).collect())
            .collect();
        HatMeasure::new(domain, sections)
    }
}

fn parse_rows(text: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(|c: char| c.is_alphabetic()) {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| crate::intervals::parse_f64(f.trim()))
            .collect::<std::result::Result<Vec<f64>, String>>()
            .map_err(|msg| Error::Parse { line: n + 1, msg })?;
        if row.len() != width {
            return Err(Error::Parse {
                line: n + 1,
                msg: format!("expected {width} fields"),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

fn grid_from_rows<I: Iterator<Item = (f64, f64)>>(bins: I) -> Result<(Interval, usize)> {
    let bins: Vec<_> = bins.collect();
    let (Some(first), Some(last)) = (bins.first(), bins.last()) else {
        return Err(Error::Parse {
            line: 0,
            msg: "no bins".into(),
        });
    };
    Ok((
        Interval {
            lo: first.0,
            hi: last.1,
        },
        bins.len(),
    ))
}

fn check_grid(domain: Interval, n_bins: usize) -> Result<()> {
    if n_bins == 0 {
        return Err(Error::Parameter("need at least one bin".into()));
    }
    if !(domain.lo < domain.hi) {
        return Err(Error::Parameter("degenerate domain".into()));
    }
    Ok(())
}

fn check_same_grid(a: &GridMeasure, b: &GridMeasure) -> Result<()> {
    if a.domain != b.domain || a.n_bins() != b.n_bins() {
        return Err(Error::Shape(format!(
            "grids differ: {} bins on [{}, {}] vs {} bins on [{}, {}]",
            a.n_bins(),
            a.domain.lo,
            a.domain.hi,
            b.n_bins(),
            b.domain.lo,
            b.domain.hi
        )));
    }
    Ok(())
}

fn bin_interval(domain: Interval, n: usize, i: usize) -> Interval {
    let h = domain.width() / n as f64;
    let lo = domain.lo + h * i as f64;
    let hi = if i + 1 == n { domain.hi } else { domain.lo + h * (i + 1) as f64 };
    Interval { lo, hi }
}

/// Position of `x` in bin units, snapped onto an edge when within `SNAP`.
fn grid_pos(domain: Interval, n: usize, x: f64) -> f64 {
    let pos = (x - domain.lo) / domain.width() * n as f64;
    let r = pos.round();
    if (pos - r).abs() < SNAP {
        r
    } else {
        pos
    }
}

fn bin_of(domain: Interval, n: usize, x: f64) -> usize {
    let pos = grid_pos(domain, n, x);
    if pos <= 0.0 {
        0
    } else {
        (pos.floor() as usize).min(n - 1)
    }
}

/// Cumulative distribution of a piecewise-uniform mass vector.
struct Cdf<'a> {
    domain: Interval,
    masses: &'a [f64],
    prefix: Vec<f64>,
}

impl<'a> Cdf<'a> {
    fn new(domain: Interval, masses: &'a [f64]) -> Self {
        let mut prefix = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for m in masses {
            acc += m;
            prefix.push(acc);
        }
        Cdf {
            domain,
            masses,
            prefix,
        }
    }

    fn at(&self, x: f64) -> f64 {
        let n = self.masses.len();
        let pos = grid_pos(self.domain, n, x).clamp(0.0, n as f64);
        let b = (pos.floor() as usize).min(n - 1);
        let frac = pos - b as f64;
        self.prefix[b] + self.masses[b] * frac
    }
}

/// Pushforward of an arbitrary finite mass vector.
fn push_masses(map: &PiecewiseMonotoneMap, domain: Interval, masses: &[f64]) -> Vec<f64> {
    let n = masses.len();
    let cdf = Cdf::new(domain, masses);
    let mut out = vec![0.0; n];
    for br in map.branches() {
        let sd = br.sub_domain();
        let branch_mass = cdf.at(sd.hi) - cdf.at(sd.lo);
        if branch_mass == 0.0 {
            continue;
        }
        let dir = br.direction();
        let (ya, yb) = (br.eval(sd.lo), br.eval(sd.hi));
        if dir == Direction::Constant {
            out[bin_of(domain, n, ya)] += branch_mass;
            continue;
        }
        // walk the image from its low end; xs are the matching preimages
        let (ylo, yhi, xlo, xhi) = if ya <= yb {
            (ya, yb, sd.lo, sd.hi)
        } else {
            (yb, ya, sd.hi, sd.lo)
        };
        let plo = grid_pos(domain, n, ylo);
        let phi = grid_pos(domain, n, yhi);
        let first_edge = plo.floor() as i64 + 1;
        let last_edge = phi.ceil() as i64 - 1;
        let mut y_prev = ylo;
        let mut x_prev = xlo;
        let mut f_prev = cdf.at(xlo);
        let mut deposit = |y_next: f64, x_next: f64, y_prev: f64| {
            let f_next = cdf.at(x_next);
            let m = (f_next - f_prev).abs();
            f_prev = f_next;
            let mid = 0.5 * (y_prev + y_next);
            out[bin_of(domain, n, mid)] += m;
        };
        for e in first_edge..=last_edge {
            if e <= 0 || e >= n as i64 {
                continue;
            }
            let y = domain.lo + domain.width() * e as f64 / n as f64;
            let x = br.inverse(y);
            deposit(y, x, y_prev);
            y_prev = y;
            x_prev = x;
        }
        let _ = x_prev;
        deposit(yhi, xhi, y_prev);
    }
    out
}

/// `T_* μ`.
pub fn pushforward(map: &PiecewiseMonotoneMap, mu: &GridMeasure) -> Result<GridMeasure> {
    if map.domain() != mu.domain {
        return Err(Error::Shape("map and measure live on different domains".into()));
    }
    Ok(GridMeasure {
        domain: mu.domain,
        masses: push_masses(map, mu.domain, &mu.masses),
    })
}

fn check_weights(weights: &[f64], k: usize) -> Result<()> {
    if weights.len() != k {
        return Err(Error::Shape(format!("{} weights for {k} maps", weights.len())));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Parameter("weights must be strictly positive".into()));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > MASS_TOL {
        return Err(Error::Parameter(format!("weights sum to {s}, not 1")));
    }
    Ok(())
}

/// Markov operator `Σ_i p_i T_{i*} μ`.
pub fn markov_step(ifs: &Ifs, weights: &[f64], mu: &GridMeasure) -> Result<GridMeasure> {
    check_weights(weights, ifs.k())?;
    if ifs.domain() != mu.domain {
        return Err(Error::Shape("IFS and measure live on different domains".into()));
    }
    let mut masses = vec![0.0; mu.n_bins()];
    for (m, &w) in ifs.maps().iter().zip(weights) {
        for (acc, x) in masses.iter_mut().zip(push_masses(m, mu.domain, &mu.masses)) {
            *acc += w * x;
        }
    }
    Ok(GridMeasure {
        domain: mu.domain,
        masses,
    })
}

/// Generalised Markov operator: section `j` of the result is
/// `T_{j*}(Σ_i p_ij μ_i)`.
pub fn generalized_markov_step(ifs: &Ifs, p: &TransitionMatrix, hat: &HatMeasure) -> Result<HatMeasure> {
    let k = ifs.k();
    if p.dim() != k || hat.k() != k {
        return Err(Error::Shape(format!(
            "{}-state chain and {} sections for {k} maps",
            p.dim(),
            hat.k()
        )));
    }
    if ifs.domain() != hat.domain {
        return Err(Error::Shape("IFS and measure live on different domains".into()));
    }
    let n = hat.n_bins;
    let sections = (0..k)
        .map(|j| {
            let mut mixed = vec![0.0; n];
            for (i, sec) in hat.sections.iter().enumerate() {
                let pij = p.get(i, j);
                if pij == 0.0 {
                    continue;
                }
                for (acc, x) in mixed.iter_mut().zip(sec) {
                    *acc += pij * x;
                }
            }
            push_masses(&ifs.maps()[j], hat.domain, &mixed)
        })
        .collect();
    Ok(HatMeasure {
        domain: hat.domain,
        n_bins: n,
        sections,
    })
}

/// `∫ |F - G|` for two piecewise-uniform mass vectors on the same grid.
/// Both CDFs are linear inside each bin, so the integral is exact.
fn cdf_l1(masses_a: &[f64], masses_b: &[f64], h: f64) -> f64 {
    let mut d0 = 0.0f64;
    let mut total = 0.0;
    for (a, b) in masses_a.iter().zip(masses_b) {
        let d1 = d0 + a - b;
        total += if d0 * d1 >= 0.0 {
            0.5 * h * (d0.abs() + d1.abs())
        } else {
            0.5 * h * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
        };
        d0 = d1;
    }
    total
}

/// 1-Wasserstein distance between the piecewise-uniform representatives.
pub fn w1_distance(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    check_same_grid(mu, nu)?;
    Ok(cdf_l1(&mu.masses, &nu.masses, mu.bin_width()))
}

/// Sum over sections of `∫ |F_j - G_j|`.
pub fn hat_distance(a: &HatMeasure, b: &HatMeasure) -> Result<f64> {
    if a.domain != b.domain || a.n_bins != b.n_bins || a.k() != b.k() {
        return Err(Error::Shape("hat measures on different grids".into()));
    }
    let h = a.bin_width();
    Ok(a
        .sections
        .iter()
        .zip(&b.sections)
        .map(|(x, y)| cdf_l1(x, y, h))
        .sum())
}

/// Law of the sampled symbol sequences.
#[derive(Debug, Clone)]
pub enum SamplingLaw {
    /// Independent symbols with these weights; yields a [`GridMeasure`].
    Bernoulli { weights: Vec<f64> },
    /// Markov chain with this transition matrix (typically the inverse
    /// chain) started from `initial`; yields a [`HatMeasure`] whose section
    /// is the first symbol.
    Markov {
        chain: TransitionMatrix,
        initial: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct CodingOptions {
    pub n_samples: usize,
    pub prefix_len: usize,
    pub tol: f64,
    pub n_bins: usize,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub enum CodingMeasure {
    Grid(GridMeasure),
    Hat(HatMeasure),
}

#[derive(Debug, Clone)]
pub struct CodingEstimate {
    pub measure: CodingMeasure,
    pub unresolved_fraction: f64,
    pub resolved: usize,
}

const CHUNK: usize = 1024;

/// Monte Carlo estimate of the pushforward of the sequence law under the
/// coding map.
///
/// Sample `i` uses ChaCha stream `i` of `seed`, and deposits are integer
/// counts, so the result does not depend on `workers`.
pub fn coding_pushforward(ifs: &Ifs, law: &SamplingLaw, opts: &CodingOptions) -> Result<CodingEstimate> {
    if opts.n_samples == 0 || opts.prefix_len == 0 {
        return Err(Error::Parameter("n_samples and prefix_len must be >= 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter("tol must be > 0".into()));
    }
    let k = ifs.k();
    let (base, sections) = match law {
        SamplingLaw::Bernoulli { weights } => {
            check_weights(weights, k)?;
            (SymbolStream::bernoulli(weights, opts.seed)?, 1)
        }
        SamplingLaw::Markov { chain, initial } => {
            if chain.dim() != k {
                return Err(Error::Shape(format!("{}-state chain for {k} maps", chain.dim())));
            }
            (SymbolStream::markov(chain, initial, opts.seed)?, k)
        }
    };
    let n = opts.n_bins;
    let domain = ifs.domain();
    check_grid(domain, n)?;
    let workers = opts.workers.max(1);
    let n_chunks = opts.n_samples.div_ceil(CHUNK);
    let next_chunk = AtomicUsize::new(0);

    let run = || {
        let mut counts = vec![0u64; sections * n];
        let mut unresolved = 0usize;
        loop {
            let c = next_chunk.fetch_add(1, Ordering::Relaxed);
            if c >= n_chunks {
                break;
            }
            let end = ((c + 1) * CHUNK).min(opts.n_samples);
            for i in c * CHUNK..end {
                let stream = base.clone().with_substream(i as u64);
                let word = stream.prefix(opts.prefix_len);
                let img = word
                    .symbols()
                    .iter()
                    .rev()
                    .fold(domain, |iv, &s| ifs.maps()[s - 1].image(iv));
                if img.width() <= opts.tol {
                    let section = if sections == 1 { 0 } else { word.symbols()[0] - 1 };
                    counts[section * n + bin_of(domain, n, img.midpoint())] += 1;
                } else {
                    unresolved += 1;
                }
            }
        }
        (counts, unresolved)
    };

    let partials: Vec<(Vec<u64>, usize)> = if workers == 1 {
        vec![run()]
    } else {
        let run = &run;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers).map(|_| scope.spawn(run)).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sampling worker panicked"))
                .collect()
        })
    };
    let mut counts = vec![0u64; sections * n];
    let mut unresolved = 0;
    for (c, u) in partials {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        unresolved += u;
    }
    let resolved = opts.n_samples - unresolved;
    if resolved == 0 {
        return Err(Error::AllUnresolved {
            n_samples: opts.n_samples,
        });
    }
    let scale = 1.0 / resolved as f64;
    let to_masses = |s: usize| -> Vec<f64> {
        counts[s * n..(s + 1) * n]
            .iter()
            .map(|&c| c as f64 * scale)
            .collect()
    };
    let measure = if sections == 1 {
        CodingMeasure::Grid(GridMeasure {
            domain,
            masses: to_masses(0),
        })
    } else {
        CodingMeasure::Hat(HatMeasure {
            domain,
            n_bins: n,
            sections: (0..sections).map(to_masses).collect(),
        })
    };
    Ok(CodingEstimate {
        measure,
        unresolved_fraction: unresolved as f64 / opts.n_samples as f64,
        resolved,
    })
}

#[derive(Debug, Clone)]
pub enum StabilityReport<M> {
    Stable {
        limit: M,
        iterations: usize,
    },
    NotConverged {
        iterations: usize,
        /// Largest last-step move over all trajectories.
        max_step: f64,
        /// Largest distance between two trajectories at the end.
        max_spread: f64,
    },
}

impl<M> StabilityReport<M> {
    pub fn is_stable(&self) -> bool {
        matches!(self, StabilityReport::Stable { .. })
    }
}

fn probe<M, S, D>(starts: &[M], tol: f64, max_iter: usize, step: S, dist: D) -> Result<StabilityReport<M>>
where
    M: Clone,
    S: Fn(&M) -> Result<M>,
    D: Fn(&M, &M) -> Result<f64>,
{
    if starts.is_empty() {
        return Err(Error::Parameter("need at least one initial measure".into()));
    }
    let mut cur = starts.to_vec();
    let mut max_step = f64::INFINITY;
    let mut max_spread = f64::INFINITY;
    for it in 1..=max_iter {
        let next = cur.iter().map(&step).collect::<Result<Vec<M>>>()?;
        max_step = 0.0;
        for (a, b) in next.iter().zip(&cur) {
            max_step = max_step.max(dist(a, b)?);
        }
        max_spread = 0.0;
        for i in 0..next.len() {
            for j in i + 1..next.len() {
                max_spread = max_spread.max(dist(&next[i], &next[j])?);
            }
        }
        cur = next;
        if max_step <= tol && max_spread <= tol {
            return Ok(StabilityReport::Stable {
                limit: cur.swap_remove(0),
                iterations: it,
            });
        }
    }
    Ok(StabilityReport::NotConverged {
        iterations: max_iter,
        max_step,
        max_spread,
    })
}

/// Iterates the Markov operator from every start; stable when all
/// trajectories settle (step `<= tol`) onto a common limit (pairwise
/// W1 `<= tol`).
pub fn stability_probe_measures(
    ifs: &Ifs,
    weights: &[f64],
    starts: &[GridMeasure],
    tol: f64,
    max_iter: usize,
) -> Result<StabilityReport<GridMeasure>> {
    probe(starts, tol, max_iter, |m| markov_step(ifs, weights, m), w1_distance)
}

/// Recurrent counterpart of [`stability_probe_measures`], with distances
/// summed over sections.
pub fn stability_probe_hat(
    ifs: &Ifs,
    p: &TransitionMatrix,
    starts: &[HatMeasure],
    tol: f64,
    max_iter: usize,
) -> Result<StabilityReport<HatMeasure>> {
    probe(starts, tol, max_iter, |m| generalized_markov_step(ifs, p, m), hat_distance)
}

/// Union of the bins carrying more than `mass_tol / n_bins`.
pub fn support_estimate(mu: &GridMeasure, mass_tol: f64) -> Result<IntervalSet> {
    if !(0.0..1.0).contains(&mass_tol) {
        return Err(Error::Parameter("mass_tol must lie in [0, 1)".into()));
    }
    let threshold = mass_tol / mu.n_bins() as f64;
    let raw = (0..mu.n_bins())
        .filter(|&i| mu.masses[i] > threshold)
        .map(|i| mu.bin(i))
        .collect();
    let limits = SetLimits {
        max_parts: SetLimits::default().max_parts.max(mu.n_bins()),
        ..SetLimits::default()
    };
    IntervalSet::normalize_with(raw, mu.domain, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    fn mass_ok(m: &GridMeasure) {
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert!(m.masses().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn pushforward_examples() {
        let mu = GridMeasure::uniform(UNIT, 64).unwrap();
        let id = PiecewiseMonotoneMap::affine(UNIT, 1.0, 0.0).unwrap();
        let out = pushforward(&id, &mu).unwrap();
        for (a, b) in out.masses().iter().zip(mu.masses()) {
            assert!((a - b).abs() < 1e-15);
        }

        let third = PiecewiseMonotoneMap::affine(UNIT, 1.0 / 3.0, 0.0).unwrap();
        let d = GridMeasure::dirac(UNIT, 1024, 0.9).unwrap();
        let out = pushforward(&third, &d).unwrap();
        mass_ok(&out);
        assert!((out.masses()[out.bin_of(0.3)] - 1.0).abs() < 1e-12);

        let c = PiecewiseMonotoneMap::affine(UNIT, 0.0, 0.7).unwrap();
        let out = pushforward(&c, &mu).unwrap();
        assert!((out.masses()[out.bin_of(0.7)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pushforward_quadratic_matches_preimage_lengths() {
        // T(x) = -x^2 + 2x, uniform input: mass of T^{-1}([0, y]) is 1 - sqrt(1 - y)
        let t = PiecewiseMonotoneMap::quadratic(UNIT, -1.0, 2.0, 0.0).unwrap();
        let mu = GridMeasure::uniform(UNIT, 100).unwrap();
        let out = pushforward(&t, &mu).unwrap();
        mass_ok(&out);
        let mut acc = 0.0;
        for i in 0..100 {
            acc += out.masses()[i];
            let y: f64 = (i + 1) as f64 / 100.0;
            assert!((acc - (1.0 - (1.0 - y).sqrt())).abs() < 1e-12, "bin {i}");
        }
    }

    #[test]
    fn markov_step_on_cantor_levels() {
        let cantor = presets::cantor();
        let mut mu = GridMeasure::uniform(UNIT, 243).unwrap();
        for _ in 0..3 {
            mu = markov_step(&cantor, &[0.5, 0.5], &mu).unwrap();
        }
        mass_ok(&mu);
        let level3 = cantor.bh_iterate(&cantor.full_set(), 3).unwrap();
        for i in 0..243 {
            let c = mu.bin(i).midpoint();
            if !level3.contains(c) {
                assert!(mu.masses()[i] < 1e-14, "bin {i} mass {}", mu.masses()[i]);
            }
        }
    }

    #[test]
    fn common_fixed_point_dirac_is_fixed() {
        let flip = presets::flip();
        let mu = GridMeasure::dirac(UNIT, 101, 0.5).unwrap();
        let out = markov_step(&flip, &[0.5, 0.5], &mu).unwrap();
        assert!((w1_distance(&mu, &out).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn w1_examples() {
        let n = 1000;
        let a = GridMeasure::dirac(UNIT, n, 0.0).unwrap();
        let b = GridMeasure::dirac(UNIT, n, 1.0).unwrap();
        let h = 1.0 / n as f64;
        assert!((w1_distance(&a, &b).unwrap() - (1.0 - h)).abs() < 1e-12);
        assert_eq!(w1_distance(&a, &a).unwrap(), 0.0);
        let u = GridMeasure::uniform(UNIT, n).unwrap();
        let half = GridMeasure::dirac(UNIT, n, 0.5).unwrap();
        assert!((w1_distance(&u, &half).unwrap() - 0.25).abs() <= h);
        let other = GridMeasure::uniform(UNIT, 10).unwrap();
        assert!(matches!(w1_distance(&u, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn generalized_step_section_masses() {
        let c = presets::cantor();
        let m = c.maps();
        let ifs3 = Ifs::new(vec![m[0].clone(), m[1].clone(), m[0].clone()]).unwrap();
        let cyc = TransitionMatrix::new(3, vec![0., 1., 0., 0., 0., 1., 1., 0., 0.]).unwrap();
        let mu = GridMeasure::uniform(UNIT, 81).unwrap();
        let hat = HatMeasure::product(&mu, &[0.5, 0.3, 0.2]).unwrap();
        let next = generalized_markov_step(&ifs3, &cyc, &hat).unwrap();
        let s = next.section_masses();
        for (got, want) in s.iter().zip([0.2, 0.5, 0.3]) {
            assert!((got - want).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn support_examples() {
        let d = GridMeasure::dirac(UNIT, 10, 0.35).unwrap();
        let s = support_estimate(&d, 0.0).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.parts()[0].lo - 0.3).abs() < 1e-15 && (s.parts()[0].hi - 0.4).abs() < 1e-15);
        let u = GridMeasure::uniform(UNIT, 10).unwrap();
        assert_eq!(support_estimate(&u, 0.5).unwrap().parts(), &[UNIT]);
        assert!(support_estimate(&u, 1.0).is_err());
    }

    #[test]
    fn csv_round_trips() {
        let mu = GridMeasure::dirac(UNIT, 7, 0.5).unwrap().mix(&GridMeasure::uniform(UNIT, 7).unwrap(), 0.25).unwrap();
        let back = GridMeasure::from_csv(&mu.to_csv()).unwrap();
        assert_eq!(back.n_bins(), 7);
        for (a, b) in back.masses().iter().zip(mu.masses()) {
            assert_eq!(a, b);
        }
        let hat = HatMeasure::product(&mu, &[0.25, 0.75]).unwrap();
        let back = HatMeasure::from_csv(&hat.to_csv()).unwrap();
        assert_eq!(back, hat);
    }

    #[test]
    fn coding_flip_is_unresolved() {
        let opts = CodingOptions {
            n_samples: 500,
            prefix_len: 30,
            tol: 1e-9,
            n_bins: 64,
            seed: 1,
            workers: 1,
        };
        let law = SamplingLaw::Bernoulli { weights: vec![0.5, 0.5] };
        assert!(matches!(
            coding_pushforward(&presets::flip(), &law, &opts),
            Err(Error::AllUnresolved { n_samples: 500 })
        ));
    }

    #[test]
    fn flip_has_two_limits() {
        let flip = presets::flip();
        let starts = vec![
            GridMeasure::dirac(UNIT, 100, 0.0).unwrap(),
            GridMeasure::uniform(UNIT, 100).unwrap(),
        ];
        let r = stability_probe_measures(&flip, &[0.5, 0.5], &starts, 1e-6, 50).unwrap();
        match r {
            StabilityReport::NotConverged { max_spread, .. } => {
                assert!((max_spread - 0.25).abs() < 0.01)
            }
            StabilityReport::Stable { .. } => panic!("flip has distinct limits"),
        }
    }
}
