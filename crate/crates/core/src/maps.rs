//! Continuous piecewise-monotone self-maps of a closed interval.
//!
//! Every branch is monotone on its sub-domain, so the image of an interval
//! is the interval between the images of its endpoints (plus the vertex
//! value for a quadratic branch whose vertex lies inside).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};

const MONOTONE_SAMPLES: usize = 257;
const SEAM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
    Constant,
}

/// The restriction of a map to one sub-domain.
#[derive(Clone)]
pub enum BranchKind {
    /// Straight segment from `(lo, y_lo)` to `(hi, y_hi)`.
    Linear { y_lo: f64, y_hi: f64 },
    /// `a x^2 + b x + c`.
    Quadratic { a: f64, b: f64, c: f64 },
    /// Any continuous monotone function; the direction is declared and
    /// checked by sampling.
    Generic {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        increasing: bool,
    },
}

impl fmt::Debug for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchKind::Linear { y_lo, y_hi } => f
                .debug_struct("Linear")
                .field("y_lo", y_lo)
                .field("y_hi", y_hi)
                .finish(),
            BranchKind::Quadratic { a, b, c } => f
                .debug_struct("Quadratic")
                .field("a", a)
                .field("b", b)
                .field("c", c)
                .finish(),
            BranchKind::Generic { increasing, .. } => f
                .debug_struct("Generic")
                .field("increasing", increasing)
                .finish_non_exhaustive(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonotoneBranch {
    lo: f64,
    hi: f64,
    kind: BranchKind,
}

impl MonotoneBranch {
    pub fn new(lo: f64, hi: f64, kind: BranchKind) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Construction(format!("branch sub-domain [{lo}, {hi}] is empty")));
        }
        let branch = MonotoneBranch { lo, hi, kind };
        branch.check_monotone()?;
        Ok(branch)
    }

    pub fn linear(lo: f64, hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        if !y_lo.is_finite() || !y_hi.is_finite() {
            return Err(Error::Construction("non-finite vertex value".into()));
        }
        Self::new(lo, hi, BranchKind::Linear { y_lo, y_hi })
    }

    pub fn quadratic(lo: f64, hi: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        if a != 0.0 {
            let vertex = -b / (2.0 * a);
            if lo < vertex && vertex < hi {
                return Err(Error::Construction(format!(
                    "quadratic vertex {vertex} lies inside [{lo}, {hi}]"
                )));
            }
        }
        Self::new(lo, hi, BranchKind::Quadratic { a, b, c })
    }

    pub fn generic<F>(lo: f64, hi: f64, f: F, increasing: bool) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            lo,
            hi,
            BranchKind::Generic {
                f: Arc::new(f),
                increasing,
            },
        )
    }

    fn check_monotone(&self) -> Result<()> {
        let n = MONOTONE_SAMPLES - 1;
        let ys: Vec<f64> = (0..=n)
            .map(|i| self.eval(self.lo + (self.hi - self.lo) * i as f64 / n as f64))
            .collect();
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::Construction("branch produced a non-finite value".into()));
        }
        let scale = ys.iter().fold(1.0f64, |m, y| m.max(y.abs()));
        let slack = 1e-12 * scale;
        let up = ys.windows(2).all(|w| w[1] >= w[0] - slack);
        let down = ys.windows(2).all(|w| w[1] <= w[0] + slack);
        let ok = match &self.kind {
            BranchKind::Generic { increasing, .. } => {
                if *increasing {
                    up
                } else {
                    down
                }
            }
            _ => up || down,
        };
        if !ok {
            return Err(Error::Construction(format!(
                "branch on [{}, {}] is not monotone",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn sub_domain(&self) -> Interval {
        Interval {
            lo: self.lo,
            hi: self.hi,
        }
    }

    pub fn kind(&self) -> &BranchKind {
        &self.kind
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            BranchKind::Linear { y_lo, y_hi } => {
                let t = (x - self.lo) / (self.hi - self.lo);
                y_lo * (1.0 - t) + y_hi * t
            }
            BranchKind::Quadratic { a, b, c } => (a * x + b) * x + c,
            BranchKind::Generic { f, .. } => f(x),
        }
    }

    pub fn direction(&self) -> Direction {
        let (ya, yb) = match &self.kind {
            BranchKind::Linear { y_lo, y_hi } => (*y_lo, *y_hi),
            _ => (self.eval(self.lo), self.eval(self.hi)),
        };
        if yb > ya {
            Direction::Increasing
        } else if yb < ya {
            Direction::Decreasing
        } else {
            Direction::Constant
        }
    }

    /// Image of `[a, b]`, which must lie in the sub-domain.
    pub fn image(&self, a: f64, b: f64) -> Interval {
        let mut iv = Interval::spanning(self.eval(a), self.eval(b));
        if let BranchKind::Quadratic { a: qa, b: qb, .. } = self.kind {
            if qa != 0.0 {
                let v = -qb / (2.0 * qa);
                if a < v && v < b {
                    iv = iv.hull(&Interval::point(self.eval(v)));
                }
            }
        }
        iv
    }

    /// Some `x` in the sub-domain with `eval(x) = y`; `y` is clamped into
    /// the branch image first. Constant branches return `lo`.
    pub fn inverse(&self, y: f64) -> f64 {
        let (ya, yb) = (self.eval(self.lo), self.eval(self.hi));
        let (ymin, ymax) = if ya <= yb { (ya, yb) } else { (yb, ya) };
        let y = y.clamp(ymin, ymax);
        if y == ya {
            return self.lo;
        }
        if y == yb {
            return self.hi;
        }
        match &self.kind {
            BranchKind::Linear { y_lo, y_hi } => {
                let t = (y - y_lo) / (y_hi - y_lo);
                (self.lo * (1.0 - t) + self.hi * t).clamp(self.lo, self.hi)
            }
            BranchKind::Quadratic { a, b, c } if *a != 0.0 => {
                // a x^2 + b x + (c - y) = 0, numerically stable root pair
                let cc = c - y;
                let disc = (b * b - 4.0 * a * cc).max(0.0);
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                let mut roots = [f64::NAN, f64::NAN];
                if q != 0.0 {
                    roots[0] = q / a;
                    roots[1] = cc / q;
                } else {
                    roots[0] = -b / (2.0 * a);
                }
                let pick = roots
                    .iter()
                    .copied()
                    .filter(|r| r.is_finite())
                    .min_by(|r, s| {
                        Interval::spanning(self.lo, self.hi)
                            .distance_to(*r)
                            .total_cmp(&Interval::spanning(self.lo, self.hi).distance_to(*s))
                    });
                match pick {
                    Some(r) => self.polish(r.clamp(self.lo, self.hi), y),
                    None => self.bisect(y),
                }
            }
            BranchKind::Quadratic { b, c, .. } => ((y - c) / b).clamp(self.lo, self.hi),
            BranchKind::Generic { .. } => self.bisect(y),
        }
    }

    fn polish(&self, x: f64, y: f64) -> f64 {
        // one Newton step keeps the closed-form root within a few ulps
        if let BranchKind::Quadratic { a, b, .. } = self.kind {
            let d = 2.0 * a * x + b;
            if d != 0.0 {
                let nx = x - (self.eval(x) - y) / d;
                if nx.is_finite() {
                    return nx.clamp(self.lo, self.hi);
                }
            }
        }
        x
    }

    fn bisect(&self, y: f64) -> f64 {
        let increasing = self.eval(self.hi) >= self.eval(self.lo);
        let (mut a, mut b) = (self.lo, self.hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (self.eval(m) < y) == increasing {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, BranchKind::Linear { .. })
    }

    /// Exact slope for linear branches.
    pub fn slope(&self) -> Option<f64> {
        match self.kind {
            BranchKind::Linear { y_lo, y_hi } => Some((y_hi - y_lo) / (self.hi - self.lo)),
            _ => None,
        }
    }

    /// Upper bound on `|f'|` over the sub-domain. Exact for linear and
    /// quadratic branches; estimated from difference quotients otherwise.
    pub fn lipschitz_bound(&self) -> f64 {
        match self.kind {
            BranchKind::Linear { .. } => self.slope().unwrap_or(0.0).abs(),
            BranchKind::Quadratic { a, b, .. } => {
                (2.0 * a * self.lo + b).abs().max((2.0 * a * self.hi + b).abs())
            }
            BranchKind::Generic { .. } => {
                let n = 4096;
                let h = (self.hi - self.lo) / n as f64;
                let mut best = 0.0f64;
                let mut prev = self.eval(self.lo);
                for i in 1..=n {
                    let y = self.eval(self.lo + h * i as f64);
                    best = best.max((y - prev).abs() / h);
                    prev = y;
                }
                2.0 * best
            }
        }
    }

    /// `true` when the derivative keeps a strict sign on the open
    /// sub-domain, i.e. the branch is injective.
    pub fn is_strictly_monotone(&self) -> bool {
        match self.kind {
            BranchKind::Linear { .. } => self.slope().is_some_and(|s| s != 0.0),
            BranchKind::Quadratic { a, b, .. } => {
                if a == 0.0 {
                    return b != 0.0;
                }
                let v = -b / (2.0 * a);
                !(self.lo < v && v < self.hi)
            }
            BranchKind::Generic { .. } => {
                let n = MONOTONE_SAMPLES - 1;
                let ys: Vec<f64> = (0..=n)
                    .map(|i| self.eval(self.lo + (self.hi - self.lo) * i as f64 / n as f64))
                    .collect();
                ys.windows(2).all(|w| w[1] > w[0]) || ys.windows(2).all(|w| w[1] < w[0])
            }
        }
    }
}

/// A continuous map whose monotone branches partition its domain.
#[derive(Debug, Clone)]
pub struct PiecewiseMonotoneMap {
    domain: Interval,
    branches: Vec<MonotoneBranch>,
}

impl PiecewiseMonotoneMap {
    pub fn new(branches: Vec<MonotoneBranch>) -> Result<Self> {
        let (Some(first), Some(last)) = (branches.first(), branches.last()) else {
            return Err(Error::Construction("map needs at least one branch".into()));
        };
        let domain = Interval {
            lo: first.lo,
            hi: last.hi,
        };
        for pair in branches.windows(2) {
            let (l, r) = (&pair[0], &pair[1]);
            if l.hi != r.lo {
                return Err(Error::Construction(format!(
                    "branches [{}, {}] and [{}, {}] do not share an endpoint",
                    l.lo, l.hi, r.lo, r.hi
                )));
            }
            let (yl, yr) = (l.eval(l.hi), r.eval(r.lo));
            if (yl - yr).abs() > SEAM_TOL * yl.abs().max(1.0) {
                return Err(Error::Construction(format!(
                    "discontinuity at x = {}: {yl} vs {yr}",
                    l.hi
                )));
            }
        }
        Ok(PiecewiseMonotoneMap { domain, branches })
    }

    /// Piecewise-linear interpolant through `vertices`, sorted by strictly
    /// increasing `x`.
    pub fn from_vertices(vertices: &[(f64, f64)]) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Construction("need at least two vertices".into()));
        }
        let branches = vertices
            .windows(2)
            .map(|w| MonotoneBranch::linear(w[0].0, w[1].0, w[0].1, w[1].1))
            .collect::<Result<Vec<_>>>()?;
        Self::new(branches)
    }

    pub fn affine(domain: Interval, slope: f64, intercept: f64) -> Result<Self> {
        Self::from_vertices(&[
            (domain.lo, slope * domain.lo + intercept),
            (domain.hi, slope * domain.hi + intercept),
        ])
    }

    /// `a x^2 + b x + c` on the whole domain; must be monotone there.
    pub fn quadratic(domain: Interval, a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(vec![MonotoneBranch::quadratic(domain.lo, domain.hi, a, b, c)?])
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn branches(&self) -> &[MonotoneBranch] {
        &self.branches
    }

    fn branch_index(&self, x: f64) -> usize {
        self.branches
            .partition_point(|b| b.hi < x)
            .min(self.branches.len() - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.domain.lo, self.domain.hi);
        self.branches[self.branch_index(x)].eval(x)
    }

    /// Exact image of an interval inside the domain.
    pub fn image(&self, iv: Interval) -> Interval {
        let a = iv.lo.max(self.domain.lo);
        let b = iv.hi.min(self.domain.hi);
        let first = self.branch_index(a);
        let mut out: Option<Interval> = None;
        for br in &self.branches[first..] {
            if br.lo > b {
                break;
            }
            let piece = br.image(a.max(br.lo), b.min(br.hi));
            out = Some(match out {
                Some(o) => o.hull(&piece),
                None => piece,
            });
        }
        out.unwrap_or_else(|| Interval::point(self.eval(a)))
    }

    /// Forward image `T(A)`, normalized.
    pub fn image_set(&self, set: &IntervalSet) -> Result<IntervalSet> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        let raw = set.parts().iter().map(|p| self.image(*p)).collect();
        IntervalSet::normalize_with(raw, set.domain(), set.limits())
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.branches.iter().all(MonotoneBranch::is_linear)
    }

    /// Vertices of a piecewise-linear map.
    pub fn vertices(&self) -> Option<Vec<(f64, f64)>> {
        if !self.is_piecewise_linear() {
            return None;
        }
        let mut out: Vec<(f64, f64)> = self.branches.iter().map(|b| (b.lo, b.eval(b.lo))).collect();
        let last = &self.branches[self.branches.len() - 1];
        out.push((last.hi, last.eval(last.hi)));
        Some(out)
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.branches
            .iter()
            .map(MonotoneBranch::lipschitz_bound)
            .fold(0.0, f64::max)
    }

    /// Injective on `j` iff the branches meeting `j` are strictly monotone
    /// in one common direction.
    pub fn is_injective_on(&self, j: Interval) -> bool {
        let mut dir: Option<Direction> = None;
        for br in &self.branches {
            let lo = br.lo.max(j.lo);
            let hi = br.hi.min(j.hi);
            if lo >= hi {
                continue;
            }
            if !br.is_strictly_monotone() {
                return false;
            }
            let d = br.direction();
            match dir {
                None => dir = Some(d),
                Some(prev) if prev != d => return false,
                _ => {}
            }
        }
        dir.is_some() || j.lo == j.hi
    }
}
