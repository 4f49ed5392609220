//! Finite unions of closed intervals: the computable stand-in for nonempty
//! compact subsets of a closed real interval.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A closed interval `[lo, hi]` with `lo <= hi`; `lo == hi` is a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::MalformedInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Interval spanned by two values in either order.
    pub fn spanning(a: f64, b: f64) -> Self {
        if a <= b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Closed intervals are disjoint iff one ends strictly before the other starts.
    pub fn is_disjoint(&self, other: &Interval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn distance_to(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

/// Numerical limits carried by every [`IntervalSet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetLimits {
    /// Gaps of at most this width are closed during normalization.
    pub merge_eps: f64,
    pub max_parts: usize,
}

impl Default for SetLimits {
    fn default() -> Self {
        SetLimits {
            merge_eps: 1e-12,
            max_parts: 1 << 16,
        }
    }
}

/// Sorted, pairwise disjoint closed intervals inside a fixed domain.
///
/// A set with no parts is the empty sentinel; it can be built and compared
/// but metric operations reject it.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    domain: Interval,
    parts: Vec<Interval>,
    limits: SetLimits,
}

impl IntervalSet {
    /// Sorts and merges `raw` (touching or overlapping parts fuse).
    pub fn normalize(raw: Vec<Interval>, domain: Interval) -> Result<Self> {
        Self::normalize_with(raw, domain, SetLimits::default())
    }

    pub fn normalize_with(mut raw: Vec<Interval>, domain: Interval, limits: SetLimits) -> Result<Self> {
        check_domain(domain)?;
        for iv in raw.iter_mut() {
            if !(iv.lo <= iv.hi) || !iv.lo.is_finite() || !iv.hi.is_finite() {
                return Err(Error::MalformedInterval { lo: iv.lo, hi: iv.hi });
            }
            let slack = limits.merge_eps;
            if iv.lo < domain.lo - slack || iv.hi > domain.hi + slack {
                return Err(Error::OutsideDomain {
                    lo: iv.lo,
                    hi: iv.hi,
                    domain_lo: domain.lo,
                    domain_hi: domain.hi,
                });
            }
            iv.lo = iv.lo.clamp(domain.lo, domain.hi);
            iv.hi = iv.hi.clamp(domain.lo, domain.hi);
        }
        raw.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut parts: Vec<Interval> = Vec::with_capacity(raw.len().min(limits.max_parts));
        for iv in raw {
            match parts.last_mut() {
                Some(last) if iv.lo <= last.hi + limits.merge_eps => {
                    last.hi = last.hi.max(iv.hi);
                }
                _ => {
                    if parts.len() == limits.max_parts {
                        return Err(Error::PartOverflow {
                            limit: limits.max_parts,
                        });
                    }
                    parts.push(iv);
                }
            }
        }
        Ok(IntervalSet {
            domain,
            parts,
            limits,
        })
    }

    pub fn empty(domain: Interval) -> Self {
        IntervalSet {
            domain,
            parts: Vec::new(),
            limits: SetLimits::default(),
        }
    }

    /// The whole domain as a one-part set.
    pub fn full(domain: Interval) -> Self {
        IntervalSet {
            domain,
            parts: vec![domain],
            limits: SetLimits::default(),
        }
    }

    pub fn from_interval(iv: Interval, domain: Interval) -> Result<Self> {
        Self::normalize(vec![iv], domain)
    }

    pub fn with_limits(mut self, limits: SetLimits) -> Result<Self> {
        if self.parts.len() > limits.max_parts {
            return Err(Error::PartOverflow {
                limit: limits.max_parts,
            });
        }
        self.limits = limits;
        Ok(self)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn limits(&self) -> SetLimits {
        self.limits
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    fn nonempty(&self) -> Result<()> {
        if self.parts.is_empty() {
            Err(Error::EmptySet)
        } else {
            Ok(())
        }
    }

    fn rebuild(&self, raw: Vec<Interval>) -> Result<Self> {
        Self::normalize_with(raw, self.domain, self.limits)
    }

    /// `max - min` over the set.
    pub fn diam(&self) -> Result<f64> {
        self.nonempty()?;
        Ok(self.parts[self.parts.len() - 1].hi - self.parts[0].lo)
    }

    /// Total length (Lebesgue measure).
    pub fn measure(&self) -> f64 {
        self.parts.iter().map(Interval::width).sum()
    }

    pub fn hull(&self) -> Result<Interval> {
        self.nonempty()?;
        Ok(Interval {
            lo: self.parts[0].lo,
            hi: self.parts[self.parts.len() - 1].hi,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        let i = self.parts.partition_point(|p| p.hi < x);
        i < self.parts.len() && self.parts[i].lo <= x
    }

    /// Euclidean distance from `x` to the nearest point of the set.
    pub fn distance_to(&self, x: f64) -> Result<f64> {
        self.nonempty()?;
        let i = self.parts.partition_point(|p| p.hi < x);
        let mut best = f64::INFINITY;
        if i < self.parts.len() {
            best = self.parts[i].distance_to(x);
        }
        if i > 0 {
            best = best.min(self.parts[i - 1].distance_to(x));
        }
        Ok(best)
    }

    /// One-sided distance `sup_{a in self} d(a, other)`.
    ///
    /// On each part the distance to `other` is piecewise linear, so its
    /// maximum sits at a part endpoint or at the midpoint of a gap of `other`.
    pub fn excess_over(&self, other: &IntervalSet) -> Result<f64> {
        self.nonempty()?;
        other.nonempty()?;
        let mut worst = 0.0f64;
        for p in &self.parts {
            worst = worst.max(other.distance_to(p.lo)?);
            worst = worst.max(other.distance_to(p.hi)?);
        }
        for gap in other.parts.windows(2) {
            let mid = 0.5 * (gap[0].hi + gap[1].lo);
            if self.contains(mid) {
                worst = worst.max(0.5 * (gap[1].lo - gap[0].hi));
            }
        }
        Ok(worst)
    }

    /// Hausdorff distance `max(h(A, B), h(B, A))`.
    pub fn hausdorff(&self, other: &IntervalSet) -> Result<f64> {
        Ok(self.excess_over(other)?.max(other.excess_over(self)?))
    }

    /// `true` iff every point of `self` is within `tol` of `other`.
    pub fn subset_within(&self, other: &IntervalSet, tol: f64) -> Result<bool> {
        Ok(self.excess_over(other)? <= tol)
    }

    /// Closed `eps`-neighbourhood, clipped to the domain.
    pub fn fatten(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::Parameter(format!("fatten radius {eps} must be >= 0")));
        }
        self.nonempty()?;
        let d = self.domain;
        let raw = self
            .parts
            .iter()
            .map(|p| Interval {
                lo: (p.lo - eps).max(d.lo),
                hi: (p.hi + eps).min(d.hi),
            })
            .collect();
        self.rebuild(raw)
    }

    /// Fattens by `resolution / 2`, closing gaps narrower than `resolution`.
    pub fn coarsen(&self, resolution: f64) -> Result<Self> {
        self.fatten(0.5 * resolution)
    }

    pub fn union(&self, other: &IntervalSet) -> Result<Self> {
        check_same_domain(self, other)?;
        let mut raw = self.parts.clone();
        raw.extend_from_slice(&other.parts);
        self.rebuild(raw)
    }

    pub fn intersection(&self, other: &IntervalSet) -> Result<Self> {
        check_same_domain(self, other)?;
        let (mut i, mut j) = (0, 0);
        let mut raw = Vec::new();
        while i < self.parts.len() && j < other.parts.len() {
            let (a, b) = (self.parts[i], other.parts[j]);
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if lo <= hi {
                raw.push(Interval { lo, hi });
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        self.rebuild(raw)
    }

    /// Closure of `self \ other`.
    pub fn difference(&self, other: &IntervalSet) -> Result<Self> {
        check_same_domain(self, other)?;
        let mut raw = Vec::new();
        let mut j = 0;
        for p in &self.parts {
            let mut lo = p.lo;
            while j < other.parts.len() && other.parts[j].hi < lo {
                j += 1;
            }
            let mut jj = j;
            while jj < other.parts.len() && other.parts[jj].lo <= p.hi {
                let q = other.parts[jj];
                if q.lo > lo {
                    raw.push(Interval { lo, hi: q.lo });
                }
                lo = lo.max(q.hi);
                jj += 1;
            }
            if lo < p.hi {
                raw.push(Interval { lo, hi: p.hi });
            } else if lo == p.lo && lo == p.hi && !other.contains(lo) {
                raw.push(*p);
            }
        }
        self.rebuild(raw)
    }

    pub fn intersects_interval(&self, iv: &Interval) -> bool {
        let i = self.parts.partition_point(|p| p.hi < iv.lo);
        i < self.parts.len() && self.parts[i].lo <= iv.hi
    }

    /// CSV text: header `# domain lo hi`, then one `a,b` line per part with
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# domain {} {}\n", fmt17(self.domain.lo), fmt17(self.domain.hi));
        for p in &self.parts {
            let _ = writeln!(out, "{},{}", fmt17(p.lo), fmt17(p.hi));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut domain = None;
        let mut raw = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            let perr = |msg: String| Error::Parse { line: n + 1, msg };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.first() == Some(&"domain") {
                    if fields.len() != 3 {
                        return Err(perr("expected `# domain lo hi`".into()));
                    }
                    let lo = parse_f64(fields[1]).map_err(perr)?;
                    let hi = parse_f64(fields[2]).map_err(perr)?;
                    domain = Some(Interval { lo, hi });
                }
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| perr("expected `a,b`".into()))?;
            let lo = parse_f64(a.trim()).map_err(perr)?;
            let hi = parse_f64(b.trim()).map_err(perr)?;
            raw.push(Interval::new(lo, hi)?);
        }
        let domain = domain.ok_or(Error::Parse {
            line: 1,
            msg: "missing `# domain lo hi` header".into(),
        })?;
        Self::normalize(raw, domain)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    // adding 0.0 turns -0.0 into 0.0
    format!("{:.16e}", x + 0.0)
}

pub(crate) fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|e| format!("bad number `{s}`: {e}"))
}

fn check_domain(d: Interval) -> Result<()> {
    if !(d.lo < d.hi) || !d.lo.is_finite() || !d.hi.is_finite() {
        return Err(Error::Parameter(format!(
            "domain [{}, {}] must satisfy lo < hi",
            d.lo, d.hi
        )));
    }
    Ok(())
}

fn check_same_domain(a: &IntervalSet, b: &IntervalSet) -> Result<()> {
    if a.domain != b.domain {
        return Err(Error::Shape(format!(
            "domains differ: [{}, {}] vs [{}, {}]",
            a.domain.lo, a.domain.hi, b.domain.lo, b.domain.hi
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    fn set(parts: &[(f64, f64)]) -> IntervalSet {
        let raw = parts.iter().map(|&(a, b)| Interval::new(a, b).unwrap()).collect();
        IntervalSet::normalize(raw, UNIT).unwrap()
    }

    #[test]
    fn normalize_merges() {
        assert_eq!(set(&[(0.0, 0.5), (0.4, 1.0)]).parts(), &[UNIT]);
        assert_eq!(set(&[(0.0, 0.5), (0.5, 1.0)]).parts(), &[UNIT]);
        let cantor1 = set(&[(2.0 / 3.0, 1.0), (0.0, 1.0 / 3.0)]);
        assert_eq!(cantor1.len(), 2);
        assert_eq!(cantor1.parts()[0].hi, 1.0 / 3.0);
    }

    #[test]
    fn normalize_errors() {
        let raw = vec![Interval { lo: 0.5, hi: 1.5 }];
        assert!(matches!(
            IntervalSet::normalize(raw, UNIT),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(matches!(
            Interval::new(0.6, 0.2),
            Err(Error::MalformedInterval { .. })
        ));
        let raw = vec![Interval { lo: 0.6, hi: 0.2 }];
        assert!(matches!(
            IntervalSet::normalize(raw, UNIT),
            Err(Error::MalformedInterval { .. })
        ));
    }

    #[test]
    fn overflow_is_reported() {
        let limits = SetLimits {
            merge_eps: 1e-12,
            max_parts: 3,
        };
        let raw = (0..4).map(|i| Interval::point(i as f64 / 4.0)).collect();
        assert!(matches!(
            IntervalSet::normalize_with(raw, UNIT, limits),
            Err(Error::PartOverflow { limit: 3 })
        ));
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(set(&[(0.0, 1.0)]).hausdorff(&set(&[(0.0, 1.0)])).unwrap(), 0.0);
        assert_eq!(set(&[(0.0, 0.0)]).hausdorff(&set(&[(1.0, 1.0)])).unwrap(), 1.0);
        let c1 = set(&[(0.0, 1.0 / 3.0), (2.0 / 3.0, 1.0)]);
        let d = c1.hausdorff(&set(&[(0.0, 1.0)])).unwrap();
        assert!((d - 1.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            IntervalSet::empty(UNIT).hausdorff(&c1),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn fatten_examples() {
        let f = set(&[(0.5, 0.5)]).fatten(0.1).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f.parts()[0].lo - 0.4).abs() < 1e-15 && (f.parts()[0].hi - 0.6).abs() < 1e-15);
        assert_eq!(set(&[(0.0, 1.0)]).fatten(0.3).unwrap().parts(), &[UNIT]);
        assert_eq!(set(&[(0.0, 0.0), (1.0, 1.0)]).fatten(0.6).unwrap().parts(), &[UNIT]);
        assert!(matches!(set(&[(0.0, 1.0)]).fatten(-1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn diam_measure_contains() {
        let c1 = set(&[(0.0, 1.0 / 3.0), (2.0 / 3.0, 1.0)]);
        assert_eq!(c1.diam().unwrap(), 1.0);
        assert!((c1.measure() - 2.0 / 3.0).abs() < 1e-15);
        assert!(c1.contains(0.0) && c1.contains(1.0 / 3.0) && !c1.contains(0.5));
        assert!(set(&[(0.1, 0.2)]).subset_within(&set(&[(0.0, 1.0)]), 0.0).unwrap());
        assert!(IntervalSet::empty(UNIT).diam().is_err());
    }

    #[test]
    fn set_algebra() {
        let a = set(&[(0.0, 0.4), (0.6, 1.0)]);
        let b = set(&[(0.2, 0.7)]);
        assert_eq!(
            a.intersection(&b).unwrap(),
            set(&[(0.2, 0.4), (0.6, 0.7)])
        );
        assert_eq!(a.difference(&b).unwrap(), set(&[(0.0, 0.2), (0.7, 1.0)]));
        assert_eq!(a.union(&b).unwrap().parts(), &[UNIT]);
        let pts = set(&[(0.1, 0.1), (0.5, 0.5)]);
        assert_eq!(pts.difference(&b).unwrap(), set(&[(0.1, 0.1)]));
    }

    #[test]
    fn csv_round_trip() {
        let c = set(&[(0.0, 1.0 / 3.0), (2.0 / 3.0, 1.0), (0.5, 0.5)]);
        let text = c.to_csv();
        assert!(text.starts_with("# domain 0.0000000000000000e0 1.0000000000000000e0\n"));
        assert_eq!(IntervalSet::from_csv(&text).unwrap(), c);
        assert!(IntervalSet::from_csv("0,1\n").is_err());
    }
}
