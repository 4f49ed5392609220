//! Chaos-game orbits and their tail sets.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ifs::Ifs;
use crate::intervals::{fmt17, Interval, IntervalSet, SetLimits};
use crate::symbolic::SymbolStream;

/// `points[n] = T_{ξ_n} ∘ … ∘ T_{ξ_0}(x0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub x0: f64,
    pub points: Vec<f64>,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV rows `n,x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,x\n");
        for (n, x) in self.points.iter().enumerate() {
            let _ = writeln!(out, "{n},{}", fmt17(*x));
        }
        out
    }
}

pub fn orbit(ifs: &Ifs, x0: f64, stream: &SymbolStream, n: usize) -> Result<Orbit> {
    let d = ifs.domain();
    if !d.contains(x0) {
        return Err(Error::OutsideDomain {
            lo: x0,
            hi: x0,
            domain_lo: d.lo,
            domain_hi: d.hi,
        });
    }
    if n == 0 {
        return Err(Error::Parameter("orbit length must be >= 1".into()));
    }
    if stream.alphabet_size() != ifs.k() {
        return Err(Error::Shape(format!(
            "stream over {} symbols for {} maps",
            stream.alphabet_size(),
            ifs.k()
        )));
    }
    let mut x = x0;
    let points = stream
        .iter()
        .take(n)
        .map(|s| {
            // clamp guards against rounding just outside the domain
            x = ifs.maps()[s - 1].eval(x).clamp(d.lo, d.hi);
            x
        })
        .collect();
    Ok(Orbit { x0, points })
}

/// Resolution-cover of `{x_n : n >= from}`.
pub fn tail_cover(orbit: &Orbit, from: usize, resolution: f64, domain: Interval) -> Result<IntervalSet> {
    if from >= orbit.len() {
        return Err(Error::Parameter(format!(
            "tail index {from} beyond orbit length {}",
            orbit.len()
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::Parameter("resolution must be > 0".into()));
    }
    let r = resolution / 2.0;
    let raw = orbit.points[from..]
        .iter()
        .map(|&x| Interval {
            lo: (x - r).max(domain.lo),
            hi: (x + r).min(domain.hi),
        })
        .collect();
    let limits = SetLimits {
        max_parts: SetLimits::default().max_parts.max(orbit.len()),
        ..SetLimits::default()
    };
    IntervalSet::normalize_with(raw, domain, limits)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChaosMode {
    Disjunctive,
    Bernoulli { weights: Vec<f64>, seed: u64 },
}

impl ChaosMode {
    pub fn stream(&self, k: usize) -> Result<SymbolStream> {
        match self {
            ChaosMode::Disjunctive => SymbolStream::disjunctive(k),
            ChaosMode::Bernoulli { weights, seed } => SymbolStream::bernoulli(weights, *seed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChaosReport {
    pub tail: IntervalSet,
    pub distance: f64,
    pub tol: f64,
    pub pass: bool,
    pub n: usize,
    pub tail_from: usize,
}

impl ChaosReport {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "n={}\ntail_from={}\ntail_parts={}\nhausdorff={}\ntol={}\nverdict={}\n",
            self.n,
            self.tail_from,
            self.tail.len(),
            fmt17(self.distance),
            fmt17(self.tol),
            if self.pass { "pass" } else { "fail" }
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChaosParams {
    pub x0: f64,
    pub n: usize,
    pub tail_from: usize,
    pub resolution: f64,
}

/// Compares the tail cover against `reference`, passing when the Hausdorff
/// distance is at most `max(2 resolution, 2 reference_tol)`.
///
/// A failure only reports what was measured at this orbit length.
pub fn chaos_probe(
    ifs: &Ifs,
    mode: &ChaosMode,
    params: ChaosParams,
    reference: Option<&IntervalSet>,
    reference_tol: f64,
) -> Result<ChaosReport> {
    let reference = reference.ok_or_else(|| Error::Parameter("chaos probe needs a reference set".into()))?;
    let stream = mode.stream(ifs.k())?;
    let orb = orbit(ifs, params.x0, &stream, params.n)?;
    let tail = tail_cover(&orb, params.tail_from, params.resolution, ifs.domain())?;
    let distance = tail.hausdorff(reference)?;
    let tol = (2.0 * params.resolution).max(2.0 * reference_tol);
    Ok(ChaosReport {
        tail,
        distance,
        tol,
        pass: distance <= tol,
        n: params.n,
        tail_from: params.tail_from,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::PiecewiseMonotoneMap;
    use crate::presets;
    use crate::symbolic::Word;

    const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    #[test]
    fn halving_orbit() {
        let ifs = Ifs::new(vec![PiecewiseMonotoneMap::affine(UNIT, 0.5, 0.0).unwrap()]).unwrap();
        let o = orbit(&ifs, 1.0, &SymbolStream::constant(1, 1).unwrap(), 10).unwrap();
        for (n, x) in o.points.iter().enumerate() {
            assert_eq!(*x, 0.5f64.powi(n as i32 + 1));
        }
        let tail = tail_cover(&o, 9, 1e-6, UNIT).unwrap();
        assert_eq!(tail.len(), 1);
        assert!(tail.parts()[0].contains(2f64.powi(-10)));
    }

    #[test]
    fn flip_orbit_is_constant() {
        let o = orbit(&presets::flip(), 0.5, &SymbolStream::disjunctive(2).unwrap(), 100).unwrap();
        assert!(o.points.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn cantor_orbit_first_points() {
        let s = SymbolStream::periodic(Word::new(2, vec![1, 2]).unwrap()).unwrap();
        let o = orbit(&presets::cantor(), 0.5, &s, 2).unwrap();
        assert!((o.points[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((o.points[1] - 13.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_outside_start_and_missing_reference() {
        let c = presets::cantor();
        let s = SymbolStream::disjunctive(2).unwrap();
        assert!(matches!(orbit(&c, 1.5, &s, 5), Err(Error::OutsideDomain { .. })));
        let params = ChaosParams {
            x0: 0.5,
            n: 10,
            tail_from: 0,
            resolution: 1e-3,
        };
        assert!(chaos_probe(&c, &ChaosMode::Disjunctive, params, None, 0.0).is_err());
    }

    #[test]
    fn csv_and_report_format() {
        let o = Orbit {
            x0: 0.0,
            points: vec![0.25],
        };
        assert_eq!(o.to_csv(), "n,x\n0,2.5000000000000000e-1\n");
    }
}
