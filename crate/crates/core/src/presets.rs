//! Named example systems.
//!
//! | name             | maps                                                         |
//! |------------------|--------------------------------------------------------------|
//! | `cantor`         | `x/3`, `x/3 + 2/3` on `[0,1]`                                |
//! | `example-3-4`    | `x/3`; `x/3 + 2/3` on `[0,1]`, identity on `[1,2]`; on `[0,2]` |
//! | `figure-2`       | `x + 1/2` then `1`; `0` then `x - 1/2`                       |
//! | `flip`           | `x`, `1 - x`                                                 |
//! | `nonregular-6-1` | `-x^2 + 2x`; piecewise linear through (0,.1),(.33,.25),(.45,.52),(1,.7) |
//! | `porcupine-6-2`  | `0.9 (1 - x)`, `-x^2 + 2x`                                   |
//! | `bony-6-3`       | vertices (0,0),(.6,.2),(1,.8); (0,.15),(.4,.8),(1,1)         |

use crate::error::{Error, Result};
use crate::ifs::Ifs;
use crate::intervals::Interval;
use crate::maps::PiecewiseMonotoneMap;

pub const NAMES: [&str; 7] = [
    "cantor",
    "example-3-4",
    "figure-2",
    "flip",
    "nonregular-6-1",
    "porcupine-6-2",
    "bony-6-3",
];

/// Contraction factor of the first porcupine map `λ(1 - x)`.
pub const PORCUPINE_LAMBDA: f64 = 0.9;

const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

pub fn by_name(name: &str) -> Result<Ifs> {
    match name {
        "cantor" => Ok(cantor()),
        "example-3-4" => Ok(example_3_4()),
        "figure-2" => Ok(figure_2()),
        "flip" => Ok(flip()),
        "nonregular-6-1" => nonregular_6_1(),
        "porcupine-6-2" => Ok(porcupine_6_2()),
        "bony-6-3" => Ok(bony_6_3()),
        other => Err(Error::Parameter(format!(
            "unknown preset `{other}`; known: {}",
            NAMES.join(", ")
        ))),
    }
}

fn pl(vertices: &[(f64, f64)]) -> PiecewiseMonotoneMap {
    PiecewiseMonotoneMap::from_vertices(vertices).expect("preset vertices are valid")
}

fn build(maps: Vec<PiecewiseMonotoneMap>) -> Ifs {
    Ifs::new(maps).expect("preset maps are self-maps of their domain")
}

pub fn cantor() -> Ifs {
    build(vec![
        pl(&[(0.0, 0.0), (1.0, 1.0 / 3.0)]),
        pl(&[(0.0, 2.0 / 3.0), (1.0, 1.0)]),
    ])
}

/// Cantor maps on `[0, 2]`, the second one fixing `[1, 2]` pointwise.
pub fn example_3_4() -> Ifs {
    build(vec![
        pl(&[(0.0, 0.0), (2.0, 2.0 / 3.0)]),
        pl(&[(0.0, 2.0 / 3.0), (1.0, 1.0), (2.0, 2.0)]),
    ])
}

/// Non-injective pair whose target set is `{0, 1/2, 1}`.
pub fn figure_2() -> Ifs {
    build(vec![
        pl(&[(0.0, 0.5), (0.5, 1.0), (1.0, 1.0)]),
        pl(&[(0.0, 0.0), (0.5, 0.0), (1.0, 0.5)]),
    ])
}

/// Two isometries; no weakly hyperbolic sequence exists.
pub fn flip() -> Ifs {
    build(vec![
        pl(&[(0.0, 0.0), (1.0, 1.0)]),
        pl(&[(0.0, 1.0), (1.0, 0.0)]),
    ])
}

pub fn nonregular_6_1() -> Result<Ifs> {
    let ifs = build(vec![
        PiecewiseMonotoneMap::quadratic(UNIT, -1.0, 2.0, 0.0)?,
        pl(&[(0.0, 0.1), (0.33, 0.25), (0.45, 0.52), (1.0, 0.7)]),
    ]);
    verify_nonregular(&ifs)?;
    Ok(ifs)
}

/// Re-checks the qualitative shape: `T_2` has exactly three fixed points
/// (attracting, repelling, attracting), `T_2([0,1]) = [α, β] ⊂ (0,1)` and
/// `T_1(p_1) < β`.
fn verify_nonregular(ifs: &Ifs) -> Result<()> {
    let t1 = &ifs.maps()[0];
    let t2 = &ifs.maps()[1];
    let mut fixed = Vec::new();
    for br in t2.branches() {
        let s = br.slope().expect("linear branch");
        let d = br.sub_domain();
        let x = (br.eval(d.lo) - s * d.lo) / (1.0 - s);
        if d.lo <= x && x <= d.hi && fixed.last().is_none_or(|&(p, _)| x > p) {
            fixed.push((x, s.abs() < 1.0));
        }
    }
    let shape_ok = fixed.len() == 3 && fixed[0].1 && !fixed[1].1 && fixed[2].1;
    let range = t2.image(UNIT);
    let beta = range.hi;
    if !shape_ok || !(range.lo > 0.0 && beta < 1.0) || !(t1.eval(fixed[0].0) < beta) {
        return Err(Error::Construction(
            "nonregular preset lost its fixed-point structure".into(),
        ));
    }
    Ok(())
}

pub fn porcupine_6_2() -> Ifs {
    build(vec![
        PiecewiseMonotoneMap::affine(UNIT, -PORCUPINE_LAMBDA, PORCUPINE_LAMBDA)
            .expect("valid affine map"),
        PiecewiseMonotoneMap::quadratic(UNIT, -1.0, 2.0, 0.0).expect("monotone on [0,1]"),
    ])
}

pub fn bony_6_3() -> Ifs {
    build(vec![
        pl(&[(0.0, 0.0), (0.6, 0.2), (1.0, 0.8)]),
        pl(&[(0.0, 0.15), (0.4, 0.8), (1.0, 1.0)]),
    ])
}
