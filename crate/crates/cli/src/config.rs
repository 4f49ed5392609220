//! Flat run configuration: `key = value` lines plus `[map]` blocks.
//!
//! ```text
//! # two Cantor maps
//! domain = 0 1
//! weights = 1/2, 1/2
//! [map]
//! vertices = 0 0, 1 1/3
//! [map]
//! vertices = 0 2/3, 1 1
//! ```
//!
//! A map block holds either `vertices = x y, x y, ...` (piecewise linear) or
//! `quadratic = a b c` (`a x^2 + b x + c` on the domain). `preset = name`
//! replaces the map blocks.

use std::path::{Path, PathBuf};

use ifslab::stochastic::parse_ratio;
use ifslab::{presets, Ifs, Interval, PiecewiseMonotoneMap, TransitionMatrix};

use crate::Failure;

#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub domain: Option<Interval>,
    pub maps: Vec<MapSpec>,
    pub weights: Option<Vec<f64>>,
    pub matrix: Option<TransitionMatrix>,
    pub tol: Option<f64>,
    pub merge_eps: Option<f64>,
    pub max_depth: Option<usize>,
    pub max_iter: Option<usize>,
    pub bins: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapSpec {
    Vertices(Vec<(f64, f64)>),
    Quadratic(f64, f64, f64),
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("line {line}: {msg}"))
}

fn number(s: &str, line: usize) -> Result<f64, Failure> {
    parse_ratio(s.trim()).map_err(|e| bad(line, e))
}

fn numbers(s: &str, line: usize) -> Result<Vec<f64>, Failure> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| number(t, line))
        .collect()
}

fn positive(v: f64, key: &str, line: usize) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(line, format!("{key} must be > 0")))
    }
}

fn count<T: std::str::FromStr>(s: &str, key: &str, line: usize) -> Result<T, Failure> {
    s.trim()
        .parse()
        .map_err(|_| bad(line, format!("{key} expects a non-negative integer, got `{s}`")))
}

/// `rows` separated by `;`, entries by `,` or spaces.
pub fn parse_matrix_inline(s: &str) -> Result<TransitionMatrix, Failure> {
    let rows = s
        .split(';')
        .map(|r| numbers(r, 0))
        .collect::<Result<Vec<_>, _>>()?;
    TransitionMatrix::from_rows(&rows).map_err(|e| Failure::Config(e.to_string()))
}

pub fn load_matrix(path: &Path) -> Result<TransitionMatrix, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    TransitionMatrix::from_csv(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

pub fn parse_weights(s: &str) -> Result<Vec<f64>, Failure> {
    numbers(s, 0)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().map(Path::to_path_buf))
    }

    /// `base` resolves relative matrix paths.
    pub fn parse(text: &str, base: Option<PathBuf>) -> Result<Self, Failure> {
        let mut cfg = RunConfig::default();
        let mut in_map = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                if content != "[map]" {
                    return Err(bad(line, format!("unknown block {content}")));
                }
                in_map = true;
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| bad(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if in_map {
                let spec = match key {
                    "vertices" => {
                        let vertices = value
                            .split(',')
                            .map(|pair| match numbers(pair, line)?.as_slice() {
                                [x, y] => Ok((*x, *y)),
                                _ => Err(bad(line, format!("vertex `{}` needs two numbers", pair.trim()))),
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        MapSpec::Vertices(vertices)
                    }
                    "quadratic" => match numbers(value, line)?.as_slice() {
                        [a, b, c] => MapSpec::Quadratic(*a, *b, *c),
                        _ => return Err(bad(line, "quadratic needs three coefficients a b c")),
                    },
                    other => return Err(bad(line, format!("unknown map key `{other}`"))),
                };
                cfg.maps.push(spec);
                in_map = false;
                continue;
            }
            match key {
                "preset" => cfg.preset = Some(value.to_string()),
                "domain" => match numbers(value, line)?.as_slice() {
                    [lo, hi] if lo < hi => cfg.domain = Some(Interval { lo: *lo, hi: *hi }),
                    _ => return Err(bad(line, "domain needs `lo hi` with lo < hi")),
                },
                "weights" => cfg.weights = Some(numbers(value, line)?),
                "matrix" => {
                    cfg.matrix = Some(if value.contains(';') {
                        parse_matrix_inline(value)?
                    } else {
                        let p = Path::new(value);
                        let full = match &base {
                            Some(b) if p.is_relative() => b.join(p),
                            _ => p.to_path_buf(),
                        };
                        load_matrix(&full)?
                    })
                }
                "tol" => cfg.tol = Some(positive(number(value, line)?, key, line)?),
                "merge_eps" => cfg.merge_eps = Some(positive(number(value, line)?, key, line)?),
                "max_depth" => cfg.max_depth = Some(count(value, key, line)?),
                "max_iter" => cfg.max_iter = Some(count(value, key, line)?),
                "bins" => cfg.bins = Some(count(value, key, line)?),
                "samples" => cfg.samples = Some(count(value, key, line)?),
                "seed" => cfg.seed = Some(count(value, key, line)?),
                other => return Err(bad(line, format!("unknown key `{other}`"))),
            }
        }
        if in_map {
            return Err(Failure::Config("[map] block without a map".into()));
        }
        match (&cfg.preset, cfg.maps.is_empty()) {
            (Some(_), false) => Err(Failure::Config("give either `preset` or [map] blocks, not both".into())),
            (None, true) => Err(Failure::Config("no preset and no [map] blocks".into())),
            _ => Ok(cfg),
        }
    }

    pub fn build_ifs(&self) -> Result<Ifs, Failure> {
        let config = |e: ifslab::Error| Failure::Config(e.to_string());
        if let Some(name) = &self.preset {
            return presets::by_name(name).map_err(config);
        }
        let domain = self.domain;
        let maps = self
            .maps
            .iter()
            .map(|spec| match spec {
                MapSpec::Vertices(v) => PiecewiseMonotoneMap::from_vertices(v),
                MapSpec::Quadratic(a, b, c) => {
                    let d = domain.unwrap_or(Interval { lo: 0.0, hi: 1.0 });
                    PiecewiseMonotoneMap::quadratic(d, *a, *b, *c)
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(config)?;
        let ifs = Ifs::new(maps).map_err(config)?;
        if let Some(d) = domain {
            if ifs.domain() != d {
                return Err(Failure::Config(format!(
                    "maps live on [{}, {}] but domain says [{}, {}]",
                    ifs.domain().lo,
                    ifs.domain().hi,
                    d.lo,
                    d.hi
                )));
            }
        }
        Ok(ifs)
    }
}
