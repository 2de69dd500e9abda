//! The tunable hyperparameter space and its unit-cube encoding.
//!
//! Every tunable parameter maps a coordinate in [0, 1] to a value: integers
//! by an affine map with half-up rounding, reals by an affine map, booleans
//! by a 0.5 threshold, and the node-size parameter by the power transform
//! `x -> round(base^x)` which concentrates mass on small node sizes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::TaskKind;
use crate::error::{Error, Result};

/// Default cap on grid sizes.
pub const GRID_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    IntegerRange { lo: i64, hi: i64 },
    ContinuousRange { lo: f64, hi: f64 },
    Boolean,
    /// Monotone map `x -> clamp(round(base^x), lo, hi)` over x in [0, 1].
    PowerInteger { base: f64, lo: i64, hi: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub specs: Vec<ParamSpec>,
}

/// A point in the unit cube, one coordinate per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPoint(pub Vec<f64>);

/// A decoded parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl ParamValue {
    pub fn as_f64(self) -> f64 {
        match self {
            ParamValue::Int(v) => v as f64,
            ParamValue::Float(v) => v,
            ParamValue::Bool(b) => {
                if b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Round half-up for non-negative values.
fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

impl ParamSpec {
    /// Integer ranges may be degenerate (lo == hi, a constant); continuous
    /// ranges must be proper.
    fn new(name: &str, kind: ParamKind) -> Result<ParamSpec> {
        match &kind {
            ParamKind::IntegerRange { lo, hi } if lo > hi => {
                return Err(Error::Space(format!(
                    "parameter {name}: lo {lo} exceeds hi {hi}"
                )))
            }
            ParamKind::ContinuousRange { lo, hi } if lo >= hi => {
                return Err(Error::Space(format!(
                    "parameter {name}: lo {lo} must be below hi {hi}"
                )))
            }
            ParamKind::PowerInteger { base, lo, hi } => {
                if *base < 1.0 {
                    return Err(Error::Space(format!(
                        "parameter {name}: power base {base} must be at least 1"
                    )));
                }
                if lo > hi {
                    return Err(Error::Space(format!(
                        "parameter {name}: lo {lo} exceeds hi {hi}"
                    )));
                }
            }
            _ => {}
        }
        Ok(ParamSpec {
            name: name.to_string(),
            kind,
        })
    }

    /// Decode one coordinate; inputs are clamped into [0, 1] first, so the
    /// map is total.
    pub fn decode(&self, coordinate: f64) -> ParamValue {
        let x = coordinate.clamp(0.0, 1.0);
        match &self.kind {
            ParamKind::IntegerRange { lo, hi } => {
                let raw = *lo as f64 + x * (*hi - *lo) as f64;
                let v = round_half_up(raw) as i64;
                ParamValue::Int(v.clamp(*lo, *hi))
            }
            // lerp form hits both endpoints exactly
            ParamKind::ContinuousRange { lo, hi } => {
                ParamValue::Float((1.0 - x) * lo + x * hi)
            }
            ParamKind::Boolean => ParamValue::Bool(x >= 0.5),
            ParamKind::PowerInteger { base, lo, hi } => {
                let v = round_half_up(base.powf(x)) as i64;
                ParamValue::Int(v.clamp(*lo, *hi))
            }
        }
    }
}

impl std::fmt::Display for ParamSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            ParamKind::IntegerRange { lo, hi } => {
                write!(f, "{:<16} integer    [{lo}, {hi}]", self.name)
            }
            ParamKind::ContinuousRange { lo, hi } => {
                write!(f, "{:<16} continuous [{lo}, {hi}]", self.name)
            }
            ParamKind::Boolean => write!(f, "{:<16} boolean    {{false, true}}", self.name),
            ParamKind::PowerInteger { base, lo, hi } => write!(
                f,
                "{:<16} integer    [{lo}, {hi}] via round({base}^x)",
                self.name
            ),
        }
    }
}

impl std::fmt::Display for ParamSpace {
    /// One `name / bounds / transform` line per parameter, for tuning logs.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, spec) in self.specs.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{spec}")?;
        }
        Ok(())
    }
}

impl ParamSpace {
    pub fn new(specs: Vec<ParamSpec>) -> Result<ParamSpace> {
        for (i, spec) in specs.iter().enumerate() {
            if specs[..i].iter().any(|s| s.name == spec.name) {
                return Err(Error::Space(format!("duplicate parameter {:?}", spec.name)));
            }
        }
        Ok(ParamSpace { specs })
    }

    pub fn dimension(&self) -> usize {
        self.specs.len()
    }

    /// Decode a point into one value per parameter.
    pub fn decode(&self, point: &EncodedPoint) -> Result<Vec<ParamValue>> {
        if point.0.len() != self.specs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.specs.len(),
                found: point.0.len(),
            });
        }
        Ok(self
            .specs
            .iter()
            .zip(&point.0)
            .map(|(spec, &x)| spec.decode(x))
            .collect())
    }

    /// I.i.d. uniform points on the unit cube.
    pub fn sample_uniform(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<EncodedPoint> {
        (0..count)
            .map(|_| EncodedPoint((0..self.dimension()).map(|_| rng.gen::<f64>()).collect()))
            .collect()
    }

    /// Cartesian grid of evenly spaced coordinates, `resolutions[d]` values
    /// along dimension `d`, in lexicographic order (earlier dimensions vary
    /// slowest). A resolution of 1 contributes the single coordinate 0.
    pub fn grid(&self, resolutions: &[usize], cap: usize) -> Result<Vec<EncodedPoint>> {
        if resolutions.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: resolutions.len(),
            });
        }
        if resolutions.iter().any(|&r| r == 0) {
            return Err(Error::Space("grid resolutions must be at least 1".into()));
        }
        let mut size = 1usize;
        for &r in resolutions {
            size = size
                .checked_mul(r)
                .ok_or(Error::GridTooLarge { size: usize::MAX, cap })?;
            if size > cap {
                return Err(Error::GridTooLarge { size, cap });
            }
        }
        let axes: Vec<Vec<f64>> = resolutions
            .iter()
            .map(|&r| {
                if r == 1 {
                    vec![0.0]
                } else {
                    (0..r).map(|i| i as f64 / (r - 1) as f64).collect()
                }
            })
            .collect();
        let mut points = Vec::with_capacity(size);
        let mut index = vec![0usize; resolutions.len()];
        loop {
            points.push(EncodedPoint(
                index.iter().zip(&axes).map(|(&i, axis)| axis[i]).collect(),
            ));
            // odometer increment, last dimension fastest
            let mut d = resolutions.len();
            loop {
                if d == 0 {
                    return Ok(points);
                }
                d -= 1;
                index[d] += 1;
                if index[d] < resolutions[d] {
                    break;
                }
                index[d] = 0;
            }
        }
    }
}

/// The default tunable space: `mtry` over [1, p], `sample_fraction` over
/// [0.2, 0.9], and `min_node_size` through the power transform with base
/// 0.2*n clamped into [1, n].
pub fn default_space(task: TaskKind, n: usize, p: usize) -> Result<ParamSpace> {
    let _ = task; // the same three parameters are tuned for both tasks
    if n < 5 {
        return Err(Error::Space(format!(
            "node-size transform needs at least 5 observations, got {n}"
        )));
    }
    if p < 1 {
        return Err(Error::Space("need at least one predictor".into()));
    }
    ParamSpace::new(vec![
        mtry_spec(p)?,
        sample_fraction_spec()?,
        min_node_size_spec(n)?,
    ])
}

/// `mtry` ranges over [1, p]; the lower end is clamped to 1 because a split
/// cannot draw zero candidate features. For p = 1 the range degenerates to
/// the constant 1.
pub fn mtry_spec(p: usize) -> Result<ParamSpec> {
    ParamSpec::new(
        "mtry",
        ParamKind::IntegerRange {
            lo: 1,
            hi: p as i64,
        },
    )
}

pub fn sample_fraction_spec() -> Result<ParamSpec> {
    ParamSpec::new(
        "sample_fraction",
        ParamKind::ContinuousRange { lo: 0.2, hi: 0.9 },
    )
}

pub fn min_node_size_spec(n: usize) -> Result<ParamSpec> {
    ParamSpec::new(
        "min_node_size",
        ParamKind::PowerInteger {
            base: 0.2 * n as f64,
            lo: 1,
            hi: n as i64,
        },
    )
}

pub fn replace_spec() -> Result<ParamSpec> {
    ParamSpec::new("replace", ParamKind::Boolean)
}
