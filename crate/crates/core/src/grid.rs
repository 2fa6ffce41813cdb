//! Uniform one-dimensional sample grids written as `lo:hi:step`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Grid {
    lo: f64,
    hi: f64,
    step: f64,
    points: Vec<f64>,
}

impl Grid {
    /// Points `lo + i * step` up to and including `hi` (within rounding).
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::InvalidGrid("bounds and step must be finite".into()));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be > 0 (got {step})")));
        }
        if hi < lo {
            return Err(Error::InvalidGrid(format!("upper bound {hi} is below lower bound {lo}")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        if n > 10_000_000 {
            return Err(Error::InvalidGrid(format!("{} points is too many", n + 1)));
        }
        let points = (0..=n).map(|i| lo + i as f64 * step).collect();
        Ok(Self { lo, hi, step, points })
    }

    /// A one-point grid.
    pub fn single(x: f64) -> Self {
        Self { lo: x, hi: x, step: 1.0, points: vec![x] }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Index of the grid point closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.lo) / self.step).round();
        i.clamp(0.0, (self.len() - 1) as f64) as usize
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(Error::InvalidGrid(format!("expected lo:hi:step, got {s:?}")));
        };
        let num = |x: &str| x.parse::<f64>().map_err(|_| Error::InvalidGrid(format!("{x:?} is not a number")));
        Grid::new(num(lo)?, num(hi)?, num(step)?)
    }
}

impl TryFrom<String> for Grid {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> String {
        g.to_string()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_count() {
        let g: Grid = "-4:2:0.02".parse().unwrap();
        assert_eq!(g.len(), 301);
        assert_eq!(g.points()[0], -4.0);
        assert!((g.points()[300] - 2.0).abs() < 1e-12);
        assert_eq!(g.to_string(), "-4:2:0.02");
        let g: Grid = "0.05:1.25:0.02".parse().unwrap();
        assert_eq!(g.len(), 61);
        assert_eq!("1:1:0.5".parse::<Grid>().unwrap().len(), 1);
    }

    #[test]
    fn rejects_bad_specs() {
        for s in ["1:2", "a:1:1", "0:1:0", "0:1:-1", "2:1:0.1", "0:1:nan"] {
            assert!(s.parse::<Grid>().is_err(), "{s}");
        }
    }

    #[test]
    fn nearest_point() {
        let g = Grid::new(-1.0, 1.0, 0.1).unwrap();
        assert_eq!(g.nearest(0.0), 10);
        assert_eq!(g.nearest(5.0), 20);
        assert_eq!(g.nearest(-0.96), 0);
    }

    proptest! {
        #[test]
        fn strictly_increasing(lo in -10.0f64..10.0, span in 0.0f64..5.0, step in 0.01f64..1.0) {
            let g = Grid::new(lo, lo + span, step).unwrap();
            prop_assert!(g.points().windows(2).all(|w| w[1] > w[0]));
            prop_assert!(*g.points().last().unwrap() <= lo + span + 1e-6);
            prop_assert!(lo + span - g.points().last().unwrap() < step);
        }
    }
}
