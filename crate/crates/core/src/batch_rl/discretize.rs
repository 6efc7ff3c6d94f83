//! Uniform grids over a bounded observation box.

use serde::{Deserialize, Serialize};

use crate::env::ObservationSpace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretizer {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub bins: Vec<usize>,
}

impl Discretizer {
    pub fn uniform(space: &ObservationSpace, bins_per_dim: usize) -> Result<Self> {
        Self::new(space.low.clone(), space.high.clone(), vec![bins_per_dim; space.dim()])
    }

    /// One cell per integer point of a box whose bounds sit at half-integers,
    /// e.g. a gridworld. Every lattice point gets its own cell.
    pub fn lattice(space: &ObservationSpace) -> Result<Self> {
        let bins = space
            .low
            .iter()
            .zip(&space.high)
            .map(|(lo, hi)| {
                let span = hi - lo;
                if (span - span.round()).abs() > 1e-9 || span < 1.0 {
                    Err(Error::Data(format!(
                        "observation range [{lo}, {hi}] is not an integer lattice"
                    )))
                } else {
                    Ok(span.round() as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(space.low.clone(), space.high.clone(), bins)
    }

    pub fn new(low: Vec<f64>, high: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        if low.len() != high.len() || low.len() != bins.len() || low.is_empty() {
            return Err(Error::Config("discretizer bounds and bins disagree in length".into()));
        }
        if bins.contains(&0) {
            return Err(Error::Config("discretizer needs at least one bin per dimension".into()));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(Error::Config("discretizer bounds must be finite with low < high".into()));
        }
        Ok(Self { low, high, bins })
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    pub fn n_cells(&self) -> usize {
        self.bins.iter().product()
    }

    fn bin(&self, d: usize, v: f64) -> usize {
        let n = self.bins[d];
        let u = (v - self.low[d]) / (self.high[d] - self.low[d]);
        if !(u > 0.0) {
            return 0;
        }
        ((u * n as f64).floor() as usize).min(n - 1)
    }

    /// Row-major cell index; out-of-range values land in the edge bins.
    pub fn cell(&self, obs: &[f64]) -> Result<usize> {
        if obs.len() != self.dim() {
            return Err(Error::Data(format!(
                "observation has {} dims, discretizer expects {}",
                obs.len(),
                self.dim()
            )));
        }
        let mut index = 0;
        for (d, v) in obs.iter().enumerate() {
            index = index * self.bins[d] + self.bin(d, *v);
        }
        Ok(index)
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        let mut rest = cell;
        let mut out = vec![0.0; self.dim()];
        for d in (0..self.dim()).rev() {
            let b = rest % self.bins[d];
            rest /= self.bins[d];
            let width = (self.high[d] - self.low[d]) / self.bins[d] as f64;
            out[d] = self.low[d] + width * (b as f64 + 0.5);
        }
        out
    }
}
