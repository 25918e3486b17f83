//! Radau collocation: quadrature machinery, meshes, the multi-domain
//! transcription and costate recovery.

pub mod lgr;
mod solution;
mod transcription;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lgr::{differentiation_matrix, lgr_points_weights, LgrRule};
pub use solution::{estimate_costates, grid_trajectory, DirectTrajectory, DiscreteSolution, NlpSummary};
pub use transcription::{transcribe, CollocationProblem, ControlMode, IntervalLayout, Regularization, RegularizationFunctional, Slot};

/// Bounds on points per interval used by refinement.
pub const MIN_INTERVAL_POINTS: usize = 3;
pub const MAX_INTERVAL_POINTS: usize = lgr::MAX_POINTS;

/// A mesh interval as fractions `[start, end]` of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub intervals: Vec<Interval>,
}

impl Domain {
    pub fn uniform(intervals: usize, points: usize) -> Self {
        let k = intervals as f64;
        Self { intervals: (0..intervals).map(|i| Interval { start: i as f64 / k, end: (i + 1) as f64 / k, points }).collect() }
    }

    pub fn points(&self) -> usize {
        self.intervals.iter().map(|i| i.points).sum()
    }
}

/// Ordered domains; each covers the time between two consecutive
/// breakpoints (or the whole horizon when there is one domain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub domains: Vec<Domain>,
}

impl Mesh {
    /// Single domain with `intervals` equal intervals.
    pub fn uniform(intervals: usize, points: usize) -> Result<Self> {
        let mesh = Self { domains: vec![Domain::uniform(intervals, points)] };
        mesh.validate()?;
        Ok(mesh)
    }

    /// `domains` copies of a uniform domain.
    pub fn multi_domain(domains: usize, intervals: usize, points: usize) -> Result<Self> {
        let mesh = Self { domains: vec![Domain::uniform(intervals, points); domains] };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::InvalidMesh("no domains".into()));
        }
        for (d, dom) in self.domains.iter().enumerate() {
            let Some(first) = dom.intervals.first() else {
                return Err(Error::InvalidMesh(format!("domain {d} has no intervals")));
            };
            if first.start != 0.0 || dom.intervals.last().unwrap().end != 1.0 {
                return Err(Error::InvalidMesh(format!("domain {d} does not cover [0, 1]")));
            }
            for (k, iv) in dom.intervals.iter().enumerate() {
                if !(iv.end > iv.start) {
                    return Err(Error::InvalidMesh(format!("domain {d} interval {k} is empty or reversed")));
                }
                if k > 0 && iv.start != dom.intervals[k - 1].end {
                    return Err(Error::InvalidMesh(format!("domain {d} interval {k} leaves a gap")));
                }
                if !(MIN_INTERVAL_POINTS..=MAX_INTERVAL_POINTS).contains(&iv.points) {
                    return Err(Error::InvalidMesh(format!(
                        "domain {d} interval {k} has {} points, outside {MIN_INTERVAL_POINTS}..={MAX_INTERVAL_POINTS}",
                        iv.points
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn collocation_points(&self) -> usize {
        self.domains.iter().map(Domain::points).sum()
    }

    /// State nodes per component: collocation points plus the final point.
    pub fn state_nodes(&self) -> usize {
        self.collocation_points() + 1
    }

    pub fn interval_count(&self) -> usize {
        self.domains.iter().map(|d| d.intervals.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mesh_counts() {
        let m = Mesh::uniform(20, 3).unwrap();
        assert_eq!(m.collocation_points(), 60);
        assert_eq!(m.state_nodes(), 61);
    }

    #[test]
    fn rejects_bad_meshes() {
        assert!(Mesh::uniform(4, 2).is_err());
        assert!(Mesh::uniform(4, 13).is_err());
        let gap = Mesh {
            domains: vec![Domain {
                intervals: vec![Interval { start: 0.0, end: 0.4, points: 3 }, Interval { start: 0.5, end: 1.0, points: 3 }],
            }],
        };
        assert!(gap.validate().is_err());
    }
}
