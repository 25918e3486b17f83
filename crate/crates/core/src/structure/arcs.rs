use serde::{Deserialize, Serialize};

use crate::dynamics::CONTROL_DIM;
use crate::error::{Error, Result};

/// Breakpoints closer than this (as a fraction of the horizon) are merged.
pub const BREAKPOINT_MERGE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArcKind {
    BangMin,
    BangMax,
    Singular,
}

impl std::fmt::Display for ArcKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArcKind::BangMin => "bang-min",
            ArcKind::BangMax => "bang-max",
            ArcKind::Singular => "singular",
        })
    }
}

/// One arc of one control. `control` is zero-based; `start` and `end` are
/// fractions of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub control: usize,
    pub kind: ArcKind,
    pub start: f64,
    pub end: f64,
}

/// Per-control arc sequences and the merged breakpoint list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlStructure {
    /// Horizon the fractions refer to.
    pub t_final: f64,
    /// Arcs of each control; empty for controls that are not optimized.
    pub arcs: Vec<Vec<ArcSpec>>,
    /// Interior breakpoints as strictly increasing fractions in `(0, 1)`.
    pub breakpoints: Vec<f64>,
}

impl ControlStructure {
    /// Builds a structure from per-control `(kind, end_fraction)` sequences.
    /// Close breakpoints are merged and arc ends snapped onto the merged list.
    pub fn from_sequences(t_final: f64, sequences: &[Vec<(ArcKind, f64)>]) -> Result<Self> {
        assert_eq!(sequences.len(), CONTROL_DIM);
        let mut raw: Vec<f64> = sequences.iter().flat_map(|s| s.iter().map(|&(_, e)| e)).filter(|&e| e > 0.0 && e < 1.0).collect();
        raw.sort_by(f64::total_cmp);
        let mut breakpoints: Vec<f64> = Vec::new();
        let mut cluster: Vec<f64> = Vec::new();
        for b in raw {
            if cluster.last().is_some_and(|&l| b - l > BREAKPOINT_MERGE_FRACTION) {
                breakpoints.push(cluster.iter().sum::<f64>() / cluster.len() as f64);
                cluster.clear();
            }
            cluster.push(b);
        }
        if !cluster.is_empty() {
            breakpoints.push(cluster.iter().sum::<f64>() / cluster.len() as f64);
        }
        breakpoints.retain(|&b| b > BREAKPOINT_MERGE_FRACTION && b < 1.0 - BREAKPOINT_MERGE_FRACTION);
        let snap = |e: f64| {
            if e >= 1.0 - BREAKPOINT_MERGE_FRACTION {
                return 1.0;
            }
            breakpoints
                .iter()
                .copied()
                .min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs()))
                .filter(|b| (b - e).abs() <= 2.0 * BREAKPOINT_MERGE_FRACTION)
                .unwrap_or(if e <= BREAKPOINT_MERGE_FRACTION { 0.0 } else { e })
        };
        let mut arcs = Vec::with_capacity(CONTROL_DIM);
        for (j, seq) in sequences.iter().enumerate() {
            let mut list: Vec<ArcSpec> = Vec::new();
            let mut start = 0.0;
            for &(kind, end) in seq {
                let end = snap(end);
                if end <= start {
                    continue;
                }
                match list.last_mut() {
                    Some(prev) if prev.kind == kind => prev.end = end,
                    _ => list.push(ArcSpec { control: j, kind, start, end }),
                }
                start = end;
            }
            if let Some(last) = list.last_mut() {
                last.end = 1.0;
            }
            arcs.push(list);
        }
        let s = Self { t_final, arcs, breakpoints }.prune_breakpoints();
        s.validate()?;
        Ok(s)
    }

    /// Drops breakpoints that no arc boundary uses.
    fn prune_breakpoints(&self) -> Self {
        let used = |b: f64| self.arcs.iter().flatten().any(|a| a.end == b);
        Self {
            t_final: self.t_final,
            arcs: self.arcs.clone(),
            breakpoints: self.breakpoints.iter().copied().filter(|&b| used(b)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Detection("breakpoints are not strictly increasing".into()));
        }
        if self.breakpoints.iter().any(|&b| b <= 0.0 || b >= 1.0) {
            return Err(Error::Detection("breakpoint outside (0, 1)".into()));
        }
        for (j, list) in self.arcs.iter().enumerate() {
            let mut t = 0.0;
            for a in list {
                if a.start != t || a.end <= a.start || a.control != j {
                    return Err(Error::Detection(format!("arcs of control {} do not tile the horizon", j + 1)));
                }
                if a.end < 1.0 && !self.breakpoints.contains(&a.end) {
                    return Err(Error::Detection(format!("arc end {} of control {} is not a breakpoint", a.end, j + 1)));
                }
                t = a.end;
            }
            if !list.is_empty() && t != 1.0 {
                return Err(Error::Detection(format!("arcs of control {} stop before the horizon", j + 1)));
            }
        }
        Ok(())
    }

    pub fn domain_count(&self) -> usize {
        self.breakpoints.len() + 1
    }

    /// Absolute switch times.
    pub fn switch_times(&self) -> Vec<f64> {
        self.breakpoints.iter().map(|b| b * self.t_final).collect()
    }

    /// Kind of control `j` in domain `d`, `None` if the control is not
    /// optimized.
    pub fn domain_kind(&self, j: usize, d: usize) -> Option<ArcKind> {
        let lo = if d == 0 { 0.0 } else { self.breakpoints[d - 1] };
        let hi = self.breakpoints.get(d).copied().unwrap_or(1.0);
        let mid = 0.5 * (lo + hi);
        self.arcs[j].iter().find(|a| a.start <= mid && mid < a.end).map(|a| a.kind)
    }

    /// Kind of control `j` at absolute time `t`.
    pub fn kind_at(&self, j: usize, t: f64) -> Option<ArcKind> {
        let s = t / self.t_final;
        self.arcs.get(j)?.iter().find(|a| a.start <= s && (s < a.end || a.end == 1.0)).map(|a| a.kind)
    }

    pub fn has_singular(&self) -> bool {
        self.arcs.iter().flatten().any(|a| a.kind == ArcKind::Singular)
    }

    /// Time intervals `[start, end]` of the singular arcs of control `j`.
    pub fn singular_intervals(&self, j: usize) -> Vec<(f64, f64)> {
        self.arcs[j].iter().filter(|a| a.kind == ArcKind::Singular).map(|a| (a.start * self.t_final, a.end * self.t_final)).collect()
    }

    /// Same arc-kind sequences and breakpoint count.
    pub fn same_shape(&self, other: &Self) -> bool {
        let kinds = |s: &Self| s.arcs.iter().map(|l| l.iter().map(|a| a.kind).collect::<Vec<_>>()).collect::<Vec<_>>();
        self.breakpoints.len() == other.breakpoints.len() && kinds(self) == kinds(other)
    }

    /// Rescales to new breakpoint times and horizon (after switch-time
    /// optimization). `times` must have one entry per breakpoint.
    pub fn with_times(&self, times: &[f64], t_final: f64) -> Self {
        assert_eq!(times.len(), self.breakpoints.len());
        let map = |f: f64| {
            if f <= 0.0 || f >= 1.0 {
                f
            } else {
                let k = self.breakpoints.iter().position(|&b| b == f).expect("arc ends are breakpoints");
                times[k] / t_final
            }
        };
        let arcs = self.arcs.iter().map(|l| l.iter().map(|a| ArcSpec { start: map(a.start), end: map(a.end), ..*a }).collect()).collect();
        Self { t_final, arcs, breakpoints: times.iter().map(|t| t / t_final).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_close_breakpoints() {
        let s = ControlStructure::from_sequences(
            2.0,
            &[
                vec![(ArcKind::BangMax, 0.3), (ArcKind::BangMin, 1.0)],
                vec![(ArcKind::BangMin, 0.3004), (ArcKind::BangMax, 0.7), (ArcKind::BangMin, 1.0)],
                vec![],
            ],
        )
        .unwrap();
        assert_eq!(s.breakpoints.len(), 2);
        assert_eq!(s.domain_count(), 3);
        assert_eq!(s.domain_kind(0, 0), Some(ArcKind::BangMax));
        assert_eq!(s.domain_kind(1, 1), Some(ArcKind::BangMax));
        assert_eq!(s.domain_kind(2, 1), None);
        assert_eq!(s.kind_at(0, 1.9), Some(ArcKind::BangMin));
    }

    #[test]
    fn constant_control_has_no_breakpoints() {
        let s = ControlStructure::from_sequences(1.0, &[vec![(ArcKind::BangMax, 1.0)], vec![], vec![]]).unwrap();
        assert!(s.breakpoints.is_empty());
        assert_eq!(s.domain_count(), 1);
        assert!(s.same_shape(&s.with_times(&[], 1.5)));
    }
}
