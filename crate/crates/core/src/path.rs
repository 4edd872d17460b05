//! Piecewise-constant control paths tangent to the frame.
//!
//! A path is a start point plus a list of (control, duration) segments.  A
//! horizontal path steers only X₁, X₂; a frame path also steers X₃ and
//! models curves of the Riemannian contraction metric.  Each segment is
//! integrated exactly as a group exponential, so endpoints carry no ODE
//! error: the only approximation anywhere is the restriction to piecewise
//! constant controls.

use crate::flows::flow_frame;
use crate::group::GroupPoint;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlKind {
    /// Controls in span{X₁, X₂}.
    Horizontal,
    /// Controls in the full frame.
    Frame,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Segment {
    pub u: [f64; 3],
    pub duration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlPath {
    pub start: GroupPoint,
    pub kind: ControlKind,
    pub segments: Vec<Segment>,
}

impl ControlPath {
    /// Horizontal path; the third control component is pinned to zero.
    pub fn horizontal(start: GroupPoint, segments: &[([f64; 2], f64)]) -> Self {
        let segments = segments
            .iter()
            .map(|&(u, duration)| {
                assert!(duration > 0.0, "segment durations must be positive");
                Segment { u: [u[0], u[1], 0.0], duration }
            })
            .collect();
        ControlPath { start, kind: ControlKind::Horizontal, segments }
    }

    pub fn frame(start: GroupPoint, segments: &[([f64; 3], f64)]) -> Self {
        let segments = segments
            .iter()
            .map(|&(u, duration)| {
                assert!(duration > 0.0, "segment durations must be positive");
                Segment { u, duration }
            })
            .collect();
        ControlPath { start, kind: ControlKind::Frame, segments }
    }

    /// Length with respect to the frame metric: Σ duration · |u|.
    pub fn length(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                s.duration * (s.u[0] * s.u[0] + s.u[1] * s.u[1] + s.u[2] * s.u[2]).sqrt()
            })
            .sum()
    }

    /// Endpoint by exact per-segment exponential steps.
    pub fn endpoint(&self) -> GroupPoint {
        let mut p = self.start;
        for s in &self.segments {
            p = flow_frame(&p, s.u, s.duration);
        }
        p
    }

    /// All intermediate points, start included.  Used by diagnostics.
    pub fn trace(&self) -> Vec<GroupPoint> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut p = self.start;
        out.push(p);
        for s in &self.segments {
            p = flow_frame(&p, s.u, s.duration);
            out.push(p);
        }
        out
    }
}

/// Endpoint and length of a path.  The endpoint is an exact composition of
/// exponential steps; an empty path returns (start, 0).
pub fn integrate_path(path: &ControlPath) -> (GroupPoint, f64) {
    (path.endpoint(), path.length())
}

// TESTS ###############################################################
