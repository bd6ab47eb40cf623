//! Elevation-mask visibility, contact windows and a lazily extended contact
//! plan for the event engine.

use rayon::prelude::*;

use super::{Constellation, GroundNode, SatelliteId};
use crate::error::{invalid, Result};
use crate::geometry::Vec3;

/// Bisection tolerance for window boundaries, s.
const REFINE_TOL_S: f64 = 1e-3;

fn sin_elevation(sat: Vec3, node: &GroundNode, t: f64) -> f64 {
    let d = sat - node.position_at(t);
    let n = d.norm();
    if n == 0.0 {
        return 1.0;
    }
    d.dot(node.zenith_at(t)) / n
}

/// Elevation of a satellite position above the node's local horizon, degrees.
pub fn elevation_deg(sat_position: Vec3, node: &GroundNode, t: f64) -> f64 {
    sin_elevation(sat_position, node, t)
        .clamp(-1.0, 1.0)
        .asin()
        .to_degrees()
}

/// True iff the satellite's elevation is at least the node's mask angle.
pub fn is_visible(c: &Constellation, sat: SatelliteId, node: &GroundNode, t: f64) -> bool {
    c.propagate(sat, t).is_some_and(|s| {
        sin_elevation(s.position, node, t) >= node.min_elevation_deg.to_radians().sin()
    })
}

/// Euclidean distance between two points (symmetric by construction).
pub fn slant_range(a: Vec3, b: Vec3) -> f64 {
    a.distance(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityWindow {
    pub sat: SatelliteId,
    /// Index of the node in the scenario's node list.
    pub node: usize,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOptions {
    pub dt_s: f64,
    /// Bisect boundaries and search between samples for passes shorter than
    /// the grid step. Without it, windows are snapped to visible samples.
    pub refine: bool,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            dt_s: 10.0,
            refine: true,
        }
    }
}

/// Margin function: positive when visible.
struct Margin<'a> {
    c: &'a Constellation,
    sat: usize,
    node: &'a GroundNode,
    sin_min: f64,
}

impl Margin<'_> {
    fn at(&self, t: f64) -> f64 {
        sin_elevation(self.c.position_at(self.sat, t), self.node, t) - self.sin_min
    }

    /// Boundary between `a` (margin sign `a_vis`) and `b` (opposite sign).
    fn bisect(&self, mut a: f64, mut b: f64, a_vis: bool) -> f64 {
        while b - a > REFINE_TOL_S {
            let m = 0.5 * (a + b);
            if (self.at(m) >= 0.0) == a_vis {
                a = m;
            } else {
                b = m;
            }
        }
        // Report the visible side so that the returned window is closed.
        if a_vis {
            a
        } else {
            b
        }
    }

    fn golden_max(&self, mut a: f64, mut b: f64) -> (f64, f64) {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = self.at(x1);
        let mut f2 = self.at(x2);
        while b - a > REFINE_TOL_S {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = self.at(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = self.at(x1);
            }
        }
        let t = 0.5 * (a + b);
        (t, self.at(t))
    }
}

fn pair_windows(
    c: &Constellation,
    sat: usize,
    node: &GroundNode,
    t0: f64,
    t1: f64,
    opts: WindowOptions,
) -> Vec<(f64, f64)> {
    let m = Margin {
        c,
        sat,
        node,
        sin_min: node.min_elevation_deg.to_radians().sin(),
    };
    let steps = ((t1 - t0) / opts.dt_s).ceil().max(1.0) as usize;
    let times: Vec<f64> = (0..=steps)
        .map(|i| {
            if i == steps {
                t1
            } else {
                t0 + i as f64 * opts.dt_s
            }
        })
        .collect();
    let f: Vec<f64> = times.iter().map(|&t| m.at(t)).collect();

    let mut out = Vec::new();
    let mut open: Option<f64> = (f[0] >= 0.0).then_some(t0);
    for i in 1..times.len() {
        let (prev, cur) = (f[i - 1] >= 0.0, f[i] >= 0.0);
        match (prev, cur) {
            (false, true) => {
                open = Some(if opts.refine {
                    m.bisect(times[i - 1], times[i], false)
                } else {
                    times[i]
                });
            }
            (true, false) => {
                let end = if opts.refine {
                    m.bisect(times[i - 1], times[i], true)
                } else {
                    times[i - 1]
                };
                if let Some(s) = open.take() {
                    if end > s {
                        out.push((s, end));
                    }
                }
            }
            // A pass that fits between grid points shows up as a sampled
            // local maximum below the mask.
            (false, false)
                if opts.refine
                    && i + 1 < times.len()
                    && f[i] >= f[i - 1]
                    && f[i] >= f[i + 1]
                    && f[i + 1] < 0.0 =>
            {
                let (tp, fp) = m.golden_max(times[i - 1], times[i + 1]);
                if fp >= 0.0 {
                    let s = m.bisect(times[i - 1], tp, false);
                    let e = m.bisect(tp, times[i + 1], true);
                    if e > s {
                        out.push((s, e));
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        if t1 > s {
            out.push((s, t1));
        }
    }
    out
}

/// Maximal contact windows of every satellite with one node over `[t0, t1]`,
/// sorted by start time then satellite.
pub fn visibility_windows(
    c: &Constellation,
    node: &GroundNode,
    node_index: usize,
    t0: f64,
    t1: f64,
    opts: WindowOptions,
) -> Vec<VisibilityWindow> {
    assert!(t0 < t1 && opts.dt_s > 0.0, "need t0 < t1 and dt > 0");
    let mut out: Vec<VisibilityWindow> = (0..c.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let sat = c.ids()[i];
            pair_windows(c, i, node, t0, t1, opts)
                .into_iter()
                .map(move |(start_s, end_s)| VisibilityWindow {
                    sat,
                    node: node_index,
                    start_s,
                    end_s,
                })
        })
        .collect();
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.sat.cmp(&b.sat)));
    out
}

/// Windows for every node, concatenated in node order.
pub fn visibility_windows_all(
    c: &Constellation,
    nodes: &[GroundNode],
    t0: f64,
    t1: f64,
    opts: WindowOptions,
) -> Vec<VisibilityWindow> {
    nodes
        .iter()
        .enumerate()
        .flat_map(|(i, n)| visibility_windows(c, n, i, t0, t1, opts))
        .collect()
}

/// Contact windows for all (satellite, node) pairs, computed in chunks on
/// demand up to a fixed horizon.
#[derive(Debug, Clone)]
pub struct ContactPlan {
    constellation: Constellation,
    nodes: Vec<GroundNode>,
    opts: WindowOptions,
    chunk_s: f64,
    horizon_s: f64,
    computed_until: f64,
    /// `windows[sat][node]`, sorted and disjoint.
    windows: Vec<Vec<Vec<(f64, f64)>>>,
    always_visible: bool,
}

impl ContactPlan {
    pub fn new(
        constellation: Constellation,
        nodes: Vec<GroundNode>,
        opts: WindowOptions,
        horizon_s: f64,
    ) -> Self {
        let windows = vec![vec![Vec::new(); nodes.len()]; constellation.len()];
        Self {
            constellation,
            nodes,
            opts,
            chunk_s: 21_600.0,
            horizon_s,
            computed_until: 0.0,
            windows,
            always_visible: false,
        }
    }

    /// Every satellite sees every node at all times.
    pub fn all_visible(
        constellation: Constellation,
        nodes: Vec<GroundNode>,
        horizon_s: f64,
    ) -> Self {
        let mut p = Self::new(constellation, nodes, WindowOptions::default(), horizon_s);
        p.always_visible = true;
        p
    }

    /// A plan with given windows, `windows[sat][node]` sorted and disjoint.
    pub fn with_fixed_windows(
        constellation: Constellation,
        nodes: Vec<GroundNode>,
        windows: Vec<Vec<Vec<(f64, f64)>>>,
        horizon_s: f64,
    ) -> Result<Self> {
        if windows.len() != constellation.len() || windows.iter().any(|w| w.len() != nodes.len()) {
            return Err(invalid(
                "windows",
                "need one list per (satellite, node) pair",
            ));
        }
        let mut p = Self::new(constellation, nodes, WindowOptions::default(), horizon_s);
        p.windows = windows;
        p.computed_until = horizon_s;
        Ok(p)
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_s
    }

    pub fn nodes(&self) -> &[GroundNode] {
        &self.nodes
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    fn ensure(&mut self, t: f64) {
        let target = t.min(self.horizon_s);
        while self.computed_until < target || (self.computed_until == 0.0 && target == 0.0) {
            let t0 = self.computed_until;
            let t1 = (t0 + self.chunk_s).min(self.horizon_s);
            if t1 <= t0 {
                break;
            }
            let c = &self.constellation;
            let nodes = &self.nodes;
            let opts = self.opts;
            let fresh: Vec<Vec<Vec<(f64, f64)>>> = (0..c.len())
                .into_par_iter()
                .map(|s| {
                    nodes
                        .iter()
                        .map(|n| pair_windows(c, s, n, t0, t1, opts))
                        .collect()
                })
                .collect();
            for (s, per_node) in fresh.into_iter().enumerate() {
                for (n, ws) in per_node.into_iter().enumerate() {
                    let list = &mut self.windows[s][n];
                    for (i, w) in ws.into_iter().enumerate() {
                        match list.last_mut() {
                            Some(last) if i == 0 && last.1 == t0 && w.0 == t0 => last.1 = w.1,
                            _ => list.push(w),
                        }
                    }
                }
            }
            self.computed_until = t1;
        }
    }

    /// The window of `(sat, node)` that contains `t` or starts after it.
    /// Window ends are final (extended past chunk boundaries).
    pub fn next_window(&mut self, sat: usize, node: usize, t: f64) -> Option<(f64, f64)> {
        if self.always_visible {
            return Some((0.0, f64::INFINITY));
        }
        if t >= self.horizon_s {
            return None;
        }
        self.ensure(t + self.opts.dt_s);
        loop {
            let found = self.windows[sat][node]
                .iter()
                .find(|w| w.1 > t || (w.0 <= t && t <= w.1))
                .copied();
            match found {
                Some(w) if w.1 < self.computed_until || self.computed_until >= self.horizon_s => {
                    return Some(w)
                }
                Some(_) => self.ensure(self.computed_until + self.chunk_s),
                None if self.computed_until >= self.horizon_s => return None,
                None => self.ensure(self.computed_until + self.chunk_s),
            }
        }
    }

    pub fn is_visible(&mut self, sat: usize, node: usize, t: f64) -> bool {
        self.next_window(sat, node, t)
            .is_some_and(|(s, e)| s <= t && t <= e)
    }

    /// Nodes visible to `sat` at `t`, in node order.
    pub fn visible_nodes(&mut self, sat: usize, t: f64) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&n| self.is_visible(sat, n, t))
            .collect()
    }

    /// Completion time of a transfer needing `duration` seconds of contact,
    /// starting no earlier than `t`, resuming across windows when
    /// interrupted. `None` if the horizon is reached first.
    pub fn transfer(&mut self, sat: usize, node: usize, t: f64, duration: f64) -> Option<f64> {
        let mut now = t;
        let mut remaining = duration;
        loop {
            let (s, e) = self.next_window(sat, node, now)?;
            now = now.max(s);
            if e - now >= remaining {
                return Some(now + remaining);
            }
            remaining -= e - now;
            // Step past the closed end so the next lookup finds a later window.
            now = e + REFINE_TOL_S;
        }
    }

    pub fn slant_range(&self, sat: usize, node: usize, t: f64) -> f64 {
        slant_range(
            self.constellation.position_at(sat, t),
            self.nodes[node].position_at(t),
        )
    }

    /// Earliest time at or after `t` when `sat` sees any node.
    pub fn earliest_contact(&mut self, sat: usize, t: f64) -> Option<(usize, f64)> {
        (0..self.nodes.len())
            .filter_map(|n| self.next_window(sat, n, t).map(|(s, _)| (n, s.max(t))))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }
}
