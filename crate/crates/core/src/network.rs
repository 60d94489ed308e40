//! Emulated topology: users, switches, candidate paths and the per-path delay
//! schedules that stand in for injected link delay.

use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TimeMs;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathId(pub String);

macro_rules! id_impls {
    ($t:ident) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $t {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl $t {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }
    };
}

id_impls!(NodeId);
id_impls!(PathId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    User,
    Switch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
}

/// Undirected link. The base delay is descriptive only; path delay comes from
/// the path's schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Link<S> {
    pub a: NodeId,
    pub b: NodeId,
    pub base_delay_ms: S,
}

/// Piecewise-constant delay steps with optional zero-mean Gaussian jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySchedule<S> {
    pub segments: Vec<(TimeMs, S)>,
    pub jitter_std_ms: Option<S>,
}

impl<S: Scalar> DelaySchedule<S> {
    pub fn constant(delay_ms: S) -> Self {
        Self {
            segments: vec![(0, delay_ms)],
            jitter_std_ms: None,
        }
    }

    pub fn steps(segments: Vec<(TimeMs, S)>) -> Self {
        Self {
            segments,
            jitter_std_ms: None,
        }
    }

    pub fn with_jitter(mut self, std_ms: S) -> Self {
        self.jitter_std_ms = Some(std_ms);
        self
    }

    /// Delay of the segment active at `t` (the last segment starting at or before `t`).
    pub fn base_delay_at(&self, t: TimeMs) -> Result<S> {
        let idx = self.segments.partition_point(|(start, _)| *start <= t);
        if idx == 0 {
            return Err(Error::Configuration(if self.segments.is_empty() {
                "delay schedule is empty".to_owned()
            } else {
                format!("delay schedule does not cover t={t}")
            }));
        }
        Ok(self.segments[idx - 1].1)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.segments.first() {
            None => out.push("schedule is empty".to_owned()),
            Some((start, _)) if *start != 0 => {
                out.push(format!("schedule must start at 0 ms, starts at {start}"))
            }
            _ => {}
        }
        for w in self.segments.windows(2) {
            if w[1].0 <= w[0].0 {
                out.push(format!(
                    "schedule segment starts must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                ));
            }
        }
        for (start, delay) in &self.segments {
            if !(*delay >= S::zero()) || !delay.is_finite() {
                out.push(format!("segment at {start} ms has invalid delay {delay}"));
            }
        }
        if let Some(j) = self.jitter_std_ms {
            if !(j >= S::zero()) || !j.is_finite() {
                out.push(format!("jitter_std_ms must be non-negative, got {j}"));
            }
        }
        out
    }

    /// Segment start times after zero, in order.
    pub fn step_times(&self) -> impl Iterator<Item = TimeMs> + '_ {
        self.segments.iter().map(|(s, _)| *s).filter(|s| *s > 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathDescriptor<S> {
    pub id: PathId,
    pub hops: Vec<NodeId>,
    pub schedule: DelaySchedule<S>,
}

impl<S> PathDescriptor<S> {
    /// True if the path joins `a` and `b`, in either direction.
    pub fn connects(&self, a: &NodeId, b: &NodeId) -> bool {
        match (self.hops.first(), self.hops.last()) {
            (Some(first), Some(last)) => (first == a && last == b) || (first == b && last == a),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology<S> {
    pub nodes: Vec<Node>,
    pub links: Vec<Link<S>>,
    pub paths: Vec<PathDescriptor<S>>,
}

impl<S> Topology<S> {
    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn path(&self, id: &PathId) -> Option<&PathDescriptor<S>> {
        self.paths.iter().find(|p| &p.id == id)
    }

    pub fn path_index(&self, id: &PathId) -> Option<usize> {
        self.paths.iter().position(|p| &p.id == id)
    }

    /// Paths between two users, in declaration order.
    pub fn candidate_paths(&self, a: &NodeId, b: &NodeId) -> Vec<PathId> {
        self.paths
            .iter()
            .filter(|p| p.connects(a, b))
            .map(|p| p.id.clone())
            .collect()
    }

    fn has_link(&self, a: &NodeId, b: &NodeId) -> bool {
        self.links
            .iter()
            .any(|l| (&l.a == a && &l.b == b) || (&l.a == b && &l.b == a))
    }
}

/// One broken topology invariant; `element` names the offending item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyViolation {
    pub element: String,
    pub message: String,
}

impl fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

/// Checks every topology invariant and returns all violations.
///
/// `pairs` are the declared transmitter/receiver pairs; each needs at least one path.
pub fn validate_topology<S: Scalar>(
    topo: &Topology<S>,
    pairs: &[(NodeId, NodeId)],
) -> Vec<TopologyViolation> {
    let mut out = Vec::new();
    let mut push = |element: String, message: String| out.push(TopologyViolation { element, message });

    let mut seen = BTreeSet::new();
    for n in &topo.nodes {
        if !seen.insert(&n.id) {
            push(format!("node {}", n.id), "declared more than once".into());
        }
    }
    for l in &topo.links {
        for end in [&l.a, &l.b] {
            if topo.node(end).is_none() {
                push(
                    format!("{end}"),
                    format!("link {}-{} references unknown node", l.a, l.b),
                );
            }
        }
        if l.a == l.b {
            push(format!("link {}-{}", l.a, l.b), "self loop".into());
        }
        if !(l.base_delay_ms >= S::zero()) {
            push(
                format!("link {}-{}", l.a, l.b),
                "base delay must be non-negative".into(),
            );
        }
    }

    let mut path_ids = BTreeSet::new();
    for p in &topo.paths {
        let name = format!("path {}", p.id);
        if !path_ids.insert(&p.id) {
            push(name.clone(), "declared more than once".into());
        }
        if p.hops.len() < 2 {
            push(name.clone(), "needs at least two hops".into());
        }
        let mut known_hops = true;
        for hop in &p.hops {
            if topo.node(hop).is_none() {
                known_hops = false;
                push(format!("{hop}"), format!("{name} references unknown node"));
            }
        }
        if known_hops && p.hops.len() >= 2 {
            for end in [p.hops.first(), p.hops.last()].into_iter().flatten() {
                if topo.node(end).map(|n| n.kind) != Some(NodeKind::User) {
                    push(name.clone(), format!("endpoint {end} is not a user node"));
                }
            }
            for w in p.hops.windows(2) {
                if !topo.has_link(&w[0], &w[1]) {
                    push(name.clone(), format!("no link between {} and {}", w[0], w[1]));
                }
            }
        }
        for problem in p.schedule.problems() {
            push(name.clone(), problem);
        }
    }

    for (tx, rx) in pairs {
        if topo.candidate_paths(tx, rx).is_empty() {
            push(
                format!("pair {tx}->{rx}"),
                "no path between declared users".into(),
            );
        }
    }
    out
}

/// Network delay seen on `path` at time `t`.
///
/// Jitter, when configured, is a Gaussian draw that depends only on
/// `(rng_seed, path id, t)`, so the result is reproducible and independent of
/// call order. The result is clamped at zero.
pub fn path_delay_at<S: Scalar>(path: &PathDescriptor<S>, t: TimeMs, rng_seed: u64) -> Result<S> {
    let base = path.schedule.base_delay_at(t)?;
    let std = match path.schedule.jitter_std_ms {
        Some(std) if std > S::zero() => std,
        _ => return Ok(base),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_stream(rng_seed, &path.id, t));
    let z: f64 = StandardNormal.sample(&mut rng);
    Ok((base + std * S::lit(z)).max(S::zero()))
}

fn jitter_stream(seed: u64, path: &PathId, t: TimeMs) -> u64 {
    // FNV-1a over the path id, then mixed with seed and time
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in path.as_str().bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.rotate_left(32) ^ t.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}
