//! SDN service: initial path assignment with class-dependent backups, and
//! hysteresis-guarded rerouting.
//!
//! Decisions are pure functions of the assignment, a monitoring snapshot and
//! the policy. Candidate lists keep topology declaration order, which is the
//! tie-break for equal estimates.

use crate::error::{Error, Result};
use crate::model::TimeMs;
use crate::monitoring::Snapshot;
use crate::network::PathId;
use crate::scalar::Scalar;
use crate::session::UserClass;

pub const DEFAULT_HYSTERESIS_MS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReroutePolicy<S> {
    /// Minimum improvement a candidate must offer over the active path.
    pub hysteresis_ms: S,
    pub backup_count_premium: usize,
    pub backup_count_regular: usize,
}

impl<S: Scalar> ReroutePolicy<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.hysteresis_ms > S::zero()) {
            return Err(Error::Configuration(format!(
                "hysteresis_ms must be positive, got {}",
                self.hysteresis_ms
            )));
        }
        if self.backup_count_premium < self.backup_count_regular {
            return Err(Error::Configuration(format!(
                "premium backup count ({}) must be at least the regular one ({})",
                self.backup_count_premium, self.backup_count_regular
            )));
        }
        Ok(())
    }

    pub fn backup_count(&self, class: UserClass) -> usize {
        match class {
            UserClass::Premium => self.backup_count_premium,
            UserClass::Regular => self.backup_count_regular,
        }
    }
}

impl<S: Scalar> Default for ReroutePolicy<S> {
    fn default() -> Self {
        Self {
            hysteresis_ms: S::lit(DEFAULT_HYSTERESIS_MS),
            backup_count_premium: 2,
            backup_count_regular: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    pub session_id: String,
    pub active_path: PathId,
    pub backups: Vec<PathId>,
    pub installed_at_ms: TimeMs,
    /// Every path joining the session's endpoints, in declaration order.
    pub candidates: Vec<PathId>,
    pub backup_capacity: usize,
}

/// Outcome of a reroute, with the estimates that justified it.
#[derive(Debug, Clone, PartialEq)]
pub struct RerouteRecord<S> {
    pub at_ms: TimeMs,
    pub session_id: String,
    pub from: PathId,
    pub to: PathId,
    pub from_estimate_ms: Option<S>,
    pub to_estimate_ms: Option<S>,
}

/// Candidates with an estimate, sorted by (estimate, declaration order).
fn ranked<'a, S: Scalar>(candidates: &'a [PathId], snapshot: &Snapshot<S>) -> Vec<(&'a PathId, S)> {
    let mut out: Vec<(usize, &PathId, S)> = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, p)| snapshot.get(p).map(|d| (i, p, *d)))
        .collect();
    out.sort_by(|a, b| {
        a.2.partial_cmp(&b.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    out.into_iter().map(|(_, p, d)| (p, d)).collect()
}

/// Puts the lowest-delay measured candidate in service and keeps the next
/// best ones, up to the class's backup count, at the ready.
pub fn assign_initial_path<S: Scalar>(
    session_id: &str,
    class: UserClass,
    candidates: &[PathId],
    snapshot: &Snapshot<S>,
    policy: &ReroutePolicy<S>,
    at_ms: TimeMs,
) -> Result<FlowAssignment> {
    let order = ranked(candidates, snapshot);
    let (active, _) = order
        .first()
        .ok_or_else(|| Error::NoPath(session_id.to_owned()))?;
    let capacity = policy.backup_count(class);
    Ok(FlowAssignment {
        session_id: session_id.to_owned(),
        active_path: (*active).clone(),
        backups: order
            .iter()
            .skip(1)
            .take(capacity)
            .map(|(p, _)| (*p).clone())
            .collect(),
        installed_at_ms: at_ms,
        candidates: candidates.to_vec(),
        backup_capacity: capacity,
    })
}

/// Returns the path to move to, or `None` to stay.
///
/// A candidate qualifies if it beats the active path by at least the
/// hysteresis threshold; the best qualifying one wins.
pub fn reroute_decision<S: Scalar>(
    assignment: &FlowAssignment,
    snapshot: &Snapshot<S>,
    policy: &ReroutePolicy<S>,
) -> Result<Option<PathId>> {
    let active = *snapshot
        .get(&assignment.active_path)
        .ok_or_else(|| Error::StaleSnapshot(assignment.active_path.to_string()))?;
    Ok(ranked(&assignment.candidates, snapshot)
        .into_iter()
        .find(|(p, d)| **p != assignment.active_path && active - *d >= policy.hysteresis_ms)
        .map(|(p, _)| p.clone()))
}

/// Moves the flow to `new_path`. The previous active path becomes a backup;
/// backups are re-sorted by estimate and the worst are dropped to capacity.
pub fn apply_reroute<S: Scalar>(
    assignment: &FlowAssignment,
    new_path: &PathId,
    snapshot: &Snapshot<S>,
    at_ms: TimeMs,
) -> Result<(FlowAssignment, RerouteRecord<S>)> {
    if *new_path == assignment.active_path {
        return Err(Error::InvalidPath(format!(
            "{new_path} is already the active path"
        )));
    }
    if !assignment.candidates.contains(new_path) {
        return Err(Error::InvalidPath(format!(
            "{new_path} is not a candidate for session {}",
            assignment.session_id
        )));
    }
    let mut pool: Vec<PathId> = assignment
        .backups
        .iter()
        .filter(|p| *p != new_path)
        .cloned()
        .collect();
    pool.push(assignment.active_path.clone());
    // unmeasured paths rank after measured ones
    let order = |p: &PathId| {
        let decl = assignment
            .candidates
            .iter()
            .position(|c| c == p)
            .unwrap_or(usize::MAX);
        (snapshot.get(p).copied(), decl)
    };
    pool.sort_by(|a, b| {
        let (da, ia) = order(a);
        let (db, ib) = order(b);
        match (da, db) {
            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then(ia.cmp(&ib))
    });
    pool.truncate(assignment.backup_capacity);

    let record = RerouteRecord {
        at_ms,
        session_id: assignment.session_id.clone(),
        from: assignment.active_path.clone(),
        to: new_path.clone(),
        from_estimate_ms: snapshot.get(&assignment.active_path).copied(),
        to_estimate_ms: snapshot.get(new_path).copied(),
    };
    let next = FlowAssignment {
        active_path: new_path.clone(),
        backups: pool,
        installed_at_ms: at_ms,
        ..assignment.clone()
    };
    Ok((next, record))
}
