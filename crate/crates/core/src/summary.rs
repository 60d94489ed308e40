//! Time-weighted statistics over a trace and the adaptive-vs-baseline delta.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{DelayBudget, TimeMs};
use crate::scalar::Scalar;
use crate::trace::{TraceEvent, TraceKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub measurements: usize,
    pub reroutes: usize,
    pub mode_switches: usize,
    pub best_effort_enters: usize,
    pub best_effort_exits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary<S> {
    /// Mean end-to-end delay, each row weighted by how long it stayed current.
    pub mean_e2e_ms: S,
    pub max_e2e_ms: S,
    /// Share of session time spent strictly above the budget.
    pub over_ept_fraction: S,
    /// Session-time covered, summed over sessions.
    pub covered_ms: TimeMs,
    pub counts: EventCounts,
}

/// A row's end-to-end delay holds until the next row of the same session.
/// Sessions are pooled by covered time.
pub fn summarize<S: Scalar>(trace: &[TraceEvent<S>], budget: &DelayBudget<S>) -> Result<Summary<S>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut by_session: BTreeMap<&str, Vec<&TraceEvent<S>>> = BTreeMap::new();
    for row in trace {
        by_session.entry(&row.session_id).or_default().push(row);
    }

    let mut weighted = S::zero();
    let mut over_ms: TimeMs = 0;
    let mut covered_ms: TimeMs = 0;
    for rows in by_session.values() {
        for w in rows.windows(2) {
            let dt = w[1].at_ms.saturating_sub(w[0].at_ms);
            weighted = weighted + w[0].e2e_ms * S::from_count(dt);
            covered_ms += dt;
            if w[0].e2e_ms > budget.ept_ms {
                over_ms += dt;
            }
        }
    }

    let max_e2e_ms = trace.iter().map(|r| r.e2e_ms).fold(S::neg_infinity(), S::max);
    let (mean_e2e_ms, over_ept_fraction) = if covered_ms == 0 {
        // no elapsed time: plain average of the instantaneous rows
        let n = S::from_count(trace.len() as u64);
        let over = trace.iter().filter(|r| r.e2e_ms > budget.ept_ms).count() as u64;
        (
            trace.iter().fold(S::zero(), |acc, r| acc + r.e2e_ms) / n,
            S::from_count(over) / n,
        )
    } else {
        let covered = S::from_count(covered_ms);
        (weighted / covered, S::from_count(over_ms) / covered)
    };

    let mut counts = EventCounts::default();
    for row in trace {
        match row.kind {
            TraceKind::Measurement => counts.measurements += 1,
            TraceKind::Reroute => counts.reroutes += 1,
            TraceKind::ModeSwitch => counts.mode_switches += 1,
            TraceKind::BestEffortEnter => counts.best_effort_enters += 1,
            TraceKind::BestEffortExit => counts.best_effort_exits += 1,
            TraceKind::EndOfRun => {}
        }
    }

    Ok(Summary {
        mean_e2e_ms,
        max_e2e_ms,
        over_ept_fraction,
        covered_ms,
        counts,
    })
}

/// Relative reduction of mean end-to-end delay, in percent of the baseline.
pub fn improvement_pct<S: Scalar>(adaptive: &Summary<S>, baseline: &Summary<S>) -> S {
    if baseline.mean_e2e_ms == S::zero() {
        return S::zero();
    }
    (baseline.mean_e2e_ms - adaptive.mean_e2e_ms) / baseline.mean_e2e_ms * S::lit(100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(at_ms: TimeMs, e2e: f64, kind: TraceKind) -> TraceEvent<f64> {
        TraceEvent {
            at_ms,
            session_id: "s".into(),
            kind,
            active_path: "P1".into(),
            fs_hz: 48_000,
            fr_samples: 256,
            network_delay_ms: e2e,
            blocking_delay_ms: 0.0,
            e2e_ms: e2e,
            detail: String::new(),
        }
    }

    #[test]
    fn constant_trace() {
        let t = vec![
            row(0, 20.0, TraceKind::Measurement),
            row(500, 20.0, TraceKind::Measurement),
            row(1000, 20.0, TraceKind::EndOfRun),
        ];
        let s = summarize(&t, &DelayBudget::default()).unwrap();
        assert_eq!(s.mean_e2e_ms, 20.0);
        assert_eq!(s.over_ept_fraction, 0.0);
        assert_eq!(s.counts.measurements, 2);
    }

    #[test]
    fn half_and_half() {
        let t = vec![
            row(0, 20.0, TraceKind::Measurement),
            row(500, 30.0, TraceKind::Reroute),
            row(1000, 30.0, TraceKind::EndOfRun),
        ];
        let s = summarize(&t, &DelayBudget::default()).unwrap();
        assert_eq!(s.mean_e2e_ms, 25.0);
        assert_eq!(s.over_ept_fraction, 0.5);
        assert_eq!(s.max_e2e_ms, 30.0);
        assert_eq!(s.counts.reroutes, 1);
    }

    #[test]
    fn uneven_durations_weight_by_time() {
        let t = vec![
            row(0, 10.0, TraceKind::Measurement),
            row(100, 40.0, TraceKind::Measurement),
            row(1000, 40.0, TraceKind::EndOfRun),
        ];
        let s = summarize(&t, &DelayBudget::default()).unwrap();
        assert!((s.mean_e2e_ms - (10.0 * 100.0 + 40.0 * 900.0) / 1000.0).abs() < 1e-12);
        assert!((s.over_ept_fraction - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert_eq!(
            summarize::<f64>(&[], &DelayBudget::default()),
            Err(Error::EmptyTrace)
        );
    }

    #[test]
    fn improvement_formula() {
        let mk = |mean: f64| Summary {
            mean_e2e_ms: mean,
            max_e2e_ms: mean,
            over_ept_fraction: 0.0,
            covered_ms: 1,
            counts: EventCounts::default(),
        };
        assert!((improvement_pct(&mk(19.0), &mk(27.0)) - 800.0 / 27.0).abs() < 1e-12);
        assert_eq!(improvement_pct(&mk(20.0), &mk(20.0)), 0.0);
    }
}
